#pragma once

#include <cmath>
#include <cstddef>

#include "tonus/tensor.hpp"

namespace tonus {

// 2D convolution primitives over (C, H, W) activations.
//
// Padding convention everywhere: pad = dilation * (kernel / 2), so odd
// kernels keep spatial size at stride 1 and halve it (ceil) at stride 2.
// Transposed convolutions use output_padding = stride - 1, which makes them
// exact x{stride} upsamplers for odd kernels.

inline std::size_t conv_out_size(std::size_t in, std::size_t k, std::size_t stride,
                                 std::size_t dilation) {
    const std::size_t pad = dilation * (k / 2);
    return (in + 2 * pad - dilation * (k - 1) - 1) / stride + 1;
}

inline std::size_t conv_transpose_out_size(std::size_t in, std::size_t k, std::size_t stride) {
    const std::size_t pad = k / 2;
    return (in - 1) * stride + k + (stride - 1) - 2 * pad;
}

// x: (C_in, H, W); w: (C_out, C_in/groups, K, K); bias: C_out or nullptr.
Tensor conv2d(const Tensor& x, const Tensor& w, const double* bias, std::size_t stride,
              std::size_t dilation = 1, std::size_t groups = 1);

// Sparse path: identical result, cost proportional to the number of nonzero
// input cells. Used for spiking layers.
Tensor conv2d_sparse(const Tensor& x, const Tensor& w, const double* bias, std::size_t stride,
                     std::size_t dilation = 1, std::size_t groups = 1);

// x: (C_in, H, W); w: (C_in, C_out, K, K); bias: C_out or nullptr.
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const double* bias,
                        std::size_t stride);

// Gradients for the toy trainer. Any of the outputs may be nullptr.
// grad_w/grad_b are accumulated into (callers zero them once per batch).
void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& grad_y, std::size_t stride,
                     std::size_t dilation, std::size_t groups, Tensor* grad_x, Tensor* grad_w,
                     Tensor* grad_b);

// Per-channel batch normalization (inference form).
Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& mean,
                   const Tensor& var, double eps);

constexpr double kBatchnormEps = 1e-5;

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace tonus
