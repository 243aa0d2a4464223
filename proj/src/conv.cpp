#include "tonus/conv.hpp"

namespace tonus {

namespace {

void check_conv_shapes(const Tensor& x, const Tensor& w, std::size_t groups, bool transpose) {
    if (x.rank() != 3 || w.rank() != 4) {
        throw ValidationError("conv: expected rank-3 input and rank-4 weights, got " +
                              x.shape_str() + " / " + w.shape_str());
    }
    const std::size_t c_in = x.dim(0);
    if (transpose) {
        if (w.dim(0) != c_in) {
            throw ValidationError("conv_transpose: weight input channels " +
                                  std::to_string(w.dim(0)) + " != input " + x.shape_str());
        }
    } else {
        if (w.dim(1) * groups != c_in || c_in % groups != 0 || w.dim(0) % groups != 0) {
            throw ValidationError("conv: weight " + w.shape_str() + " incompatible with input " +
                                  x.shape_str() + " at groups=" + std::to_string(groups));
        }
    }
    if (w.dim(2) != w.dim(3) || w.dim(2) % 2 == 0) {
        throw ValidationError("conv: kernel must be square and odd, got " + w.shape_str());
    }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const double* bias, std::size_t stride,
              std::size_t dilation, std::size_t groups) {
    check_conv_shapes(x, w, groups, false);
    const std::size_t c_in = x.dim(0), h_in = x.dim(1), w_in = x.dim(2);
    const std::size_t c_out = w.dim(0), cg = w.dim(1), k = w.dim(2);
    const std::size_t h_out = conv_out_size(h_in, k, stride, dilation);
    const std::size_t w_out = conv_out_size(w_in, k, stride, dilation);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(dilation * (k / 2));
    const std::size_t cin_per_g = c_in / groups;
    const std::size_t cout_per_g = c_out / groups;

    Tensor y({c_out, h_out, w_out});
    for (std::size_t oc = 0; oc < c_out; ++oc) {
        const std::size_t g = oc / cout_per_g;
        double* ych = y.data() + oc * h_out * w_out;
        if (bias) {
            const double b = bias[oc];
            for (std::size_t i = 0; i < h_out * w_out; ++i) ych[i] = b;
        }
        for (std::size_t icg = 0; icg < cg; ++icg) {
            const std::size_t ic = g * cin_per_g + icg;
            const double* xch = x.data() + ic * h_in * w_in;
            for (std::size_t ky = 0; ky < k; ++ky) {
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const double wv = w.at4(oc, icg, ky, kx);
                    if (wv == 0.0) continue;
                    const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky * dilation) - pad;
                    const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx * dilation) - pad;
                    for (std::size_t oy = 0; oy < h_out; ++oy) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride) + dy;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h_in)) continue;
                        const double* xrow = xch + static_cast<std::size_t>(iy) * w_in;
                        double* yrow = ych + oy * w_out;
                        // Clip the ox range so ix stays in bounds.
                        std::size_t ox_lo = 0;
                        if (dx < 0) {
                            ox_lo = static_cast<std::size_t>(((-dx) + stride - 1) / stride);
                        }
                        for (std::size_t ox = ox_lo; ox < w_out; ++ox) {
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox * stride) + dx;
                            if (ix >= static_cast<std::ptrdiff_t>(w_in)) break;
                            yrow[ox] += wv * xrow[static_cast<std::size_t>(ix)];
                        }
                    }
                }
            }
        }
    }
    return y;
}

Tensor conv2d_sparse(const Tensor& x, const Tensor& w, const double* bias, std::size_t stride,
                     std::size_t dilation, std::size_t groups) {
    check_conv_shapes(x, w, groups, false);
    const std::size_t c_in = x.dim(0), h_in = x.dim(1), w_in = x.dim(2);
    const std::size_t c_out = w.dim(0), k = w.dim(2);
    const std::size_t h_out = conv_out_size(h_in, k, stride, dilation);
    const std::size_t w_out = conv_out_size(w_in, k, stride, dilation);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(dilation * (k / 2));
    const std::size_t cin_per_g = c_in / groups;
    const std::size_t cout_per_g = c_out / groups;

    Tensor y({c_out, h_out, w_out});
    if (bias) {
        for (std::size_t oc = 0; oc < c_out; ++oc) {
            double* ych = y.data() + oc * h_out * w_out;
            for (std::size_t i = 0; i < h_out * w_out; ++i) ych[i] = bias[oc];
        }
    }

    // Scatter each nonzero input cell into every output site it feeds.
    for (std::size_t ic = 0; ic < c_in; ++ic) {
        const std::size_t g = ic / cin_per_g;
        const std::size_t icg = ic % cin_per_g;
        const double* xch = x.data() + ic * h_in * w_in;
        for (std::size_t iy = 0; iy < h_in; ++iy) {
            for (std::size_t ix = 0; ix < w_in; ++ix) {
                const double xv = xch[iy * w_in + ix];
                if (xv == 0.0) continue;
                for (std::size_t ky = 0; ky < k; ++ky) {
                    // oy*stride = iy + pad - ky*dilation
                    const std::ptrdiff_t num_y = static_cast<std::ptrdiff_t>(iy) + pad -
                                                 static_cast<std::ptrdiff_t>(ky * dilation);
                    if (num_y < 0 || num_y % static_cast<std::ptrdiff_t>(stride) != 0) continue;
                    const std::size_t oy = static_cast<std::size_t>(num_y) / stride;
                    if (oy >= h_out) continue;
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const std::ptrdiff_t num_x = static_cast<std::ptrdiff_t>(ix) + pad -
                                                     static_cast<std::ptrdiff_t>(kx * dilation);
                        if (num_x < 0 || num_x % static_cast<std::ptrdiff_t>(stride) != 0)
                            continue;
                        const std::size_t ox = static_cast<std::size_t>(num_x) / stride;
                        if (ox >= w_out) continue;
                        for (std::size_t ocg = 0; ocg < cout_per_g; ++ocg) {
                            const std::size_t oc = g * cout_per_g + ocg;
                            y.at3(oc, oy, ox) += w.at4(oc, icg, ky, kx) * xv;
                        }
                    }
                }
            }
        }
    }
    return y;
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const double* bias,
                        std::size_t stride) {
    check_conv_shapes(x, w, 1, true);
    const std::size_t c_in = x.dim(0), h_in = x.dim(1), w_in = x.dim(2);
    const std::size_t c_out = w.dim(1), k = w.dim(2);
    const std::size_t h_out = conv_transpose_out_size(h_in, k, stride);
    const std::size_t w_out = conv_transpose_out_size(w_in, k, stride);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);

    Tensor y({c_out, h_out, w_out});
    if (bias) {
        for (std::size_t oc = 0; oc < c_out; ++oc) {
            double* ych = y.data() + oc * h_out * w_out;
            for (std::size_t i = 0; i < h_out * w_out; ++i) ych[i] = bias[oc];
        }
    }

    for (std::size_t ic = 0; ic < c_in; ++ic) {
        const double* xch = x.data() + ic * h_in * w_in;
        for (std::size_t iy = 0; iy < h_in; ++iy) {
            for (std::size_t ix = 0; ix < w_in; ++ix) {
                const double xv = xch[iy * w_in + ix];
                if (xv == 0.0) continue;
                const std::ptrdiff_t base_y = static_cast<std::ptrdiff_t>(iy * stride) - pad;
                const std::ptrdiff_t base_x = static_cast<std::ptrdiff_t>(ix * stride) - pad;
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const std::ptrdiff_t oy = base_y + static_cast<std::ptrdiff_t>(ky);
                    if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(h_out)) continue;
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const std::ptrdiff_t ox = base_x + static_cast<std::ptrdiff_t>(kx);
                        if (ox < 0 || ox >= static_cast<std::ptrdiff_t>(w_out)) continue;
                        for (std::size_t oc = 0; oc < c_out; ++oc) {
                            y.at3(oc, static_cast<std::size_t>(oy), static_cast<std::size_t>(ox)) +=
                                w.at4(ic, oc, ky, kx) * xv;
                        }
                    }
                }
            }
        }
    }
    return y;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& grad_y, std::size_t stride,
                     std::size_t dilation, std::size_t groups, Tensor* grad_x, Tensor* grad_w,
                     Tensor* grad_b) {
    check_conv_shapes(x, w, groups, false);
    const std::size_t h_in = x.dim(1), w_in = x.dim(2);
    const std::size_t c_out = w.dim(0), cg = w.dim(1), k = w.dim(2);
    const std::size_t h_out = grad_y.dim(1), w_out = grad_y.dim(2);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(dilation * (k / 2));
    const std::size_t cin_per_g = x.dim(0) / groups;
    const std::size_t cout_per_g = c_out / groups;

    if (grad_b) {
        for (std::size_t oc = 0; oc < c_out; ++oc) {
            double acc = 0.0;
            const double* gch = grad_y.data() + oc * h_out * w_out;
            for (std::size_t i = 0; i < h_out * w_out; ++i) acc += gch[i];
            (*grad_b)[oc] += acc;
        }
    }
    if (!grad_x && !grad_w) return;

    for (std::size_t oc = 0; oc < c_out; ++oc) {
        const std::size_t g = oc / cout_per_g;
        const double* gch = grad_y.data() + oc * h_out * w_out;
        for (std::size_t icg = 0; icg < cg; ++icg) {
            const std::size_t ic = g * cin_per_g + icg;
            const double* xch = x.data() + ic * h_in * w_in;
            for (std::size_t ky = 0; ky < k; ++ky) {
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky * dilation) - pad;
                    const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx * dilation) - pad;
                    const double wv = w.at4(oc, icg, ky, kx);
                    double wacc = 0.0;
                    for (std::size_t oy = 0; oy < h_out; ++oy) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride) + dy;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h_in)) continue;
                        const double* grow = gch + oy * w_out;
                        const double* xrow = xch + static_cast<std::size_t>(iy) * w_in;
                        for (std::size_t ox = 0; ox < w_out; ++ox) {
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox * stride) + dx;
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w_in)) continue;
                            const double g_val = grow[ox];
                            wacc += g_val * xrow[static_cast<std::size_t>(ix)];
                            if (grad_x) {
                                grad_x->at3(ic, static_cast<std::size_t>(iy),
                                            static_cast<std::size_t>(ix)) += g_val * wv;
                            }
                        }
                    }
                    if (grad_w) grad_w->at4(oc, icg, ky, kx) += wacc;
                }
            }
        }
    }
}

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& mean,
                   const Tensor& var, double eps) {
    const std::size_t c = x.dim(0), plane = x.dim(1) * x.dim(2);
    if (gamma.size() != c || beta.size() != c || mean.size() != c || var.size() != c) {
        throw ValidationError("batchnorm2d: statistics do not match " +
                              std::to_string(c) + " channels");
    }
    Tensor y = Tensor::zeros_like(x);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double scale = gamma[ch] / std::sqrt(var[ch] + eps);
        const double shift = beta[ch] - mean[ch] * scale;
        const double* xch = x.data() + ch * plane;
        double* ych = y.data() + ch * plane;
        for (std::size_t i = 0; i < plane; ++i) ych[i] = xch[i] * scale + shift;
    }
    return y;
}

}  // namespace tonus
