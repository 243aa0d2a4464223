#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "tonus/error.hpp"

namespace tonus {

// Dense row-major tensor of doubles. Everything in the engine (activations,
// weights, head maps) flows through this type; the reference numerics are
// double precision throughout.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    Tensor(std::initializer_list<std::size_t> shape, double fill = 0.0)
        : Tensor(std::vector<std::size_t>(shape), fill) {}

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Indexers for the common ranks. (c, y, x) and (a, b, y, x) orderings.
    double& at3(std::size_t c, std::size_t y, std::size_t x) {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }
    double at3(std::size_t c, std::size_t y, std::size_t x) const {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }
    double& at4(std::size_t a, std::size_t b, std::size_t y, std::size_t x) {
        return data_[((a * shape_[1] + b) * shape_[2] + y) * shape_[3] + x];
    }
    double at4(std::size_t a, std::size_t b, std::size_t y, std::size_t x) const {
        return data_[((a * shape_[1] + b) * shape_[2] + y) * shape_[3] + x];
    }

    void fill(double v);
    double sum() const;
    double max() const;
    std::size_t count_nonzero() const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    std::string shape_str() const;

    // Throws ValidationError naming `what` when shapes differ.
    void require_shape(const Tensor& other, const char* what) const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

}  // namespace tonus
