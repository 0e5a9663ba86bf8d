#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "evirex/util.hpp"

namespace evirex::num {

// Dense row-major tensor. All graph operations work on rank-2 tensors;
// vectors are 1xN rows and scalars are 1x1.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> v;

    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
        : shape{rows, cols}, v(rows * cols, fill) {}

    static Tensor scalar(double x) {
        Tensor t(1, 1);
        t.v[0] = x;
        return t;
    }
    static Tensor row(std::initializer_list<double> xs) {
        Tensor t(1, xs.size());
        std::size_t i = 0;
        for (double x : xs) t.v[i++] = x;
        return t;
    }
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor randn(std::size_t rows, std::size_t cols, Rng& rng, double stddev);

    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 0 : shape[1]; }
    std::size_t numel() const { return v.size(); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    double& at(std::size_t r, std::size_t c) { return v[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols() + c]; }

    double sum() const;
    double max_abs() const;
};

// C = op(A) * op(B) with optional transposes; validates inner dimensions.
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);
Tensor transpose(const Tensor& a);

} // namespace evirex::num
