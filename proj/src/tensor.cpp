#include "evirex/tensor.hpp"

#include <cmath>
#include <string>

#include "evirex/error.hpp"

namespace evirex::num {

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    std::size_t r = rows.size();
    std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Tensor t(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) raise(ErrorKind::dimension, "from_rows: ragged rows");
        for (double x : row) t.v[i++] = x;
    }
    return t;
}

Tensor Tensor::randn(std::size_t rows, std::size_t cols, Rng& rng, double stddev) {
    Tensor t(rows, cols);
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& x : t.v) x = dist(rng);
    return t;
}

double Tensor::sum() const {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
    const std::size_t am = trans_a ? a.cols() : a.rows();
    const std::size_t ak = trans_a ? a.rows() : a.cols();
    const std::size_t bk = trans_b ? b.cols() : b.rows();
    const std::size_t bn = trans_b ? b.rows() : b.cols();
    if (ak != bk)
        raise(ErrorKind::dimension,
              "matmul: inner dimensions " + std::to_string(ak) + " vs " + std::to_string(bk));

    Tensor c(am, bn);
    const double* pa = a.v.data();
    const double* pb = b.v.data();
    double* pc = c.v.data();
    const std::size_t a_cols = a.cols();
    const std::size_t b_cols = b.cols();

    if (!trans_a && !trans_b) {
        for (std::size_t i = 0; i < am; ++i)
            for (std::size_t k = 0; k < ak; ++k) {
                const double aik = pa[i * a_cols + k];
                if (aik == 0.0) continue;
                const double* brow = pb + k * b_cols;
                double* crow = pc + i * bn;
                for (std::size_t j = 0; j < bn; ++j) crow[j] += aik * brow[j];
            }
    } else if (!trans_a && trans_b) {
        for (std::size_t i = 0; i < am; ++i)
            for (std::size_t j = 0; j < bn; ++j) {
                const double* arow = pa + i * a_cols;
                const double* brow = pb + j * b_cols;
                double s = 0.0;
                for (std::size_t k = 0; k < ak; ++k) s += arow[k] * brow[k];
                pc[i * bn + j] = s;
            }
    } else if (trans_a && !trans_b) {
        for (std::size_t k = 0; k < ak; ++k) {
            const double* arow = pa + k * a_cols; // row k of A holds column entries of op(A)
            const double* brow = pb + k * b_cols;
            for (std::size_t i = 0; i < am; ++i) {
                const double aki = arow[i];
                if (aki == 0.0) continue;
                double* crow = pc + i * bn;
                for (std::size_t j = 0; j < bn; ++j) crow[j] += aki * brow[j];
            }
        }
    } else {
        for (std::size_t i = 0; i < am; ++i)
            for (std::size_t j = 0; j < bn; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < ak; ++k) s += pa[k * a_cols + i] * pb[j * b_cols + k];
                pc[i * bn + j] = s;
            }
    }
    return c;
}

Tensor transpose(const Tensor& a) {
    Tensor t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
    return t;
}

} // namespace evirex::num
