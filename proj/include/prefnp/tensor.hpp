#pragma once
// Dense row-major 64-bit float tensor plus the handful of kernels everything
// else is built from. Rank 1 and 2 cover all shapes used in this project;
// scalars are (1,1).

#include <cassert>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace prefnp {

struct Tensor {
    std::vector<size_t> shape;
    std::vector<double> data;

    Tensor() = default;

    explicit Tensor(std::vector<size_t> s) : shape(std::move(s)) {
        data.assign(count(shape), 0.0);
    }

    static size_t count(const std::vector<size_t>& s) {
        size_t n = 1;
        for (size_t d : s) n *= d;
        return n;
    }

    static Tensor zeros(size_t rows, size_t cols) { return Tensor({rows, cols}); }

    static Tensor scalar(double v) {
        Tensor t({1, 1});
        t.data[0] = v;
        return t;
    }

    static Tensor row(std::vector<double> values) {
        Tensor t;
        t.shape = {1, values.size()};
        t.data = std::move(values);
        return t;
    }

    static Tensor from(size_t rows, size_t cols, std::vector<double> values) {
        if (values.size() != rows * cols)
            throw std::invalid_argument("Tensor::from: value count does not match shape");
        Tensor t;
        t.shape = {rows, cols};
        t.data = std::move(values);
        return t;
    }

    size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    size_t cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }

    double& at(size_t r, size_t c) { return data[r * cols() + c]; }
    double at(size_t r, size_t c) const { return data[r * cols() + c]; }

    double item() const {
        assert(size() == 1);
        return data[0];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    std::string shape_str() const {
        std::string s = "(";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + ")";
    }
};

// ---- matmul kernels -------------------------------------------------------
// All kernels accumulate into C; callers zero C when they want a fresh product.

// C (n,m) += A (n,k) * B (k,m)
inline void matmul_acc(const double* __restrict a, const double* __restrict b,
                       double* __restrict c, size_t n, size_t k, size_t m) {
    for (size_t i = 0; i < n; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * m;
        for (size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + p * m;
            for (size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

// C (n,m) += A (n,k) * B^T, with B stored (m,k). Transposes B into scratch
// first: the row-streaming kernel vectorizes, a per-element dot reduction
// does not.
inline void matmul_nt_acc(const double* __restrict a, const double* __restrict b,
                          double* __restrict c, size_t n, size_t k, size_t m) {
    std::vector<double> bt(k * m);
    for (size_t j = 0; j < m; ++j)
        for (size_t p = 0; p < k; ++p) bt[p * m + j] = b[j * k + p];
    matmul_acc(a, bt.data(), c, n, k, m);
}

// C (k,m) += A^T * B, with A stored (n,k), B stored (n,m)
inline void matmul_tn_acc(const double* __restrict a, const double* __restrict b,
                          double* __restrict c, size_t n, size_t k, size_t m) {
    for (size_t i = 0; i < n; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * m;
        for (size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            double* crow = c + p * m;
            for (size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: inner dimensions differ " + a.shape_str() + " vs " +
                                    b.shape_str());
    Tensor c = Tensor::zeros(a.rows(), b.cols());
    matmul_acc(a.data.data(), b.data.data(), c.data.data(), a.rows(), a.cols(), b.cols());
    return c;
}

inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols())
        throw std::invalid_argument("matmul_nt: inner dimensions differ " + a.shape_str() +
                                    " vs " + b.shape_str());
    Tensor c = Tensor::zeros(a.rows(), b.rows());
    matmul_nt_acc(a.data.data(), b.data.data(), c.data.data(), a.rows(), a.cols(), b.rows());
    return c;
}

// ---- scalar nonlinearities ------------------------------------------------

// Sign-split form, stable for |x| up to ~700.
inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// log(sigmoid(x)), stable in both tails.
inline double log_sigmoid(double x) {
    if (x >= 0.0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kGeluA = 0.044715;

// tanh approximation
inline double gelu(double x) {
    const double u = kGeluC * (x + kGeluA * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(u));
}

inline double gelu_grad(double x) {
    const double u = kGeluC * (x + kGeluA * x * x * x);
    const double t = std::tanh(u);
    const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / M_SQRT2); }

inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

// rowwise softmax in place, stable
inline void softmax_rows_inplace(Tensor& t) {
    const size_t n = t.rows(), m = t.cols();
    for (size_t i = 0; i < n; ++i) {
        double* row = t.data.data() + i * m;
        double mx = row[0];
        for (size_t j = 1; j < m; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (size_t j = 0; j < m; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (size_t j = 0; j < m; ++j) row[j] /= sum;
    }
}

inline void log_softmax_rows_inplace(Tensor& t) {
    const size_t n = t.rows(), m = t.cols();
    for (size_t i = 0; i < n; ++i) {
        double* row = t.data.data() + i * m;
        double mx = row[0];
        for (size_t j = 1; j < m; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (size_t j = 0; j < m; ++j) sum += std::exp(row[j] - mx);
        const double lse = mx + std::log(sum);
        for (size_t j = 0; j < m; ++j) row[j] -= lse;
    }
}

}  // namespace prefnp
