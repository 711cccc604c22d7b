#pragma once
// Test-side dense eigensolver: classic cyclic Jacobi rotations on a
// symmetric matrix. Independent oracle for the power-method PCA.

#include <cmath>
#include <vector>

#include "prefnp/tensor.hpp"

namespace prefnp_test {

struct EigenPair {
    double value;
    std::vector<double> vector;
};

// all eigenpairs of a symmetric matrix, sorted by descending eigenvalue
inline std::vector<EigenPair> jacobi_eigen(prefnp::Tensor a, size_t max_sweeps = 100,
                                           double tol = 1e-14) {
    const size_t n = a.rows();
    prefnp::Tensor v = prefnp::Tensor::zeros(n, n);
    for (size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

    for (size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (size_t p = 0; p < n; ++p)
            for (size_t q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
        if (off < tol) break;
        for (size_t p = 0; p < n; ++p) {
            for (size_t q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (std::fabs(apq) < 1e-300) continue;
                const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (size_t i = 0; i < n; ++i) {
                    const double aip = a.at(i, p), aiq = a.at(i, q);
                    a.at(i, p) = c * aip - s * aiq;
                    a.at(i, q) = s * aip + c * aiq;
                }
                for (size_t i = 0; i < n; ++i) {
                    const double api = a.at(p, i), aqi = a.at(q, i);
                    a.at(p, i) = c * api - s * aqi;
                    a.at(q, i) = s * api + c * aqi;
                }
                for (size_t i = 0; i < n; ++i) {
                    const double vip = v.at(i, p), viq = v.at(i, q);
                    v.at(i, p) = c * vip - s * viq;
                    v.at(i, q) = s * vip + c * viq;
                }
            }
        }
    }
    std::vector<EigenPair> pairs(n);
    for (size_t i = 0; i < n; ++i) {
        pairs[i].value = a.at(i, i);
        pairs[i].vector.resize(n);
        for (size_t j = 0; j < n; ++j) pairs[i].vector[j] = v.at(j, i);
    }
    std::sort(pairs.begin(), pairs.end(),
              [](const EigenPair& x, const EigenPair& y) { return x.value > y.value; });
    return pairs;
}

}  // namespace prefnp_test
