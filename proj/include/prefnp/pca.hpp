#pragma once
// PCA of context embeddings via the deflated power method, and the mean
// silhouette score that quantifies cluster separation in the projection.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace prefnp {

struct PcaResult {
    Tensor coords;                        // (n, components)
    std::vector<Tensor> components;       // unit vectors, (1, d) each
    std::vector<double> eigenvalues;      // descending
    bool degenerate = false;              // all points identical
};

// center the rows of x in place; returns the mean row
inline Tensor center_rows(Tensor& x) {
    const size_t n = x.rows(), d = x.cols();
    Tensor mean = Tensor::zeros(1, d);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < d; ++j) mean.data[j] += x.at(i, j);
    for (double& v : mean.data) v /= static_cast<double>(n);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < d; ++j) x.at(i, j) -= mean.data[j];
    return mean;
}

inline Tensor covariance(const Tensor& centered) {
    const size_t n = centered.rows(), d = centered.cols();
    Tensor cov = Tensor::zeros(d, d);
    matmul_tn_acc(centered.data.data(), centered.data.data(), cov.data.data(), n, d, d);
    const double inv = 1.0 / static_cast<double>(n > 1 ? n - 1 : 1);
    for (double& v : cov.data) v *= inv;
    return cov;
}

inline PcaResult pca_project(const std::vector<Tensor>& embeddings, size_t n_components = 2,
                             double tol = 1e-10, size_t max_iters = 100000) {
    if (embeddings.size() < 2) throw std::invalid_argument("pca_project: need >= 2 embeddings");
    const size_t n = embeddings.size(), d = embeddings[0].size();
    Tensor x = Tensor::zeros(n, d);
    for (size_t i = 0; i < n; ++i) {
        if (embeddings[i].size() != d)
            throw std::invalid_argument("pca_project: inconsistent embedding dimension");
        for (size_t j = 0; j < d; ++j) x.at(i, j) = embeddings[i].data[j];
    }
    center_rows(x);

    PcaResult result;
    double total_var = 0.0;
    for (double v : x.data) total_var += v * v;
    if (total_var == 0.0) {
        // all embeddings identical: zero projection with a degenerate flag
        result.degenerate = true;
        result.coords = Tensor::zeros(n, n_components);
        for (size_t c = 0; c < n_components; ++c) {
            result.components.push_back(Tensor::zeros(1, d));
            result.eigenvalues.push_back(0.0);
        }
        return result;
    }

    Tensor cov = covariance(x);
    for (size_t c = 0; c < n_components; ++c) {
        // deterministic start, orthogonal restarts if the start is unlucky
        Tensor v = Tensor::zeros(1, d);
        v.data[c % d] = 1.0;
        double lambda = 0.0;
        for (size_t iter = 0; iter < max_iters; ++iter) {
            Tensor next = Tensor::zeros(1, d);
            matmul_acc(v.data.data(), cov.data.data(), next.data.data(), 1, d, d);
            double norm = 0.0;
            for (double u : next.data) norm += u * u;
            norm = std::sqrt(norm);
            if (norm == 0.0) {
                // start vector lies in the null space; try the next axis
                v.fill(0.0);
                v.data[(c + iter + 1) % d] = 1.0;
                continue;
            }
            for (double& u : next.data) u /= norm;
            double delta = 0.0;
            for (size_t j = 0; j < d; ++j) delta = std::max(delta, std::fabs(next.data[j] - v.data[j]));
            // sign flips oscillate for negative eigenvalues; track both
            double delta_neg = 0.0;
            for (size_t j = 0; j < d; ++j)
                delta_neg = std::max(delta_neg, std::fabs(next.data[j] + v.data[j]));
            v = next;
            lambda = norm;
            if (std::min(delta, delta_neg) < tol) break;
        }
        // Rayleigh quotient for the signed eigenvalue
        Tensor cv = Tensor::zeros(1, d);
        matmul_acc(v.data.data(), cov.data.data(), cv.data.data(), 1, d, d);
        double rq = 0.0;
        for (size_t j = 0; j < d; ++j) rq += v.data[j] * cv.data[j];
        lambda = rq;
        result.components.push_back(v);
        result.eigenvalues.push_back(lambda);
        // deflate
        for (size_t a = 0; a < d; ++a)
            for (size_t b = 0; b < d; ++b) cov.at(a, b) -= lambda * v.data[a] * v.data[b];
    }

    result.coords = Tensor::zeros(n, n_components);
    for (size_t i = 0; i < n; ++i)
        for (size_t c = 0; c < n_components; ++c) {
            double dot = 0.0;
            for (size_t j = 0; j < d; ++j) dot += x.at(i, j) * result.components[c].data[j];
            result.coords.at(i, c) = dot;
        }
    return result;
}

struct SilhouetteResult {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::vector<double> per_point;
};

// Mean silhouette over points with Euclidean distance. A point alone in its
// label gets silhouette 0.
inline SilhouetteResult cluster_separation(const Tensor& coords,
                                           const std::vector<std::string>& labels) {
    const size_t n = coords.rows(), d = coords.cols();
    if (labels.size() != n) throw std::invalid_argument("cluster_separation: label count mismatch");
    std::vector<std::string> uniq;
    for (const auto& l : labels)
        if (std::find(uniq.begin(), uniq.end(), l) == uniq.end()) uniq.push_back(l);
    if (uniq.size() < 2) throw std::invalid_argument("cluster_separation: need >= 2 labels");

    auto dist = [&](size_t a, size_t b) {
        double s = 0.0;
        for (size_t j = 0; j < d; ++j) {
            const double diff = coords.at(a, j) - coords.at(b, j);
            s += diff * diff;
        }
        return std::sqrt(s);
    };

    SilhouetteResult result;
    result.per_point.resize(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        double a_sum = 0.0;
        size_t a_count = 0;
        double b_best = HUGE_VAL;
        for (const auto& label : uniq) {
            if (label == labels[i]) continue;
            double s = 0.0;
            size_t count = 0;
            for (size_t j = 0; j < n; ++j) {
                if (labels[j] != label) continue;
                s += dist(i, j);
                ++count;
            }
            if (count > 0) b_best = std::min(b_best, s / static_cast<double>(count));
        }
        for (size_t j = 0; j < n; ++j) {
            if (j == i || labels[j] != labels[i]) continue;
            a_sum += dist(i, j);
            ++a_count;
        }
        if (a_count == 0 || b_best == HUGE_VAL) {
            result.per_point[i] = 0.0;
            continue;
        }
        const double a = a_sum / static_cast<double>(a_count);
        const double denom = std::max(a, b_best);
        result.per_point[i] = denom > 0.0 ? (b_best - a) / denom : 0.0;
    }
    double sum = 0.0;
    for (double s : result.per_point) sum += s;
    result.mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (double s : result.per_point) sq += (s - result.mean) * (s - result.mean);
    result.stderr_ = n > 1 ? std::sqrt(sq / static_cast<double>(n - 1)) /
                                 std::sqrt(static_cast<double>(n))
                           : 0.0;
    return result;
}

}  // namespace prefnp
