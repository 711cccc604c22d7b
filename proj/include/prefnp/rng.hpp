#pragma once
// Deterministic random streams. Every random quantity flows from one root
// seed through named substreams, so changing what one stage samples never
// perturbs any other stage. Distributions are hand-rolled on top of
// mt19937_64 bits (std::*_distribution output is not pinned by the standard).

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace prefnp {

inline constexpr uint64_t kFnvOffset = 1469598103934665603ull;
inline constexpr uint64_t kFnvPrime = 1099511628211ull;

inline uint64_t fnv1a_bytes(const void* data, size_t n, uint64_t h = kFnvOffset) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
    return h;
}

inline uint64_t fnv1a(std::string_view s, uint64_t h = kFnvOffset) {
    return fnv1a_bytes(s.data(), s.size(), h);
}

inline uint64_t fnv1a_u64(uint64_t v, uint64_t h = kFnvOffset) {
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
    return fnv1a_bytes(bytes, 8, h);
}

class RngStream {
public:
    explicit RngStream(uint64_t seed) : gen_(seed) {}

    // Substream addressed by (root, name, index). Independent for practical
    // purposes; identical inputs give identical streams on every platform.
    static RngStream derive(uint64_t root, std::string_view name, uint64_t index = 0) {
        uint64_t h = fnv1a_u64(root);
        h = fnv1a(name, h);
        h = fnv1a_u64(index, h);
        return RngStream(h);
    }

    RngStream derive(std::string_view name, uint64_t index = 0) {
        return RngStream::derive(gen_(), name, index);
    }

    uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // unbiased integer in [0, n)
    uint64_t below(uint64_t n) {
        if (n == 0) throw std::invalid_argument("RngStream::below: n must be positive");
        const uint64_t rem = std::numeric_limits<uint64_t>::max() % n;
        const uint64_t limit = std::numeric_limits<uint64_t>::max() - rem;
        uint64_t x = gen_();
        while (x > limit) x = gen_();
        return x % n;
    }

    // inclusive range
    int64_t uniform_int(int64_t lo, int64_t hi) {
        return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller with cached spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));  // u1 < 1 so 1-u1 > 0
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Marsaglia-Tsang; alpha < 1 handled via the Gamma(alpha+1) boost.
    double gamma(double alpha) {
        if (alpha <= 0.0) throw std::invalid_argument("RngStream::gamma: alpha must be positive");
        if (alpha < 1.0) {
            const double u = uniform();
            return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
        }
        const double d = alpha - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    std::vector<double> dirichlet(const std::vector<double>& alpha) {
        std::vector<double> g(alpha.size());
        double sum = 0.0;
        for (size_t i = 0; i < alpha.size(); ++i) {
            g[i] = gamma(alpha[i]);
            sum += g[i];
        }
        for (double& v : g) v /= sum;
        return g;
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace prefnp
