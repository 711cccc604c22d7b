#pragma once
// Wall-clock scaling of the context encoder and decoder: encode cost should
// grow linearly with the context size, decode cost should not depend on it.

#include <chrono>
#include <vector>

#include "rewards.hpp"

namespace prefnp {

struct BenchPoint {
    size_t n_context = 0;
    double encode_ms = 0.0;  // median over repeats
    double decode_ms = 0.0;
};

struct LinearFit {
    double intercept = 0.0;
    double slope = 0.0;
    double r_squared = 0.0;
};

inline LinearFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
    const size_t n = xs.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    LinearFit fit;
    const double denom = static_cast<double>(n) * sxx - sx * sx;
    fit.slope = (static_cast<double>(n) * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / static_cast<double>(n);
    const double mean = sy / static_cast<double>(n);
    double ss_res = 0, ss_tot = 0;
    for (size_t i = 0; i < n; ++i) {
        const double pred = fit.intercept + fit.slope * xs[i];
        ss_res += (ys[i] - pred) * (ys[i] - pred);
        ss_tot += (ys[i] - mean) * (ys[i] - mean);
    }
    fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Median encode / decode wall-clock at each context size. The first timing
// of each size is a discarded warm-up.
inline std::vector<BenchPoint> bench_scaling(const NPBTLModel& model,
                                             const std::vector<size_t>& nc_grid, size_t n_targets,
                                             size_t repeats, uint64_t seed) {
    using Clock = std::chrono::steady_clock;
    std::vector<BenchPoint> points;
    RngStream rng = RngStream::derive(seed, "bench");
    const size_t d = model.enc.input_dim;

    Tensor targets = Tensor::zeros(2 * n_targets, d);
    for (double& v : targets.data) v = rng.normal();

    for (size_t nc : nc_grid) {
        std::vector<PreferencePair> context(nc);
        for (auto& pair : context) {
            pair.winner.features.resize(d);
            pair.loser.features.resize(d);
            for (double& v : pair.winner.features) v = rng.normal();
            for (double& v : pair.loser.features) v = rng.normal();
        }
        std::vector<double> enc_times, dec_times;
        volatile double sink = 0.0;  // keeps the timed work observable
        Tensor z;
        for (size_t r = 0; r < repeats + 1; ++r) {
            const auto t0 = Clock::now();
            z = encode_context(model, context);
            const auto t1 = Clock::now();
            const Tensor rewards = np_btl_rewards_eval(model, targets, z);
            const auto t2 = Clock::now();
            sink = sink + rewards.data[0];
            if (r == 0) continue;  // warm-up
            enc_times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
            dec_times.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
        }
        points.push_back({nc, median(enc_times), median(dec_times)});
    }
    return points;
}

}  // namespace prefnp
