#pragma once
// Central-finite-difference verification of reverse-mode gradients. The loss
// closure must be deterministic (dropout off, fixed data).

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "nn.hpp"
#include "rng.hpp"

namespace prefnp {

// Computes the loss and fills params.grads via one backward pass (the closure
// owns zeroing the grads before accumulating).
using LossFn = std::function<double(ParamSet&)>;

// Probes probe_count randomly chosen parameter coordinates and returns the
// maximum relative error between the analytic gradient and
// (loss(w+h) - loss(w-h)) / 2h, with denominator max(|analytic|, |numeric|, 1e-8).
inline double grad_check(const LossFn& loss_fn, ParamSet& params, size_t probe_count,
                         double step, RngStream& rng) {
    if (step <= 0.0) throw std::invalid_argument("grad_check: step must be positive");

    const double base = loss_fn(params);
    if (!std::isfinite(base)) throw std::invalid_argument("grad_check: non-finite loss");

    // later probe evaluations overwrite the gradients, so keep a copy
    std::vector<Tensor> analytic_grads;
    analytic_grads.reserve(params.count());
    for (size_t i = 0; i < params.count(); ++i) analytic_grads.push_back(params.grad_at(i));

    const size_t total = params.total_size();
    if (total == 0) throw std::invalid_argument("grad_check: empty parameter set");

    // Central differences carry ~eps*|loss|/step of roundoff. A coordinate
    // whose analytic and numeric magnitudes both sit within 1e4x of that
    // noise cannot be resolved to a 1e-4 relative comparison at this step
    // size, so such probes are resampled rather than measured against noise.
    const double resolution =
        1e4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(base)) / step;

    double max_rel = 0.0;
    size_t measured = 0;
    const size_t max_attempts = 50 * probe_count;
    for (size_t attempt = 0; attempt < max_attempts && measured < probe_count; ++attempt) {
        size_t flat = static_cast<size_t>(rng.below(total));
        size_t pi = 0;
        while (flat >= params.value_at(pi).size()) {
            flat -= params.value_at(pi).size();
            ++pi;
        }
        const double analytic = analytic_grads[pi].data[flat];

        double& w = params.value_at(pi).data[flat];
        const double saved = w;
        w = saved + step;
        const double up = loss_fn(params);
        w = saved - step;
        const double down = loss_fn(params);
        w = saved;
        if (!std::isfinite(up) || !std::isfinite(down))
            throw std::invalid_argument("grad_check: non-finite loss at probe");

        const double numeric = (up - down) / (2.0 * step);
        if (std::max(std::fabs(analytic), std::fabs(numeric)) < resolution) continue;
        ++measured;
        const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
        max_rel = std::max(max_rel, std::fabs(analytic - numeric) / denom);
    }
    return max_rel;
}

}  // namespace prefnp
