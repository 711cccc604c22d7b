#pragma once
// Adam with bias correction.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "nn.hpp"
#include "tensor.hpp"

namespace prefnp {

struct AdamConfig {
    double learning_rate = 0.0;  // supplied per experiment
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    static AdamState init(const ParamSet& params) {
        AdamState s;
        s.m.reserve(params.count());
        s.v.reserve(params.count());
        for (size_t i = 0; i < params.count(); ++i) {
            s.m.emplace_back(params.value_at(i).shape);
            s.v.emplace_back(params.value_at(i).shape);
        }
        return s;
    }
};

// step_index starts at 1
inline void adam_step(const AdamConfig& cfg, ParamSet& params, AdamState& state,
                      int64_t step_index) {
    if (cfg.learning_rate <= 0.0) throw std::invalid_argument("adam_step: learning_rate must be positive");
    if (step_index < 1) throw std::invalid_argument("adam_step: step_index starts at 1");
    if (state.m.size() != params.count() || state.v.size() != params.count())
        throw std::invalid_argument("adam_step: state does not match params");

    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_index));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_index));

    for (size_t i = 0; i < params.count(); ++i) {
        Tensor& w = params.value_at(i);
        const Tensor& g = params.grad_at(i);
        if (!g.same_shape(w))
            throw std::invalid_argument("adam_step: missing or misshapen gradient for parameter " +
                                        params.names()[i]);
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (size_t j = 0; j < w.size(); ++j) {
            m.data[j] = cfg.beta1 * m.data[j] + (1.0 - cfg.beta1) * g.data[j];
            v.data[j] = cfg.beta2 * v.data[j] + (1.0 - cfg.beta2) * g.data[j] * g.data[j];
            const double mhat = m.data[j] / bc1;
            const double vhat = v.data[j] / bc2;
            w.data[j] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
    }
}

}  // namespace prefnp
