#pragma once
// Closed-form and Monte-Carlo ground truth for hidden-context
// identifiability: the Bayes-optimal latent classifier under deterministic
// coordinate rewards, the arcsin error law for a single context pair, and
// the NP-vs-Bayes comparison curve.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rewards.hpp"
#include "synthdata.hpp"
#include "threads.hpp"

namespace prefnp {

struct Posterior {
    std::vector<double> probs;
    bool impossible = false;  // every latent contradicts some context choice
};

// Posterior over discrete latents under the deterministic choice model:
// probs[k] is proportional to the product of indicators that latent k ranks
// each context winner above its loser. Uniform prior.
inline Posterior bayes_posterior(const std::vector<PreferencePair>& context, size_t latent_count) {
    if (latent_count < 2) throw std::invalid_argument("bayes_posterior: need >= 2 latents");
    Posterior post;
    post.probs.assign(latent_count, 1.0);
    for (const PreferencePair& pair : context) {
        for (size_t k = 0; k < latent_count; ++k) {
            const double rw = pair.winner.features[k];
            const double rl = pair.loser.features[k];
            if (rw == rl) throw TieError{};
            if (rw < rl) post.probs[k] = 0.0;
        }
    }
    double total = 0.0;
    for (double p : post.probs) total += p;
    if (total == 0.0) {
        post.impossible = true;
        return post;
    }
    for (double& p : post.probs) p /= total;
    return post;
}

// argmax with exact ties broken uniformly at random
inline size_t bayes_classify(const Posterior& post, RngStream& rng) {
    if (post.impossible) throw std::invalid_argument("bayes_classify: impossible posterior");
    double best = -1.0;
    std::vector<size_t> argmax;
    for (size_t k = 0; k < post.probs.size(); ++k) {
        if (post.probs[k] > best) {
            best = post.probs[k];
            argmax.assign(1, k);
        } else if (post.probs[k] == best) {
            argmax.push_back(k);
        }
    }
    if (argmax.size() == 1) return argmax[0];
    return argmax[rng.below(argmax.size())];
}

// single-context-pair error of the Bayes classifier: 1/4 + arcsin(rho)/(2 pi)
inline double closed_form_error(double rho) {
    if (std::fabs(rho) > 1.0) throw std::invalid_argument("closed_form_error: |rho| > 1");
    return 0.25 + std::asin(rho) / (2.0 * M_PI);
}

struct McEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    size_t n_trials = 0;
};

namespace detail {

// one labeled pair drawn at correlation rho under latent z
inline PreferencePair draw_labeled_pair(double rho, size_t z, RngStream& rng) {
    for (;;) {
        const OptionVec y1 = sample_option_gaussian2d(rho, rng);
        const OptionVec y2 = sample_option_gaussian2d(rho, rng);
        const double r1 = y1.features[z], r2 = y2.features[z];
        if (r1 == r2) continue;
        return r1 > r2 ? PreferencePair{y1, y2} : PreferencePair{y2, y1};
    }
}

}  // namespace detail

// Monte-Carlo estimate of the Bayes classifier's error rate at correlation
// rho with n_context labeled pairs per trial.
inline McEstimate mc_error_estimate(double rho, size_t n_trials, size_t n_context,
                                    uint64_t seed) {
    if (n_trials == 0) throw std::invalid_argument("mc_error_estimate: n_trials must be >= 1");
    if (n_context == 0) throw std::invalid_argument("mc_error_estimate: n_context must be >= 1");
    if (std::fabs(rho) > 1.0) throw std::invalid_argument("mc_error_estimate: |rho| > 1");

    // trials in fixed-size blocks over independent derived streams, reduced
    // in block order, so the estimate is identical at any thread count
    const size_t block = 4096;
    const size_t n_blocks = (n_trials + block - 1) / block;
    std::vector<size_t> errors(n_blocks, 0);
    parallel_for(n_blocks, [&](size_t bi) {
        RngStream rng = RngStream::derive(seed, "mc_error", bi);
        const size_t lo = bi * block, hi = std::min(n_trials, lo + block);
        size_t err = 0;
        std::vector<PreferencePair> context(n_context);
        for (size_t t = lo; t < hi; ++t) {
            const size_t z = rng.bernoulli(0.5) ? 1 : 0;
            for (size_t j = 0; j < n_context; ++j)
                context[j] = detail::draw_labeled_pair(rho, z, rng);
            const Posterior post = bayes_posterior(context, 2);
            if (bayes_classify(post, rng) != z) ++err;
        }
        errors[bi] = err;
    });
    size_t total_err = 0;
    for (size_t e : errors) total_err += e;
    McEstimate est;
    est.n_trials = n_trials;
    est.mean = static_cast<double>(total_err) / static_cast<double>(n_trials);
    est.stderr_ = std::sqrt(est.mean * (1.0 - est.mean) / static_cast<double>(n_trials));
    return est;
}

struct CurvePoint {
    double rho_train = 0.0;
    double rho_eval = 0.0;
    size_t n_context = 1;
    double np_error = 0.0;
    double np_stderr = 0.0;
    double bayes_error = 0.0;
    size_t n_trials = 0;
};

// NP-BTL latent-identification error in the single-context-pair setting.
// The model's preferred latent is scored by majority agreement over fresh
// probe pairs: for each probe, does the model's predicted winner match the
// winner under latent k? Ties are broken with a coin, mirroring the Bayes
// classifier's tie rule.
inline CurvePoint np_identification_error(const NPBTLModel& model, double rho_train,
                                          double rho_eval, size_t n_trials, uint64_t seed,
                                          size_t n_probe_pairs = 20) {
    const size_t block = 256;
    const size_t n_blocks = (n_trials + block - 1) / block;
    std::vector<size_t> errors(n_blocks, 0);
    parallel_for(n_blocks, [&](size_t bi) {
        RngStream rng = RngStream::derive(seed, "np_ident", bi);
        const size_t lo = bi * block, hi = std::min(n_trials, lo + block);
        size_t err = 0;
        for (size_t t = lo; t < hi; ++t) {
            const size_t z = rng.bernoulli(0.5) ? 1 : 0;
            const std::vector<PreferencePair> context = {
                detail::draw_labeled_pair(rho_eval, z, rng)};
            const Tensor zc = encode_context(model, context);

            size_t agree0 = 0, agree1 = 0;
            for (size_t j = 0; j < n_probe_pairs; ++j) {
                OptionVec y1 = sample_option_gaussian2d(rho_eval, rng);
                OptionVec y2 = sample_option_gaussian2d(rho_eval, rng);
                while (y1.features[0] == y2.features[0] || y1.features[1] == y2.features[1]) {
                    y1 = sample_option_gaussian2d(rho_eval, rng);
                    y2 = sample_option_gaussian2d(rho_eval, rng);
                }
                Tensor options = Tensor::zeros(2, 2);
                options.at(0, 0) = y1.features[0];
                options.at(0, 1) = y1.features[1];
                options.at(1, 0) = y2.features[0];
                options.at(1, 1) = y2.features[1];
                const Tensor r = np_btl_rewards_eval(model, options, zc);
                const bool model_first = r.data[0] > r.data[1];
                if (model_first == (y1.features[0] > y2.features[0])) ++agree0;
                if (model_first == (y1.features[1] > y2.features[1])) ++agree1;
            }
            size_t pick;
            if (agree0 > agree1)
                pick = 0;
            else if (agree1 > agree0)
                pick = 1;
            else
                pick = rng.bernoulli(0.5) ? 1 : 0;
            if (pick != z) ++err;
        }
        errors[bi] = err;
    });
    size_t total_err = 0;
    for (size_t e : errors) total_err += e;
    CurvePoint pt;
    pt.rho_train = rho_train;
    pt.rho_eval = rho_eval;
    pt.n_context = 1;
    pt.n_trials = n_trials;
    pt.np_error = static_cast<double>(total_err) / static_cast<double>(n_trials);
    pt.np_stderr = std::sqrt(pt.np_error * (1.0 - pt.np_error) / static_cast<double>(n_trials));
    pt.bayes_error = closed_form_error(rho_eval);
    return pt;
}

inline std::vector<CurvePoint> np_vs_bayes_curve(const NPBTLModel& model, double rho_train,
                                                 const std::vector<double>& rho_grid,
                                                 size_t n_trials, uint64_t seed) {
    std::vector<CurvePoint> curve;
    for (size_t i = 0; i < rho_grid.size(); ++i)
        curve.push_back(np_identification_error(model, rho_train, rho_grid[i], n_trials,
                                                fnv1a_u64(seed, fnv1a_u64(i))));
    return curve;
}

}  // namespace prefnp
