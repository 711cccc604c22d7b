#pragma once
// Toy-scale conditional DPO: a small autoregressive token policy, a FiLM
// hypernetwork that modulates it from the context embedding, the conditional
// DPO objective over implicit rewards, and response sampling.
//
// The synthetic token language scores a response by hidden attribute
// weights: score_k = sum_t w_k[token_t]. Half the users prefer high score_0,
// half high score_1; anti-correlated weights make every pair conflicting.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "rewards.hpp"

namespace prefnp {

struct ToyLanguageSpec {
    size_t vocab_size = 16;
    size_t prompt_len = 4;
    size_t response_len = 8;
    std::vector<std::vector<double>> attribute_weights;  // k vectors of length vocab_size
    double weight_correlation = -1.0;                    // corr(w_0, w_1)

    size_t k() const { return attribute_weights.size(); }
    size_t seq_len() const { return prompt_len + response_len; }

    void validate() const {
        if (vocab_size == 0 || prompt_len == 0 || response_len == 0)
            throw std::invalid_argument("ToyLanguageSpec: lengths must be positive");
        if (attribute_weights.size() < 2)
            throw std::invalid_argument("ToyLanguageSpec: need >= 2 attribute weight vectors");
        for (const auto& w : attribute_weights)
            if (w.size() != vocab_size)
                throw std::invalid_argument("ToyLanguageSpec: weight vector length != vocab_size");
    }
};

// w_0 fresh normal; w_1 = rho w_0 + sqrt(1-rho^2) eps; further vectors i.i.d.
inline std::vector<std::vector<double>> make_attribute_weights(size_t k, size_t vocab_size,
                                                               double rho, RngStream& rng) {
    if (std::fabs(rho) > 1.0)
        throw std::invalid_argument("make_attribute_weights: |correlation| > 1");
    std::vector<std::vector<double>> w(k, std::vector<double>(vocab_size));
    for (double& v : w[0]) v = rng.normal();
    const double tail = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    for (size_t j = 0; j < vocab_size; ++j) w[1][j] = rho * w[0][j] + tail * rng.normal();
    for (size_t m = 2; m < k; ++m)
        for (double& v : w[m]) v = rng.normal();
    return w;
}

inline double attribute_score(const ToyLanguageSpec& lang, const std::vector<uint32_t>& response,
                              size_t mode) {
    double s = 0.0;
    for (uint32_t tok : response) {
        if (tok >= lang.vocab_size) throw std::invalid_argument("attribute_score: token out of vocab");
        s += lang.attribute_weights[mode][tok];
    }
    return s;
}

// normalized token histogram; the option features seen by the context encoder
inline OptionVec response_features(const ToyLanguageSpec& lang,
                                   const std::vector<uint32_t>& response) {
    OptionVec y;
    y.features.assign(lang.vocab_size, 0.0);
    for (uint32_t tok : response) y.features[tok] += 1.0;
    for (double& v : y.features) v /= static_cast<double>(lang.response_len);
    return y;
}

// ---- policy network ----

struct PolicySpec {
    size_t vocab_size = 16;
    size_t model_dim = 64;
    size_t n_blocks = 2;
    size_t n_heads = 4;
    size_t ffn_hidden = 256;
    size_t max_seq = 12;

    AttentionSpec attn() const { return {model_dim, n_heads, 0.0}; }
    MLPSpec ffn() const { return {model_dim, ffn_hidden, model_dim, 1}; }
};

inline void init_policy(ParamSet& ps, const std::string& prefix, const PolicySpec& spec,
                        RngStream& rng) {
    ps.add(prefix + ".tok_emb", glorot_uniform(spec.vocab_size, spec.model_dim, rng));
    ps.add(prefix + ".pos_emb", glorot_uniform(spec.max_seq, spec.model_dim, rng));
    for (size_t m = 0; m < spec.n_blocks; ++m) {
        const std::string blk = prefix + ".blk" + std::to_string(m);
        init_attention(ps, blk + ".attn", spec.attn(), rng);
        init_mlp(ps, blk + ".ffn", spec.ffn(), rng);
    }
    ps.add(prefix + ".head.w", glorot_uniform(spec.model_dim, spec.vocab_size, rng));
    ps.add(prefix + ".head.b", Tensor::zeros(1, spec.vocab_size));
}

// FiLM parameters for one block: gamma = 1 + dgamma, beta = dbeta, with the
// hypernetwork's output maps zero-initialized so training starts exactly at
// the unmodulated policy.
struct FilmVars {
    Var gamma;  // (1, model_dim)
    Var beta;
};

struct FilmTensors {
    Tensor gamma;
    Tensor beta;
};

inline void init_hypernet(ParamSet& ps, const std::string& prefix, size_t embed_dim,
                          size_t model_dim, size_t n_blocks) {
    for (size_t m = 0; m < n_blocks; ++m) {
        const std::string blk = prefix + ".film" + std::to_string(m);
        ps.add(blk + ".gamma.w", Tensor::zeros(embed_dim, model_dim));
        ps.add(blk + ".gamma.b", Tensor::zeros(1, model_dim));
        ps.add(blk + ".beta.w", Tensor::zeros(embed_dim, model_dim));
        ps.add(blk + ".beta.b", Tensor::zeros(1, model_dim));
    }
}

inline std::vector<FilmVars> hypernet_film_tape(Tape& tape, ParamBinding& p,
                                                const std::string& prefix, Var z,
                                                size_t n_blocks) {
    std::vector<FilmVars> film;
    for (size_t m = 0; m < n_blocks; ++m) {
        const std::string blk = prefix + ".film" + std::to_string(m);
        Var dgamma = tape.add_rowvec(tape.matmul(z, p(blk + ".gamma.w")), p(blk + ".gamma.b"));
        Var dbeta = tape.add_rowvec(tape.matmul(z, p(blk + ".beta.w")), p(blk + ".beta.b"));
        film.push_back({tape.add_scalar(dgamma, 1.0), dbeta});
    }
    return film;
}

inline std::vector<FilmTensors> hypernet_film_eval(const ParamSet& ps, const std::string& prefix,
                                                   const Tensor& z, size_t n_blocks) {
    std::vector<FilmTensors> film;
    for (size_t m = 0; m < n_blocks; ++m) {
        const std::string blk = prefix + ".film" + std::to_string(m);
        auto linear = [&](const std::string& part) {
            const Tensor& w = ps.value(blk + "." + part + ".w");
            const Tensor& b = ps.value(blk + "." + part + ".b");
            Tensor out = Tensor::zeros(1, w.cols());
            matmul_acc(z.data.data(), w.data.data(), out.data.data(), 1, z.cols(), w.cols());
            for (size_t j = 0; j < out.cols(); ++j) out.data[j] += b.data[j];
            return out;
        };
        FilmTensors ft{linear("gamma"), linear("beta")};
        for (double& v : ft.gamma.data) v += 1.0;
        film.push_back(std::move(ft));
    }
    return film;
}

// elementwise affine modulation broadcast over sequence positions
inline Var film_modulate(Tape& tape, Var o, const FilmVars& film) {
    return tape.add_rowvec(tape.mul_rowvec(o, film.gamma), film.beta);
}

inline void film_modulate_eval(Tensor& o, const FilmTensors& film) {
    const size_t n = o.rows(), d = o.cols();
    if (film.gamma.cols() != d || film.beta.cols() != d)
        throw std::invalid_argument("film_modulate: model_dim mismatch");
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < d; ++j) o.at(i, j) = o.at(i, j) * film.gamma.data[j] + film.beta.data[j];
}

// per-position log-probabilities over the vocabulary, (seq_len, vocab)
inline Var policy_logprobs_tape(Tape& tape, ParamBinding& p, const std::string& prefix,
                                const PolicySpec& spec, const std::vector<uint32_t>& tokens,
                                const std::vector<FilmVars>* film) {
    if (tokens.empty() || tokens.size() > spec.max_seq)
        throw std::invalid_argument("policy: bad sequence length");
    for (uint32_t tok : tokens)
        if (tok >= spec.vocab_size) throw std::invalid_argument("policy: token out of vocab");
    std::vector<uint32_t> pos(tokens.size());
    for (size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<uint32_t>(i);

    Var x = tape.add(tape.gather_rows(p(prefix + ".tok_emb"), tokens),
                     tape.gather_rows(p(prefix + ".pos_emb"), pos));
    for (size_t m = 0; m < spec.n_blocks; ++m) {
        const std::string blk = prefix + ".blk" + std::to_string(m);
        Var o = attention_forward(tape, spec.attn(), p, blk + ".attn", x, false, true, nullptr);
        if (film) o = film_modulate(tape, o, (*film)[m]);
        x = tape.add(x, o);
        x = tape.add(x, mlp_forward(tape, spec.ffn(), p, blk + ".ffn", x));
    }
    Var logits = tape.add_rowvec(tape.matmul(x, p(prefix + ".head.w")), p(prefix + ".head.b"));
    return tape.log_softmax_rows(logits);
}

inline Tensor policy_logprobs_eval(const ParamSet& ps, const std::string& prefix,
                                   const PolicySpec& spec, const std::vector<uint32_t>& tokens,
                                   const std::vector<FilmTensors>* film) {
    if (tokens.empty() || tokens.size() > spec.max_seq)
        throw std::invalid_argument("policy: bad sequence length");
    const size_t n = tokens.size(), d = spec.model_dim;
    const Tensor& tok_emb = ps.value(prefix + ".tok_emb");
    const Tensor& pos_emb = ps.value(prefix + ".pos_emb");
    Tensor x = Tensor::zeros(n, d);
    for (size_t i = 0; i < n; ++i) {
        if (tokens[i] >= spec.vocab_size) throw std::invalid_argument("policy: token out of vocab");
        for (size_t j = 0; j < d; ++j)
            x.at(i, j) = tok_emb.at(tokens[i], j) + pos_emb.at(i, j);
    }
    for (size_t m = 0; m < spec.n_blocks; ++m) {
        const std::string blk = prefix + ".blk" + std::to_string(m);
        Tensor o = attention_forward_eval(spec.attn(), ps, blk + ".attn", x, true);
        if (film) film_modulate_eval(o, (*film)[m]);
        for (size_t i = 0; i < x.size(); ++i) x.data[i] += o.data[i];
        Tensor f = mlp_forward_eval(spec.ffn(), ps, blk + ".ffn", x);
        for (size_t i = 0; i < x.size(); ++i) x.data[i] += f.data[i];
    }
    const Tensor& hw = ps.value(prefix + ".head.w");
    const Tensor& hb = ps.value(prefix + ".head.b");
    Tensor logits = Tensor::zeros(n, spec.vocab_size);
    matmul_acc(x.data.data(), hw.data.data(), logits.data.data(), n, d, spec.vocab_size);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < spec.vocab_size; ++j) logits.at(i, j) += hb.data[j];
    log_softmax_rows_inplace(logits);
    return logits;
}

// sum of response-token log-probabilities given the prompt prefix
inline std::vector<std::pair<uint32_t, uint32_t>> response_picks(size_t prompt_len,
                                                                 const std::vector<uint32_t>& resp) {
    std::vector<std::pair<uint32_t, uint32_t>> rc;
    rc.reserve(resp.size());
    for (size_t t = 0; t < resp.size(); ++t)
        rc.emplace_back(static_cast<uint32_t>(prompt_len - 1 + t), resp[t]);
    return rc;
}

inline std::vector<uint32_t> full_sequence(const std::vector<uint32_t>& prompt,
                                           const std::vector<uint32_t>& resp) {
    std::vector<uint32_t> seq = prompt;
    seq.insert(seq.end(), resp.begin(), resp.end());
    return seq;
}

inline Var response_logprob_tape(Tape& tape, ParamBinding& p, const std::string& prefix,
                                 const PolicySpec& spec, const std::vector<uint32_t>& prompt,
                                 const std::vector<uint32_t>& resp,
                                 const std::vector<FilmVars>* film) {
    Var lp = policy_logprobs_tape(tape, p, prefix, spec, full_sequence(prompt, resp), film);
    return tape.sum_all(tape.pick(lp, response_picks(prompt.size(), resp)));
}

inline double response_logprob_eval(const ParamSet& ps, const std::string& prefix,
                                    const PolicySpec& spec, const std::vector<uint32_t>& prompt,
                                    const std::vector<uint32_t>& resp,
                                    const std::vector<FilmTensors>* film) {
    const Tensor lp = policy_logprobs_eval(ps, prefix, spec, full_sequence(prompt, resp), film);
    double total = 0.0;
    for (auto [r, c] : response_picks(prompt.size(), resp)) total += lp.at(r, c);
    return total;
}

// ---- toy preference pools ----

struct ToyPairRecord {
    std::vector<uint32_t> prompt;
    std::vector<uint32_t> resp1, resp2;
    std::vector<double> h1, h2;  // attribute scores per mode
    double ref_lp1 = 0.0, ref_lp2 = 0.0;
};

struct ToyPool {
    ToyLanguageSpec lang;
    std::vector<ToyPairRecord> train, val, test;
};

struct ToyTask {
    LatentGroundTruth user_latent;
    std::vector<uint32_t> target_ids;
    std::vector<bool> first_wins;  // resp1 beats resp2 under the user latent
    size_t n_context = 0;
    std::vector<PreferencePair> context_features;  // encoder view of the context
};

struct NPDPOModel;  // forward declaration for the trainer header

inline std::vector<uint32_t> sample_tokens(size_t n, size_t vocab, RngStream& rng) {
    std::vector<uint32_t> toks(n);
    for (auto& t : toks) t = static_cast<uint32_t>(rng.below(vocab));
    return toks;
}

inline std::vector<uint32_t> sample_response_from(const ParamSet& ps, const std::string& prefix,
                                                  const PolicySpec& spec,
                                                  const std::vector<uint32_t>& prompt,
                                                  const std::vector<FilmTensors>* film,
                                                  double temperature, RngStream& rng,
                                                  size_t response_len) {
    if (temperature <= 0.0) throw std::invalid_argument("sample_response: temperature must be > 0");
    std::vector<uint32_t> seq = prompt;
    for (size_t t = 0; t < response_len; ++t) {
        const Tensor lp = policy_logprobs_eval(ps, prefix, spec, seq, film);
        const size_t last = seq.size() - 1;
        std::vector<double> probs(spec.vocab_size);
        double mx = -HUGE_VAL;
        for (size_t j = 0; j < spec.vocab_size; ++j) mx = std::max(mx, lp.at(last, j) / temperature);
        double sum = 0.0;
        for (size_t j = 0; j < spec.vocab_size; ++j) {
            probs[j] = std::exp(lp.at(last, j) / temperature - mx);
            sum += probs[j];
        }
        const double u = rng.uniform() * sum;
        double acc = 0.0;
        uint32_t picked = static_cast<uint32_t>(spec.vocab_size - 1);
        for (size_t j = 0; j < spec.vocab_size; ++j) {
            acc += probs[j];
            if (u < acc) {
                picked = static_cast<uint32_t>(j);
                break;
            }
        }
        seq.push_back(picked);
    }
    return std::vector<uint32_t>(seq.begin() + prompt.size(), seq.end());
}

inline bool toy_record_conflicting(const ToyPairRecord& rec, size_t modes) {
    return is_conflicting(rec.h1, rec.h2, modes);
}

// Pairs of distinct reference-policy responses to a shared random prompt,
// scored by the hidden attribute weights. Conflict filtering mirrors the
// synthetic pair pools (exact counts, then shuffle).
inline ToyPool gen_toy_preferences(const ToyLanguageSpec& lang, const ParamSet& ref_params,
                                   const PolicySpec& pspec, size_t n_train, size_t n_val,
                                   size_t n_test, std::optional<double> conflict_filter,
                                   RngStream& rng) {
    lang.validate();
    auto sample_record = [&]() {
        for (;;) {
            ToyPairRecord rec;
            rec.prompt = sample_tokens(lang.prompt_len, lang.vocab_size, rng);
            rec.resp1 = sample_response_from(ref_params, "policy", pspec, rec.prompt, nullptr, 1.0,
                                             rng, lang.response_len);
            for (int attempt = 0; attempt < 1000; ++attempt) {
                rec.resp2 = sample_response_from(ref_params, "policy", pspec, rec.prompt, nullptr,
                                                 1.0, rng, lang.response_len);
                if (rec.resp2 != rec.resp1) break;
            }
            if (rec.resp2 == rec.resp1) continue;
            rec.h1.resize(lang.k());
            rec.h2.resize(lang.k());
            bool tie = false;
            for (size_t m = 0; m < lang.k(); ++m) {
                rec.h1[m] = attribute_score(lang, rec.resp1, m);
                rec.h2[m] = attribute_score(lang, rec.resp2, m);
                tie = tie || rec.h1[m] == rec.h2[m];
            }
            if (tie) continue;  // ties in attribute scores: resample responses
            rec.ref_lp1 = response_logprob_eval(ref_params, "policy", pspec, rec.prompt, rec.resp1,
                                                nullptr);
            rec.ref_lp2 = response_logprob_eval(ref_params, "policy", pspec, rec.prompt, rec.resp2,
                                                nullptr);
            return rec;
        }
    };
    auto sample_with_conflict = [&](bool want) {
        for (int attempt = 0; attempt < 100000; ++attempt) {
            ToyPairRecord rec = sample_record();
            if (toy_record_conflicting(rec, lang.k()) == want) return rec;
        }
        throw std::invalid_argument("gen_toy_preferences: conflict_filter infeasible");
    };
    auto build = [&](size_t n) {
        std::vector<ToyPairRecord> recs;
        recs.reserve(n);
        if (!conflict_filter) {
            for (size_t i = 0; i < n; ++i) recs.push_back(sample_record());
        } else {
            const size_t n_conf =
                static_cast<size_t>(std::llround(*conflict_filter * static_cast<double>(n)));
            for (size_t i = 0; i < n_conf; ++i) recs.push_back(sample_with_conflict(true));
            for (size_t i = n_conf; i < n; ++i) recs.push_back(sample_with_conflict(false));
            for (size_t i = recs.size(); i > 1; --i) std::swap(recs[i - 1], recs[rng.below(i)]);
        }
        return recs;
    };
    ToyPool pool;
    pool.lang = lang;
    pool.train = build(n_train);
    pool.val = build(n_val);
    pool.test = build(n_test);
    return pool;
}

inline ToyTask sample_toy_task(const std::vector<ToyPairRecord>& split, const ToyLanguageSpec& lang,
                               const TaskConfig& cfg, RngStream& rng,
                               std::optional<size_t> forced_nc = std::nullopt) {
    cfg.validate();
    if (split.size() < cfg.n_target)
        throw std::invalid_argument("sample_toy_task: pool split smaller than n_target");
    ToyTask task;
    task.user_latent = LatentGroundTruth::discrete(rng.below(lang.k()));
    task.n_context = forced_nc ? *forced_nc
                               : static_cast<size_t>(rng.uniform_int(
                                     static_cast<int64_t>(cfg.nc_min), static_cast<int64_t>(cfg.nc_max)));
    std::unordered_set<uint32_t> used;
    while (task.target_ids.size() < cfg.n_target) {
        const auto id = static_cast<uint32_t>(rng.below(split.size()));
        if (used.count(id)) continue;
        used.insert(id);
        const ToyPairRecord& rec = split[id];
        const size_t mode = task.user_latent.mode;
        if (rec.h1[mode] == rec.h2[mode]) continue;
        task.target_ids.push_back(id);
        task.first_wins.push_back(rec.h1[mode] > rec.h2[mode]);
    }
    // encoder view: winner/loser response histograms for the context prefix
    for (size_t i = 0; i < task.n_context; ++i) {
        const ToyPairRecord& rec = split[task.target_ids[i]];
        PreferencePair pair;
        if (task.first_wins[i]) {
            pair.winner = response_features(lang, rec.resp1);
            pair.loser = response_features(lang, rec.resp2);
        } else {
            pair.winner = response_features(lang, rec.resp2);
            pair.loser = response_features(lang, rec.resp1);
        }
        task.context_features.push_back(std::move(pair));
    }
    return task;
}

}  // namespace prefnp
