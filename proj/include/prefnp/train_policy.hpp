#pragma once
// Conditional DPO training at toy scale. Trains the context-conditioned
// policy (encoder + FiLM hypernetwork + policy, jointly) and the
// unconditional baseline under the same protocol, both against a frozen
// reference policy that also generated the preference data.

#include "adam.hpp"
#include "policy.hpp"
#include "train_reward.hpp"

namespace prefnp {

struct DPOConfig {
    double beta = 0.05;
    double learning_rate = 1e-4;  // toy-scale default; see config docs
    size_t batch_tasks = 1;
    size_t max_steps = 1000;
    uint64_t seed = 0;
    size_t n_val_tasks = 64;
    size_t val_every = 10;
};

struct NPDPOModel {
    PolicySpec pspec;
    NPEncoderSpec enc;
    double beta = 0.05;
    bool conditional = true;  // false: BTL-DPO baseline (no context, no FiLM)
    ParamSet params;          // trainable: policy.* (+ enc.*, hyper.*)
    ParamSet ref_params;      // frozen reference policy.*
};

inline NPDPOModel make_np_dpo(const ToyLanguageSpec& lang, const PolicySpec& pspec,
                              double beta, bool conditional, uint64_t seed) {
    NPDPOModel m;
    m.pspec = pspec;
    m.beta = beta;
    m.conditional = conditional;
    RngStream rng = RngStream::derive(seed, "init.policy");
    init_policy(m.params, "policy", pspec, rng);
    // the reference is the frozen initial policy
    for (const auto& name : m.params.names()) m.ref_params.add(name, m.params.value(name));
    if (conditional) {
        m.enc.input_dim = lang.vocab_size;
        m.enc.variant = EncoderVariant::attention;
        RngStream erng = RngStream::derive(seed, "init.policy_encoder");
        init_np_encoder(m.params, "enc", m.enc, erng);
        init_hypernet(m.params, "hyper", m.enc.embed_dim, pspec.model_dim, pspec.n_blocks);
    }
    return m;
}

// beta * (conditional log-prob minus reference log-prob)
inline double implicit_reward(const NPDPOModel& m, const std::vector<uint32_t>& prompt,
                              const std::vector<uint32_t>& resp,
                              const std::vector<PreferencePair>& context) {
    std::vector<FilmTensors> film;
    const std::vector<FilmTensors>* film_ptr = nullptr;
    if (m.conditional) {
        const Tensor z = encode_context_eval(m.params, "enc", m.enc, context);
        film = hypernet_film_eval(m.params, "hyper", z, m.pspec.n_blocks);
        film_ptr = &film;
    }
    const double lp = response_logprob_eval(m.params, "policy", m.pspec, prompt, resp, film_ptr);
    const double ref = response_logprob_eval(m.ref_params, "policy", m.pspec, prompt, resp, nullptr);
    return m.beta * (lp - ref);
}

// sum over the task's target pairs of -log sigmoid(r_w - r_l)
inline Var np_dpo_task_loss_tape(Tape& tape, NPDPOModel& m, const ToyPool& pool,
                                 const std::vector<ToyPairRecord>& split, const ToyTask& task,
                                 bool train_mode, RngStream* dropout_rng) {
    ParamBinding p(tape, m.params);
    std::vector<FilmVars> film;
    const std::vector<FilmVars>* film_ptr = nullptr;
    if (m.conditional) {
        Var z = encode_context_tape(tape, p, "enc", m.enc, task.context_features, train_mode,
                                    dropout_rng);
        film = hypernet_film_tape(tape, p, "hyper", z, m.pspec.n_blocks);
        film_ptr = &film;
    }
    Var loss;
    bool first = true;
    for (size_t i = 0; i < task.target_ids.size(); ++i) {
        const ToyPairRecord& rec = split[task.target_ids[i]];
        const auto& wresp = task.first_wins[i] ? rec.resp1 : rec.resp2;
        const auto& lresp = task.first_wins[i] ? rec.resp2 : rec.resp1;
        const double ref_w = task.first_wins[i] ? rec.ref_lp1 : rec.ref_lp2;
        const double ref_l = task.first_wins[i] ? rec.ref_lp2 : rec.ref_lp1;
        Var lp_w = response_logprob_tape(tape, p, "policy", m.pspec, rec.prompt, wresp, film_ptr);
        Var lp_l = response_logprob_tape(tape, p, "policy", m.pspec, rec.prompt, lresp, film_ptr);
        Var diff = tape.scale(tape.add_scalar(tape.sub(lp_w, lp_l), ref_l - ref_w), m.beta);
        Var term = tape.scale(tape.logsigmoid_op(diff), -1.0);
        loss = first ? term : tape.add(loss, term);
        first = false;
    }
    (void)pool;
    return loss;
}

inline double np_dpo_task_loss_eval(const NPDPOModel& m, const std::vector<ToyPairRecord>& split,
                                    const ToyTask& task) {
    std::vector<FilmTensors> film;
    const std::vector<FilmTensors>* film_ptr = nullptr;
    if (m.conditional) {
        const Tensor z = encode_context_eval(m.params, "enc", m.enc, task.context_features);
        film = hypernet_film_eval(m.params, "hyper", z, m.pspec.n_blocks);
        film_ptr = &film;
    }
    double loss = 0.0;
    for (size_t i = 0; i < task.target_ids.size(); ++i) {
        const ToyPairRecord& rec = split[task.target_ids[i]];
        const auto& wresp = task.first_wins[i] ? rec.resp1 : rec.resp2;
        const auto& lresp = task.first_wins[i] ? rec.resp2 : rec.resp1;
        const double ref_w = task.first_wins[i] ? rec.ref_lp1 : rec.ref_lp2;
        const double ref_l = task.first_wins[i] ? rec.ref_lp2 : rec.ref_lp1;
        const double lp_w = response_logprob_eval(m.params, "policy", m.pspec, rec.prompt, wresp, film_ptr);
        const double lp_l = response_logprob_eval(m.params, "policy", m.pspec, rec.prompt, lresp, film_ptr);
        loss -= log_sigmoid(m.beta * ((lp_w - ref_w) - (lp_l - ref_l)));
    }
    return loss;
}

struct PolicyTrainResult {
    ModelCheckpoint checkpoint;
    std::vector<StepLog> log;
    double best_val_loss = 0.0;
    size_t best_step = 0;
};

inline json np_dpo_spec_json(const NPDPOModel& m, const ToyLanguageSpec& lang) {
    json j;
    j["vocab_size"] = m.pspec.vocab_size;
    j["model_dim"] = m.pspec.model_dim;
    j["n_blocks"] = m.pspec.n_blocks;
    j["n_heads"] = m.pspec.n_heads;
    j["ffn_hidden"] = m.pspec.ffn_hidden;
    j["max_seq"] = m.pspec.max_seq;
    j["beta"] = m.beta;
    j["conditional"] = m.conditional;
    j["prompt_len"] = lang.prompt_len;
    j["response_len"] = lang.response_len;
    if (m.conditional) {
        j["embed_dim"] = m.enc.embed_dim;
        j["encoder"] = encoder_variant_name(m.enc.variant);
        j["attn_heads"] = m.enc.attn_heads;
        j["attn_dropout"] = m.enc.attn_dropout;
    }
    return j;
}

inline ModelCheckpoint np_dpo_to_checkpoint(const NPDPOModel& m, const ToyLanguageSpec& lang,
                                            uint64_t seed, size_t step) {
    ModelCheckpoint ckpt;
    ckpt.model_kind = m.conditional ? "np_dpo" : "btl_dpo";
    ckpt.spec = np_dpo_spec_json(m, lang);
    ckpt.rng_seed = seed;
    ckpt.step = static_cast<int64_t>(step);
    for (const auto& name : m.params.names()) ckpt.params.add(name, m.params.value(name));
    for (const auto& name : m.ref_params.names())
        ckpt.params.add("ref." + name, m.ref_params.value(name));
    return ckpt;
}

inline NPDPOModel np_dpo_from_checkpoint(const ModelCheckpoint& ckpt) {
    NPDPOModel m;
    const json& spec = ckpt.spec;
    m.pspec.vocab_size = spec.at("vocab_size").get<size_t>();
    m.pspec.model_dim = spec.at("model_dim").get<size_t>();
    m.pspec.n_blocks = spec.at("n_blocks").get<size_t>();
    m.pspec.n_heads = spec.at("n_heads").get<size_t>();
    m.pspec.ffn_hidden = spec.at("ffn_hidden").get<size_t>();
    m.pspec.max_seq = spec.at("max_seq").get<size_t>();
    m.beta = spec.at("beta").get<double>();
    m.conditional = spec.at("conditional").get<bool>();
    if (m.conditional) {
        m.enc.input_dim = m.pspec.vocab_size;
        m.enc.embed_dim = spec.at("embed_dim").get<size_t>();
        m.enc.variant = encoder_variant_from(spec.at("encoder").get<std::string>());
        m.enc.attn_heads = spec.at("attn_heads").get<size_t>();
        m.enc.attn_dropout = spec.at("attn_dropout").get<double>();
    }
    for (const auto& name : ckpt.params.names()) {
        if (name.rfind("ref.", 0) == 0)
            m.ref_params.add(name.substr(4), ckpt.params.value(name));
        else
            m.params.add(name, ckpt.params.value(name));
    }
    return m;
}

inline PolicyTrainResult train_np_dpo_variant(NPDPOModel& model, const ToyPool& pool,
                                              const DPOConfig& cfg, const TaskConfig& task_cfg) {
    task_cfg.validate();
    if (pool.train.empty() || pool.val.empty())
        throw std::invalid_argument("train_np_dpo: empty pool split");

    RngStream batch_rng = RngStream::derive(cfg.seed, model.conditional ? "dpo.batch" : "dpo.batch.base");
    RngStream dropout_rng = RngStream::derive(cfg.seed, "dpo.dropout");

    std::vector<ToyTask> val_tasks;
    for (size_t i = 0; i < cfg.n_val_tasks; ++i) {
        RngStream trng = RngStream::derive(cfg.seed, "dpo.val_tasks", i);
        val_tasks.push_back(sample_toy_task(pool.val, pool.lang, task_cfg, trng,
                                            model.conditional ? std::nullopt
                                                              : std::optional<size_t>(0)));
    }
    auto val_loss = [&]() {
        std::vector<double> losses(val_tasks.size());
        parallel_for(val_tasks.size(), [&](size_t i) {
            losses[i] = np_dpo_task_loss_eval(model, pool.val, val_tasks[i]) /
                        static_cast<double>(val_tasks[i].target_ids.size());
        });
        double total = 0.0;
        for (double l : losses) total += l;
        return total / static_cast<double>(losses.size());
    };

    PolicyTrainResult result;
    AdamState adam = AdamState::init(model.params);
    AdamConfig adam_cfg;
    adam_cfg.learning_rate = cfg.learning_rate;

    auto snapshot = [&](size_t step, double vloss) {
        result.best_val_loss = vloss;
        result.best_step = step;
        result.checkpoint = np_dpo_to_checkpoint(model, pool.lang, cfg.seed, step);
    };
    snapshot(0, val_loss());

    const double divergence_level = 10.0 * std::log(2.0);
    size_t diverged_streak = 0;

    for (size_t step = 1; step <= cfg.max_steps; ++step) {
        std::optional<size_t> forced_nc;
        if (model.conditional) {
            forced_nc = static_cast<size_t>(batch_rng.uniform_int(
                static_cast<int64_t>(task_cfg.nc_min), static_cast<int64_t>(task_cfg.nc_max)));
        } else {
            forced_nc = 0;
        }
        model.params.zero_grads();
        double batch_loss = 0.0;
        size_t batch_pairs = 0;
        for (size_t b = 0; b < cfg.batch_tasks; ++b) {
            ToyTask task = sample_toy_task(pool.train, pool.lang, task_cfg, batch_rng, forced_nc);
            Tape tape;
            Var loss = np_dpo_task_loss_tape(tape, model, pool, pool.train, task, true, &dropout_rng);
            const double lv = tape.value(loss).item();
            if (!std::isfinite(lv))
                throw std::runtime_error("train_np_dpo: non-finite loss at step " + std::to_string(step));
            batch_loss += lv;
            batch_pairs += task.target_ids.size();
            tape.backward(loss);
        }
        model.params.scale_grads(1.0 / static_cast<double>(batch_pairs));
        adam_step(adam_cfg, model.params, adam, static_cast<int64_t>(step));

        const double mean_loss = batch_loss / static_cast<double>(batch_pairs);
        diverged_streak = mean_loss > divergence_level ? diverged_streak + 1 : 0;
        if (diverged_streak >= 100)
            throw std::runtime_error("train_np_dpo: loss diverged for 100 consecutive steps at step " +
                                     std::to_string(step));

        if (step % cfg.val_every == 0 || step == cfg.max_steps) {
            const double vloss = val_loss();
            result.log.push_back({step, mean_loss, vloss});
            if (vloss < result.best_val_loss) snapshot(step, vloss);
        }
    }
    return result;
}

struct DPOTrainOutput {
    PolicyTrainResult conditional;  // NP-DPO
    PolicyTrainResult baseline;     // BTL-DPO
};

inline DPOTrainOutput train_np_dpo(const ToyLanguageSpec& lang, const ToyPool& pool,
                                   const PolicySpec& pspec, const DPOConfig& cfg,
                                   const TaskConfig& task_cfg) {
    DPOTrainOutput out;
    NPDPOModel conditional = make_np_dpo(lang, pspec, cfg.beta, true, cfg.seed);
    out.conditional = train_np_dpo_variant(conditional, pool, cfg, task_cfg);
    NPDPOModel baseline = make_np_dpo(lang, pspec, cfg.beta, false, cfg.seed);
    out.baseline = train_np_dpo_variant(baseline, pool, cfg, task_cfg);
    return out;
}

// fraction of eval pairs whose labeled winner has the larger implicit reward
inline AccuracyTable eval_implicit_accuracy(const NPDPOModel& m,
                                            const std::vector<ToyPairRecord>& split,
                                            const std::vector<ToyTask>& tasks,
                                            GroupBy group = GroupBy::none) {
    std::vector<TaskOutcome> outcomes(tasks.size());
    parallel_for(tasks.size(), [&](size_t ti) {
        const ToyTask& task = tasks[ti];
        std::vector<FilmTensors> film;
        const std::vector<FilmTensors>* film_ptr = nullptr;
        if (m.conditional) {
            const Tensor z = encode_context_eval(m.params, "enc", m.enc, task.context_features);
            film = hypernet_film_eval(m.params, "hyper", z, m.pspec.n_blocks);
            film_ptr = &film;
        }
        size_t correct = 0, total = 0;
        for (size_t i = task.n_context; i < task.target_ids.size(); ++i) {
            const ToyPairRecord& rec = split[task.target_ids[i]];
            const auto& wresp = task.first_wins[i] ? rec.resp1 : rec.resp2;
            const auto& lresp = task.first_wins[i] ? rec.resp2 : rec.resp1;
            const double ref_w = task.first_wins[i] ? rec.ref_lp1 : rec.ref_lp2;
            const double ref_l = task.first_wins[i] ? rec.ref_lp2 : rec.ref_lp1;
            const double rw = m.beta * (response_logprob_eval(m.params, "policy", m.pspec,
                                                              rec.prompt, wresp, film_ptr) -
                                        ref_w);
            const double rl = m.beta * (response_logprob_eval(m.params, "policy", m.pspec,
                                                              rec.prompt, lresp, film_ptr) -
                                        ref_l);
            ++total;
            if (rw > rl) ++correct;
        }
        outcomes[ti].n_context = task.n_context;
        outcomes[ti].latent = task.user_latent;
        outcomes[ti].accuracy = total == 0 ? std::nullopt
                                           : std::optional<double>(static_cast<double>(correct) /
                                                                   static_cast<double>(total));
    });
    return accuracy_table(outcomes, group);
}

// autoregressive sampling from the context-conditioned policy
inline std::vector<uint32_t> sample_response(const NPDPOModel& m,
                                             const std::vector<uint32_t>& prompt,
                                             const std::vector<PreferencePair>& context,
                                             double temperature, RngStream& rng,
                                             size_t response_len) {
    std::vector<FilmTensors> film;
    const std::vector<FilmTensors>* film_ptr = nullptr;
    if (m.conditional) {
        const Tensor z = encode_context_eval(m.params, "enc", m.enc, context);
        film = hypernet_film_eval(m.params, "hyper", z, m.pspec.n_blocks);
        film_ptr = &film;
    }
    return sample_response_from(m.params, "policy", m.pspec, prompt, film_ptr, temperature, rng,
                                response_len);
}

}  // namespace prefnp
