#pragma once
// Reward-model training (Adam over batches of tasks, best-validation
// checkpoint selection) and the unseen-pair accuracy evaluator.

#include <limits>
#include <map>
#include <variant>

#include "adam.hpp"
#include "rewards.hpp"
#include "threads.hpp"

namespace prefnp {

enum class RewardModelKind { btl, dpl, np_btl };

inline std::string reward_kind_name(RewardModelKind k) {
    switch (k) {
        case RewardModelKind::btl: return "btl";
        case RewardModelKind::dpl: return "dpl";
        case RewardModelKind::np_btl: return "np_btl";
    }
    return "?";
}

struct TrainConfig {
    size_t batch_tasks = 64;
    size_t max_steps = 50;       // 450 for the kmode proxies
    double learning_rate = 1e-4;
    uint64_t seed = 0;
    size_t n_val_tasks = 200;    // fixed pre-sampled validation task set
    // optional context-free warm-up: the first phase trains on empty-context
    // tasks only (matures the unconditional reward shape), then the
    // conditional phase runs at post_warmup_lr (0 keeps learning_rate)
    size_t context_free_warmup = 0;
    double post_warmup_lr = 0.0;
};

struct StepLog {
    size_t step;
    double train_loss;
    double val_loss;
};

using RewardModel = std::variant<BTLModel, DPLModel, NPBTLModel>;

inline RewardModelKind reward_model_kind(const RewardModel& m) {
    if (std::holds_alternative<BTLModel>(m)) return RewardModelKind::btl;
    if (std::holds_alternative<DPLModel>(m)) return RewardModelKind::dpl;
    return RewardModelKind::np_btl;
}

inline ParamSet& reward_model_params(RewardModel& m) {
    return std::visit([](auto& model) -> ParamSet& { return model.params; }, m);
}

inline const ParamSet& reward_model_params(const RewardModel& m) {
    return std::visit([](const auto& model) -> const ParamSet& { return model.params; }, m);
}

inline json reward_model_spec_json(const RewardModel& m) {
    json j;
    if (const auto* btl = std::get_if<BTLModel>(&m)) {
        j["input_dim"] = btl->net.in_dim;
        j["hidden_dim"] = btl->net.hidden_dim;
    } else if (const auto* dpl = std::get_if<DPLModel>(&m)) {
        j["input_dim"] = dpl->net.in_dim;
        j["hidden_dim"] = dpl->net.hidden_dim;
    } else {
        const auto& np = std::get<NPBTLModel>(m);
        j["input_dim"] = np.enc.input_dim;
        j["embed_dim"] = np.enc.embed_dim;
        j["encoder"] = encoder_variant_name(np.enc.variant);
        j["attn_heads"] = np.enc.attn_heads;
        j["attn_dropout"] = np.enc.attn_dropout;
        j["inner_dropout"] = np.enc.inner_dropout;
        j["context_dropout"] = np.enc.context_dropout;
    }
    return j;
}

inline RewardModel reward_model_from_checkpoint(const ModelCheckpoint& ckpt) {
    const json& spec = ckpt.spec;
    const size_t input_dim = spec.at("input_dim").get<size_t>();
    RewardModel m;
    if (ckpt.model_kind == "btl") {
        m = make_btl(input_dim, 0);
    } else if (ckpt.model_kind == "dpl") {
        m = make_dpl(input_dim, 0);
    } else if (ckpt.model_kind == "np_btl") {
        NPEncoderSpec enc;
        enc.input_dim = input_dim;
        enc.embed_dim = spec.at("embed_dim").get<size_t>();
        enc.variant = encoder_variant_from(spec.at("encoder").get<std::string>());
        enc.attn_heads = spec.at("attn_heads").get<size_t>();
        enc.attn_dropout = spec.at("attn_dropout").get<double>();
        enc.inner_dropout = spec.at("inner_dropout").get<double>();
        enc.context_dropout = spec.at("context_dropout").get<double>();
        m = make_np_btl(enc, 0);
    } else {
        throw std::runtime_error("reward_model_from_checkpoint: unknown kind " + ckpt.model_kind);
    }
    ParamSet& params = reward_model_params(m);
    if (params.names() != ckpt.params.names())
        throw std::runtime_error("reward_model_from_checkpoint: parameter names do not match");
    for (const auto& name : params.names()) params.value(name) = ckpt.params.value(name);
    return m;
}

// non-conditional baselines train and validate on empty-context tasks
inline bool uses_context(RewardModelKind kind) { return kind == RewardModelKind::np_btl; }

inline double reward_task_loss_eval(const RewardModel& m, const Task& task) {
    if (const auto* btl = std::get_if<BTLModel>(&m)) return btl_task_loss_eval(*btl, task);
    if (const auto* dpl = std::get_if<DPLModel>(&m)) return dpl_task_loss_eval(*dpl, task);
    return np_btl_task_loss_eval(std::get<NPBTLModel>(m), task);
}

struct RewardTrainResult {
    ModelCheckpoint checkpoint;
    std::vector<StepLog> log;
    double best_val_loss = 0.0;
    size_t best_step = 0;
};

inline RewardTrainResult train_reward(RewardModelKind kind, const PairPool& pool,
                                      const TrainConfig& cfg, const TaskConfig& task_cfg,
                                      std::optional<NPEncoderSpec> enc_spec = std::nullopt) {
    task_cfg.validate();
    if (pool.train.empty() || pool.val.empty())
        throw std::invalid_argument("train_reward: empty pool split");

    RewardModel model;
    const size_t input_dim = pool.spec.option_dim();
    switch (kind) {
        case RewardModelKind::btl: model = make_btl(input_dim, cfg.seed); break;
        case RewardModelKind::dpl: model = make_dpl(input_dim, cfg.seed); break;
        case RewardModelKind::np_btl: {
            NPEncoderSpec enc = enc_spec.value_or(NPEncoderSpec{});
            enc.input_dim = input_dim;
            model = make_np_btl(enc, cfg.seed);
            break;
        }
    }

    RngStream batch_rng = RngStream::derive(cfg.seed, "train.batch");
    RngStream dropout_rng = RngStream::derive(cfg.seed, "train.dropout");

    // fixed validation task set
    std::vector<Task> val_tasks;
    val_tasks.reserve(cfg.n_val_tasks);
    for (size_t i = 0; i < cfg.n_val_tasks; ++i) {
        RngStream trng = RngStream::derive(cfg.seed, "val.tasks", i);
        val_tasks.push_back(sample_task(pool.val, pool.spec, task_cfg, trng,
                                        uses_context(kind) ? std::nullopt
                                                           : std::optional<size_t>(0)));
    }
    auto val_loss = [&](const RewardModel& m) {
        std::vector<double> losses(val_tasks.size());
        parallel_for(val_tasks.size(), [&](size_t i) { losses[i] = reward_task_loss_eval(m, val_tasks[i]); });
        double total = 0.0;
        for (double l : losses) total += l;
        return total / static_cast<double>(losses.size());
    };

    RewardTrainResult result;
    ParamSet& params = reward_model_params(model);
    AdamState adam = AdamState::init(params);
    AdamConfig adam_cfg;
    adam_cfg.learning_rate = cfg.learning_rate;

    auto snapshot = [&](size_t step, double vloss) {
        result.best_val_loss = vloss;
        result.best_step = step;
        result.checkpoint.params = params;
        result.checkpoint.step = static_cast<int64_t>(step);
    };
    snapshot(0, val_loss(model));

    for (size_t step = 1; step <= cfg.max_steps; ++step) {
        const bool warmup = step <= cfg.context_free_warmup;
        if (!warmup && cfg.post_warmup_lr > 0.0) adam_cfg.learning_rate = cfg.post_warmup_lr;
        // every task in a batch shares one context size
        std::optional<size_t> forced_nc;
        if (uses_context(kind) && !warmup) {
            forced_nc = static_cast<size_t>(batch_rng.uniform_int(
                static_cast<int64_t>(task_cfg.nc_min), static_cast<int64_t>(task_cfg.nc_max)));
        } else {
            forced_nc = 0;
        }

        params.zero_grads();
        double batch_loss = 0.0;
        for (size_t b = 0; b < cfg.batch_tasks; ++b) {
            Task task = sample_task(pool.train, pool.spec, task_cfg, batch_rng, forced_nc);
            Tape tape;
            Var loss;
            if (auto* btl = std::get_if<BTLModel>(&model)) {
                loss = btl_task_loss_tape(tape, *btl, task);
            } else if (auto* dpl = std::get_if<DPLModel>(&model)) {
                loss = dpl_task_loss_tape(tape, *dpl, task);
            } else {
                loss = np_btl_task_loss_tape(tape, std::get<NPBTLModel>(model), task, true,
                                             &dropout_rng);
            }
            const double lv = tape.value(loss).item();
            if (!std::isfinite(lv))
                throw std::runtime_error("train_reward: non-finite loss at step " +
                                         std::to_string(step));
            batch_loss += lv;
            tape.backward(loss);
        }
        params.scale_grads(1.0 / static_cast<double>(cfg.batch_tasks));
        adam_step(adam_cfg, params, adam, static_cast<int64_t>(step));
        if (!params.values_finite())
            throw std::runtime_error("train_reward: non-finite parameters at step " +
                                     std::to_string(step));

        const double vloss = val_loss(model);
        result.log.push_back({step, batch_loss / static_cast<double>(cfg.batch_tasks), vloss});
        // warm-up states are scaffolding, not checkpoint candidates
        if (vloss < result.best_val_loss && !warmup) snapshot(step, vloss);
    }

    result.checkpoint.model_kind = reward_kind_name(kind);
    result.checkpoint.spec = reward_model_spec_json(model);
    result.checkpoint.rng_seed = cfg.seed;
    return result;
}

// ---- evaluation ----

// probability assigned to the labeled winner for every eval-masked pair
inline std::vector<double> eval_pair_probs(const RewardModel& m, const Task& task) {
    std::vector<double> probs;
    const size_t n = task.target.size();
    std::vector<size_t> eval_ids;
    for (size_t i = 0; i < n; ++i)
        if (task.eval_mask[i]) eval_ids.push_back(i);
    if (eval_ids.empty()) return probs;

    if (const auto* np = std::get_if<NPBTLModel>(&m)) {
        const Tensor z = encode_context(*np, task.context);
        const Tensor r = np_btl_rewards_eval(*np, options_matrix(task.target), z);
        for (size_t i : eval_ids) probs.push_back(btl_prob(r.data[i], r.data[n + i]));
    } else if (const auto* btl = std::get_if<BTLModel>(&m)) {
        const Tensor r = mlp_forward_eval(btl->net, btl->params, "net", options_matrix(task.target));
        for (size_t i : eval_ids) probs.push_back(btl_prob(r.data[i], r.data[n + i]));
    } else {
        const auto& dpl = std::get<DPLModel>(m);
        const Tensor out = mlp_forward_eval(dpl.net, dpl.params, "net", options_matrix(task.target));
        for (size_t i : eval_ids) {
            probs.push_back(dpl_prob(out.at(i, 0), std::exp(out.at(i, 1)), out.at(n + i, 0),
                                     std::exp(out.at(n + i, 1))));
        }
    }
    return probs;
}

// winner predicted iff probability exceeds 0.5; an exact 0.5 counts as wrong
inline std::optional<double> task_accuracy(const RewardModel& m, const Task& task) {
    const std::vector<double> probs = eval_pair_probs(m, task);
    if (probs.empty()) return std::nullopt;
    size_t correct = 0;
    for (double p : probs)
        if (p > 0.5) ++correct;
    return static_cast<double>(correct) / static_cast<double>(probs.size());
}

enum class GroupBy { none, z_mode, z0_bin };

struct AccuracyCell {
    size_t n_context = 0;
    std::string z_star = "all";
    size_t n_tasks = 0;
    double mean = 0.0;
    double stderr_ = 0.0;
};

struct AccuracyTable {
    std::vector<AccuracyCell> cells;
    size_t skipped_empty_eval = 0;

    const AccuracyCell* find(size_t nc, const std::string& z) const {
        for (const auto& c : cells)
            if (c.n_context == nc && c.z_star == z) return &c;
        return nullptr;
    }
};

inline std::string z_group_key(const LatentGroundTruth& z, GroupBy by) {
    if (by == GroupBy::z_mode) return std::to_string(z.mode);
    // ten equal bins over z*_0 in [0,1]
    const double z0 = z.kind == LatentGroundTruth::Kind::simplex ? z.weights[0]
                                                                 : static_cast<double>(z.mode);
    const int bin = std::min(9, std::max(0, static_cast<int>(z0 * 10.0)));
    return "bin" + std::to_string(bin);
}

struct TaskOutcome {
    size_t n_context = 0;
    LatentGroundTruth latent;
    std::optional<double> accuracy;
};

inline AccuracyTable accuracy_table(const std::vector<TaskOutcome>& outcomes, GroupBy group) {
    std::map<std::pair<size_t, std::string>, std::vector<double>> groups;
    AccuracyTable table;
    for (const TaskOutcome& o : outcomes) {
        if (!o.accuracy) {
            ++table.skipped_empty_eval;
            continue;
        }
        groups[{o.n_context, "all"}].push_back(*o.accuracy);
        if (group != GroupBy::none)
            groups[{o.n_context, z_group_key(o.latent, group)}].push_back(*o.accuracy);
    }
    for (auto& [key, accs] : groups) {
        AccuracyCell cell;
        cell.n_context = key.first;
        cell.z_star = key.second;
        cell.n_tasks = accs.size();
        double sum = 0.0;
        for (double a : accs) sum += a;
        cell.mean = sum / static_cast<double>(accs.size());
        double sq = 0.0;
        for (double a : accs) sq += (a - cell.mean) * (a - cell.mean);
        cell.stderr_ = accs.size() > 1 ? std::sqrt(sq / (static_cast<double>(accs.size() - 1))) /
                                             std::sqrt(static_cast<double>(accs.size()))
                                       : 0.0;
        table.cells.push_back(std::move(cell));
    }
    return table;
}

template <typename TaskAccuracyFn>
AccuracyTable accuracy_table_from(const std::vector<Task>& tasks, GroupBy group,
                                  TaskAccuracyFn&& acc_fn) {
    std::vector<TaskOutcome> outcomes(tasks.size());
    parallel_for(tasks.size(), [&](size_t i) {
        outcomes[i] = {tasks[i].context.size(), tasks[i].user_latent, acc_fn(tasks[i])};
    });
    return accuracy_table(outcomes, group);
}

inline AccuracyTable evaluate_accuracy(const RewardModel& m, const std::vector<Task>& tasks,
                                       GroupBy group = GroupBy::none) {
    return accuracy_table_from(tasks, group, [&](const Task& t) { return task_accuracy(m, t); });
}

}  // namespace prefnp
