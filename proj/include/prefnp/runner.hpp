#pragma once
// Reproducible experiment pipelines: data generation, training, evaluation
// grids, embedding projections, oracle curves, scaling benchmarks, and
// plot-ready report emission. Every random quantity derives from the config
// seed through named substreams; metric files are byte-stable across runs.

#include <chrono>
#include <filesystem>
#include <map>

#include "bench.hpp"
#include "config.hpp"
#include "oracle.hpp"
#include "pca.hpp"
#include "tables.hpp"

namespace prefnp {

struct RunSummary {
    std::string out_dir;
    std::vector<std::string> files;
    json manifest;
};

namespace detail {

class ReportWriter {
public:
    ReportWriter(const ExperimentConfig& config) : config_(config), hash_(config_hash(config)) {
        std::error_code ec;
        std::filesystem::create_directories(config.out_dir, ec);
        if (ec) throw IoError("cannot create out_dir " + config.out_dir + ": " + ec.message());
        start_ = std::chrono::steady_clock::now();
        manifest_["experiment_id"] = config.experiment_id;
        manifest_["code_version"] = PREFNP_VERSION;
        manifest_["config_hash"] = hash_;
        manifest_["seed"] = config.seed;
        manifest_["notes"] = json::array();
        note("accuracy_stderr is the standard error across tasks, not across pairs");
    }

    const std::string& hash() const { return hash_; }

    void note(const std::string& text) { manifest_["notes"].push_back(text); }

    void write(const std::string& name, const std::string& content) {
        try {
            write_file_atomic(path(name), content);
        } catch (const std::exception& e) {
            throw IoError(e.what());
        }
        files_.push_back(name);
    }

    void write_table(const std::string& name, const TsvTable& table) {
        write(name, table.to_text());
    }

    void write_json(const std::string& name, const json& j) { write(name, j.dump(1, '\t') + "\n"); }

    void stage_done(const std::string& stage) {
        const auto now = std::chrono::steady_clock::now();
        runtimes_[stage] = std::chrono::duration<double>(now - stage_start_).count();
        stage_start_ = now;
    }

    RunSummary finish(const ExperimentConfig& config) {
        // wall-clock figures are measurements, not part of the deterministic
        // metric surface; they live only in the manifest
        json rt;
        for (const auto& [stage, seconds] : runtimes_) rt[stage] = seconds;
        manifest_["runtime_seconds"] = rt;
        manifest_["total_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        manifest_["files"] = files_;
        write_json("config.json", config_to_json(config));
        write_json("manifest.json", manifest_);
        RunSummary summary;
        summary.out_dir = config.out_dir;
        summary.files = files_;
        summary.manifest = manifest_;
        return summary;
    }

    std::string path(const std::string& name) const { return config_.out_dir + "/" + name; }

private:
    const ExperimentConfig& config_;
    std::string hash_;
    json manifest_;
    std::vector<std::string> files_;
    std::map<std::string, double> runtimes_;
    std::chrono::steady_clock::time_point start_;
    std::chrono::steady_clock::time_point stage_start_ = std::chrono::steady_clock::now();
};

inline TsvTable metrics_table() {
    TsvTable t;
    t.header = {"model",         "family",          "n_context", "z_star", "n_tasks",
                "accuracy_mean", "accuracy_stderr", "seed",      "config_hash"};
    return t;
}

inline void append_accuracy(TsvTable& metrics, const AccuracyTable& acc, const std::string& model,
                            const std::string& family, uint64_t seed, const std::string& hash) {
    for (const AccuracyCell& cell : acc.cells) {
        metrics.add_row({model, family, std::to_string(cell.n_context), cell.z_star,
                         std::to_string(cell.n_tasks), format_double(cell.mean),
                         format_double(cell.stderr_), std::to_string(seed), hash});
    }
}

inline TsvTable train_log_table(const std::vector<StepLog>& log) {
    TsvTable t;
    t.header = {"step", "train_loss", "val_loss"};
    for (const StepLog& entry : log)
        t.add_row({std::to_string(entry.step), format_double(entry.train_loss),
                   format_double(entry.val_loss)});
    return t;
}

inline std::vector<Task> make_eval_tasks(const PairPool& pool, const TaskConfig& task_cfg,
                                         size_t nc, size_t count, uint64_t seed) {
    std::vector<Task> tasks;
    tasks.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        RngStream trng = RngStream::derive(seed, "eval.tasks", (static_cast<uint64_t>(nc) << 32) | i);
        tasks.push_back(sample_task(pool.test, pool.spec, task_cfg, trng, nc));
    }
    return tasks;
}

inline GroupBy group_for(const PopulationSpec& population) {
    return population.family == RewardFamily::dirichlet ? GroupBy::z0_bin : GroupBy::z_mode;
}

inline RewardModelKind reward_kind_from_name(const std::string& name) {
    if (name == "btl") return RewardModelKind::btl;
    if (name == "dpl") return RewardModelKind::dpl;
    if (name == "np_btl") return RewardModelKind::np_btl;
    throw ConfigError("not a reward model: " + name);
}

}  // namespace detail

// ---- reward pipeline (btl / dpl / np_btl) ----

inline RunSummary run_reward_experiment(const ExperimentConfig& config) {
    detail::ReportWriter report(config);

    RngStream data_rng = RngStream::derive(config.seed, "data");
    PairPool pool = build_pool(config.population, data_rng);
    report.write("pool.txt", pool_to_text(pool));
    report.stage_done("generate");

    TrainConfig train_cfg = config.train;
    train_cfg.seed = config.seed;
    NPEncoderSpec enc;
    enc.variant = config.encoder_variant;
    const RewardModelKind kind = detail::reward_kind_from_name(config.model);
    RewardTrainResult trained = train_reward(kind, pool, train_cfg, config.task, enc);
    save_checkpoint(trained.checkpoint, report.path("checkpoint.json"));
    report.write_table("train_log.tsv", detail::train_log_table(trained.log));
    report.stage_done("train");

    RewardModel model = reward_model_from_checkpoint(trained.checkpoint);
    TsvTable metrics = detail::metrics_table();
    const GroupBy group = detail::group_for(config.population);
    std::vector<Task> logged_tasks;
    for (size_t nc : config.eval.n_context_grid) {
        std::vector<Task> tasks =
            detail::make_eval_tasks(pool, config.task, nc, config.eval.n_test_tasks, config.seed);
        AccuracyTable acc = evaluate_accuracy(model, tasks, group);
        detail::append_accuracy(metrics, acc, config.model, family_name(config.population.family),
                                config.seed, report.hash());
        if (logged_tasks.empty()) logged_tasks = std::move(tasks);
    }
    report.write_table("metrics.tsv", metrics);
    report.write("tasks.txt", tasks_to_text(logged_tasks));
    report.stage_done("eval");

    // context-embedding projections for the conditional model
    if (kind == RewardModelKind::np_btl) {
        const auto& np = std::get<NPBTLModel>(model);
        TsvTable pca_table;
        pca_table.header = {"n_context", "task_index", "z_star", "pc1", "pc2"};
        TsvTable sil_table;
        sil_table.header = {"n_context", "silhouette_mean", "silhouette_stderr", "n_points"};
        for (size_t nc : config.eval.n_context_grid) {
            if (nc == 0) continue;  // the empty-context embedding is a constant
            std::vector<Task> tasks = detail::make_eval_tasks(pool, config.task, nc,
                                                              config.eval.n_test_tasks, config.seed);
            std::vector<Tensor> embeddings(tasks.size());
            parallel_for(tasks.size(), [&](size_t i) {
                embeddings[i] = encode_context(np, tasks[i].context);
            });
            PcaResult pca = pca_project(embeddings, 2);
            if (pca.degenerate) report.note("pca at n_context " + std::to_string(nc) + " degenerate");
            std::vector<std::string> labels(tasks.size());
            for (size_t i = 0; i < tasks.size(); ++i)
                labels[i] = z_group_key(tasks[i].user_latent, group);
            for (size_t i = 0; i < tasks.size(); ++i)
                pca_table.add_row({std::to_string(nc), std::to_string(i), labels[i],
                                   format_double(pca.coords.at(i, 0)),
                                   format_double(pca.coords.at(i, 1))});
            SilhouetteResult sil = cluster_separation(pca.coords, labels);
            sil_table.add_row({std::to_string(nc), format_double(sil.mean),
                               format_double(sil.stderr_), std::to_string(sil.per_point.size())});
        }
        report.write_table("fig3_pca.tsv", pca_table);
        report.write_table("silhouette.tsv", sil_table);
        report.stage_done("pca");
    }

    // figure analogues
    if (config.population.family == RewardFamily::piecewise1d) {
        TsvTable fig;
        fig.header = {"n_context", "accuracy_mean", "accuracy_stderr"};
        for (const auto& row : metrics.rows)
            if (row[metrics.column("z_star")] == "all")
                fig.add_row({row[metrics.column("n_context")], row[metrics.column("accuracy_mean")],
                             row[metrics.column("accuracy_stderr")]});
        report.write_table("fig1b_accuracy.tsv", fig);
    } else if (config.population.family == RewardFamily::kmode) {
        TsvTable fig;
        fig.header = {"model", "n_context", "z_star", "accuracy_mean", "accuracy_stderr"};
        for (const auto& row : metrics.rows)
            fig.add_row({config.model, row[metrics.column("n_context")],
                         row[metrics.column("z_star")], row[metrics.column("accuracy_mean")],
                         row[metrics.column("accuracy_stderr")]});
        report.write_table("fig2_accuracy.tsv", fig);
    } else if (config.population.family == RewardFamily::dirichlet) {
        TsvTable fig;
        fig.header = {"n_context", "z_bin", "n_tasks", "accuracy_mean", "accuracy_stderr"};
        for (const auto& row : metrics.rows) {
            const std::string& z = row[metrics.column("z_star")];
            if (z.rfind("bin", 0) != 0) continue;
            fig.add_row({row[metrics.column("n_context")], z.substr(3),
                         row[metrics.column("n_tasks")], row[metrics.column("accuracy_mean")],
                         row[metrics.column("accuracy_stderr")]});
        }
        report.write_table("figD2_simplex_bins.tsv", fig);
    } else {
        report.note("no figure analogue for family " + family_name(config.population.family));
    }
    report.stage_done("emit");
    return report.finish(config);
}

// ---- policy pipeline (np_dpo / btl_dpo) ----

inline ToyLanguageSpec resolve_toy_language(const ExperimentConfig& config) {
    ToyLanguageSpec lang = config.toy_language;
    const size_t k = std::max<size_t>(lang.attribute_weights.size(), 2);
    RngStream lang_rng = RngStream::derive(config.seed, "lang");
    lang.attribute_weights =
        make_attribute_weights(k, lang.vocab_size, lang.weight_correlation, lang_rng);
    return lang;
}

inline PolicySpec policy_spec_for(const ToyLanguageSpec& lang) {
    PolicySpec spec;
    spec.vocab_size = lang.vocab_size;
    spec.max_seq = lang.seq_len();
    return spec;
}

inline std::string toy_pool_to_text(const ToyPool& pool) {
    std::string out = "prefnp-toypool v1\n";
    uint32_t id = 0;
    auto join_tokens = [](const std::vector<uint32_t>& toks) {
        std::string s;
        for (size_t i = 0; i < toks.size(); ++i) {
            if (i) s += ',';
            s += std::to_string(toks[i]);
        }
        return s;
    };
    auto emit = [&](const std::vector<ToyPairRecord>& recs, const char* split) {
        for (const ToyPairRecord& r : recs) {
            out += std::to_string(id++);
            out += '\t';
            out += split;
            out += '\t';
            out += join_tokens(r.prompt);
            out += '\t';
            out += join_tokens(r.resp1);
            out += '\t';
            out += join_tokens(r.resp2);
            out += '\t';
            out += join_doubles(r.h1);
            out += '\t';
            out += join_doubles(r.h2);
            out += '\n';
        }
    };
    emit(pool.train, "train");
    emit(pool.val, "val");
    emit(pool.test, "test");
    return out;
}

inline RunSummary run_policy_experiment(const ExperimentConfig& config) {
    detail::ReportWriter report(config);

    const ToyLanguageSpec lang = resolve_toy_language(config);
    const PolicySpec pspec = policy_spec_for(lang);
    DPOConfig dpo_cfg = config.dpo;
    dpo_cfg.seed = config.seed;

    // the reference policy both generates the data and anchors the implicit
    // rewards, so build it first
    NPDPOModel seed_model = make_np_dpo(lang, pspec, dpo_cfg.beta, false, config.seed);
    RngStream data_rng = RngStream::derive(config.seed, "data");
    ToyPool pool = gen_toy_preferences(lang, seed_model.ref_params, pspec, config.population.n_train,
                                       config.population.n_val, config.population.n_test,
                                       config.population.conflict_filter, data_rng);
    report.write("toy_pool.txt", toy_pool_to_text(pool));
    report.stage_done("generate");

    std::vector<std::pair<std::string, PolicyTrainResult>> results;
    if (config.model == "np_dpo") {
        DPOTrainOutput out = train_np_dpo(lang, pool, pspec, dpo_cfg, config.task);
        results.emplace_back("np_dpo", std::move(out.conditional));
        results.emplace_back("btl_dpo", std::move(out.baseline));
    } else {
        NPDPOModel baseline = make_np_dpo(lang, pspec, dpo_cfg.beta, false, config.seed);
        results.emplace_back("btl_dpo", train_np_dpo_variant(baseline, pool, dpo_cfg, config.task));
    }
    for (auto& [name, result] : results) {
        save_checkpoint(result.checkpoint,
                        report.path(name == "np_dpo" ? "checkpoint.json" : "checkpoint_baseline.json"));
        report.write_table(name == "np_dpo" ? "train_log.tsv" : "train_log_baseline.tsv",
                           detail::train_log_table(result.log));
    }
    report.stage_done("train");

    TsvTable metrics = detail::metrics_table();
    TsvTable fig;
    fig.header = {"model", "n_context", "z_star", "accuracy_mean", "accuracy_stderr"};
    for (auto& [name, result] : results) {
        NPDPOModel model = np_dpo_from_checkpoint(result.checkpoint);
        for (size_t nc : config.eval.n_context_grid) {
            std::vector<ToyTask> tasks;
            for (size_t i = 0; i < config.eval.n_test_tasks; ++i) {
                RngStream trng = RngStream::derive(config.seed, "eval.tasks",
                                                   (static_cast<uint64_t>(nc) << 32) | i);
                tasks.push_back(sample_toy_task(pool.test, lang, config.task, trng, nc));
            }
            AccuracyTable acc = eval_implicit_accuracy(model, pool.test, tasks, GroupBy::z_mode);
            detail::append_accuracy(metrics, acc, name, "toy_lang", config.seed, report.hash());
            for (const AccuracyCell& cell : acc.cells)
                fig.add_row({name, std::to_string(cell.n_context), cell.z_star,
                             format_double(cell.mean), format_double(cell.stderr_)});
        }
    }
    report.write_table("metrics.tsv", metrics);
    report.write_table("fig2_accuracy.tsv", fig);
    report.stage_done("eval");

    // steering demonstration: mean attribute scores of sampled responses
    // conditioned on mode-0 vs mode-1 contexts
    if (config.model == "np_dpo") {
        NPDPOModel model = np_dpo_from_checkpoint(results[0].second.checkpoint);
        TsvTable steer;
        steer.header = {"context_mode", "n_samples", "mean_h0", "mean_h1"};
        for (size_t mode = 0; mode < lang.k(); ++mode) {
            RngStream srng = RngStream::derive(config.seed, "steer", mode);
            double sum_h0 = 0.0, sum_h1 = 0.0;
            const size_t n_samples = 200;
            for (size_t s = 0; s < n_samples; ++s) {
                // a fresh mode-consistent context from test pairs
                std::vector<PreferencePair> ctx;
                while (ctx.size() < 6) {
                    const ToyPairRecord& rec = pool.test[srng.below(pool.test.size())];
                    if (rec.h1[mode] == rec.h2[mode]) continue;
                    PreferencePair pair;
                    if (rec.h1[mode] > rec.h2[mode]) {
                        pair.winner = response_features(lang, rec.resp1);
                        pair.loser = response_features(lang, rec.resp2);
                    } else {
                        pair.winner = response_features(lang, rec.resp2);
                        pair.loser = response_features(lang, rec.resp1);
                    }
                    ctx.push_back(std::move(pair));
                }
                const auto prompt = sample_tokens(lang.prompt_len, lang.vocab_size, srng);
                const auto resp = sample_response(model, prompt, ctx, 1.0, srng, lang.response_len);
                sum_h0 += attribute_score(lang, resp, 0);
                sum_h1 += attribute_score(lang, resp, 1);
            }
            steer.add_row({std::to_string(mode), std::to_string(200),
                           format_double(sum_h0 / 200.0), format_double(sum_h1 / 200.0)});
        }
        report.write_table("steering.tsv", steer);
        report.stage_done("steer");
    }
    return report.finish(config);
}

// ---- identifiability pipeline (fig. 4 analogue + arcsin law) ----

inline RunSummary run_bayes_curve(const ExperimentConfig& config) {
    detail::ReportWriter report(config);
    report.note("np identification error: majority agreement over 20 fresh probe pairs per latent, ties by coin");

    TsvTable oracle_table;
    oracle_table.header = {"rho", "closed_form_error", "mc_error", "mc_stderr", "n_trials"};
    for (double rho : config.oracle.rho_eval_grid) {
        const McEstimate mc = mc_error_estimate(rho, config.oracle.mc_trials, 1,
                                                fnv1a_u64(config.seed, fnv1a("mc")));
        oracle_table.add_row({format_double(rho), format_double(closed_form_error(rho)),
                              format_double(mc.mean), format_double(mc.stderr_),
                              std::to_string(mc.n_trials)});
    }
    report.write_table("oracle.tsv", oracle_table);
    report.stage_done("oracle");

    TsvTable fig;
    fig.header = {"rho_train", "rho_eval", "n_context", "np_error", "np_stderr",
                  "bayes_error", "n_trials"};
    for (size_t mi = 0; mi < config.oracle.rho_train_grid.size(); ++mi) {
        const double rho_train = config.oracle.rho_train_grid[mi];
        ExperimentConfig sub = config;
        sub.population.rho = rho_train;

        RngStream data_rng = RngStream::derive(config.seed, "data", mi);
        PairPool pool = build_pool(sub.population, data_rng);
        TrainConfig train_cfg = config.train;
        train_cfg.seed = fnv1a_u64(config.seed, fnv1a_u64(mi, fnv1a("bayes_train")));
        NPEncoderSpec enc;
        enc.variant = config.encoder_variant;
        RewardTrainResult trained =
            train_reward(RewardModelKind::np_btl, pool, train_cfg, config.task, enc);
        save_checkpoint(trained.checkpoint,
                        report.path("checkpoint_rho" + std::to_string(mi) + ".json"));

        RewardModel model_any = reward_model_from_checkpoint(trained.checkpoint);
        const auto& model = std::get<NPBTLModel>(model_any);
        auto curve = np_vs_bayes_curve(model, rho_train, config.oracle.rho_eval_grid,
                                       config.oracle.n_trials,
                                       fnv1a_u64(config.seed, fnv1a_u64(mi, fnv1a("curve"))));
        for (const CurvePoint& pt : curve)
            fig.add_row({format_double(pt.rho_train), format_double(pt.rho_eval),
                         std::to_string(pt.n_context), format_double(pt.np_error),
                         format_double(pt.np_stderr), format_double(pt.bayes_error),
                         std::to_string(pt.n_trials)});
        report.stage_done("model_rho" + std::to_string(mi));
    }
    report.write_table("fig4_error_curves.tsv", fig);
    return report.finish(config);
}

// ---- conflict-rate sweep (fig. 5 analogue) ----

inline RunSummary run_conflict_sweep(const ExperimentConfig& config) {
    detail::ReportWriter report(config);

    // targets always come from a fully conflicting pool; the context rate is
    // swept at evaluation time
    TsvTable table;
    table.header = {"train_rate", "context_rate", "n_context", "n_tasks",
                    "accuracy_mean", "accuracy_stderr"};

    ExperimentConfig target_cfg = config;
    target_cfg.population.conflict_filter = 1.0;
    RngStream target_rng = RngStream::derive(config.seed, "sweep.targets");
    PairPool target_pool = build_pool(target_cfg.population, target_rng);

    std::vector<PairPool> context_pools;
    for (size_t ci = 0; ci < config.sweep.context_conflict_rates.size(); ++ci) {
        ExperimentConfig ctx_cfg = config;
        ctx_cfg.population.conflict_filter = config.sweep.context_conflict_rates[ci];
        RngStream ctx_rng = RngStream::derive(config.seed, "sweep.contexts", ci);
        context_pools.push_back(build_pool(ctx_cfg.population, ctx_rng));
    }
    report.stage_done("generate");

    for (size_t mi = 0; mi < config.sweep.train_conflict_rates.size(); ++mi) {
        const double train_rate = config.sweep.train_conflict_rates[mi];
        ExperimentConfig sub = config;
        sub.population.conflict_filter = train_rate;
        RngStream data_rng = RngStream::derive(config.seed, "data", mi);
        PairPool pool = build_pool(sub.population, data_rng);
        TrainConfig train_cfg = config.train;
        train_cfg.seed = fnv1a_u64(config.seed, fnv1a_u64(mi, fnv1a("sweep_train")));
        NPEncoderSpec enc;
        enc.variant = config.encoder_variant;
        RewardTrainResult trained =
            train_reward(RewardModelKind::np_btl, pool, train_cfg, config.task, enc);
        save_checkpoint(trained.checkpoint,
                        report.path("checkpoint_rate" + std::to_string(mi) + ".json"));
        RewardModel model_any = reward_model_from_checkpoint(trained.checkpoint);
        const auto& model = std::get<NPBTLModel>(model_any);

        for (size_t ci = 0; ci < config.sweep.context_conflict_rates.size(); ++ci) {
            const PairPool& ctx_pool = context_pools[ci];
            const size_t nc = config.sweep.eval_n_context;
            std::vector<TaskOutcome> outcomes(config.eval.n_test_tasks);
            parallel_for(config.eval.n_test_tasks, [&](size_t ti) {
                RngStream trng = RngStream::derive(config.seed, "sweep.eval",
                                                   (static_cast<uint64_t>(mi * 16 + ci) << 32) | ti);
                const LatentGroundTruth z = config.population.latent_dist.sample(trng);
                // context from the swept pool, labeled by this user
                std::vector<PreferencePair> context;
                while (context.size() < nc) {
                    const PairRecord& rec = ctx_pool.test[trng.below(ctx_pool.test.size())];
                    const double r1 = record_reward(ctx_pool.spec, rec, true, z);
                    const double r2 = record_reward(ctx_pool.spec, rec, false, z);
                    if (r1 == r2) continue;
                    context.push_back(r1 > r2 ? PreferencePair{rec.y1, rec.y2}
                                              : PreferencePair{rec.y2, rec.y1});
                }
                // fully conflicting unseen targets
                std::vector<PreferencePair> targets;
                while (targets.size() < config.task.n_target) {
                    const PairRecord& rec = target_pool.test[trng.below(target_pool.test.size())];
                    const double r1 = record_reward(target_pool.spec, rec, true, z);
                    const double r2 = record_reward(target_pool.spec, rec, false, z);
                    if (r1 == r2) continue;
                    targets.push_back(r1 > r2 ? PreferencePair{rec.y1, rec.y2}
                                              : PreferencePair{rec.y2, rec.y1});
                }
                const Tensor zc = encode_context(model, context);
                const Tensor r = np_btl_rewards_eval(model, options_matrix(targets), zc);
                size_t correct = 0;
                for (size_t i = 0; i < targets.size(); ++i)
                    if (r.data[i] > r.data[targets.size() + i]) ++correct;
                outcomes[ti].n_context = nc;
                outcomes[ti].latent = z;
                outcomes[ti].accuracy =
                    static_cast<double>(correct) / static_cast<double>(targets.size());
            });
            AccuracyTable acc = accuracy_table(outcomes, GroupBy::none);
            const AccuracyCell* cell = acc.find(nc, "all");
            table.add_row({format_double(train_rate),
                           format_double(config.sweep.context_conflict_rates[ci]),
                           std::to_string(nc), std::to_string(cell->n_tasks),
                           format_double(cell->mean), format_double(cell->stderr_)});
        }
        report.stage_done("model_rate" + std::to_string(mi));
    }
    report.write_table("conflict_sweep.tsv", table);
    return report.finish(config);
}

// ---- scaling benchmark ----

inline RunSummary run_scaling_bench(const ExperimentConfig& config) {
    detail::ReportWriter report(config);
    NPEncoderSpec enc;
    enc.variant = config.encoder_variant;
    enc.input_dim = config.population.option_dim();
    NPBTLModel model = make_np_btl(enc, config.seed);

    auto points = bench_scaling(model, config.bench.nc_grid, config.bench.n_targets,
                                config.bench.repeats, config.seed);
    TsvTable table;
    table.header = {"n_context", "encode_ms", "decode_ms"};
    std::vector<double> xs, enc_ys, dec_ys;
    for (const BenchPoint& pt : points) {
        table.add_row({std::to_string(pt.n_context), format_double(pt.encode_ms),
                       format_double(pt.decode_ms)});
        xs.push_back(static_cast<double>(pt.n_context));
        enc_ys.push_back(pt.encode_ms);
        dec_ys.push_back(pt.decode_ms);
    }
    report.write_table("bench.tsv", table);

    const LinearFit enc_fit = fit_line(xs, enc_ys);
    const LinearFit dec_fit = fit_line(xs, dec_ys);
    TsvTable fits;
    fits.header = {"component", "slope_ms_per_pair", "intercept_ms", "r_squared"};
    fits.add_row({"encode", format_double(enc_fit.slope), format_double(enc_fit.intercept),
                  format_double(enc_fit.r_squared)});
    fits.add_row({"decode", format_double(dec_fit.slope), format_double(dec_fit.intercept),
                  format_double(dec_fit.r_squared)});
    report.write_table("bench_fit.tsv", fits);
    report.stage_done("bench");
    return report.finish(config);
}

inline RunSummary run_experiment(const ExperimentConfig& config) {
    config.population.validate();
    config.task.validate();
    if (config.is_policy_model()) return run_policy_experiment(config);
    if (config.experiment_id == "bayes-curve") return run_bayes_curve(config);
    if (config.experiment_id == "conflict-sweep") return run_conflict_sweep(config);
    if (config.experiment_id == "scaling-bench") return run_scaling_bench(config);
    return run_reward_experiment(config);
}

}  // namespace prefnp
