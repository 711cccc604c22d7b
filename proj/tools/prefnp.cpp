// prefnp: train and evaluate conditional preference models on synthetic
// heterogeneous-preference populations.
//
// Usage:
//   prefnp <generate|train-reward|train-policy|eval|oracle|pca|bench|run>
//          [--config FILE | --preset NAME] [--seed N] [--out DIR] [--ckpt FILE]
//
// Exit codes: 0 success, 2 config error, 3 numerical failure, 4 I/O error.

#include <CLI11.hpp>

#include <cstdio>

#include "prefnp/runner.hpp"

using namespace prefnp;

namespace {

struct CliOptions {
    std::string config_path;
    std::string preset;
    std::string out_dir;
    std::string ckpt_path;
    int64_t seed = -1;
};

ExperimentConfig resolve_config(const CliOptions& opt) {
    if (!opt.config_path.empty() && !opt.preset.empty())
        throw ConfigError("pass either --config or --preset, not both");
    if (opt.config_path.empty() && opt.preset.empty())
        throw ConfigError("one of --config or --preset is required");
    ExperimentConfig config =
        opt.config_path.empty() ? preset_config(opt.preset) : load_config_file(opt.config_path);
    if (opt.seed >= 0) config.seed = static_cast<uint64_t>(opt.seed);
    if (!opt.out_dir.empty()) config.out_dir = opt.out_dir;
    config.population.validate();
    config.task.validate();
    return config;
}

void print_summary(const RunSummary& summary) {
    std::printf("wrote %zu files to %s\n", summary.files.size(), summary.out_dir.c_str());
    for (const auto& f : summary.files) std::printf("  %s\n", f.c_str());
}

int cmd_generate(const ExperimentConfig& config) {
    detail::ReportWriter report(config);
    if (config.is_policy_model()) {
        const ToyLanguageSpec lang = resolve_toy_language(config);
        const PolicySpec pspec = policy_spec_for(lang);
        NPDPOModel seed_model = make_np_dpo(lang, pspec, config.dpo.beta, false, config.seed);
        RngStream data_rng = RngStream::derive(config.seed, "data");
        ToyPool pool = gen_toy_preferences(lang, seed_model.ref_params, pspec,
                                           config.population.n_train, config.population.n_val,
                                           config.population.n_test,
                                           config.population.conflict_filter, data_rng);
        report.write("toy_pool.txt", toy_pool_to_text(pool));
    } else {
        RngStream data_rng = RngStream::derive(config.seed, "data");
        PairPool pool = build_pool(config.population, data_rng);
        report.write("pool.txt", pool_to_text(pool));
    }
    report.stage_done("generate");
    print_summary(report.finish(config));
    return 0;
}

int cmd_eval(const ExperimentConfig& config, const std::string& ckpt_path) {
    const std::string path = ckpt_path.empty() ? config.out_dir + "/checkpoint.json" : ckpt_path;
    ModelCheckpoint ckpt = load_checkpoint(path);
    detail::ReportWriter report(config);
    TsvTable metrics = detail::metrics_table();
    if (ckpt.model_kind == "np_dpo" || ckpt.model_kind == "btl_dpo") {
        NPDPOModel model = np_dpo_from_checkpoint(ckpt);
        const ToyLanguageSpec lang = resolve_toy_language(config);
        const PolicySpec pspec = policy_spec_for(lang);
        NPDPOModel seed_model = make_np_dpo(lang, pspec, config.dpo.beta, false, config.seed);
        RngStream data_rng = RngStream::derive(config.seed, "data");
        ToyPool pool = gen_toy_preferences(lang, seed_model.ref_params, pspec,
                                           config.population.n_train, config.population.n_val,
                                           config.population.n_test,
                                           config.population.conflict_filter, data_rng);
        for (size_t nc : config.eval.n_context_grid) {
            std::vector<ToyTask> tasks;
            for (size_t i = 0; i < config.eval.n_test_tasks; ++i) {
                RngStream trng = RngStream::derive(config.seed, "eval.tasks",
                                                   (static_cast<uint64_t>(nc) << 32) | i);
                tasks.push_back(sample_toy_task(pool.test, lang, config.task, trng, nc));
            }
            AccuracyTable acc = eval_implicit_accuracy(model, pool.test, tasks, GroupBy::z_mode);
            detail::append_accuracy(metrics, acc, ckpt.model_kind, "toy_lang", config.seed,
                                    report.hash());
        }
    } else {
        RewardModel model = reward_model_from_checkpoint(ckpt);
        RngStream data_rng = RngStream::derive(config.seed, "data");
        PairPool pool = build_pool(config.population, data_rng);
        for (size_t nc : config.eval.n_context_grid) {
            auto tasks = detail::make_eval_tasks(pool, config.task, nc, config.eval.n_test_tasks,
                                                 config.seed);
            AccuracyTable acc =
                evaluate_accuracy(model, tasks, detail::group_for(config.population));
            detail::append_accuracy(metrics, acc, ckpt.model_kind,
                                    family_name(config.population.family), config.seed,
                                    report.hash());
        }
    }
    report.write_table("metrics.tsv", metrics);
    report.stage_done("eval");
    print_summary(report.finish(config));
    return 0;
}

int cmd_oracle(const ExperimentConfig& config) {
    detail::ReportWriter report(config);
    TsvTable table;
    table.header = {"rho", "n_context", "closed_form_error", "mc_error", "mc_stderr", "n_trials"};
    for (double rho : config.oracle.rho_eval_grid) {
        const McEstimate mc =
            mc_error_estimate(rho, config.oracle.mc_trials, 1, fnv1a_u64(config.seed, fnv1a("mc")));
        table.add_row({format_double(rho), "1", format_double(closed_form_error(rho)),
                       format_double(mc.mean), format_double(mc.stderr_),
                       std::to_string(mc.n_trials)});
    }
    report.write_table("oracle.tsv", table);
    report.stage_done("oracle");
    print_summary(report.finish(config));
    return 0;
}

int cmd_pca(const ExperimentConfig& config, const std::string& ckpt_path) {
    if (config.is_policy_model()) throw ConfigError("pca expects a reward model config");
    const std::string path = ckpt_path.empty() ? config.out_dir + "/checkpoint.json" : ckpt_path;
    ModelCheckpoint ckpt = load_checkpoint(path);
    RewardModel model_any = reward_model_from_checkpoint(ckpt);
    const auto* np = std::get_if<NPBTLModel>(&model_any);
    if (!np) throw ConfigError("pca needs an np_btl checkpoint");

    detail::ReportWriter report(config);
    RngStream data_rng = RngStream::derive(config.seed, "data");
    PairPool pool = build_pool(config.population, data_rng);
    TsvTable pca_table;
    pca_table.header = {"n_context", "task_index", "z_star", "pc1", "pc2"};
    TsvTable sil_table;
    sil_table.header = {"n_context", "silhouette_mean", "silhouette_stderr", "n_points"};
    const GroupBy group = detail::group_for(config.population);
    for (size_t nc : config.eval.n_context_grid) {
        if (nc == 0) continue;
        auto tasks = detail::make_eval_tasks(pool, config.task, nc, config.eval.n_test_tasks,
                                             config.seed);
        std::vector<Tensor> embeddings(tasks.size());
        parallel_for(tasks.size(),
                     [&](size_t i) { embeddings[i] = encode_context(*np, tasks[i].context); });
        PcaResult pca = pca_project(embeddings, 2);
        std::vector<std::string> labels(tasks.size());
        for (size_t i = 0; i < tasks.size(); ++i)
            labels[i] = z_group_key(tasks[i].user_latent, group);
        for (size_t i = 0; i < tasks.size(); ++i)
            pca_table.add_row({std::to_string(nc), std::to_string(i), labels[i],
                               format_double(pca.coords.at(i, 0)),
                               format_double(pca.coords.at(i, 1))});
        SilhouetteResult sil = cluster_separation(pca.coords, labels);
        sil_table.add_row({std::to_string(nc), format_double(sil.mean), format_double(sil.stderr_),
                           std::to_string(sil.per_point.size())});
    }
    report.write_table("fig3_pca.tsv", pca_table);
    report.write_table("silhouette.tsv", sil_table);
    report.stage_done("pca");
    print_summary(report.finish(config));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"conditional preference models on synthetic heterogeneous populations"};
    app.require_subcommand(1);

    CliOptions opt;
    std::string command;
    for (const char* name : {"generate", "train-reward", "train-policy", "eval", "oracle", "pca",
                             "bench", "run"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", opt.config_path, "experiment config file (JSON)");
        sub->add_option("--preset", opt.preset, "built-in experiment preset");
        sub->add_option("--seed", opt.seed, "root seed override");
        sub->add_option("--out", opt.out_dir, "output directory override");
        sub->add_option("--ckpt", opt.ckpt_path, "checkpoint path (eval/pca)");
        sub->callback([&command, name] { command = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        const ExperimentConfig config = resolve_config(opt);
        if (command == "generate") return cmd_generate(config);
        if (command == "eval") return cmd_eval(config, opt.ckpt_path);
        if (command == "oracle") return cmd_oracle(config);
        if (command == "pca") return cmd_pca(config, opt.ckpt_path);
        if (command == "bench") {
            print_summary(run_scaling_bench(config));
            return 0;
        }
        if (command == "train-reward") {
            if (config.is_policy_model()) throw ConfigError("train-reward expects a reward model");
            print_summary(run_reward_experiment(config));
            return 0;
        }
        if (command == "train-policy") {
            if (!config.is_policy_model()) throw ConfigError("train-policy expects np_dpo or btl_dpo");
            print_summary(run_policy_experiment(config));
            return 0;
        }
        if (command == "run") {
            print_summary(run_experiment(config));
            return 0;
        }
        std::fprintf(stderr, "unknown command\n");
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 4;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    }
}
