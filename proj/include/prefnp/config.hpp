#pragma once
// Experiment configuration: JSON round-trip, named presets, typed errors
// mapped to CLI exit codes.

#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "policy.hpp"
#include "synthdata.hpp"
#include "train_policy.hpp"
#include "train_reward.hpp"
#include "version.hpp"

namespace prefnp {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OracleConfig {
    std::vector<double> rho_train_grid = {-1.0, -0.7, 0.0, 0.7};
    std::vector<double> rho_eval_grid = {-1.0, -0.9, -0.7, -0.5, -0.25, 0.0,
                                         0.25, 0.5,  0.7,  0.9,  1.0};
    size_t n_trials = 2000;       // identification trials per grid point
    size_t mc_trials = 1000000;   // Monte-Carlo trials for the arcsin check
};

struct SweepConfig {
    std::vector<double> train_conflict_rates = {1.0, 0.75, 0.5};
    std::vector<double> context_conflict_rates = {1.0, 0.75, 0.5, 0.25};
    size_t eval_n_context = 10;
};

struct BenchConfig {
    std::vector<size_t> nc_grid = {1, 2, 4, 8, 16, 32, 64, 96, 128, 192, 256, 384, 512};
    size_t n_targets = 20;
    size_t repeats = 9;
};

struct EvalConfig {
    size_t n_test_tasks = 500;
    std::vector<size_t> n_context_grid = {0, 1, 3, 5, 10};
};

struct ExperimentConfig {
    std::string experiment_id;
    PopulationSpec population;
    TaskConfig task;
    std::string model = "np_btl";  // btl | dpl | np_btl | np_dpo | btl_dpo
    TrainConfig train;
    DPOConfig dpo;
    ToyLanguageSpec toy_language;
    EncoderVariant encoder_variant = EncoderVariant::mean;
    EvalConfig eval;
    OracleConfig oracle;
    SweepConfig sweep;
    BenchConfig bench;
    uint64_t seed = 1;
    std::string out_dir = "out";

    bool is_policy_model() const { return model == "np_dpo" || model == "btl_dpo"; }
};

// ---- json round trip ----

inline json latent_dist_to_json(const LatentDist& d) {
    json j;
    switch (d.kind) {
        case LatentDist::Kind::bernoulli:
            j["kind"] = "bernoulli";
            j["p"] = d.p;
            break;
        case LatentDist::Kind::uniform_discrete:
            j["kind"] = "uniform_discrete";
            j["k"] = d.k;
            break;
        case LatentDist::Kind::point:
            j["kind"] = "point";
            j["point"] = d.point;
            break;
        case LatentDist::Kind::dirichlet:
            j["kind"] = "dirichlet";
            j["alpha"] = d.alpha;
            break;
    }
    return j;
}

inline LatentDist latent_dist_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    LatentDist d;
    if (kind == "bernoulli") {
        d.kind = LatentDist::Kind::bernoulli;
        d.p = j.at("p").get<double>();
    } else if (kind == "uniform_discrete") {
        d.kind = LatentDist::Kind::uniform_discrete;
        d.k = j.at("k").get<size_t>();
    } else if (kind == "point") {
        d.kind = LatentDist::Kind::point;
        d.point = j.at("point").get<size_t>();
    } else if (kind == "dirichlet") {
        d.kind = LatentDist::Kind::dirichlet;
        d.alpha = j.at("alpha").get<std::vector<double>>();
    } else {
        throw ConfigError("unknown latent_dist kind " + kind);
    }
    return d;
}

inline RewardFamily family_from_name(const std::string& name) {
    if (name == "piecewise1d") return RewardFamily::piecewise1d;
    if (name == "gaussian2d") return RewardFamily::gaussian2d;
    if (name == "kmode") return RewardFamily::kmode;
    if (name == "dirichlet") return RewardFamily::dirichlet;
    throw ConfigError("unknown family " + name);
}

inline json population_to_json(const PopulationSpec& p) {
    json j;
    j["family"] = family_name(p.family);
    j["rho"] = p.rho;
    j["k"] = p.k;
    j["feature_dim"] = p.feature_dim;
    j["score_noise"] = p.score_noise;
    j["latent_dist"] = latent_dist_to_json(p.latent_dist);
    if (p.conflict_filter)
        j["conflict_filter"] = *p.conflict_filter;
    else
        j["conflict_filter"] = nullptr;
    j["n_train"] = p.n_train;
    j["n_val"] = p.n_val;
    j["n_test"] = p.n_test;
    return j;
}

inline PopulationSpec population_from_json(const json& j) {
    PopulationSpec p;
    p.family = family_from_name(j.at("family").get<std::string>());
    p.rho = j.at("rho").get<double>();
    p.k = j.at("k").get<size_t>();
    p.feature_dim = j.at("feature_dim").get<size_t>();
    p.score_noise = j.at("score_noise").get<double>();
    p.latent_dist = latent_dist_from_json(j.at("latent_dist"));
    if (!j.at("conflict_filter").is_null()) p.conflict_filter = j.at("conflict_filter").get<double>();
    p.n_train = j.at("n_train").get<size_t>();
    p.n_val = j.at("n_val").get<size_t>();
    p.n_test = j.at("n_test").get<size_t>();
    return p;
}

inline json config_to_json(const ExperimentConfig& c) {
    json j;
    j["experiment_id"] = c.experiment_id;
    j["population"] = population_to_json(c.population);
    j["task"] = {{"nc_min", c.task.nc_min}, {"nc_max", c.task.nc_max}, {"n_target", c.task.n_target}};
    j["model"] = c.model;
    j["train"] = {{"batch_tasks", c.train.batch_tasks},
                  {"max_steps", c.train.max_steps},
                  {"learning_rate", c.train.learning_rate},
                  {"n_val_tasks", c.train.n_val_tasks},
                  {"context_free_warmup", c.train.context_free_warmup},
                  {"post_warmup_lr", c.train.post_warmup_lr}};
    j["dpo"] = {{"beta", c.dpo.beta},
                {"learning_rate", c.dpo.learning_rate},
                {"batch_tasks", c.dpo.batch_tasks},
                {"max_steps", c.dpo.max_steps},
                {"n_val_tasks", c.dpo.n_val_tasks},
                {"val_every", c.dpo.val_every}};
    j["toy_language"] = {{"vocab_size", c.toy_language.vocab_size},
                         {"prompt_len", c.toy_language.prompt_len},
                         {"response_len", c.toy_language.response_len},
                         {"k", std::max<size_t>(c.toy_language.attribute_weights.size(), 2)},
                         {"weight_correlation", c.toy_language.weight_correlation}};
    j["encoder_variant"] = encoder_variant_name(c.encoder_variant);
    j["eval"] = {{"n_test_tasks", c.eval.n_test_tasks}, {"n_context_grid", c.eval.n_context_grid}};
    j["oracle"] = {{"rho_train_grid", c.oracle.rho_train_grid},
                   {"rho_eval_grid", c.oracle.rho_eval_grid},
                   {"n_trials", c.oracle.n_trials},
                   {"mc_trials", c.oracle.mc_trials}};
    j["sweep"] = {{"train_conflict_rates", c.sweep.train_conflict_rates},
                  {"context_conflict_rates", c.sweep.context_conflict_rates},
                  {"eval_n_context", c.sweep.eval_n_context}};
    j["bench"] = {{"nc_grid", c.bench.nc_grid},
                  {"n_targets", c.bench.n_targets},
                  {"repeats", c.bench.repeats}};
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;
    return j;
}

inline ExperimentConfig config_from_json(const json& j) {
    try {
        ExperimentConfig c;
        c.experiment_id = j.at("experiment_id").get<std::string>();
        c.population = population_from_json(j.at("population"));
        c.task.nc_min = j.at("task").at("nc_min").get<size_t>();
        c.task.nc_max = j.at("task").at("nc_max").get<size_t>();
        c.task.n_target = j.at("task").at("n_target").get<size_t>();
        c.model = j.at("model").get<std::string>();
        c.train.batch_tasks = j.at("train").at("batch_tasks").get<size_t>();
        c.train.max_steps = j.at("train").at("max_steps").get<size_t>();
        c.train.learning_rate = j.at("train").at("learning_rate").get<double>();
        c.train.n_val_tasks = j.at("train").at("n_val_tasks").get<size_t>();
        c.train.context_free_warmup = j.at("train").at("context_free_warmup").get<size_t>();
        c.train.post_warmup_lr = j.at("train").at("post_warmup_lr").get<double>();
        c.dpo.beta = j.at("dpo").at("beta").get<double>();
        c.dpo.learning_rate = j.at("dpo").at("learning_rate").get<double>();
        c.dpo.batch_tasks = j.at("dpo").at("batch_tasks").get<size_t>();
        c.dpo.max_steps = j.at("dpo").at("max_steps").get<size_t>();
        c.dpo.n_val_tasks = j.at("dpo").at("n_val_tasks").get<size_t>();
        c.dpo.val_every = j.at("dpo").at("val_every").get<size_t>();
        c.toy_language.vocab_size = j.at("toy_language").at("vocab_size").get<size_t>();
        c.toy_language.prompt_len = j.at("toy_language").at("prompt_len").get<size_t>();
        c.toy_language.response_len = j.at("toy_language").at("response_len").get<size_t>();
        c.toy_language.weight_correlation =
            j.at("toy_language").at("weight_correlation").get<double>();
        c.toy_language.attribute_weights.resize(j.at("toy_language").at("k").get<size_t>());
        c.encoder_variant = encoder_variant_from(j.at("encoder_variant").get<std::string>());
        c.eval.n_test_tasks = j.at("eval").at("n_test_tasks").get<size_t>();
        c.eval.n_context_grid = j.at("eval").at("n_context_grid").get<std::vector<size_t>>();
        c.oracle.rho_train_grid = j.at("oracle").at("rho_train_grid").get<std::vector<double>>();
        c.oracle.rho_eval_grid = j.at("oracle").at("rho_eval_grid").get<std::vector<double>>();
        c.oracle.n_trials = j.at("oracle").at("n_trials").get<size_t>();
        c.oracle.mc_trials = j.at("oracle").at("mc_trials").get<size_t>();
        c.sweep.train_conflict_rates =
            j.at("sweep").at("train_conflict_rates").get<std::vector<double>>();
        c.sweep.context_conflict_rates =
            j.at("sweep").at("context_conflict_rates").get<std::vector<double>>();
        c.sweep.eval_n_context = j.at("sweep").at("eval_n_context").get<size_t>();
        c.bench.nc_grid = j.at("bench").at("nc_grid").get<std::vector<size_t>>();
        c.bench.n_targets = j.at("bench").at("n_targets").get<size_t>();
        c.bench.repeats = j.at("bench").at("repeats").get<size_t>();
        c.seed = j.at("seed").get<uint64_t>();
        c.out_dir = j.at("out_dir").get<std::string>();
        if (c.model != "btl" && c.model != "dpl" && c.model != "np_btl" && c.model != "np_dpo" &&
            c.model != "btl_dpo")
            throw ConfigError("unknown model " + c.model);
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config: ") + e.what());
    }
}

// identifies the experiment; the output location is not part of the identity
inline std::string config_hash(const ExperimentConfig& c) {
    json j = config_to_json(c);
    j.erase("out_dir");
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
    return std::string(buf);
}

// ---- presets ----

inline std::vector<std::string> preset_names() {
    return {"example-3-1",  "hh-proxy-2mode", "hht-proxy-3mode", "bayes-curve", "conflict-sweep",
            "dirichlet-2d", "dirichlet-3d",   "np-dpo-toy",      "scaling-bench"};
}

inline ExperimentConfig preset_config(const std::string& name) {
    ExperimentConfig c;
    c.experiment_id = name;
    c.out_dir = "out/" + name;
    c.train.seed = 0;  // derived from the top-level seed by the runner

    if (name == "example-3-1") {
        c.population.family = RewardFamily::piecewise1d;
        c.population.latent_dist = {LatentDist::Kind::bernoulli, 0.5};
        c.model = "np_btl";
        c.encoder_variant = EncoderVariant::mean;
        c.train.max_steps = 340;
        c.train.learning_rate = 1e-3;
        c.train.context_free_warmup = 250;
        c.train.post_warmup_lr = 3e-4;
    } else if (name == "hh-proxy-2mode" || name == "hht-proxy-3mode") {
        const size_t k = name == "hh-proxy-2mode" ? 2 : 3;
        c.population.family = RewardFamily::kmode;
        c.population.k = k;
        c.population.feature_dim = 8;
        c.population.conflict_filter = 1.0;
        c.population.latent_dist = {LatentDist::Kind::uniform_discrete, 0.0, k};
        c.model = "np_btl";
        c.encoder_variant = EncoderVariant::attention;
        c.train.max_steps = 300;
        c.train.learning_rate = 1e-3;
    } else if (name == "bayes-curve") {
        c.population.family = RewardFamily::gaussian2d;
        c.population.rho = -1.0;  // per-model rho comes from oracle.rho_train_grid
        c.population.latent_dist = {LatentDist::Kind::bernoulli, 0.5};
        c.model = "np_btl";
        c.encoder_variant = EncoderVariant::mean;
        c.train.max_steps = 300;
        c.train.learning_rate = 1e-3;
        c.eval.n_test_tasks = 2000;
    } else if (name == "conflict-sweep") {
        c.population.family = RewardFamily::kmode;
        c.population.k = 2;
        c.population.feature_dim = 8;
        c.population.conflict_filter = 1.0;  // per-model rate comes from sweep.train_conflict_rates
        c.population.latent_dist = {LatentDist::Kind::uniform_discrete, 0.0, 2};
        c.model = "np_btl";
        c.encoder_variant = EncoderVariant::attention;
        c.train.max_steps = 300;
        c.train.learning_rate = 1e-3;
    } else if (name == "dirichlet-2d" || name == "dirichlet-3d") {
        const size_t k = name == "dirichlet-2d" ? 2 : 3;
        c.population.family = RewardFamily::dirichlet;
        c.population.k = k;
        c.population.feature_dim = 8;
        c.population.latent_dist = {LatentDist::Kind::dirichlet, 0.0, 0, 0,
                                    std::vector<double>(k, 0.5)};
        c.model = "np_btl";
        c.encoder_variant = EncoderVariant::attention;
        c.train.max_steps = 300;
        c.train.learning_rate = 1e-3;
    } else if (name == "np-dpo-toy") {
        c.model = "np_dpo";
        c.population.n_train = 2000;
        c.population.n_val = 500;
        c.population.n_test = 500;
        c.population.conflict_filter = 1.0;
        c.toy_language.weight_correlation = -1.0;
        c.toy_language.attribute_weights.resize(2);
        c.task = TaskConfig{0, 6, 9};
        c.dpo.batch_tasks = 8;
        c.dpo.max_steps = 1200;
        c.eval.n_test_tasks = 300;
        c.eval.n_context_grid = {0, 2, 4, 6};
        c.encoder_variant = EncoderVariant::attention;
    } else if (name == "scaling-bench") {
        c.population.family = RewardFamily::gaussian2d;
        c.population.latent_dist = {LatentDist::Kind::bernoulli, 0.5};
        c.model = "np_btl";
        c.encoder_variant = EncoderVariant::mean;
    } else {
        throw ConfigError("unknown preset " + name);
    }
    return c;
}

inline ExperimentConfig load_config_file(const std::string& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::exception& e) {
        throw IoError(e.what());
    }
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return config_from_json(j);
}

}  // namespace prefnp
