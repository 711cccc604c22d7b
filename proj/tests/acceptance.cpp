// Acceptance suite: one pass/fail line per criterion, each at its stated
// tolerance. Training is deterministic per (config, seed), so finished
// checkpoints are cached under acceptance_cache/ keyed by their tag; delete
// the directory to force cold runs.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <vector>

#include "prefnp/grad_check.hpp"
#include "prefnp/oracle.hpp"
#include "prefnp/runner.hpp"
#include "support/jacobi.hpp"

using namespace prefnp;

namespace {

constexpr uint64_t kSeed = 2024;
const std::string kCacheDir = "acceptance_cache";

struct CriterionResult {
    int id;
    std::string name;
    bool pass;
    std::string detail;
};

std::vector<CriterionResult> g_results;
bool g_aux_ok = true;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    g_results.push_back({id, name, pass, detail});
    std::printf("[%s] criterion %2d %-28s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
}

void aux(const std::string& name, bool pass, const std::string& detail) {
    g_aux_ok = g_aux_ok && pass;
    std::printf("[%s] aux          %-28s %s\n", pass ? "pass" : "FAIL", name.c_str(),
                detail.c_str());
    std::fflush(stdout);
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ModelCheckpoint train_cached(const std::string& tag,
                             const std::function<ModelCheckpoint()>& train) {
    const std::string path = kCacheDir + "/" + tag + ".json";
    if (std::filesystem::exists(path)) {
        std::printf("       (cached) %s\n", tag.c_str());
        std::fflush(stdout);
        return load_checkpoint(path);
    }
    const auto t0 = std::chrono::steady_clock::now();
    ModelCheckpoint ckpt = train();
    std::filesystem::create_directories(kCacheDir);
    save_checkpoint(ckpt, path);
    std::printf("       (trained %.0fs) %s\n", elapsed_s(t0), tag.c_str());
    std::fflush(stdout);
    return ckpt;
}

std::string fmt(double v) { return format_double(v); }

// ---- shared populations and training recipes ----

PopulationSpec piecewise_population() {
    PopulationSpec spec;
    spec.family = RewardFamily::piecewise1d;
    spec.latent_dist = {LatentDist::Kind::bernoulli, 0.5};
    return spec;
}

PopulationSpec kmode_population(size_t k, std::optional<double> conflict) {
    PopulationSpec spec;
    spec.family = RewardFamily::kmode;
    spec.k = k;
    spec.feature_dim = 8;
    spec.conflict_filter = conflict;
    spec.latent_dist = {LatentDist::Kind::uniform_discrete, 0.0, k};
    return spec;
}

PopulationSpec gaussian_population(double rho) {
    PopulationSpec spec;
    spec.family = RewardFamily::gaussian2d;
    spec.rho = rho;
    spec.latent_dist = {LatentDist::Kind::bernoulli, 0.5};
    return spec;
}

NPEncoderSpec mean_encoder() {
    NPEncoderSpec enc;
    enc.variant = EncoderVariant::mean;
    return enc;
}

NPEncoderSpec attention_encoder() {
    NPEncoderSpec enc;
    enc.variant = EncoderVariant::attention;
    return enc;
}

TrainConfig synthetic_train(uint64_t seed, size_t steps = 300) {
    TrainConfig cfg;
    cfg.batch_tasks = 64;
    cfg.max_steps = steps;
    cfg.learning_rate = 1e-3;
    cfg.seed = seed;
    cfg.n_val_tasks = 200;
    return cfg;
}

ModelCheckpoint train_reward_cached(const std::string& tag, RewardModelKind kind,
                                    const PopulationSpec& population, const TrainConfig& cfg,
                                    const TaskConfig& task_cfg, const NPEncoderSpec& enc) {
    return train_cached(tag, [&] {
        RngStream data_rng = RngStream::derive(cfg.seed, "data");
        PairPool pool = build_pool(population, data_rng);
        return train_reward(kind, pool, cfg, task_cfg, enc).checkpoint;
    });
}

std::vector<Task> eval_tasks(const PairPool& pool, const TaskConfig& task_cfg, size_t nc,
                             size_t count, uint64_t seed) {
    std::vector<Task> tasks;
    tasks.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        RngStream trng = RngStream::derive(seed, "eval.tasks", (static_cast<uint64_t>(nc) << 32) | i);
        tasks.push_back(sample_task(pool.test, pool.spec, task_cfg, trng, nc));
    }
    return tasks;
}

// ---- criterion 1: Fig. 1b reproduction ----

void criterion_1() {
    const PopulationSpec population = piecewise_population();
    const TaskConfig task_cfg{0, 10, 20};
    // decoder-first schedule: an empty-context warm-up matures the reward
    // shape, then a short low-lr conditional phase grows context use into
    // the reported band
    TrainConfig cfg = synthetic_train(kSeed, 340);
    cfg.context_free_warmup = 250;
    cfg.post_warmup_lr = 3e-4;
    ModelCheckpoint ckpt = train_reward_cached("c1_np_btl_piecewise", RewardModelKind::np_btl,
                                               population, cfg, task_cfg, mean_encoder());
    RewardModel model = reward_model_from_checkpoint(ckpt);

    RngStream data_rng = RngStream::derive(kSeed, "data");
    PairPool pool = build_pool(population, data_rng);

    const std::vector<size_t> grid = {0, 1, 3, 5, 10};
    const double expected[5] = {75.2, 80.0, 88.2, 93.6, 97.2};
    std::string detail;
    bool pass = true;
    double prev = -1.0;
    for (size_t gi = 0; gi < grid.size(); ++gi) {
        auto tasks = eval_tasks(pool, task_cfg, grid[gi], 500, kSeed);
        const double acc = evaluate_accuracy(model, tasks).find(grid[gi], "all")->mean * 100.0;
        pass = pass && std::fabs(acc - expected[gi]) <= 3.0 && acc >= prev;
        prev = acc;
        detail += (gi ? " " : "") + std::to_string(grid[gi]) + ":" + fmt(acc);
    }
    report(1, "fig1b-reproduction", pass, detail);

    // auxiliary, same population: DPL spread concentrates where users
    // disagree, by at least 2x
    ModelCheckpoint dpl_ckpt =
        train_reward_cached("c1_dpl_piecewise", RewardModelKind::dpl, population,
                            synthetic_train(kSeed, 150), TaskConfig{0, 0, 20}, mean_encoder());
    RewardModel dpl_any = reward_model_from_checkpoint(dpl_ckpt);
    const auto& dpl = std::get<DPLModel>(dpl_any);
    double sigma_hi = 0.0, sigma_lo = 0.0;
    size_t n_hi = 0, n_lo = 0;
    RngStream orng = RngStream::derive(kSeed, "dpl.options");
    for (int i = 0; i < 4000; ++i) {
        OptionVec y = sample_option_piecewise(orng);
        const double sigma = dpl_predict(dpl, y).second;
        if (y.features[0] > 0.5) {
            sigma_hi += sigma;
            ++n_hi;
        } else {
            sigma_lo += sigma;
            ++n_lo;
        }
    }
    sigma_hi /= static_cast<double>(n_hi);
    sigma_lo /= static_cast<double>(n_lo);
    aux("dpl-sigma-ratio", sigma_hi >= 2.0 * sigma_lo,
        "sigma(y>0.5)=" + fmt(sigma_hi) + " sigma(y<=0.5)=" + fmt(sigma_lo));
}

// ---- criterion 2: arcsin law ----

void criterion_2() {
    bool pass = closed_form_error(-1.0) == 0.0 && closed_form_error(1.0) == 0.5;
    std::string detail = "E(-1)=" + fmt(closed_form_error(-1.0)) + " E(1)=" + fmt(closed_form_error(1.0));
    for (double rho : {-0.9, -0.5, 0.0, 0.5, 0.9}) {
        const McEstimate mc = mc_error_estimate(rho, 1000000, 1, fnv1a_u64(kSeed, fnv1a("c2")));
        const double expect = closed_form_error(rho);
        const bool ok = std::fabs(mc.mean - expect) <= 3.0 * mc.stderr_;
        pass = pass && ok;
        detail += " rho" + fmt(rho) + ":" + fmt(mc.mean);
    }
    const McEstimate exact = mc_error_estimate(-1.0, 100000, 1, fnv1a_u64(kSeed, fnv1a("c2x")));
    pass = pass && exact.mean == 0.0;
    report(2, "arcsin-law", pass, detail);
}

// ---- criterion 3: Fig. 4 analogue ----

void criterion_3() {
    const std::vector<double> rho_train = {-1.0, -0.7, 0.0, 0.7};
    const std::vector<double> rho_eval = {-1.0, -0.5, 0.0};
    const TaskConfig task_cfg{0, 10, 20};
    const size_t n_trials = 2000;

    std::vector<std::vector<CurvePoint>> curves;
    for (size_t mi = 0; mi < rho_train.size(); ++mi) {
        PopulationSpec population = gaussian_population(rho_train[mi]);
        TrainConfig cfg = synthetic_train(fnv1a_u64(kSeed, fnv1a_u64(mi, fnv1a("c3"))), 200);
        ModelCheckpoint ckpt =
            train_reward_cached("c3_np_btl_rho" + std::to_string(mi), RewardModelKind::np_btl,
                                population, cfg, task_cfg, mean_encoder());
        RewardModel model_any = reward_model_from_checkpoint(ckpt);
        const auto& model = std::get<NPBTLModel>(model_any);
        curves.push_back(np_vs_bayes_curve(model, rho_train[mi], rho_eval, n_trials,
                                           fnv1a_u64(kSeed, fnv1a_u64(mi, fnv1a("c3eval")))));

        // auxiliary: at rho=+1 nothing identifies the latent, so any model
        // sits at chance
        if (mi == 0) {
            CurvePoint chance = np_identification_error(model, rho_train[mi], 1.0, n_trials,
                                                        fnv1a_u64(kSeed, fnv1a("c3chance")));
            aux("identification-at-rho1", std::fabs(chance.np_error - 0.5) <= 0.02,
                "np_error=" + fmt(chance.np_error));
        }
    }

    bool pass = true;
    std::string detail;
    // trained at -1: within 0.05 of the Bayes curve
    for (size_t ei = 0; ei < rho_eval.size(); ++ei) {
        const CurvePoint& pt = curves[0][ei];
        pass = pass && std::fabs(pt.np_error - pt.bayes_error) <= 0.05;
        detail += (ei ? " " : "tr-1:") + fmt(pt.np_error) + "/" + fmt(pt.bayes_error);
    }
    // error nondecreasing in the training correlation at fixed eval rho
    for (size_t ei = 0; ei < rho_eval.size(); ++ei) {
        for (size_t mi = 0; mi + 1 < rho_train.size(); ++mi) {
            const CurvePoint& lo = curves[mi][ei];
            const CurvePoint& hi = curves[mi + 1][ei];
            const double slack =
                3.0 * std::sqrt(lo.np_stderr * lo.np_stderr + hi.np_stderr * hi.np_stderr);
            pass = pass && hi.np_error >= lo.np_error - slack;
        }
    }
    report(3, "fig4-bayes-comparison", pass, detail);
}

// ---- criteria 4, 5, 7: two-mode proxy ----

struct TwoModeModels {
    PairPool pool;
    RewardModel np;
    RewardModel btl;
};

TwoModeModels train_two_mode() {
    TwoModeModels out;
    const PopulationSpec population = kmode_population(2, 1.0);
    const TaskConfig task_cfg{0, 10, 20};
    RngStream data_rng = RngStream::derive(kSeed, "data");
    out.pool = build_pool(population, data_rng);

    ModelCheckpoint np_ckpt =
        train_reward_cached("c4_np_btl_2mode", RewardModelKind::np_btl, population,
                            synthetic_train(kSeed), task_cfg, attention_encoder());
    out.np = reward_model_from_checkpoint(np_ckpt);
    ModelCheckpoint btl_ckpt =
        train_reward_cached("c4_btl_2mode", RewardModelKind::btl, population,
                            synthetic_train(kSeed, 150), TaskConfig{0, 0, 20}, attention_encoder());
    out.btl = reward_model_from_checkpoint(btl_ckpt);
    return out;
}

void criterion_4(const TwoModeModels& models) {
    const TaskConfig task_cfg{0, 10, 20};
    auto tasks0 = eval_tasks(models.pool, task_cfg, 0, 500, kSeed);
    auto tasks10 = eval_tasks(models.pool, task_cfg, 10, 500, kSeed);

    AccuracyTable btl0 = evaluate_accuracy(models.btl, tasks0, GroupBy::z_mode);
    AccuracyTable np0 = evaluate_accuracy(models.np, tasks0, GroupBy::z_mode);
    AccuracyTable np10 = evaluate_accuracy(models.np, tasks10, GroupBy::z_mode);

    bool pass = true;
    std::string detail;
    for (const std::string& mode : {"0", "1"}) {
        const double btl_acc = btl0.find(0, mode)->mean;
        const double np10_acc = np10.find(10, mode)->mean;
        pass = pass && std::fabs(btl_acc - 0.5) <= 0.05 && np10_acc >= 0.90;
        detail += "m" + mode + ":btl=" + fmt(btl_acc) + ",np10=" + fmt(np10_acc) + " ";
    }
    const double btl_all = btl0.find(0, "all")->mean;
    const double np0_all = np0.find(0, "all")->mean;
    pass = pass && std::fabs(np0_all - btl_all) <= 0.05;
    detail += "np0=" + fmt(np0_all) + ",btl=" + fmt(btl_all);
    report(4, "two-mode-failure-recovery", pass, detail);

    const double np10_all = np10.find(10, "all")->mean;
    aux("context-monotonicity-15pt", np10_all - np0_all >= 0.15,
        "np10=" + fmt(np10_all) + " np0=" + fmt(np0_all));
}

void criterion_5(const TwoModeModels& models) {
    const std::vector<double> train_rates = {1.0, 0.75, 0.5};
    const std::vector<double> ctx_rates = {1.0, 0.75, 0.5, 0.25};
    const TaskConfig task_cfg{0, 10, 20};
    const size_t n_tasks = 500, nc = 10;

    // context pools at each rate; targets always fully conflicting
    std::vector<PairPool> ctx_pools;
    for (size_t ci = 0; ci < ctx_rates.size(); ++ci) {
        PopulationSpec pop = kmode_population(2, ctx_rates[ci]);
        RngStream rng = RngStream::derive(kSeed, "sweep.contexts", ci);
        ctx_pools.push_back(build_pool(pop, rng));
    }
    const PairPool& target_pool = models.pool;  // built with conflict_filter 1.0

    std::vector<RewardModel> rate_models;
    const std::vector<std::string> tags = {"c4_np_btl_2mode", "c5_np_btl_rate75",
                                           "c5_np_btl_rate50"};
    for (size_t mi = 0; mi < train_rates.size(); ++mi) {
        if (mi == 0) {
            rate_models.push_back(models.np);  // shared with criterion 4
            continue;
        }
        PopulationSpec pop = kmode_population(2, train_rates[mi]);
        TrainConfig cfg = synthetic_train(fnv1a_u64(kSeed, fnv1a_u64(mi, fnv1a("c5"))));
        ModelCheckpoint ckpt = train_reward_cached(tags[mi], RewardModelKind::np_btl, pop, cfg,
                                                   task_cfg, attention_encoder());
        rate_models.push_back(reward_model_from_checkpoint(ckpt));
    }

    // accuracy per (model, context rate)
    std::vector<std::vector<std::pair<double, double>>> grid(train_rates.size());
    for (size_t mi = 0; mi < train_rates.size(); ++mi) {
        const auto& model = std::get<NPBTLModel>(rate_models[mi]);
        for (size_t ci = 0; ci < ctx_rates.size(); ++ci) {
            std::vector<TaskOutcome> outcomes(n_tasks);
            parallel_for(n_tasks, [&](size_t ti) {
                RngStream trng = RngStream::derive(kSeed, "c5.eval",
                                                   (static_cast<uint64_t>(mi * 16 + ci) << 32) | ti);
                const LatentGroundTruth z = LatentGroundTruth::discrete(trng.below(2));
                std::vector<PreferencePair> context;
                while (context.size() < nc) {
                    const PairRecord& rec =
                        ctx_pools[ci].test[trng.below(ctx_pools[ci].test.size())];
                    const double r1 = record_reward(ctx_pools[ci].spec, rec, true, z);
                    const double r2 = record_reward(ctx_pools[ci].spec, rec, false, z);
                    if (r1 == r2) continue;
                    context.push_back(r1 > r2 ? PreferencePair{rec.y1, rec.y2}
                                              : PreferencePair{rec.y2, rec.y1});
                }
                std::vector<PreferencePair> targets;
                while (targets.size() < task_cfg.n_target) {
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
                outcomes[ti] = {nc, z,
                                static_cast<double>(correct) / static_cast<double>(targets.size())};
            });
            AccuracyTable acc = accuracy_table(outcomes, GroupBy::none);
            const AccuracyCell* cell = acc.find(nc, "all");
            grid[mi].emplace_back(cell->mean, cell->stderr_);
        }
    }

    bool pass = true;
    std::string detail;
    for (size_t mi = 0; mi < train_rates.size(); ++mi) {
        detail += "tr" + fmt(train_rates[mi]) + ":";
        for (size_t ci = 0; ci < ctx_rates.size(); ++ci) {
            detail += fmt(grid[mi][ci].first) + (ci + 1 < ctx_rates.size() ? "," : " ");
            if (ci > 0) {
                // degradation as the in-context conflict rate drops
                const double slack =
                    3.0 * std::sqrt(grid[mi][ci].second * grid[mi][ci].second +
                                    grid[mi][ci - 1].second * grid[mi][ci - 1].second);
                pass = pass && grid[mi][ci].first <= grid[mi][ci - 1].first + slack;
            }
        }
    }
    // the 0.5-trained model is strictly worst at every grid point
    for (size_t ci = 0; ci < ctx_rates.size(); ++ci) {
        for (size_t mi = 0; mi + 1 < train_rates.size(); ++mi) {
            const double slack = 3.0 * std::sqrt(grid[mi][ci].second * grid[mi][ci].second +
                                                 grid[2][ci].second * grid[2][ci].second);
            pass = pass && grid[2][ci].first < grid[mi][ci].first - slack;
        }
    }
    report(5, "conflict-rate-sweep", pass, detail);
}

void criterion_7(const TwoModeModels& models) {
    const TaskConfig task_cfg{0, 10, 20};
    const auto& np = std::get<NPBTLModel>(models.np);

    double sil_mean[2], sil_err[2];
    PcaResult pca_for_oracle;
    std::vector<Tensor> embeddings_10;
    size_t idx = 0;
    for (size_t nc : {1, 10}) {
        auto tasks = eval_tasks(models.pool, task_cfg, nc, 500, kSeed);
        std::vector<Tensor> embeddings(tasks.size());
        parallel_for(tasks.size(),
                     [&](size_t i) { embeddings[i] = encode_context(np, tasks[i].context); });
        PcaResult pca = pca_project(embeddings, 2);
        std::vector<std::string> labels(tasks.size());
        for (size_t i = 0; i < tasks.size(); ++i)
            labels[i] = std::to_string(tasks[i].user_latent.mode);
        SilhouetteResult sil = cluster_separation(pca.coords, labels);
        sil_mean[idx] = sil.mean;
        sil_err[idx] = sil.stderr_;
        if (nc == 10) {
            pca_for_oracle = pca;
            embeddings_10 = embeddings;
        }
        ++idx;
    }
    const double slack = 3.0 * std::sqrt(sil_err[0] * sil_err[0] + sil_err[1] * sil_err[1]);
    bool pass = sil_mean[1] > sil_mean[0] + slack;

    // eigenpairs of the nc=10 embedding covariance against the dense oracle
    Tensor x = Tensor::zeros(embeddings_10.size(), embeddings_10[0].size());
    for (size_t i = 0; i < embeddings_10.size(); ++i)
        for (size_t j = 0; j < x.cols(); ++j) x.at(i, j) = embeddings_10[i].data[j];
    center_rows(x);
    auto dense = prefnp_test::jacobi_eigen(covariance(x));
    for (size_t c = 0; c < 2; ++c) {
        pass = pass && std::fabs(pca_for_oracle.eigenvalues[c] - dense[c].value) <=
                           1e-6 * std::max(1.0, std::fabs(dense[c].value));
        double dot = 0.0;
        for (size_t j = 0; j < x.cols(); ++j)
            dot += pca_for_oracle.components[c].data[j] * dense[c].vector[j];
        pass = pass && std::fabs(std::fabs(dot) - 1.0) <= 1e-6;
    }
    report(7, "embedding-clustering", pass,
           "sil1=" + fmt(sil_mean[0]) + " sil10=" + fmt(sil_mean[1]));
}

// ---- criterion 6: NP-DPO toy ----

void criterion_6() {
    ToyLanguageSpec lang;
    lang.weight_correlation = -1.0;
    RngStream lang_rng = RngStream::derive(kSeed, "lang");
    lang.attribute_weights = make_attribute_weights(2, lang.vocab_size, -1.0, lang_rng);
    PolicySpec pspec;
    pspec.vocab_size = lang.vocab_size;
    pspec.max_seq = lang.seq_len();
    const TaskConfig task_cfg{0, 6, 9};

    DPOConfig cfg;
    cfg.batch_tasks = 8;
    cfg.max_steps = 1200;
    cfg.learning_rate = 1e-4;
    cfg.seed = kSeed;

    NPDPOModel seed_model = make_np_dpo(lang, pspec, cfg.beta, false, kSeed);
    RngStream data_rng = RngStream::derive(kSeed, "data");
    ToyPool pool =
        gen_toy_preferences(lang, seed_model.ref_params, pspec, 2000, 500, 500, 1.0, data_rng);

    // initial loss at the exact reference point
    NPDPOModel fresh = make_np_dpo(lang, pspec, cfg.beta, true, kSeed);
    RngStream trng0 = RngStream::derive(kSeed, "c6.init");
    ToyTask probe_task = sample_toy_task(pool.train, lang, task_cfg, trng0, 3);
    const double init_loss = np_dpo_task_loss_eval(fresh, pool.train, probe_task) /
                             static_cast<double>(probe_task.target_ids.size());
    bool pass = std::fabs(init_loss - std::log(2.0)) <= 1e-6;

    // gradient checks on the joint objective
    {
        NPDPOModel gm = make_np_dpo(lang, pspec, cfg.beta, true, kSeed + 1);
        RngStream nudger(kSeed + 2);
        for (const auto& name : gm.params.names())
            if (name.rfind("hyper.", 0) == 0 || name.rfind("policy.head", 0) == 0)
                for (double& v : gm.params.value(name).data) v += 0.05 * nudger.normal();
        RngStream gtrng = RngStream::derive(kSeed, "c6.gradtask");
        ToyTask gtask = sample_toy_task(pool.train, lang, TaskConfig{2, 2, 2}, gtrng);
        auto loss_fn = [&](ParamSet&) {
            gm.params.zero_grads();
            Tape tape;
            Var loss = np_dpo_task_loss_tape(tape, gm, pool, pool.train, gtask, false, nullptr);
            tape.backward(loss);
            return tape.value(loss).item();
        };
        RngStream probe(kSeed + 3);
        const double rel = grad_check(loss_fn, gm.params, 128, 1e-5, probe);
        pass = pass && rel < 1e-4;
    }

    ModelCheckpoint np_ckpt = train_cached("c6_np_dpo", [&] {
        NPDPOModel model = make_np_dpo(lang, pspec, cfg.beta, true, kSeed);
        return train_np_dpo_variant(model, pool, cfg, task_cfg).checkpoint;
    });
    ModelCheckpoint base_ckpt = train_cached("c6_btl_dpo", [&] {
        NPDPOModel model = make_np_dpo(lang, pspec, cfg.beta, false, kSeed);
        return train_np_dpo_variant(model, pool, cfg, task_cfg).checkpoint;
    });
    NPDPOModel np = np_dpo_from_checkpoint(np_ckpt);
    NPDPOModel base = np_dpo_from_checkpoint(base_ckpt);

    auto make_tasks = [&](size_t nc) {
        std::vector<ToyTask> tasks;
        for (size_t i = 0; i < 300; ++i) {
            RngStream trng =
                RngStream::derive(kSeed, "c6.eval", (static_cast<uint64_t>(nc) << 32) | i);
            tasks.push_back(sample_toy_task(pool.test, lang, task_cfg, trng, nc));
        }
        return tasks;
    };
    auto tasks0 = make_tasks(0);
    auto tasks6 = make_tasks(6);

    AccuracyTable base0 = eval_implicit_accuracy(base, pool.test, tasks0, GroupBy::z_mode);
    std::string detail = "init_loss=" + fmt(init_loss);
    for (const std::string& mode : {"0", "1"}) {
        const double acc = base0.find(0, mode)->mean;
        pass = pass && std::fabs(acc - 0.5) <= 0.07;
        detail += " base_m" + mode + "=" + fmt(acc);
    }
    AccuracyTable np0 = eval_implicit_accuracy(np, pool.test, tasks0, GroupBy::none);
    AccuracyTable np6 = eval_implicit_accuracy(np, pool.test, tasks6, GroupBy::none);
    const double acc0 = np0.find(0, "all")->mean;
    const double acc6 = np6.find(6, "all")->mean;
    pass = pass && acc6 - acc0 >= 0.15;
    detail += " np0=" + fmt(acc0) + " np6=" + fmt(acc6);
    report(6, "np-dpo-toy", pass, detail);

    // auxiliary: steering moves the sampled responses' attribute scores
    double mean_h0[2];
    for (size_t mode = 0; mode < 2; ++mode) {
        RngStream srng = RngStream::derive(kSeed, "c6.steer", mode);
        double sum_h0 = 0.0;
        for (int s = 0; s < 200; ++s) {
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
            const auto resp = sample_response(np, prompt, ctx, 1.0, srng, lang.response_len);
            sum_h0 += attribute_score(lang, resp, 0);
        }
        mean_h0[mode] = sum_h0 / 200.0;
    }
    aux("steering-h0-ordering", mean_h0[0] >= mean_h0[1],
        "h0|ctx0=" + fmt(mean_h0[0]) + " h0|ctx1=" + fmt(mean_h0[1]));
}

// ---- criterion 8: three modes and continuous mixtures ----

void criterion_8() {
    const TaskConfig task_cfg{0, 10, 20};

    // three-mode proxy: NP at nc=10 within 3 points of per-mode BTL experts
    const PopulationSpec population3 = kmode_population(3, 1.0);
    RngStream data_rng = RngStream::derive(kSeed, "data");
    PairPool pool3 = build_pool(population3, data_rng);
    ModelCheckpoint np3_ckpt =
        train_reward_cached("c8_np_btl_3mode", RewardModelKind::np_btl, population3,
                            synthetic_train(kSeed), task_cfg, attention_encoder());
    RewardModel np3 = reward_model_from_checkpoint(np3_ckpt);

    bool pass = true;
    std::string detail;
    auto tasks10 = eval_tasks(pool3, task_cfg, 10, 500, kSeed);
    AccuracyTable np10 = evaluate_accuracy(np3, tasks10, GroupBy::z_mode);
    for (size_t mode = 0; mode < 3; ++mode) {
        PopulationSpec dedicated = population3;
        dedicated.latent_dist = {LatentDist::Kind::point, 0.0, 0, mode};
        ModelCheckpoint btl_ckpt = train_reward_cached(
            "c8_btl_mode" + std::to_string(mode), RewardModelKind::btl, dedicated,
            synthetic_train(fnv1a_u64(kSeed, fnv1a_u64(mode, fnv1a("c8"))), 150),
            TaskConfig{0, 0, 20}, attention_encoder());
        RewardModel btl = reward_model_from_checkpoint(btl_ckpt);
        // the expert is scored on its own mode's unseen pairs
        std::vector<Task> expert_tasks;
        for (size_t i = 0; i < 500; ++i) {
            RngStream trng =
                RngStream::derive(kSeed, "c8.expert", (static_cast<uint64_t>(mode) << 32) | i);
            expert_tasks.push_back(sample_task(pool3.test, dedicated, TaskConfig{0, 0, 20}, trng, 0));
        }
        const double expert_acc = evaluate_accuracy(btl, expert_tasks).find(0, "all")->mean;
        const double np_acc = np10.find(10, std::to_string(mode))->mean;
        pass = pass && np_acc >= expert_acc - 0.03;
        detail += "m" + std::to_string(mode) + ":" + fmt(np_acc) + "/" + fmt(expert_acc) + " ";
    }

    // Dirichlet 2D: accuracy improves with context in at least 8 of 10 bins
    PopulationSpec dir_pop;
    dir_pop.family = RewardFamily::dirichlet;
    dir_pop.k = 2;
    dir_pop.feature_dim = 8;
    dir_pop.latent_dist = {LatentDist::Kind::dirichlet, 0.0, 0, 0, {0.5, 0.5}};
    RngStream dir_rng = RngStream::derive(kSeed, "data.dirichlet");
    PairPool dir_pool = build_pool(dir_pop, dir_rng);
    ModelCheckpoint dir_ckpt =
        train_reward_cached("c8_np_btl_dirichlet2", RewardModelKind::np_btl, dir_pop,
                            synthetic_train(kSeed), task_cfg, attention_encoder());
    RewardModel dir_model = reward_model_from_checkpoint(dir_ckpt);

    std::vector<Task> d0, d10;
    for (size_t i = 0; i < 1500; ++i) {
        RngStream ta = RngStream::derive(kSeed, "c8.dir0", i);
        d0.push_back(sample_task(dir_pool.test, dir_pop, task_cfg, ta, 0));
        RngStream tb = RngStream::derive(kSeed, "c8.dir10", i);
        d10.push_back(sample_task(dir_pool.test, dir_pop, task_cfg, tb, 10));
    }
    AccuracyTable acc0 = evaluate_accuracy(dir_model, d0, GroupBy::z0_bin);
    AccuracyTable acc10 = evaluate_accuracy(dir_model, d10, GroupBy::z0_bin);
    size_t improved = 0;
    for (int bin = 0; bin < 10; ++bin) {
        const AccuracyCell* a = acc0.find(0, "bin" + std::to_string(bin));
        const AccuracyCell* b = acc10.find(10, "bin" + std::to_string(bin));
        if (a && b && b->mean > a->mean) ++improved;
    }
    pass = pass && improved >= 8;
    detail += "dir-bins-improved=" + std::to_string(improved) + "/10";
    report(8, "three-mode-and-dirichlet", pass, detail);
}

// ---- criterion 9: scaling ----

void criterion_9() {
    NPEncoderSpec enc;
    enc.variant = EncoderVariant::mean;
    enc.input_dim = 2;
    NPBTLModel model = make_np_btl(enc, kSeed);
    const std::vector<size_t> grid = {1, 2, 4, 8, 16, 32, 64, 96, 128, 192, 256, 384, 512};
    auto points = bench_scaling(model, grid, 20, 9, kSeed);

    std::vector<double> xs, enc_ys, dec_ys;
    for (const auto& pt : points) {
        xs.push_back(static_cast<double>(pt.n_context));
        enc_ys.push_back(pt.encode_ms);
        dec_ys.push_back(pt.decode_ms);
    }
    const LinearFit enc_fit = fit_line(xs, enc_ys);
    const double dec_med = median(dec_ys);
    const double dec_drift = std::fabs(fit_line(xs, dec_ys).slope) * (xs.back() - xs.front());
    const bool pass = enc_fit.r_squared >= 0.95 && dec_drift <= 0.5 * dec_med;
    report(9, "encoder-scaling", pass,
           "encode_r2=" + fmt(enc_fit.r_squared) + " decode_drift=" + fmt(dec_drift) +
               " decode_median=" + fmt(dec_med));

    const auto at = [&](size_t nc) {
        for (const auto& pt : points)
            if (pt.n_context == nc) return pt.encode_ms;
        return 0.0;
    };
    const double ratio = at(256) / at(128);
    aux("encode-doubling", ratio >= 1.4 && ratio <= 2.6, "t256/t128=" + fmt(ratio));
}

// ---- criterion 10: substrate ----

void criterion_10() {
    bool pass = true;
    std::string detail;

    // gradient checks across the exported differentiable operations
    {
        RngStream rng(kSeed);
        MLPSpec mlp{5, 32, 3, 2};
        ParamSet ps;
        init_mlp(ps, "net", mlp, rng);
        Tensor x = Tensor::zeros(7, 5);
        for (double& v : x.data) v = rng.normal();
        ps.add("x", x);
        auto loss_fn = [&](ParamSet& params) {
            params.zero_grads();
            Tape tape;
            ParamBinding p(tape, params);
            Var y = mlp_forward(tape, mlp, p, "net", p("x"));
            Var loss = tape.sum_all(tape.mul(y, y));
            tape.backward(loss);
            return tape.value(loss).item();
        };
        RngStream probe(kSeed + 10);
        const double rel = grad_check(loss_fn, ps, 96, 1e-5, probe);
        pass = pass && rel < 1e-4;
        detail += "mlp=" + fmt(rel);
    }
    {
        RngStream rng(kSeed + 1);
        AttentionSpec attn{16, 4, 0.0};
        ParamSet ps;
        init_attention(ps, "attn", attn, rng);
        Tensor x = Tensor::zeros(6, 16);
        for (double& v : x.data) v = rng.normal();
        ps.add("x", x);
        auto loss_fn = [&](ParamSet& params) {
            params.zero_grads();
            Tape tape;
            ParamBinding p(tape, params);
            Var y = multihead_attention(tape, attn, p, "attn", p("x"), false);
            Var loss = tape.sum_all(tape.mul(y, y));
            tape.backward(loss);
            return tape.value(loss).item();
        };
        RngStream probe(kSeed + 11);
        const double rel = grad_check(loss_fn, ps, 96, 1e-5, probe);
        pass = pass && rel < 1e-4;
        detail += " attn=" + fmt(rel);
    }
    for (EncoderVariant variant : {EncoderVariant::mean, EncoderVariant::attention}) {
        PopulationSpec pop = piecewise_population();
        pop.n_train = 100;
        pop.n_val = 50;
        pop.n_test = 50;
        RngStream rng(kSeed + 2);
        PairPool pool = build_pool(pop, rng);
        Task task = sample_task(pool.train, pop, TaskConfig{3, 3, 3}, rng);
        NPEncoderSpec enc;
        enc.input_dim = 1;
        enc.embed_dim = 32;
        enc.variant = variant;
        enc.attn_heads = 4;
        NPBTLModel model = make_np_btl(enc, kSeed + 3);
        auto loss_fn = [&](ParamSet&) {
            model.params.zero_grads();
            Tape tape;
            Var loss = np_btl_task_loss_tape(tape, model, task, false, nullptr);
            tape.backward(loss);
            return tape.value(loss).item();
        };
        RngStream probe(kSeed + 12);
        const double rel = grad_check(loss_fn, model.params, 96, 1e-5, probe);
        pass = pass && rel < 1e-4;
        detail += std::string(" np_") + (variant == EncoderVariant::mean ? "mean=" : "attn=") +
                  fmt(rel);
    }

    // byte-identical reports for identical (config, seed)
    ExperimentConfig config = preset_config("example-3-1");
    config.population.n_train = 400;
    config.population.n_val = 100;
    config.population.n_test = 100;
    config.train.max_steps = 3;
    config.train.n_val_tasks = 10;
    config.eval.n_test_tasks = 20;
    config.eval.n_context_grid = {0, 3};
    config.seed = kSeed;
    config.out_dir = "acceptance_det_a";
    run_experiment(config);
    config.out_dir = "acceptance_det_b";
    run_experiment(config);
    for (const char* f : {"metrics.tsv", "fig1b_accuracy.tsv", "train_log.tsv", "pool.txt",
                          "tasks.txt", "checkpoint.json", "fig3_pca.tsv", "silhouette.tsv"}) {
        const bool same = read_file("acceptance_det_a/" + std::string(f)) ==
                          read_file("acceptance_det_b/" + std::string(f));
        pass = pass && same;
        if (!same) detail += std::string(" mismatch:") + f;
    }
    std::filesystem::remove_all("acceptance_det_a");
    std::filesystem::remove_all("acceptance_det_b");
    report(10, "substrate", pass, detail);
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    std::printf("acceptance suite (seed %llu)\n", static_cast<unsigned long long>(kSeed));

    try {
        criterion_1();
        criterion_2();
        criterion_3();
        TwoModeModels two_mode = train_two_mode();
        criterion_4(two_mode);
        criterion_5(two_mode);
        criterion_6();
        criterion_7(two_mode);
        criterion_8();
        criterion_9();
        criterion_10();
    } catch (const std::exception& e) {
        std::printf("[FAIL] suite aborted: %s\n", e.what());
        return 1;
    }

    size_t passed = 0;
    for (const auto& r : g_results)
        if (r.pass) ++passed;
    std::printf("%zu/%zu criteria passed, aux checks %s, %.0fs total\n", passed, g_results.size(),
                g_aux_ok ? "ok" : "FAILED", elapsed_s(t0));
    return (passed == g_results.size() && g_aux_ok) ? 0 : 1;
}
