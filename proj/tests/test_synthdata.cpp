#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "prefnp/synthdata.hpp"

using namespace prefnp;

namespace {

PopulationSpec gaussian_spec(double rho) {
    PopulationSpec spec;
    spec.family = RewardFamily::gaussian2d;
    spec.rho = rho;
    spec.latent_dist = {LatentDist::Kind::bernoulli, 0.5};
    return spec;
}

PopulationSpec piecewise_spec() {
    PopulationSpec spec;
    spec.family = RewardFamily::piecewise1d;
    spec.latent_dist = {LatentDist::Kind::bernoulli, 0.5};
    return spec;
}

}  // namespace

TEST_CASE("piecewise reward") {
    CHECK(reward_piecewise({{0.3}}, 0) == 0.3);
    CHECK(reward_piecewise({{0.3}}, 1) == 0.3);
    CHECK(reward_piecewise({{0.8}}, 0) == doctest::Approx(1.6).epsilon(1e-15));
    CHECK(reward_piecewise({{0.8}}, 1) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK_THROWS_AS(reward_piecewise({{1.5}}, 0), std::invalid_argument);
    CHECK_THROWS_AS(reward_piecewise({{0.1, 0.2}}, 0), std::invalid_argument);
}

TEST_CASE("linear reward") {
    CHECK(reward_linear({{1.0, -0.5}}, LatentGroundTruth::discrete(0)) == 1.0);
    CHECK(reward_linear({{1.0, -0.5}}, LatentGroundTruth::simplex({0.5, 0.5})) == doctest::Approx(0.25));
    CHECK(reward_linear({{2.0, 3.0, 4.0}}, LatentGroundTruth::simplex({1.0 / 3, 1.0 / 3, 1.0 / 3})) ==
          doctest::Approx(3.0));
    CHECK_THROWS_AS(reward_linear({{1.0}}, LatentGroundTruth::discrete(2)), std::invalid_argument);
}

TEST_CASE("label_pair follows the generating reward") {
    auto z0 = LatentGroundTruth::discrete(0);
    auto z1 = LatentGroundTruth::discrete(1);

    PreferencePair p = label_pair({{0.8}}, {{0.6}}, z0, RewardFamily::piecewise1d);
    CHECK(p.winner.features[0] == 0.8);
    p = label_pair({{0.8}}, {{0.6}}, z1, RewardFamily::piecewise1d);
    CHECK(p.winner.features[0] == 0.6);

    p = label_pair({{1.0, 0.0}}, {{0.0, 1.0}}, z0, RewardFamily::gaussian2d);
    CHECK(p.winner.features[0] == 1.0);

    CHECK_THROWS_AS(label_pair({{0.2}}, {{0.2}}, z0, RewardFamily::piecewise1d), TieError);
}

TEST_CASE("conflicting pairs") {
    CHECK(is_conflicting({{1.0, 0.0}}, {{0.0, 1.0}}, 0, 1));
    CHECK(!is_conflicting({{1.0, 1.0}}, {{0.0, 0.0}}, 0, 1));
    CHECK_THROWS_AS(is_conflicting({{1.0, 0.5}}, {{0.0, 0.5}}, 0, 1), TieError);

    // at rho = -1 every sampled pair is conflicting
    RngStream rng(101);
    PopulationSpec spec = gaussian_spec(-1.0);
    size_t conflicts = 0;
    const size_t n = 100000;
    for (size_t i = 0; i < n; ++i) {
        PairRecord rec = sample_pair_record(spec, rng);
        if (record_conflicting(spec, rec)) ++conflicts;
    }
    CHECK(conflicts == n);
}

TEST_CASE("theoretical conflict rate") {
    CHECK(conflict_rate_theoretical(-1.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(conflict_rate_theoretical(0.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(conflict_rate_theoretical(0.7) == doctest::Approx(0.25338).epsilon(1e-3));
    CHECK(conflict_rate_theoretical(0.5) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK_THROWS_AS(conflict_rate_theoretical(1.5), std::invalid_argument);
}

TEST_CASE("sample_options statistics") {
    RngStream rng(7);
    PopulationSpec spec = gaussian_spec(0.7);
    auto opts = sample_options(spec, 1000000, rng);
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (const auto& o : opts) {
        sx += o.features[0];
        sy += o.features[1];
        sxx += o.features[0] * o.features[0];
        syy += o.features[1] * o.features[1];
        sxy += o.features[0] * o.features[1];
    }
    const double n = static_cast<double>(opts.size());
    const double corr = (sxy / n - sx / n * sy / n) /
                        std::sqrt((sxx / n - sx / n * sx / n) * (syy / n - sy / n * sy / n));
    CHECK(std::fabs(corr - 0.7) < 0.01);

    RngStream rng0(8);
    auto opts0 = sample_options(gaussian_spec(0.0), 1000000, rng0);
    double sxy0 = 0;
    for (const auto& o : opts0) sxy0 += o.features[0] * o.features[1];
    CHECK(std::fabs(sxy0 / n) < 0.01);

    RngStream rngp(9);
    for (const auto& o : sample_options(piecewise_spec(), 10000, rngp)) {
        CHECK(o.features[0] >= -1.0);
        CHECK(o.features[0] <= 1.0);
    }
    CHECK_THROWS_AS(sample_options(gaussian_spec(1.5), 1, rng), std::invalid_argument);
}

TEST_CASE("build_pool splits and conflict fraction") {
    RngStream rng(11);
    PairPool pool = build_pool(piecewise_spec(), rng);
    CHECK(pool.train.size() == 10000);
    CHECK(pool.val.size() == 5000);
    CHECK(pool.test.size() == 5000);

    // unfiltered gaussian pool at rho = 0 has a ~0.5 conflict fraction
    RngStream rng2(12);
    PopulationSpec g = gaussian_spec(0.0);
    g.n_train = 10000;
    PairPool gp = build_pool(g, rng2);
    size_t conflicts = 0;
    for (const auto& rec : gp.train)
        if (record_conflicting(g, rec)) ++conflicts;
    const double frac = static_cast<double>(conflicts) / static_cast<double>(gp.train.size());
    CHECK(std::fabs(frac - conflict_rate_theoretical(0.0)) < 0.02);

    // filtered kmode pool is all conflicting
    RngStream rng3(13);
    PopulationSpec km;
    km.family = RewardFamily::kmode;
    km.k = 2;
    km.feature_dim = 4;
    km.latent_dist = {LatentDist::Kind::bernoulli, 0.5};
    km.conflict_filter = 1.0;
    km.n_train = 2000;
    km.n_val = 500;
    km.n_test = 500;
    PairPool kp = build_pool(km, rng3);
    for (const auto& rec : kp.train) CHECK(record_conflicting(km, rec));

    // infeasible filter: no conflicting pairs exist at rho = 1
    RngStream rng4(14);
    PopulationSpec bad = gaussian_spec(1.0);
    bad.conflict_filter = 1.0;
    bad.n_train = 10;
    CHECK_THROWS_AS(build_pool(bad, rng4), std::invalid_argument);
}

TEST_CASE("partial conflict filter hits the target fraction") {
    RngStream rng(15);
    PopulationSpec g = gaussian_spec(0.0);
    g.conflict_filter = 0.75;
    g.n_train = 4000;
    g.n_val = 1000;
    g.n_test = 1000;
    PairPool pool = build_pool(g, rng);
    size_t conflicts = 0;
    for (const auto& rec : pool.train)
        if (record_conflicting(g, rec)) ++conflicts;
    CHECK(std::fabs(static_cast<double>(conflicts) / 4000.0 - 0.75) <= 0.01);
}

TEST_CASE("sample_task structure") {
    RngStream rng(21);
    PairPool pool = build_pool(piecewise_spec(), rng);
    TaskConfig cfg{0, 10, 20};

    RngStream trng(22);
    for (int i = 0; i < 50; ++i) {
        Task t = sample_task(pool.train, pool.spec, cfg, trng);
        CHECK(t.target.size() == 20);
        CHECK(t.context.size() <= 10);
        CHECK(t.eval_mask.size() == 20);
        // context pairs are exactly the leading target pairs
        for (size_t j = 0; j < t.context.size(); ++j) {
            CHECK(t.context[j].winner.features == t.target[j].winner.features);
            CHECK(t.eval_mask[j] == 0);
        }
        for (size_t j = t.context.size(); j < t.target.size(); ++j) CHECK(t.eval_mask[j] == 1);
        // every labeled pair satisfies the generating reward, recomputed
        for (const auto& pair : t.target) {
            const double rw = family_reward(pool.spec.family, pair.winner, t.user_latent);
            const double rl = family_reward(pool.spec.family, pair.loser, t.user_latent);
            CHECK(rw > rl);
        }
        // distinct pool records
        std::set<uint32_t> ids(t.target_ids.begin(), t.target_ids.end());
        CHECK(ids.size() == t.target_ids.size());
    }

    RngStream trng2(23);
    Task empty_ctx = sample_task(pool.train, pool.spec, TaskConfig{0, 0, 20}, trng2);
    CHECK(empty_ctx.context.empty());
    for (uint8_t m : empty_ctx.eval_mask) CHECK(m == 1);
}

TEST_CASE("latent distribution statistics") {
    RngStream rng(31);
    LatentDist dist{LatentDist::Kind::bernoulli, 0.5};
    size_t ones = 0;
    const size_t n = 10000;
    for (size_t i = 0; i < n; ++i) ones += dist.sample(rng).mode;
    CHECK(std::fabs(static_cast<double>(ones) / n - 0.5) < 0.02);

    LatentDist dd{LatentDist::Kind::dirichlet, 0.0, 0, 0, {0.5, 0.5}};
    for (int i = 0; i < 100; ++i) {
        auto z = dd.sample(rng);
        REQUIRE(z.kind == LatentGroundTruth::Kind::simplex);
        CHECK(z.weights.size() == 2);
        CHECK(z.weights[0] >= 0.0);
        CHECK(std::fabs(z.weights[0] + z.weights[1] - 1.0) < 1e-12);
    }
}

TEST_CASE("generation is reproducible") {
    PopulationSpec spec = gaussian_spec(0.3);
    spec.n_train = 500;
    spec.n_val = 100;
    spec.n_test = 100;
    RngStream a(77), b(77);
    PairPool pa = build_pool(spec, a), pb = build_pool(spec, b);
    REQUIRE(pa.train.size() == pb.train.size());
    for (size_t i = 0; i < pa.train.size(); ++i) {
        CHECK(pa.train[i].y1.features == pb.train[i].y1.features);
        CHECK(pa.train[i].y2.features == pb.train[i].y2.features);
    }
    RngStream ta(78), tb(78);
    Task x = sample_task(pa.train, spec, TaskConfig{0, 10, 20}, ta);
    Task y = sample_task(pb.train, spec, TaskConfig{0, 10, 20}, tb);
    CHECK(x.target_ids == y.target_ids);
    CHECK(x.user_latent.mode == y.user_latent.mode);
}

TEST_CASE("dirichlet vertex equals kmode coordinate reward") {
    OptionVec y{{0.4, -1.2, 2.5}};
    std::vector<double> vertex = {0.0, 1.0, 0.0};
    CHECK(reward_linear(y, LatentGroundTruth::simplex(vertex)) ==
          reward_linear(y, LatentGroundTruth::discrete(1)));
}

TEST_CASE("pool file roundtrip") {
    RngStream rng(51);
    PopulationSpec spec = gaussian_spec(0.2);
    spec.n_train = 50;
    spec.n_val = 20;
    spec.n_test = 20;
    PairPool pool = build_pool(spec, rng);
    const std::string text = pool_to_text(pool);
    CHECK(text.rfind("prefnp-pool v1\n", 0) == 0);
    PairPool loaded = pool_from_text(text, spec);
    REQUIRE(loaded.train.size() == pool.train.size());
    REQUIRE(loaded.test.size() == pool.test.size());
    for (size_t i = 0; i < pool.train.size(); ++i) {
        CHECK(loaded.train[i].y1.features == pool.train[i].y1.features);
        CHECK(loaded.train[i].y2.features == pool.train[i].y2.features);
    }
    // noisy kmode records carry their generating scores through the file
    PopulationSpec km;
    km.family = RewardFamily::kmode;
    km.k = 2;
    km.feature_dim = 3;
    km.score_noise = 0.5;
    km.n_train = 10;
    km.n_val = 5;
    km.n_test = 5;
    km.latent_dist = {LatentDist::Kind::bernoulli, 0.5};
    RngStream rng2(52);
    PairPool noisy = build_pool(km, rng2);
    PairPool nl = pool_from_text(pool_to_text(noisy), km);
    REQUIRE(nl.train.size() == noisy.train.size());
    for (size_t i = 0; i < noisy.train.size(); ++i) {
        REQUIRE(nl.train[i].has_scores());
        CHECK(nl.train[i].s1 == noisy.train[i].s1);
    }
}

TEST_CASE("task log format") {
    RngStream rng(61);
    PopulationSpec spec = piecewise_spec();
    spec.n_train = 100;
    spec.n_val = 50;
    spec.n_test = 50;
    PairPool pool = build_pool(spec, rng);
    std::vector<Task> tasks;
    RngStream trng(62);
    for (int i = 0; i < 3; ++i) tasks.push_back(sample_task(pool.train, spec, TaskConfig{2, 2, 5}, trng));
    const std::string text = tasks_to_text(tasks);
    CHECK(text.rfind("prefnp-tasks v1\n", 0) == 0);
    const auto lines = split(text, '\n');
    CHECK(lines.size() == 5);  // header + 3 records + trailing empty
    const auto cols = split(lines[1], '\t');
    REQUIRE(cols.size() == 4);
    CHECK(split(cols[2], ',').size() == 2);
    CHECK(split(cols[3], ',').size() == 5);
}
