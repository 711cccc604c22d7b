#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "prefnp/bench.hpp"
#include "prefnp/config.hpp"
#include "prefnp/pca.hpp"
#include "prefnp/runner.hpp"
#include "support/jacobi.hpp"

using namespace prefnp;

TEST_CASE("pca on axis-aligned data") {
    // sign-symmetric quadruples cancel the cross-covariance exactly, so the
    // sample principal axes are the coordinate axes
    RngStream rng(1);
    std::vector<Tensor> points;
    for (int i = 0; i < 50; ++i) {
        const double a = 3.0 * rng.normal();
        const double b = 0.5 * rng.normal();
        for (double sa : {1.0, -1.0})
            for (double sb : {1.0, -1.0}) {
                Tensor t = Tensor::zeros(1, 2);
                t.data[0] = sa * a;
                t.data[1] = sb * b;
                points.push_back(t);
            }
    }
    PcaResult pca = pca_project(points, 2);
    CHECK(!pca.degenerate);
    // first component is the x axis up to sign
    CHECK(std::fabs(std::fabs(pca.components[0].data[0]) - 1.0) < 1e-6);
    CHECK(std::fabs(pca.components[0].data[1]) < 1e-6);
    CHECK(pca.eigenvalues[0] >= pca.eigenvalues[1]);

    // orthonormal components
    double dot = 0.0, n0 = 0.0, n1 = 0.0;
    for (size_t j = 0; j < 2; ++j) {
        dot += pca.components[0].data[j] * pca.components[1].data[j];
        n0 += pca.components[0].data[j] * pca.components[0].data[j];
        n1 += pca.components[1].data[j] * pca.components[1].data[j];
    }
    CHECK(std::fabs(dot) < 1e-8);
    CHECK(std::fabs(n0 - 1.0) < 1e-8);
    CHECK(std::fabs(n1 - 1.0) < 1e-8);
}

TEST_CASE("pca matches the dense jacobi oracle") {
    RngStream rng(2);
    const size_t d = 24;
    std::vector<Tensor> points;
    for (int i = 0; i < 300; ++i) {
        Tensor t = Tensor::zeros(1, d);
        for (size_t j = 0; j < d; ++j)
            t.data[j] = rng.normal() * (1.0 + 0.5 * static_cast<double>(j % 5));
        points.push_back(t);
    }
    PcaResult pca = pca_project(points, 2);

    // oracle: centered covariance, full eigendecomposition
    Tensor x = Tensor::zeros(points.size(), d);
    for (size_t i = 0; i < points.size(); ++i)
        for (size_t j = 0; j < d; ++j) x.at(i, j) = points[i].data[j];
    center_rows(x);
    auto pairs = prefnp_test::jacobi_eigen(covariance(x));

    for (size_t c = 0; c < 2; ++c) {
        CHECK(std::fabs(pca.eigenvalues[c] - pairs[c].value) < 1e-6);
        // eigenvectors match up to sign
        double dot = 0.0;
        for (size_t j = 0; j < d; ++j) dot += pca.components[c].data[j] * pairs[c].vector[j];
        CHECK(std::fabs(std::fabs(dot) - 1.0) < 1e-6);
    }
}

TEST_CASE("pca degenerate input") {
    std::vector<Tensor> same(5, Tensor::row({1.0, 2.0, 3.0}));
    PcaResult pca = pca_project(same, 2);
    CHECK(pca.degenerate);
    for (double v : pca.coords.data) CHECK(v == 0.0);
    CHECK_THROWS_AS(pca_project({Tensor::row({1.0})}, 1), std::invalid_argument);
}

TEST_CASE("silhouette separates far clouds and flags noise") {
    RngStream rng(3);
    Tensor coords = Tensor::zeros(100, 2);
    std::vector<std::string> labels(100);
    for (size_t i = 0; i < 100; ++i) {
        const bool first = i < 50;
        coords.at(i, 0) = (first ? -10.0 : 10.0) + 0.1 * rng.normal();
        coords.at(i, 1) = 0.1 * rng.normal();
        labels[i] = first ? "a" : "b";
    }
    CHECK(cluster_separation(coords, labels).mean > 0.9);

    // random labels: no structure
    std::vector<std::string> shuffled = labels;
    for (size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
    CHECK(std::fabs(cluster_separation(coords, shuffled).mean) < 0.1);

    // a label with a single point contributes silhouette 0
    Tensor tiny = Tensor::zeros(3, 1);
    tiny.at(0, 0) = 0.0;
    tiny.at(1, 0) = 1.0;
    tiny.at(2, 0) = 10.0;
    SilhouetteResult sil = cluster_separation(tiny, {"a", "a", "solo"});
    CHECK(sil.per_point[2] == 0.0);

    CHECK_THROWS_AS(cluster_separation(tiny, {"a", "a", "a"}), std::invalid_argument);
}

TEST_CASE("config json roundtrip is lossless") {
    for (const std::string& name : preset_names()) {
        ExperimentConfig c = preset_config(name);
        const json j = config_to_json(c);
        ExperimentConfig back = config_from_json(j);
        CHECK(config_to_json(back).dump() == j.dump());
        CHECK(config_hash(back) == config_hash(c));
    }
    CHECK_THROWS_AS(preset_config("nope"), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::object()), ConfigError);
}

TEST_CASE("tsv tables roundtrip") {
    TsvTable t;
    t.header = {"a", "b"};
    t.add_row({"1", format_double(0.1 + 0.2)});
    t.add_row({"x", format_double(1e-17)});
    TsvTable back = TsvTable::from_text(t.to_text());
    CHECK(back.to_text() == t.to_text());
    CHECK(parse_double(back.rows[0][1]) == 0.1 + 0.2);
    CHECK_THROWS(t.add_row({"only-one"}));
}

TEST_CASE("linear fit recovers a line") {
    std::vector<double> xs, ys;
    for (int i = 1; i <= 20; ++i) {
        xs.push_back(i);
        ys.push_back(3.0 + 2.0 * i);
    }
    LinearFit fit = fit_line(xs, ys);
    CHECK(fit.slope == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("bench scaling runs and orders sanely") {
    NPEncoderSpec enc;
    enc.input_dim = 2;
    enc.embed_dim = 32;
    NPBTLModel model = make_np_btl(enc, 9);
    auto points = bench_scaling(model, {1, 8, 64}, 10, 3, 9);
    REQUIRE(points.size() == 3);
    for (const auto& pt : points) {
        CHECK(pt.encode_ms > 0.0);
        CHECK(pt.decode_ms > 0.0);
    }
    // 64 context pairs cost visibly more to encode than 1
    CHECK(points[2].encode_ms > points[0].encode_ms);
}

TEST_CASE("run_experiment writes a deterministic report") {
    ExperimentConfig config = preset_config("example-3-1");
    config.population.n_train = 400;
    config.population.n_val = 100;
    config.population.n_test = 100;
    config.train.max_steps = 2;
    config.train.n_val_tasks = 8;
    config.eval.n_test_tasks = 20;
    config.eval.n_context_grid = {0, 2};
    config.seed = 123;
    config.out_dir = "harness_run_a";
    RunSummary a = run_experiment(config);
    config.out_dir = "harness_run_b";
    RunSummary b = run_experiment(config);

    for (const char* f : {"metrics.tsv", "fig1b_accuracy.tsv", "train_log.tsv", "pool.txt",
                          "tasks.txt", "checkpoint.json", "fig3_pca.tsv", "silhouette.tsv"}) {
        const std::string fa = read_file("harness_run_a/" + std::string(f));
        const std::string fb = read_file("harness_run_b/" + std::string(f));
        CHECK(fa == fb);
        CHECK(!fa.empty());
    }
    // emitted tables parse back
    TsvTable metrics = TsvTable::from_text(read_file("harness_run_a/metrics.tsv"));
    CHECK(metrics.header.size() == 9);
    CHECK(!metrics.rows.empty());
    TsvTable fig = TsvTable::from_text(read_file("harness_run_a/fig1b_accuracy.tsv"));
    CHECK(fig.header == std::vector<std::string>{"n_context", "accuracy_mean", "accuracy_stderr"});
    const json manifest = json::parse(read_file("harness_run_a/manifest.json"));
    CHECK(manifest.at("config_hash").get<std::string>() == config_hash(config));

    std::filesystem::remove_all("harness_run_a");
    std::filesystem::remove_all("harness_run_b");
}

TEST_CASE("scaling bench pipeline emits fit columns") {
    ExperimentConfig config = preset_config("scaling-bench");
    config.bench.nc_grid = {1, 4, 16};
    config.bench.repeats = 3;
    config.out_dir = "harness_bench";
    RunSummary summary = run_scaling_bench(config);
    (void)summary;
    TsvTable fit = TsvTable::from_text(read_file("harness_bench/bench_fit.tsv"));
    CHECK(fit.rows.size() == 2);
    CHECK(fit.rows[0][0] == "encode");
    std::filesystem::remove_all("harness_bench");
}
