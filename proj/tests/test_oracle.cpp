#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "prefnp/oracle.hpp"

using namespace prefnp;

namespace {

PreferencePair pair2(double w0, double w1, double l0, double l1) {
    return {{{w0, w1}}, {{l0, l1}}};
}

}  // namespace

TEST_CASE("bayes_posterior cases") {
    // winner better on coordinate 0, worse on 1: identifies latent 0
    Posterior p = bayes_posterior({pair2(1.0, -0.5, 0.2, 0.3)}, 2);
    CHECK(!p.impossible);
    CHECK(p.probs[0] == 1.0);
    CHECK(p.probs[1] == 0.0);

    // winner better on both: uninformative
    p = bayes_posterior({pair2(1.0, 0.9, 0.2, 0.3)}, 2);
    CHECK(p.probs[0] == 0.5);
    CHECK(p.probs[1] == 0.5);

    // winner worse on both: impossible under either latent
    p = bayes_posterior({pair2(0.1, 0.1, 0.5, 0.5)}, 2);
    CHECK(p.impossible);

    // order invariance is exact
    std::vector<PreferencePair> ctx = {pair2(1.0, 0.9, 0.2, 0.3), pair2(0.5, -0.2, 0.1, 0.4)};
    Posterior a = bayes_posterior(ctx, 2);
    std::swap(ctx[0], ctx[1]);
    Posterior b = bayes_posterior(ctx, 2);
    CHECK(a.probs == b.probs);

    CHECK_THROWS_AS(bayes_posterior({pair2(0.5, 0.1, 0.5, 0.0)}, 2), TieError);
}

TEST_CASE("bayes_classify") {
    RngStream rng(3);
    CHECK(bayes_classify(Posterior{{1.0, 0.0}, false}, rng) == 0);
    CHECK(bayes_classify(Posterior{{0.2, 0.3, 0.5}, false}, rng) == 2);
    CHECK_THROWS_AS(bayes_classify(Posterior{{0.0, 0.0}, true}, rng), std::invalid_argument);

    size_t ones = 0;
    const size_t n = 100000;
    for (size_t i = 0; i < n; ++i) ones += bayes_classify(Posterior{{0.5, 0.5}, false}, rng);
    CHECK(std::fabs(static_cast<double>(ones) / n - 0.5) < 0.01);
}

TEST_CASE("closed_form_error endpoints and monotonicity") {
    CHECK(closed_form_error(-1.0) == 0.0);
    CHECK(closed_form_error(1.0) == 0.5);
    CHECK(closed_form_error(0.0) == 0.25);
    CHECK_THROWS_AS(closed_form_error(1.2), std::invalid_argument);

    double prev = -1.0;
    for (int i = 0; i <= 200; ++i) {
        const double rho = -1.0 + 2.0 * i / 200.0;
        const double e = closed_form_error(rho);
        CHECK(e >= prev);
        prev = e;
    }
}

TEST_CASE("mc error matches the arcsin law at a single context pair") {
    // rho = 0.5: 1/4 + arcsin(0.5)/(2 pi) = 1/4 + 1/12
    McEstimate est = mc_error_estimate(0.5, 200000, 1, 11);
    const double expect = 0.25 + 1.0 / 12.0;
    CHECK(std::fabs(est.mean - expect) < 3.0 * est.stderr_);

    // exact at the fully conflicting end
    McEstimate zero = mc_error_estimate(-1.0, 20000, 1, 12);
    CHECK(zero.mean == 0.0);
    McEstimate zero3 = mc_error_estimate(-1.0, 5000, 3, 13);
    CHECK(zero3.mean == 0.0);
}

TEST_CASE("mc error decreases with more context") {
    McEstimate one = mc_error_estimate(0.0, 100000, 1, 21);
    McEstimate five = mc_error_estimate(0.0, 100000, 5, 22);
    CHECK(five.mean < one.mean);
    CHECK(std::fabs(one.mean - 0.25) < 3.0 * one.stderr_);

    // non-increasing within 3 combined standard errors on a rho inside (-1,1)
    McEstimate a = mc_error_estimate(0.4, 60000, 2, 23);
    McEstimate b = mc_error_estimate(0.4, 60000, 4, 24);
    CHECK(b.mean <= a.mean + 3.0 * std::sqrt(a.stderr_ * a.stderr_ + b.stderr_ * b.stderr_));
}

TEST_CASE("mc estimate is identical across thread counts") {
    // PREFNP_THREADS=1 vs default: block reduction keeps the result fixed
    McEstimate a = mc_error_estimate(0.3, 30000, 2, 31);
    setenv("PREFNP_THREADS", "1", 1);
    McEstimate b = mc_error_estimate(0.3, 30000, 2, 31);
    unsetenv("PREFNP_THREADS");
    CHECK(a.mean == b.mean);
}

TEST_CASE("np_vs_bayes bayes column matches the closed form") {
    NPEncoderSpec enc;
    enc.input_dim = 2;
    enc.embed_dim = 16;
    NPBTLModel model = make_np_btl(enc, 5);
    auto curve = np_vs_bayes_curve(model, -1.0, {-1.0, 0.0, 0.5}, 200, 41);
    REQUIRE(curve.size() == 3);
    CHECK(curve[0].bayes_error == closed_form_error(-1.0));
    CHECK(curve[1].bayes_error == closed_form_error(0.0));
    CHECK(curve[2].bayes_error == closed_form_error(0.5));
    for (const auto& pt : curve) {
        CHECK(pt.n_context == 1);
        CHECK(pt.np_error >= 0.0);
        CHECK(pt.np_error <= 1.0);
    }
}

TEST_CASE("untrained model is at chance when nothing identifies the latent") {
    // at rho = +1 both latents rank every pair identically, so identification
    // is a coin flip for any model
    NPEncoderSpec enc;
    enc.input_dim = 2;
    enc.embed_dim = 16;
    NPBTLModel model = make_np_btl(enc, 6);
    CurvePoint pt = np_identification_error(model, 0.0, 1.0, 20000, 42);
    CHECK(std::fabs(pt.np_error - 0.5) < 0.02);
}
