#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "dsl/encode.hpp"
#include "dsl/loss.hpp"
#include "dsl/synth.hpp"

using namespace dsl;

namespace {

FieldSet random_fields(const GridSpec& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> prob(0.05, 0.95);
    std::uniform_real_distribution<double> vec(-4.0, 4.0);
    std::uniform_real_distribution<double> logsig(-0.5, 1.5);
    FieldSet f(g);
    for (auto& v : f.semantic) v = prob(rng);
    for (auto& v : f.offsets) v = {vec(rng), vec(rng)};
    for (int k = 0; k < kNumTypes; ++k)
        for (std::size_t i = 0; i < f.conf[k].size(); ++i) {
            f.conf[k][i] = prob(rng);
            f.loc[k][i] = {vec(rng), vec(rng)};
            f.log_sigma[k][i] = logsig(rng);
            f.log_scale[k][i] = logsig(rng);
        }
    return f;
}

FieldSet random_targets(const GridSpec& g, std::mt19937_64& rng) {
    std::bernoulli_distribution bit(0.3);
    std::uniform_real_distribution<double> vec(-4.0, 4.0);
    std::uniform_real_distribution<double> sig(0.5, 5.0);
    FieldSet f(g);
    for (auto& v : f.semantic) v = bit(rng) ? 1.0 : 0.0;
    for (auto& v : f.offsets) v = {vec(rng), vec(rng)};
    for (int k = 0; k < kNumTypes; ++k)
        for (std::size_t i = 0; i < f.conf[k].size(); ++i) {
            f.conf[k][i] = bit(rng) ? 1.0 : 0.0;
            f.loc[k][i] = {vec(rng), vec(rng)};
            f.set_sigma(k, i, sig(rng));
        }
    return f;
}

}  // namespace

TEST_CASE("loss_sem examples") {
    CHECK(loss_sem({1.0, 0.0}, {1.0, 0.0}) <= 1e-6);
    CHECK(loss_sem({0.5, 0.5, 0.5}, {1.0, 0.0, 1.0}) ==
          Catch::Approx(std::log(2.0)).epsilon(1e-9));
    CHECK(loss_sem({0.9}, {1.0}) == Catch::Approx(-std::log(0.9)).epsilon(1e-9));
    CHECK_THROWS_AS(loss_sem({0.5}, {1.0, 0.0}), DomainError);
}

TEST_CASE("loss_off examples") {
    CHECK(loss_off({{1, 2}}, {{1, 2}}) == 0.0);
    CHECK(loss_off({{3, 4}}, {{0, 0}}) == Catch::Approx(25.0));
    CHECK(loss_off({{1, 0}, {0, 1}}, {{0, 0}, {0, 0}}) == Catch::Approx(1.0));
}

TEST_CASE("loss_cnf is a sum over cells and types") {
    GridSpec g(16, 16, 8);
    FieldSet pred(g), target(g);
    CHECK(loss_cnf(pred.conf, target.conf) == 0.0);  // all zeros match exactly

    pred.conf[0][0] = 0.5;
    target.conf[0][0] = 1.0;
    CHECK(loss_cnf(pred.conf, target.conf) == Catch::Approx(std::log(2.0)));

    pred.conf[0][1] = 0.5;
    target.conf[0][1] = 1.0;
    CHECK(loss_cnf(pred.conf, target.conf) == Catch::Approx(2.0 * std::log(2.0)));
}

TEST_CASE("loss_sig masked absolute sum") {
    GridSpec g(16, 16, 8);
    FieldSet pred(g), target(g);
    target.conf[3][1] = 1.0;
    target.set_sigma(3, 1, 5.0);
    pred.set_sigma(3, 1, 3.0);
    // Unsupervised cells contribute nothing regardless of the prediction.
    pred.set_sigma(3, 0, 50.0);

    std::array<std::vector<double>, kNumTypes> ps, ts;
    for (int k = 0; k < kNumTypes; ++k) {
        ps[k] = pred.sigma_slice(k);
        ts[k] = target.sigma_slice(k);
    }
    CHECK(loss_sig(ps, ts, target.conf) == Catch::Approx(2.0));
    CHECK(loss_sig(ts, ts, target.conf) == 0.0);
}

TEST_CASE("loss_loc scale-weighted residuals") {
    GridSpec g(16, 16, 8);
    FieldSet pred(g), target(g);
    target.conf[0][0] = 1.0;

    SECTION("zero residual, B = 1") {
        CHECK(loss_loc(pred.loc, target.loc, pred.log_scale, target.conf) == 0.0);
    }
    SECTION("unit residual, B = 1") {
        pred.loc[0][0] = {1.0, 0.0};
        CHECK(loss_loc(pred.loc, target.loc, pred.log_scale, target.conf) ==
              Catch::Approx(1.0));
    }
    SECTION("residual 2 with B = e") {
        pred.loc[0][0] = {2.0, 0.0};
        pred.log_scale[0][0] = 1.0;
        CHECK(loss_loc(pred.loc, target.loc, pred.log_scale, target.conf) ==
              Catch::Approx(4.0 * std::exp(-2.0) + 1.0));
    }
}

TEST_CASE("loss_total composition") {
    SynthConfig scfg;
    scfg.seed = 5;
    scfg.n_players = 3;
    scfg.width = 256;
    scfg.height = 256;
    const FieldSet target = encode(synth_scene(scfg));

    SECTION("perfect prediction has zero loss") {
        const LossBreakdown lb = loss_total(target, target);
        CHECK(std::abs(lb.total) <= 1e-6);
        CHECK(lb.sem == 0.0);
        CHECK(lb.cnf == 0.0);
        CHECK(lb.off == 0.0);
        CHECK(lb.loc == 0.0);
        CHECK(lb.sig == 0.0);
    }
    SECTION("weighted sum with default weights") {
        std::mt19937_64 rng(1);
        const FieldSet pred = random_fields(target.grid, rng);
        const LossBreakdown lb = loss_total(pred, target);
        CHECK(lb.total == Catch::Approx(10.0 * lb.sem + 0.1 * lb.off +
                                        20.0 * lb.cnf + 10.0 * lb.loc +
                                        10.0 * lb.sig));
    }
    SECTION("zero weights zero the total but keep components") {
        std::mt19937_64 rng(2);
        const FieldSet pred = random_fields(target.grid, rng);
        LossWeights w{0, 0, 0, 0, 0};
        const LossBreakdown lb = loss_total(pred, target, w);
        CHECK(lb.total == 0.0);
        CHECK(lb.cnf > 0.0);
    }
    SECTION("doubling the weights doubles the total") {
        std::mt19937_64 rng(3);
        const FieldSet pred = random_fields(target.grid, rng);
        const LossBreakdown a = loss_total(pred, target);
        LossWeights w;
        w.w_sem *= 2; w.w_off *= 2; w.w_cnf *= 2; w.w_loc *= 2; w.w_sig *= 2;
        const LossBreakdown b = loss_total(pred, target, w);
        CHECK(b.total == Catch::Approx(2.0 * a.total));
        CHECK(b.cnf == a.cnf);
    }
    SECTION("grid mismatch") {
        FieldSet other(GridSpec(64, 64, 8));
        CHECK_THROWS_AS(loss_total(other, target), DomainError);
    }
}

TEST_CASE("gradients vanish at a perfect prediction") {
    SynthConfig scfg;
    scfg.seed = 9;
    scfg.n_players = 2;
    scfg.width = 192;
    scfg.height = 192;
    const FieldSet target = encode(synth_scene(scfg));
    const FieldGradients g = grad_total(target, target);
    for (const Vec2& v : g.offsets) CHECK(v == Vec2{0.0, 0.0});
    for (int k = 0; k < kNumTypes; ++k)
        for (std::size_t i = 0; i < g.sigma[k].size(); ++i) {
            CHECK(g.sigma[k][i] == 0.0);
            CHECK(g.loc[k][i] == Vec2{0.0, 0.0});
        }
}

TEST_CASE("log-scale gradient at zero residual is w_loc") {
    GridSpec g(16, 16, 8);
    FieldSet pred(g), target(g);
    target.conf[0][0] = 1.0;
    const FieldGradients grad = grad_total(pred, target);
    CHECK(grad.log_scale[0][0] == Catch::Approx(10.0));  // w_loc * 1
}

TEST_CASE("analytic gradients match central finite differences") {
    const GridSpec g(32, 32, 8);
    const double step = 1e-4;
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 3; ++trial) {
        FieldSet pred = random_fields(g, rng);
        const FieldSet target = random_targets(g, rng);
        const FieldGradients an = grad_total(pred, target);
        const LossWeights w;

        double max_rel = 0.0;
        auto check = [&](double analytic, double numeric) {
            const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
            max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
        };
        auto fd = [&](double& slot) {
            const double saved = slot;
            slot = saved + step;
            const double hi = loss_total(pred, target, w).total;
            slot = saved - step;
            const double lo = loss_total(pred, target, w).total;
            slot = saved;
            return (hi - lo) / (2.0 * step);
        };

        std::uniform_int_distribution<std::size_t> pick(0, pred.semantic.size() - 1);
        for (int s = 0; s < 64; ++s) {
            const std::size_t i = pick(rng);
            check(an.semantic[i], fd(pred.semantic[i]));
            check(an.offsets[i].x, fd(pred.offsets[i].x));
            check(an.offsets[i].y, fd(pred.offsets[i].y));
        }
        for (int k = 0; k < kNumTypes; ++k)
            for (std::size_t i = 0; i < pred.conf[k].size(); ++i) {
                check(an.conf[k][i], fd(pred.conf[k][i]));
                check(an.loc[k][i].x, fd(pred.loc[k][i].x));
                check(an.loc[k][i].y, fd(pred.loc[k][i].y));
                check(an.log_scale[k][i], fd(pred.log_scale[k][i]));
                if (std::abs(pred.sigma(k, i) - target.sigma(k, i)) > 1e-3) {
                    const double saved = pred.log_sigma[k][i];
                    const double sig = std::exp(saved);
                    pred.log_sigma[k][i] = std::log(sig + step);
                    const double hi = loss_total(pred, target, w).total;
                    pred.log_sigma[k][i] = std::log(sig - step);
                    const double lo = loss_total(pred, target, w).total;
                    pred.log_sigma[k][i] = saved;
                    check(an.sigma[k][i], (hi - lo) / (2.0 * step));
                }
            }
        CHECK(max_rel <= 1e-4);
    }
}

TEST_CASE("localization loss is minimized at B = sqrt(2) * residual") {
    // Golden-section search over B for a fixed residual.
    const double residual = 1.7;
    auto f = [&](double b) {
        return residual * residual / (b * b) + std::log(b);
    };
    double lo = 0.1, hi = 50.0;
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    while (hi - lo > 1e-10) {
        const double a = hi - phi * (hi - lo);
        const double b = lo + phi * (hi - lo);
        if (f(a) < f(b))
            hi = b;
        else
            lo = a;
    }
    CHECK(0.5 * (lo + hi) == Catch::Approx(std::sqrt(2.0) * residual).epsilon(1e-6));
}
