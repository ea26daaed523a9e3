#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "relulab/errors.hpp"
#include "relulab/global_inf.hpp"
#include "relulab/gradient.hpp"
#include "relulab/landscape.hpp"
#include "relulab/risk.hpp"

using namespace relulab;

namespace {

Problem unit(Target f) {
    return Problem{DomainBox(0.0, 1.0, 1), Measure::uniform(), std::move(f)};
}

} // namespace

TEST_CASE("neuron status") {
    {
        const ShallowParams p(ShallowArch{2, 1, {}}, {1.0, -2.0, -4.0, 1.0, 0.0});
        const auto s = neuron_status(p, 1, DomainBox(-1.0, 1.0, 2));
        CHECK(s.max_preactivation == -1.0);
        CHECK(s.strictly_trapped);
        CHECK(s.inactive);
    }
    {
        const ShallowParams p(ShallowArch{1, 1, {}}, {1.0, 0.0, 1.0, 0.0});
        const auto s = neuron_status(p, 1, DomainBox(0.0, 1.0, 1));
        CHECK(s.max_preactivation == 1.0);
        CHECK_FALSE(s.inactive);
    }
    {
        const ShallowParams p(ShallowArch{1, 1, {}}, {-1.0, 0.0, 1.0, 0.0});
        const auto s = neuron_status(p, 1, DomainBox(0.0, 1.0, 1));
        CHECK(s.max_preactivation == 0.0);
        CHECK(s.inactive);
        CHECK_FALSE(s.strictly_trapped);
    }
    const ShallowParams p(ShallowArch{1, 1, {}}, {1.0, 0.0, 1.0, 0.0});
    CHECK_THROWS(neuron_status(p, 2, DomainBox(0.0, 1.0, 1)));
    CHECK_THROWS_AS(neuron_status(p, 1, DomainBox(0.0, 1.0, 2)), DimensionMismatch);
}

TEST_CASE("trapped implies inactive on random parameters") {
    Rng rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    const DomainBox box(-1.0, 2.0, 2);
    for (int s = 0; s < 500; ++s) {
        auto p = ShallowParams::zeros(ShallowArch{2, 3, {}});
        for (auto& v : p.values()) {
            v = n(rng);
        }
        for (std::size_t i = 1; i <= 3; ++i) {
            const auto st = neuron_status(p, i, box);
            if (st.strictly_trapped) {
                CHECK(st.inactive);
            }
        }
    }
}

TEST_CASE("trap probability oracles") {
    const DomainBox box(0.0, 1.0, 1);
    const std::size_t n = 400000;
    auto tp = trap_probability(InitSpec::preset("normal-kappa-0.5"), box, n, 1);
    CHECK(std::abs(tp.p_hat - 0.375) < 4.0 * std::sqrt(0.375 * 0.625 / n));
    // uniform(-1,1): int_{-1}^{0} (1/2) P(W < -b) db = int_{-1}^{0} (1 - b)/4 db = 3/8
    tp = trap_probability(InitSpec::preset("uniform-kappa-0.5"), box, n, 2);
    CHECK(std::abs(tp.p_hat - 0.375) < 4.0 * std::sqrt(0.375 * 0.625 / n));
    // positive bias (and weights) make the event impossible
    tp = trap_probability(InitSpec::table({0.5, 1.0}, {1.0}, 0.5), box, 10000, 3);
    CHECK(tp.p_hat == 0.0);
    // job count does not change the estimate
    CHECK(trap_probability(InitSpec::preset("normal-kappa-0.5"), box, 200000, 4, 1).p_hat ==
          trap_probability(InitSpec::preset("normal-kappa-0.5"), box, 200000, 4, 3).p_hat);
}

TEST_CASE("trapping bound") {
    const auto b = trapping_bound(0.375, 8);
    CHECK(b.exp_bound == doctest::Approx(std::exp(-3.0)).epsilon(1e-15));
    CHECK(b.at_least_one == doctest::Approx(0.97671).epsilon(1e-4));
    CHECK(trapping_bound(0.0, 8).exp_bound == 1.0);
    double prev = 1.0;
    for (std::size_t H = 1; H < 100; ++H) {
        const double e = trapping_bound(0.375, H).exp_bound;
        CHECK(e < prev);
        prev = e;
    }
}

TEST_CASE("shallow embedding") {
    const auto problem = unit(Target::square());
    const auto cfg = QuadratureCfg::default_for(1);
    const ShallowParams p(ShallowArch{1, 1, {}}, {1.0, 0.0, 1.0, 0.0});
    CHECK(embed_shallow(p, 1) == p);
    const auto e = embed_shallow(p, 3);
    CHECK(e.width() == 3);
    for (std::size_t i = 2; i <= 3; ++i) {
        CHECK(e.weight(i, 1) == 0.0);
        CHECK(e.inner_bias(i) == -1.0);
        CHECK(e.outer_weight(i) == 0.0);
    }
    CHECK(risk_population(e, problem, cfg) == risk_population(p, problem, cfg));
}

TEST_CASE("embedded near-minimum stays a local minimum under small perturbations") {
    const auto problem = unit(Target::square());
    const auto cfg = QuadratureCfg::default_for(1);
    GlobalInfOptions opts;
    opts.restarts = 4;
    const auto best = global_inf_estimate(problem, 1, opts, 2).best;
    const auto e = embed_shallow(best, 4);
    const double r = risk_population(e, problem, cfg);
    CHECK(std::abs(r - risk_population(best, problem, cfg)) <= 1e-12);
    Rng rng(9);
    std::normal_distribution<double> n(0.0, 1.0);
    std::size_t below = 0;
    for (int s = 0; s < 200; ++s) {
        auto q = e;
        std::vector<double> dir(q.values().size());
        double nn = 0;
        for (auto& v : dir) {
            v = n(rng);
            nn += v * v;
        }
        nn = std::sqrt(nn);
        for (std::size_t k = 0; k < dir.size(); ++k) {
            q.values()[k] += 1e-3 * dir[k] / nn;
        }
        below += risk_population(q, problem, cfg) < r - 1e-8 ? 1 : 0;
    }
    CHECK(below == 0);
}

TEST_CASE("deep embedding") {
    DeepParams p = DeepParams::zeros(DeepArch({1, 1, 1}));
    p.weight(1, 1, 1) = 1.0;
    p.weight(2, 1, 1) = 1.0;
    p.bias(2, 1) = 0.3;
    CHECK(embed_deep(p, {1, 1, 1}) == p);
    const auto e = embed_deep(p, {1, 2, 1});
    const auto stepwise = embed_deep(embed_deep(p, {1, 2, 1}), {1, 3, 1});
    const auto oneshot = embed_deep(p, {1, 3, 1});
    Rng rng(1);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int s = 0; s < 100; ++s) {
        const double x = u(rng);
        CHECK(realize(e, {&x, 1})[0] == realize(p, {&x, 1})[0]);
        CHECK(realize(stepwise, {&x, 1})[0] == realize(oneshot, {&x, 1})[0]);
    }
    CHECK_THROWS_AS(embed_deep(p, {2, 2, 1}), DimensionMismatch);
    CHECK_THROWS_AS(embed_deep(p, {1, 1, 1, 1}), DimensionMismatch);
}

TEST_CASE("neuron addition") {
    const auto cfg = QuadratureCfg::default_for(1);
    SUBCASE("best constant for x^2 improves") {
        const auto problem = unit(Target::square());
        const ShallowParams c(ShallowArch{1, 0, {}}, {1.0 / 3.0});
        const auto imp = add_neuron_improve(c, problem, cfg, 64, 5);
        CHECK(imp.improved);
        CHECK(imp.params.width() == 1);
        CHECK(imp.risk_after < 4.0 / 45.0);
        CHECK(imp.predicted_improvement ==
              doctest::Approx(imp.derivative * imp.derivative / imp.feature_norm).epsilon(1e-12));
        CHECK(imp.risk_before - imp.risk_after == doctest::Approx(imp.predicted_improvement).epsilon(1e-8));
    }
    SUBCASE("exact representation cannot improve") {
        const auto problem = unit(Target::identity());
        const ShallowParams p(ShallowArch{1, 1, {}}, {1.0, 0.0, 1.0, 0.0});
        const auto imp = add_neuron_improve(p, problem, cfg, 64, 5);
        CHECK_FALSE(imp.improved);
        CHECK(std::abs(imp.derivative) < 1e-14);
    }
}

TEST_CASE("Clarke bound check") {
    const auto problem = unit(Target::square());
    const auto cfg = QuadratureCfg::default_for(1);
    const ShallowParams c(ShallowArch{1, 0, {}}, {1.0 / 3.0});
    const auto ok = clarke_bound_check(c, problem, cfg, 1e-5, 0.0);
    CHECK(ok.verdict == ClarkeVerdict::pass);
    const ShallowParams far(ShallowArch{1, 1, {}}, {1.0, 0.0, 5.0, 3.0});
    CHECK(clarke_bound_check(far, problem, cfg, 1e-5, 1e-4).verdict == ClarkeVerdict::not_applicable);
    // a trained stationary point
    GlobalInfOptions opts;
    opts.restarts = 4;
    const auto m = global_inf_estimate(problem, 2, opts, 8);
    const auto chk = clarke_bound_check(m.best, problem, cfg, 1e-5, 1e-4);
    CHECK(chk.verdict != ClarkeVerdict::fail);
    CHECK(chk.risk <= 4.0 / 45.0 + 1e-4);
}

TEST_CASE("init sampling scales by H^-kappa") {
    const ShallowArch arch{1, 16, {}};
    const auto a = sample_init(arch, InitSpec::preset("normal-kappa-0.5"), 4);
    const auto b = sample_init(arch, InitSpec::preset("normal-unscaled"), 4);
    for (std::size_t k = 0; k + 1 < a.values().size(); ++k) {
        CHECK(a.values()[k] == doctest::Approx(b.values()[k] / 4.0).epsilon(1e-15));
    }
    CHECK(a.outer_bias() == 0.0);
    CHECK(sample_init(arch, InitSpec::preset("normal-kappa-0.5"), 4) == a);
}
