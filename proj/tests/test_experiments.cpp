#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "relulab/errors.hpp"
#include "relulab/experiments.hpp"
#include "relulab/gradient.hpp"
#include "relulab/risk.hpp"

using namespace relulab;

namespace {

Problem unit(Target f) {
    return Problem{DomainBox(0.0, 1.0, 1), Measure::uniform(), std::move(f)};
}

SweepOptions small_sweep() {
    SweepOptions o;
    o.widths = {4, 8};
    o.trials = 6;
    o.steps = 100;
    o.cadence = 50;
    o.inf.restarts = 3;
    o.inf.adam_steps = 100;
    o.trap_samples = 20000;
    return o;
}

} // namespace

TEST_CASE("wilson interval") {
    const auto [lo, hi] = wilson_interval(50, 100);
    CHECK(lo < 0.5);
    CHECK(hi > 0.5);
    CHECK(hi - 0.5 == doctest::Approx(0.5 - lo));
    const auto z = wilson_interval(0, 20);
    CHECK(z.first == 0.0);
    CHECK(z.second > 0.0);
}

TEST_CASE("optimizer algebra") {
    const auto r = optimizer_algebra_check(10, 4);
    CHECK(r.max_error_momentum <= 1e-12);
    CHECK(r.max_error_adam <= 1e-12);
    CHECK(r.zero_violations == 0);
    CHECK(r.rmsprop_identical);
    CHECK(r.passed);
}

TEST_CASE("trap invariance, short runs") {
    const auto r = trap_invariance_check(unit(Target::square()), 3, default_optimizer_suite(), 2, 50, 8,
                                         InitSpec::preset("normal-kappa-0.5"), 1);
    CHECK(r.rows.size() == 5);
    CHECK(r.passed);
}

TEST_CASE("gradient check, few samples") {
    GradCheckOptions o;
    o.samples = 8;
    const auto r = gradient_check(unit(Target::square()), QuadratureCfg::default_for(1), o, 3);
    CHECK(r.accepted == 8);
    CHECK(r.reference_decreasing);
    CHECK(r.passed);
}

TEST_CASE("trap frequency law") {
    const auto init = InitSpec::preset("normal-kappa-0.5");
    const DomainBox box(0.0, 1.0, 1);
    const auto rows = trap_frequency_law(init, box, {2, 4}, 3000, 0.375, 5);
    for (const auto& r : rows) {
        CHECK(r.within_band);
        CHECK(r.scale_invariant);
    }
}

TEST_CASE("sweep refuses a representable target") {
    auto o = small_sweep();
    CHECK_THROWS_AS(nonconvergence_sweep(unit(Target::abs_shift(0.5)), o, 1), PreconditionFailed);
    CHECK_THROWS_AS(nonconvergence_sweep(unit(Target::piecewise_linear({{0.0, 0.0}, {0.5, 1.0}, {1.0, 0.0}})), o, 1),
                    PreconditionFailed);
}

TEST_CASE("sweep is deterministic and independent of job count") {
    auto o = small_sweep();
    const auto a = nonconvergence_sweep(unit(Target::square()), o, 11);
    o.jobs = 3;
    const auto b = nonconvergence_sweep(unit(Target::square()), o, 11);
    CHECK(a.to_csv() == b.to_csv());
    CHECK(a.to_json().dump() == b.to_json().dump());
    for (const auto& t : a.trials) {
        if (t.trapped_at_init > 0) {
            CHECK(t.final_risk > a.rows[t.width == 4 ? 0 : 1].m_hat);
        }
    }
    // trial seeds do not depend on the trial count
    o.trials = 3;
    const auto c = nonconvergence_sweep(unit(Target::square()), o, 11);
    CHECK(c.trials[0].seed == a.trials[0].seed);
    CHECK(c.trials[0].final_risk == a.trials[0].final_risk);
}

TEST_CASE("hierarchy, small") {
    HierarchyOptions o;
    o.max_width = 2;
    o.inf.restarts = 6;
    const auto r = hierarchy_experiment(unit(Target::square()), o, 2);
    CHECK(r.m0_exact);
    CHECK(r.levels[0].m_hat == doctest::Approx(4.0 / 45.0).epsilon(1e-14));
    CHECK(r.strictly_decreasing);
    CHECK(r.embedding_ok);
    CHECK(r.improvement_ok);
    CHECK(r.clarke_violations == 0);
}

TEST_CASE("near-optimal parameters have no inactive neurons") {
    GlobalInfOptions o;
    o.restarts = 10;
    for (std::size_t H : {1, 2}) {
        const auto r = nearopt_no_inactive_check(unit(Target::square()), H, o, 3);
        CHECK(r.examined >= 1);
        CHECK(r.with_inactive == 0);
        CHECK(r.passed);
    }
}

TEST_CASE("Lyapunov function") {
    const DeepArch arch({1, 2, 1});
    const auto zero = DeepParams::zeros(arch);
    const std::vector<double> xi0{0.0};
    CHECK(lyapunov_v(zero, xi0) == 0.0);
    CHECK(lyapunov_sandwich_check({1, 2, 1}, 100, 1).passed);
    CHECK(lyapunov_sandwich_check({2, 3, 3, 1}, 100, 2).passed);

    // gradient of V against finite differences
    Rng rng(6);
    std::normal_distribution<double> n(0.0, 1.0);
    auto p = DeepParams::zeros(arch);
    for (auto& v : p.values()) {
        v = n(rng);
    }
    const std::vector<double> xi{0.7};
    const auto g = lyapunov_gradient(p, xi);
    const auto fd = fd_gradient(p.values(), [&](std::span<const double> t) {
        return lyapunov_v(DeepParams(arch, {t.begin(), t.end()}), xi);
    });
    for (std::size_t k = 0; k < g.size(); ++k) {
        CHECK(g[k] == doctest::Approx(fd[k]).epsilon(1e-7));
    }
}

TEST_CASE("Lyapunov identity") {
    const auto cfg = QuadratureCfg::default_for(1);
    // N = xi = f constant: both sides vanish
    const auto problem = unit(Target::constant(0.5));
    auto p = DeepParams::zeros(DeepArch({1, 2, 1}));
    p.bias(2, 1) = 0.5;
    const auto nodes = risk_nodes(p, problem, cfg);
    std::vector<double> ys(nodes.size(), 0.5);
    const auto G = weighted_risk_and_gradient(p, nodes, ys).gradient;
    for (double v : G) {
        CHECK(v == 0.0);
    }

    const auto r = lyapunov_identity_check(unit(Target::square()), {1, 2, 1}, 20, std::nullopt, cfg, 4);
    CHECK(r.accepted == 20);
    CHECK(r.max_error <= 1e-4);
    CHECK(r.max_shift_error <= 1e-4);
    CHECK(r.passed);
}

TEST_CASE("Lyapunov gradient descent run, short") {
    LyapunovOptions o;
    o.steps = 2000;
    const auto r = lyapunov_gd_run(unit(Target::square()), o, QuadratureCfg::default_for(1), 3);
    CHECK(r.below_threshold);
    CHECK(r.sandwich_ok);
    CHECK(r.v_monotone);
    CHECK(r.norm_bound_ok);
    CHECK(r.xi == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}
