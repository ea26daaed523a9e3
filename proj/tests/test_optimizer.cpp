#include <doctest.h>

#include <cmath>
#include <vector>

#include "relulab/errors.hpp"
#include "relulab/gradient.hpp"
#include "relulab/optimizer.hpp"
#include "relulab/risk.hpp"

using namespace relulab;

TEST_CASE("sgd step") {
    auto state = OptimizerState::zeros(1);
    std::vector<double> theta{5.0};
    const std::vector<double> g{2.0};
    step(OptimizerConfig::sgd(0.1), state, theta, g);
    CHECK(theta[0] == doctest::Approx(4.8).epsilon(1e-15));
}

TEST_CASE("adam first step: bias corrections cancel") {
    auto state = OptimizerState::zeros(1);
    std::vector<double> theta{0.0};
    const std::vector<double> g{4.0};
    step(OptimizerConfig::adam(0.1, 0.9, 0.999, 1e-8), state, theta, g);
    CHECK(-theta[0] == doctest::Approx(0.1 * 4.0 / (1e-8 + 4.0)).epsilon(1e-14));
}

TEST_CASE("adam defaults preset") {
    const auto c = OptimizerConfig::preset("adam-default");
    CHECK(c.kind == OptimizerKind::adam);
    CHECK(c.learning_rate(0) == 1e-3);
    CHECK(c.momentum(5) == 0.9);
    CHECK(c.second_moment(7) == 0.999);
    CHECK(c.epsilon == 1e-8);
    CHECK_NOTHROW(c.validate());
    CHECK_THROWS(OptimizerConfig::preset("nope"));
}

TEST_CASE("closed form momentum") {
    OptimizerConfig c = OptimizerConfig::momentum_sgd(1.0, 0.5);
    const std::vector<std::vector<double>> h{{1.0}, {1.0}};
    const auto phi = phi_closed_form(c, h);
    CHECK(phi[0] == doctest::Approx(0.75).epsilon(1e-15));

    OptimizerConfig plain = OptimizerConfig::momentum_sgd(0.3, 0.0);
    const std::vector<std::vector<double>> h3{{1.0}, {-2.0}, {5.0}};
    CHECK(phi_closed_form(plain, h3)[0] == doctest::Approx(0.3 * 5.0).epsilon(1e-15));
}

TEST_CASE("all-zero history gives zero update") {
    const std::vector<std::vector<double>> zeros(4, std::vector<double>(3, 0.0));
    for (const auto& c : {OptimizerConfig::sgd(0.1), OptimizerConfig::momentum_sgd(0.1, 0.9),
                          OptimizerConfig::adam_default(), OptimizerConfig::rmsprop(0.1, 0.9, 1e-8),
                          OptimizerConfig::adagrad(0.1, 1e-8)}) {
        for (double v : phi_closed_form(c, zeros)) {
            CHECK(v == 0.0);
        }
        auto state = OptimizerState::zeros(3);
        std::vector<double> theta{1.0, 2.0, 3.0};
        for (const auto& g : zeros) {
            step(c, state, theta, g);
        }
        CHECK(theta == std::vector<double>{1.0, 2.0, 3.0});
    }
}

TEST_CASE("non-finite gradients are refused") {
    auto state = OptimizerState::zeros(1);
    std::vector<double> theta{0.0};
    const std::vector<double> g{std::nan("")};
    CHECK_THROWS_AS(step(OptimizerConfig::sgd(0.1), state, theta, g), NonFiniteGradient);
}

TEST_CASE("run") {
    const GradientSource quad = [](std::span<const double> t, std::uint64_t, std::uint64_t) {
        std::vector<double> g(t.size());
        for (std::size_t k = 0; k < t.size(); ++k) {
            g[k] = 2.0 * t[k];
        }
        return g;
    };
    SUBCASE("zero steps keep only theta0") {
        RunOptions o;
        const auto tr = run(OptimizerConfig::sgd(0.4), {1.0, -2.0}, quad, o, 0);
        REQUIRE(tr.snapshots.size() == 1);
        CHECK(tr.snapshots[0].theta == std::vector<double>{1.0, -2.0});
        CHECK(tr.final_theta == std::vector<double>{1.0, -2.0});
    }
    SUBCASE("quadratic contraction") {
        RunOptions o;
        o.steps = 10;
        o.cadence = 1;
        const auto tr = run(OptimizerConfig::sgd(0.4), {1.0, -2.0}, quad, o, 0);
        REQUIRE(tr.snapshots.size() == 11);
        for (const auto& s : tr.snapshots) {
            const double f = std::pow(0.2, static_cast<double>(s.step));
            CHECK(s.theta[0] == doctest::Approx(f).epsilon(1e-12));
            CHECK(s.theta[1] == doctest::Approx(-2.0 * f).epsilon(1e-12));
        }
    }
    SUBCASE("width 0 converges to the best constant") {
        const Problem p{DomainBox(0.0, 1.0, 1), Measure::uniform(), Target::square()};
        const auto cfg = QuadratureCfg::default_for(1);
        const ShallowArch arch{1, 0, {}};
        const GradientSource pop = [&](std::span<const double> t, std::uint64_t, std::uint64_t) {
            return gen_gradient_population(ShallowParams(arch, {t.begin(), t.end()}), p, cfg);
        };
        RunOptions o;
        o.steps = 200;
        const auto tr = run(OptimizerConfig::sgd(0.1), {0.0}, pop, o, 0);
        CHECK(std::abs(tr.final_theta[0] - best_constant(p, cfg).xi) < 1e-6);
    }
}

TEST_CASE("schedules") {
    CHECK(Schedule::power_decay(1.0, 0.5)(3) == doctest::Approx(0.5));
    const auto l = Schedule::list({0.1, 0.2});
    CHECK(l(0) == 0.1);
    CHECK(l(1) == 0.2);
    CHECK(l(9) == 0.2);
    const auto j = schedule_from_json(l.to_json(), "$");
    CHECK(j(1) == 0.2);
}

TEST_CASE("config validation") {
    CHECK_THROWS(OptimizerConfig::adam(1e-3, 1.0, 0.999, 1e-8).validate());
    CHECK_THROWS(OptimizerConfig::adam(1e-3, 0.9, 0.999, 0.0).validate());
    CHECK_THROWS_AS(optimizer_config_from_json(nlohmann::json{{"kind", "adamw"}}, "$.optimizer"), ConfigError);
}
