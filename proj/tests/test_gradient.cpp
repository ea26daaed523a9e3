#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "relulab/gradient.hpp"
#include "relulab/risk.hpp"

using namespace relulab;

namespace {

Problem unit(Target f) {
    return Problem{DomainBox(0.0, 1.0, 1), Measure::uniform(), std::move(f)};
}

double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0, scale = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        diff = std::max(diff, std::abs(a[k] - b[k]));
        scale = std::max(scale, std::abs(b[k]));
    }
    return diff / scale;
}

} // namespace

TEST_CASE("hand-differentiated single pair") {
    const ShallowParams p(ShallowArch{1, 1, {}}, {1.0, 0.0, 1.0, 0.0});
    Batch b;
    const double one = 1.0;
    b.push_back({&one, 1}, 0.0);
    const auto g = gen_gradient_empirical(p, b);
    CHECK(g == std::vector<double>{2.0, 2.0, 2.0, 2.0});
}

TEST_CASE("inactive neuron gets zero inner gradient") {
    // neuron 2 has pre-activation -x - 1 < 0 on [0, 1]
    const ShallowParams p(ShallowArch{1, 2, {}}, {0.7, -1.0, 0.2, -1.0, 1.3, 0.4, 0.1});
    const auto problem = unit(Target::square());
    const auto batch = noisy_pairs(problem, 32, 4);
    const auto ge = gen_gradient_empirical(p, batch);
    const auto gp = gen_gradient_population(p, problem, QuadratureCfg::default_for(1));
    const auto& a = p.arch();
    for (const auto& g : {ge, gp}) {
        CHECK(g[a.weight_index(2, 1)] == 0.0);
        CHECK(g[a.inner_bias_index(2)] == 0.0);
    }
}

TEST_CASE("population gradient vanishes at an exact representation") {
    const ShallowParams p(ShallowArch{1, 1, {}}, {1.0, 0.0, 1.0, 0.0});
    const auto g = gen_gradient_population(p, unit(Target::identity()), QuadratureCfg::default_for(1));
    for (double v : g) {
        CHECK(std::abs(v) < 1e-15);
    }
}

TEST_CASE("finite differences") {
    const std::vector<double> theta{0.3, -1.7, 2.2};
    const auto g = fd_gradient(theta, [](std::span<const double> t) {
        double s = 0;
        for (double v : t) {
            s += v * v;
        }
        return s;
    });
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(std::abs(g[k] - 2.0 * theta[k]) < 1e-8);
    }
    const auto lin = fd_gradient(theta, [](std::span<const double> t) { return 3.0 * t[0] - 2.0 * t[1] + 0.5 * t[2]; });
    CHECK(lin[0] == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(lin[1] == doctest::Approx(-2.0).epsilon(1e-9));
    CHECK(lin[2] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("generalized gradient matches finite differences at a smooth point") {
    const auto problem = unit(Target::square());
    const auto cfg = QuadratureCfg::default_for(1);
    const ShallowArch arch{1, 3, {}};
    // kinks at 0.25, 0.6 and one neuron active on the whole box
    const ShallowParams p(arch, {2.0, -1.0, 0.5, -0.5, 0.6, 0.4, 1.1, -0.7, 0.9, 0.05});
    const auto g = gen_gradient_population(p, problem, cfg);
    const auto fd = fd_gradient(p.values(), [&](std::span<const double> t) {
        return risk_population(ShallowParams(arch, {t.begin(), t.end()}), problem, cfg);
    });
    CHECK(rel_err(g, fd) < 1e-5);

    const auto batch = noisy_pairs(problem, 20, 8);
    const auto ge = gen_gradient_empirical(p, batch);
    const auto fe = fd_gradient(p.values(), [&](std::span<const double> t) {
        return risk_empirical(ShallowParams(arch, {t.begin(), t.end()}), batch);
    });
    CHECK(rel_err(ge, fe) < 1e-5);
}

TEST_CASE("outer coordinates match finite differences everywhere") {
    const auto problem = unit(Target::square());
    const auto cfg = QuadratureCfg::default_for(1);
    Rng rng(17);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int s = 0; s < 20; ++s) {
        const ShallowArch arch{1, 3, {}};
        auto p = ShallowParams::zeros(arch);
        for (auto& v : p.values()) {
            v = normal(rng);
        }
        const auto g = gen_gradient_population(p, problem, cfg);
        const auto fd = fd_gradient(p.values(), [&](std::span<const double> t) {
            return risk_population(ShallowParams(arch, {t.begin(), t.end()}), problem, cfg);
        });
        std::vector<double> go(g.begin() + 6, g.end()), fo(fd.begin() + 6, fd.end());
        CHECK(rel_err(go, fo) < 1e-6);
    }
}

TEST_CASE("smoothed gradients approach the generalized gradient") {
    const ShallowParams p(ShallowArch{1, 1, {}}, {1.0, 0.0, 1.0, 0.0});
    const std::vector<double> rs{10.0, 100.0, 1000.0};
    const auto rep = smooth_limit_check(p, unit(Target::constant(0.0)), QuadratureCfg::default_for(1), rs);
    REQUIRE(rep.discrepancy.size() == 3);
    CHECK(rep.strictly_decreasing);
    CHECK(rep.discrepancy[0] > rep.discrepancy[1]);
    CHECK(rep.discrepancy[1] > rep.discrepancy[2]);

    // pre-activations bounded away from 0 on [0, 1]: R_r equals ReLU once r is large
    const ShallowParams far(ShallowArch{1, 1, {}}, {1.0, 0.5, 1.0, 0.0});
    const auto same = smooth_limit_check(far, unit(Target::square()), QuadratureCfg::default_for(1), rs);
    CHECK(same.discrepancy.back() < 1e-12);

    // inactive neuron: smoothed inner gradient goes to 0
    const ShallowParams dead(ShallowArch{1, 1, {}}, {1.0, -0.001, 1.0, 0.0});
    const auto d = smooth_limit_check(dead, unit(Target::square()), QuadratureCfg::default_for(1), rs);
    CHECK(d.discrepancy.back() < d.discrepancy.front());
}
