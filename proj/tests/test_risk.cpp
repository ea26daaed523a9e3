#include <doctest.h>

#include <cmath>
#include <vector>

#include "relulab/global_inf.hpp"
#include "relulab/risk.hpp"

using namespace relulab;

namespace {

Problem unit(Target f) {
    return Problem{DomainBox(0.0, 1.0, 1), Measure::uniform(), std::move(f)};
}

// Independent oracle for width 1 on [0, 1]: grid over (w, b) and exact 2x2
// least squares in (v, c), with integrals by a fine midpoint rule.
double width_one_grid_oracle() {
    const int n = 4000;
    std::vector<double> xs(n), fx(n);
    for (int k = 0; k < n; ++k) {
        xs[k] = (k + 0.5) / n;
        fx[k] = xs[k] * xs[k];
    }
    double best = 1e9;
    for (int iw = -20; iw <= 20; ++iw) {
        const double w = iw / 10.0;
        for (int ib = -20; ib <= 20; ++ib) {
            const double b = ib / 10.0;
            double s11 = 0, s1 = 0, s0 = 1.0, r1 = 0, r0 = 0, ff = 0;
            for (int k = 0; k < n; ++k) {
                const double phi = std::max(w * xs[k] + b, 0.0);
                s11 += phi * phi / n;
                s1 += phi / n;
                r1 += phi * fx[k] / n;
                r0 += fx[k] / n;
                ff += fx[k] * fx[k] / n;
            }
            const double det = s11 * s0 - s1 * s1;
            double v = 0, c = r0;
            if (det > 1e-14) {
                v = (r1 * s0 - s1 * r0) / det;
                c = (s11 * r0 - s1 * r1) / det;
            }
            // |v phi + c - f|^2 expanded
            const double risk = v * v * s11 + 2 * v * c * s1 + c * c - 2 * v * r1 - 2 * c * r0 + ff;
            best = std::min(best, risk);
        }
    }
    return best;
}

} // namespace

TEST_CASE("population risk closed forms") {
    const auto cfg = QuadratureCfg::default_for(1);
    const ShallowParams relu(ShallowArch{1, 1, {}}, {1.0, 0.0, 1.0, 0.0});
    CHECK(std::abs(risk_population(relu, unit(Target::identity()), cfg)) < 1e-16);
    CHECK(risk_population(relu, unit(Target::constant(0.0)), cfg) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    const ShallowParams c(ShallowArch{1, 0, {}}, {1.0 / 3.0});
    CHECK(risk_population(c, unit(Target::square()), cfg) == doctest::Approx(4.0 / 45.0).epsilon(1e-14));
}

TEST_CASE("kink-split quadrature is exact at arbitrary kinks") {
    // N = 2 relu(x - 0.3) - relu(x - 0.7) against f = x^2; closed form by hand.
    const ShallowParams p(ShallowArch{1, 2, {}}, {1.0, 1.0, -0.3, -0.7, 2.0, -1.0, 0.0});
    const auto cfg = QuadratureCfg::default_for(1);
    const double r = risk_population(p, unit(Target::square()), cfg);
    // piecewise: [0,.3]: x^4 ; [.3,.7]: (2(x-.3) - x^2)^2 ; [.7,1]: (x + 0.1 - x^2)^2
    auto integ = [](auto g, double a, double b) {
        const int n = 200000;
        double s = 0;
        for (int k = 0; k < n; ++k) {
            const double x = a + (b - a) * (k + 0.5) / n;
            s += g(x);
        }
        return s * (b - a) / n;
    };
    const double oracle = integ([](double x) { return x * x * x * x; }, 0.0, 0.3) +
                          integ([](double x) { const double e = 2 * (x - 0.3) - x * x; return e * e; }, 0.3, 0.7) +
                          integ([](double x) { const double e = x + 0.1 - x * x; return e * e; }, 0.7, 1.0);
    CHECK(r == doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("empirical risk") {
    const ShallowParams relu(ShallowArch{1, 1, {}}, {1.0, 0.0, 1.0, 0.0});
    Batch b;
    const double two = 2.0;
    b.push_back({&two, 1}, 0.0);
    CHECK(risk_empirical(relu, b) == 4.0);

    const ShallowParams zero(ShallowArch{1, 0, {}}, {0.0});
    Batch pm;
    const double z = 0.0;
    pm.push_back({&z, 1}, 1.0);
    pm.push_back({&z, 1}, -1.0);
    CHECK(risk_empirical(zero, pm) == 1.0);

    Batch exact;
    for (double x : {-1.0, 0.2, 3.0}) {
        exact.push_back({&x, 1}, realize(relu, {&x, 1}));
    }
    CHECK(risk_empirical(relu, exact) == 0.0);
}

TEST_CASE("global infimum estimate") {
    const auto problem = unit(Target::square());
    GlobalInfOptions opts;
    opts.restarts = 8;
    opts.quadrature = QuadratureCfg::default_for(1);
    const auto m0 = global_inf_estimate(problem, 0, opts, 1);
    CHECK(m0.value == best_constant(problem, opts.quadrature).nu);

    const auto m1 = global_inf_estimate(problem, 1, opts, 1);
    const double oracle = width_one_grid_oracle();
    CHECK(m1.value < 4.0 / 45.0);
    CHECK(m1.value <= oracle + 1e-9);

    // |x - 1/2| = relu(x - 1/2) + relu(1/2 - x)
    const auto rep = unit(Target::abs_shift(0.5));
    opts.restarts = 16;
    const auto m2 = global_inf_estimate(rep, 2, opts, 3);
    CHECK(m2.value <= 1e-6);
}

TEST_CASE("more restarts never raise the estimate") {
    const auto problem = unit(Target::square());
    GlobalInfOptions opts;
    opts.restarts = 3;
    opts.adam_steps = 200;
    const auto a = global_inf_estimate(problem, 2, opts, 5);
    opts.restarts = 6;
    const auto b = global_inf_estimate(problem, 2, opts, 5);
    CHECK(b.value <= a.value);
}
