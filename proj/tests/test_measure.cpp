#include <doctest.h>

#include <cmath>
#include <vector>

#include "relulab/measure.hpp"
#include "relulab/quadrature.hpp"

using namespace relulab;

namespace {

Problem unit(Target f) {
    return Problem{DomainBox(0.0, 1.0, 1), Measure::uniform(), std::move(f)};
}

} // namespace

TEST_CASE("best constant closed forms") {
    const auto cfg = QuadratureCfg::default_for(1);
    auto bc = best_constant(unit(Target::identity()), cfg);
    CHECK(bc.xi == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(bc.nu == doctest::Approx(1.0 / 12.0).epsilon(1e-14));
    bc = best_constant(unit(Target::square()), cfg);
    CHECK(bc.xi == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(bc.nu == doctest::Approx(4.0 / 45.0).epsilon(1e-14));
    bc = best_constant(unit(Target::constant(7.0)), cfg);
    CHECK(bc.xi == doctest::Approx(7.0).epsilon(1e-15));
    CHECK(std::abs(bc.nu) < 1e-24);
}

TEST_CASE("sample_inputs is reproducible and stays in the box") {
    const DomainBox box(0.0, 1.0, 1);
    const auto a = sample_inputs(Measure::uniform(), box, 3, 11);
    const auto b = sample_inputs(Measure::uniform(), box, 3, 11);
    CHECK(a == b);
    CHECK(a.size() == 3);
    for (double x : a) {
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
    }
    CHECK(sample_inputs(Measure::uniform(), box, 3, 12) != a);
}

TEST_CASE("empirical point mass samples its atom") {
    const DomainBox box(0.0, 1.0, 1);
    const auto m = Measure::empirical({{0.25}}, {1.0});
    const auto xs = sample_inputs(m, box, 5, 1);
    CHECK(xs == std::vector<double>(5, 0.25));
}

TEST_CASE("beta(2,2) density sample mean") {
    const DomainBox box(0.0, 1.0, 1);
    const std::size_t n = 100000;
    const auto xs = sample_inputs(Measure::beta22(), box, n, 5);
    double mean = 0.0;
    for (double x : xs) {
        mean += x;
    }
    mean /= static_cast<double>(n);
    // Var of Beta(2,2) = 1/20
    const double se = std::sqrt(0.05 / static_cast<double>(n));
    CHECK(std::abs(mean - 0.5) < 3.0 * se);
}

TEST_CASE("noisy pairs") {
    const std::size_t n = 100000;
    SUBCASE("zero noise is exact") {
        const auto p = unit(Target::square());
        const auto batch = noisy_pairs(p, 100, 3);
        for (std::size_t m = 0; m < batch.size(); ++m) {
            CHECK(batch.ys[m] == p.target(batch.x(m)));
        }
    }
    for (const auto& noise : {NoiseModel::gaussian(0.3), NoiseModel::uniform(0.5)}) {
        Problem p = unit(Target::square());
        p.noise = noise;
        const auto batch = noisy_pairs(p, n, 9);
        double mean = 0.0;
        double m2 = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            const double e = p.target(batch.x(m)) - batch.ys[m];
            const double t = e * e;
            mean += t;
            m2 += t * t;
        }
        mean /= static_cast<double>(n);
        const double var = m2 / static_cast<double>(n) - mean * mean;
        const double se = std::sqrt(var / static_cast<double>(n));
        const double expected = noise.kind() == NoiseModel::Kind::gaussian ? 0.09 : 0.25 / 3.0;
        CHECK(std::abs(mean - expected) < 3.0 * se);
    }
}

TEST_CASE("degenerate boxes are rejected") {
    CHECK_THROWS(DomainBox(1.0, 1.0, 1));
    CHECK_THROWS(DomainBox(0.0, 1.0, 0));
}
