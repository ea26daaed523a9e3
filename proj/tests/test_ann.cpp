#include <doctest.h>

#include <cmath>
#include <vector>

#include "relulab/activation.hpp"
#include "relulab/ann.hpp"
#include "relulab/errors.hpp"

using namespace relulab;

TEST_CASE("parameter counts") {
    CHECK(ShallowArch{1, 1, {}}.param_count() == 4);
    CHECK(ShallowArch{3, 5, {}}.param_count() == 26);
    CHECK(ShallowArch{2, 0, {}}.param_count() == 1);
    CHECK(DeepArch({1, 2, 1}).param_count() == 7);
    CHECK(DeepArch({3, 4, 5, 2}).param_count() == 4 * 4 + 5 * 5 + 2 * 6);
}

TEST_CASE("shallow index map is the 1-based layout shifted by one") {
    const ShallowArch a{3, 5, {}};
    const std::size_t d = 3, H = 5;
    for (std::size_t i = 1; i <= H; ++i) {
        for (std::size_t j = 1; j <= d; ++j) {
            CHECK(a.weight_index(i, j) + 1 == (i - 1) * d + j);
        }
        CHECK(a.inner_bias_index(i) + 1 == d * H + i);
        CHECK(a.outer_weight_index(i) + 1 == d * H + H + i);
    }
    CHECK(a.outer_bias_index() + 1 == d * H + 2 * H + 1);
}

TEST_CASE("shallow realization") {
    const ShallowParams p(ShallowArch{1, 1, {}}, {1.0, 0.0, 1.0, 0.0});
    const double two = 2.0, minus3 = -3.0;
    CHECK(realize(p, {&two, 1}) == 2.0);
    CHECK(realize(p, {&minus3, 1}) == 0.0);
    const ShallowParams c(ShallowArch{1, 0, {}}, {-0.7});
    CHECK(realize(c, {&two, 1}) == -0.7);
    CHECK_THROWS_AS(ShallowParams(ShallowArch{1, 1, {}}, {1.0, 2.0}), DimensionMismatch);
}

TEST_CASE("deep realization") {
    const DeepArch a({1, 1, 1});
    DeepParams p = DeepParams::zeros(a);
    p.weight(1, 1, 1) = 1.0;
    p.weight(2, 1, 1) = 1.0;
    const double two = 2.0, m2 = -2.0;
    CHECK(realize(p, {&two, 1})[0] == 2.0);
    CHECK(realize(p, {&m2, 1})[0] == 0.0);

    DeepParams q = DeepParams::zeros(DeepArch({2, 1, 1}));
    q.weight(1, 1, 1) = 1.0;
    q.weight(1, 1, 2) = 1.0;
    q.weight(2, 1, 1) = 1.0;
    const std::vector<double> x{1.0, 1.0};
    CHECK(realize(q, x)[0] == 2.0);
}

TEST_CASE("shallow and deep agree on (d, H, 1)") {
    const ShallowParams s(ShallowArch{2, 2, {}}, {0.3, -1.2, 0.8, 0.5, 0.1, -0.4, 1.5, -2.0, 0.25});
    const auto d = as_deep(s);
    for (double x1 : {-1.0, 0.0, 0.3, 2.0}) {
        for (double x2 : {-0.5, 0.7}) {
            const std::vector<double> x{x1, x2};
            CHECK(realize(d, x)[0] == doctest::Approx(realize(s, x)).epsilon(1e-15));
        }
    }
    CHECK(as_shallow(d) == s);
}

TEST_CASE("activation family") {
    const auto relu = Activation::relu();
    CHECK(relu(-1.0) == 0.0);
    CHECK(relu(2.5) == 2.5);
    CHECK(relu.derivative(0.0) == 0.0);
    const auto repu = Activation::repu(3);
    CHECK(repu(2.0) == 8.0);
    CHECK(repu.derivative(2.0) == 12.0);
    const auto clip = Activation::clipped_relu(1.5);
    CHECK(clip(4.0) == 1.5);
    CHECK(clip.derivative(4.0) == 0.0);
    const auto cr = Activation::clipped_repu(2, 2.0);
    CHECK(cr(3.0) == 4.0);
    // constant on the flat interval
    for (const auto& a : {relu, repu, clip, cr}) {
        for (double x : {-10.0, -1.0, -1e-9}) {
            CHECK(a(x) == a(Activation::flat_representative()));
        }
    }
}

TEST_CASE("param vector json round trip") {
    const ShallowParams s(ShallowArch{1, 2, Activation::repu(2)}, {0.1, -0.2, 0.3, 0.4, 0.5, 0.6, 0.7});
    const ParamVector pv = s;
    const auto back = param_vector_from_json(to_json(pv));
    CHECK(std::get<ShallowParams>(back) == s);
}
