#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "relulab/measure.hpp"

namespace relulab {

enum class QuadratureMode { kink_split_1d, tensor_gauss, quasi_mc, mc };

struct QuadratureCfg {
    QuadratureMode mode = QuadratureMode::kink_split_1d;
    /// Gauss-Legendre points per piece (per axis for tensor_gauss).
    std::size_t order = 8;
    /// Sample count for the quasi_mc and mc modes.
    std::size_t samples = 100000;
    /// Cells per axis for tensor_gauss.
    std::size_t subdivisions = 8;
    /// Absolute tolerance of the adaptive 1D refinement.
    double tolerance = 1e-12;
    std::size_t max_depth = 40;
    std::uint64_t seed = 0;

    /// kink_split_1d in 1D, tensor Gauss up to d = 3, quasi-MC beyond.
    static QuadratureCfg default_for(std::size_t dim);
    static QuadratureCfg monte_carlo(std::size_t samples, std::uint64_t seed);

    void validate() const;
    bool is_stochastic() const noexcept { return mode == QuadratureMode::mc; }
    nlohmann::json to_json() const;
    /// Short content hash attached to reported risk values.
    std::string fingerprint() const;
};

QuadratureCfg quadrature_cfg_from_json(const nlohmann::json& j, const std::string& path);
std::string to_string(QuadratureMode mode);

struct GaussLegendreRule {
    std::vector<double> nodes;   // on [-1, 1], ascending
    std::vector<double> weights;
};

/// Cached n-point Gauss-Legendre rule.
const GaussLegendreRule& gauss_legendre(std::size_t order);

/// A discrete measure: integrating g against it is sum_i weights[i] * g(point(i)).
struct WeightedPoints {
    std::size_t dim = 1;
    std::vector<double> coords;
    std::vector<double> weights;

    std::size_t size() const noexcept { return weights.size(); }
    std::span<const double> point(std::size_t i) const noexcept { return {coords.data() + i * dim, dim}; }
    void push_back(std::span<const double> x, double w);
};

/// Discretizes the measure on the box for the configured mode.
///
/// In kink_split_1d mode the interval is cut at every breakpoint inside
/// (a, b) and each piece gets the Gauss-Legendre rule. When `probe` is set,
/// pieces are bisected until the order-n rule and its two-halves refinement
/// agree on the probe integral within tolerance * (piece length / (b - a)).
/// Throws ToleranceNotMet when max_depth is exceeded.
WeightedPoints discretize(const Measure& measure, const DomainBox& box, const QuadratureCfg& cfg,
                          std::span<const double> breakpoints = {}, const std::function<double(double)>& probe = {});

/// Whether the order-n rule integrates a polynomial integrand of this degree
/// exactly against the measure.
bool rule_is_exact(const Measure& measure, const QuadratureCfg& cfg, int integrand_degree);

} // namespace relulab
