#pragma once

#include <string>
#include <vector>

#include "relulab/ann.hpp"
#include "relulab/measure.hpp"
#include "relulab/quadrature.hpp"

namespace relulab {

/// Points along x where the shallow realization is not smooth (d = 1 only; empty otherwise).
std::vector<double> network_kinks_1d(const ShallowParams& params, double lower, double upper);

/// Breakpoints of a deep 1D realization, found layer by layer: on every
/// interval between known breakpoints the next layer's pre-activations are
/// affine, so their crossings of the activation breakpoints are exact.
std::vector<double> network_kinks_1d(const DeepParams& params, double lower, double upper);

/// Degree of (N - f)^2 between breakpoints, or -1 when it is not a polynomial.
int risk_integrand_degree(const Activation& act, std::size_t depth, const Target& target);

/// Quadrature nodes for the risk of this network: kinks of the network and
/// the target are split out in 1D, adaptive refinement kicks in only when the
/// rule is not already exact.
WeightedPoints risk_nodes(const ShallowParams& params, const Problem& problem, const QuadratureCfg& cfg);
WeightedPoints risk_nodes(const DeepParams& params, const Problem& problem, const QuadratureCfg& cfg);

double risk_on_nodes(const ShallowParams& params, const Target& target, const WeightedPoints& nodes);
double risk_on_nodes(const DeepParams& params, const Target& target, const WeightedPoints& nodes);

/// L(theta) = int (N_theta - f)^2 dmu
double risk_population(const ShallowParams& params, const Problem& problem, const QuadratureCfg& cfg);
double risk_population(const DeepParams& params, const Problem& problem, const QuadratureCfg& cfg);

struct RiskEstimate {
    double value = 0.0;
    /// Monte Carlo standard error; 0 for deterministic modes.
    double std_error = 0.0;
    std::size_t nodes = 0;
    std::string fingerprint;
};

RiskEstimate risk_population_estimate(const ShallowParams& params, const Problem& problem, const QuadratureCfg& cfg);

/// (1/M) sum_m |N_theta(X_m) - Y_m|^2
double risk_empirical(const ShallowParams& params, const Batch& batch);
double risk_empirical(const DeepParams& params, const Batch& batch);

} // namespace relulab
