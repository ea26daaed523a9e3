#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "relulab/ann.hpp"
#include "relulab/measure.hpp"
#include "relulab/quadrature.hpp"

namespace relulab {

/// Generalized gradient of the empirical risk on a batch. Backprop with the
/// activation's left-derivative convention (sigma'(0) = 0 for ReLU).
std::vector<double> gen_gradient_empirical(const ShallowParams& params, const Batch& batch);
std::vector<double> gen_gradient_empirical(const DeepParams& params, const Batch& batch);

/// Generalized gradient of the population risk on the kink-split nodes.
std::vector<double> gen_gradient_population(const ShallowParams& params, const Problem& problem, const QuadratureCfg& cfg);
std::vector<double> gen_gradient_population(const DeepParams& params, const Problem& problem, const QuadratureCfg& cfg);

struct RiskAndGradient {
    double risk = 0.0;
    std::vector<double> gradient;
};

/// Risk and generalized gradient from one pass over the same nodes.
RiskAndGradient risk_and_gradient(const ShallowParams& params, const Problem& problem, const QuadratureCfg& cfg);
RiskAndGradient risk_and_gradient(const DeepParams& params, const Problem& problem, const QuadratureCfg& cfg);

/// Weighted form used by both of the above: sum_q w_q |N(x_q) - y_q|^2 and its gradient.
RiskAndGradient weighted_risk_and_gradient(const ShallowParams& params, const WeightedPoints& nodes,
                                           std::span<const double> ys);
RiskAndGradient weighted_risk_and_gradient(const DeepParams& params, const WeightedPoints& nodes,
                                           std::span<const double> ys);

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences. Per-coordinate step max(1e-6, 1e-7 |theta_j|) unless `step` is given.
std::vector<double> fd_gradient(std::span<const double> theta, const ScalarFunction& fn,
                                std::optional<double> step = std::nullopt);

/// C^1 ramp R_r: 0 below lower/r, identity above upper/r, cubic Hermite in between.
class SmoothRamp {
public:
    explicit SmoothRamp(double r, double lower = 1.0, double upper = 2.0);

    double r() const noexcept { return r_; }
    double start() const noexcept { return start_; }
    double end() const noexcept { return end_; }
    double operator()(double x) const noexcept;
    double derivative(double x) const noexcept;

private:
    double r_;
    double start_;
    double end_;
};

/// Classical gradient of the risk of the R_r-smoothed shallow ReLU network.
RiskAndGradient smoothed_risk_and_gradient(const ShallowParams& params, const Problem& problem, const QuadratureCfg& cfg,
                                           const SmoothRamp& ramp);

struct SmoothLimitReport {
    std::vector<double> r_values;
    /// ||grad L_r - G|| (Euclidean) per r.
    std::vector<double> discrepancy;
    bool strictly_decreasing = false;
};

/// Compares grad L_r with the generalized gradient along an increasing r schedule.
SmoothLimitReport smooth_limit_check(const ShallowParams& params, const Problem& problem, const QuadratureCfg& cfg,
                                     std::span<const double> r_schedule);

} // namespace relulab
