#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "relulab/ann.hpp"
#include "relulab/measure.hpp"
#include "relulab/optimizer.hpp"
#include "relulab/quadrature.hpp"

namespace relulab {

enum class PolishMethod { gd, bfgs };

struct GlobalInfOptions {
    std::size_t restarts = 32;
    /// Adam-default steps on the population gradient before polishing.
    std::uint64_t adam_steps = 2000;
    OptimizerConfig optimizer = OptimizerConfig::adam_default();
    /// Polish: the outer layer is solved exactly by least squares and the
    /// inner layer follows line-searched descent on the reduced risk.
    PolishMethod polish = PolishMethod::bfgs;
    std::size_t polish_iterations = 3000;
    double polish_gradient_tolerance = 1e-13;
    Activation activation{};
    QuadratureCfg quadrature{};
    /// Wall-clock budget in seconds; 0 disables it.
    double max_seconds = 0.0;
    unsigned jobs = 1;

    nlohmann::json to_json() const;
};

struct RestartOutcome {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    double risk = 0.0;
    double gradient_norm = 0.0;
    ShallowParams params;
};

struct GlobalInfResult {
    std::size_t width = 0;
    double value = 0.0;
    ShallowParams best;
    std::vector<RestartOutcome> restarts;
    /// Restarts whose risk is within max(1e-12, 1e-3 m) of the minimum m.
    std::size_t hits = 0;
    bool stable = true;
    bool budget_exhausted = false;
};

/// Upper estimate of m_H = inf L_H. Width 0 is the closed form nu*; otherwise
/// the minimum over restarts with seeds derive_seed(seed, r), so adding
/// restarts never increases the estimate.
GlobalInfResult global_inf_estimate(const Problem& problem, std::size_t width, const GlobalInfOptions& options,
                                    std::uint64_t seed);

/// Sets the outer weights and bias to the least-squares optimum for the
/// current inner layer and returns the resulting risk.
double solve_outer_layer(ShallowParams& params, const Problem& problem, const QuadratureCfg& cfg);

/// Line-searched descent on the reduced risk (outer layer always optimal).
/// Returns the final risk.
double polish(ShallowParams& params, const Problem& problem, const QuadratureCfg& cfg, PolishMethod method,
              std::size_t iterations, double gradient_tolerance);

} // namespace relulab
