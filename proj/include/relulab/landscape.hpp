#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "relulab/ann.hpp"
#include "relulab/measure.hpp"
#include "relulab/quadrature.hpp"

namespace relulab {

struct NeuronStatus {
    std::size_t index = 0;
    /// inner_bias(i) + sum_j max(weight(i,j) a, weight(i,j) b): the largest pre-activation on the box.
    double max_preactivation = 0.0;
    /// sigma(pre-activation) = 0 on the whole box.
    bool inactive = false;
    /// Pre-activation < 0 on the whole box; frozen under any generalized gradient method.
    bool strictly_trapped = false;
};

NeuronStatus neuron_status(const ShallowParams& params, std::size_t i, const DomainBox& box);
std::vector<std::size_t> inactive_set(const ShallowParams& params, const DomainBox& box);
std::vector<std::size_t> strictly_trapped_set(const ShallowParams& params, const DomainBox& box);

/// The trapped event for one neuron's (d+1)-vector: bias + sum_j max(w_j a, w_j b) < 0.
bool trapped_event(std::span<const double> weights, double bias, const DomainBox& box);

/// I.i.d. initialization: H^kappa * theta has the named density on the scaled coordinates.
struct InitSpec {
    enum class Density { normal, uniform, table };

    std::string name = "normal-kappa-0.5";
    Density density = Density::normal;
    double kappa = 0.5;
    /// Piecewise-constant density for Density::table: edges e_0 < ... < e_m and m cell weights.
    std::vector<double> table_edges;
    std::vector<double> table_weights;
    /// Outer weights get the same scaled density; the outer bias starts at 0.
    bool scale_outer = true;

    static InitSpec preset(const std::string& name);
    static InitSpec table(std::vector<double> edges, std::vector<double> weights, double kappa);

    void validate() const;
    /// One draw from the unscaled density.
    double draw(Rng& rng) const;
    nlohmann::json to_json() const;
};

InitSpec init_spec_from_json(const nlohmann::json& j, const std::string& path);

ShallowParams sample_init(const ShallowArch& arch, const InitSpec& init, std::uint64_t seed);

struct TrapProbability {
    double p_hat = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
};

/// Monte Carlo frequency of the trapped event over i.i.d. (d+1)-vectors.
/// Positive scaling does not change the event, so kappa and H play no role.
TrapProbability trap_probability(const InitSpec& init, const DomainBox& box, std::size_t n_samples, std::uint64_t seed,
                                 unsigned jobs = 1);

struct TrappingBound {
    /// exp(-H p): upper bound on the probability that no neuron is trapped.
    double exp_bound = 1.0;
    /// 1 - (1 - p)^H: probability of at least one trapped neuron.
    double at_least_one = 0.0;
};

TrappingBound trapping_bound(double p_hat, std::size_t width);

/// Wider network with the same realization: new neurons have zero weights,
/// the flat-interval bias and zero outer weight.
ShallowParams embed_shallow(const ShallowParams& params, std::size_t new_width);
DeepParams embed_deep(const DeepParams& params, const std::vector<std::size_t>& new_dims);

struct ImproveResult {
    ShallowParams params;
    bool improved = false;
    /// int sigma(<w,x> + b)(N - f) dmu for the chosen candidate.
    double derivative = 0.0;
    /// int sigma(<w,x> + b)^2 dmu
    double feature_norm = 0.0;
    double outer_weight = 0.0;
    double risk_before = 0.0;
    double risk_after = 0.0;
    /// D^2 / int sigma^2
    double predicted_improvement = 0.0;
    std::size_t candidates = 0;
};

/// Appends one neuron chosen from random (w, b) candidates by largest |D| and
/// sets its outer weight to the exact minimizer -D / int sigma^2.
ImproveResult add_neuron_improve(const ShallowParams& params, const Problem& problem, const QuadratureCfg& cfg,
                                 std::size_t candidates, std::uint64_t seed, double tolerance = 1e-14);

enum class ClarkeVerdict { pass, fail, not_applicable };

std::string to_string(ClarkeVerdict v);

struct ClarkeCheck {
    ClarkeVerdict verdict = ClarkeVerdict::not_applicable;
    double gradient_norm = 0.0;
    double risk = 0.0;
    double nu = 0.0;
};

/// If the generalized gradient is below `tolerance`, the risk must not exceed nu* + slack.
ClarkeCheck clarke_bound_check(const ShallowParams& params, const Problem& problem, const QuadratureCfg& cfg,
                               double tolerance, double slack);
ClarkeCheck clarke_bound_check(const DeepParams& params, const Problem& problem, const QuadratureCfg& cfg,
                               double tolerance, double slack);

} // namespace relulab
