#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "relulab/ann.hpp"
#include "relulab/global_inf.hpp"
#include "relulab/landscape.hpp"
#include "relulab/measure.hpp"
#include "relulab/optimizer.hpp"
#include "relulab/quadrature.hpp"

namespace relulab {

/// Wilson score interval for k successes out of n.
std::pair<double, double> wilson_interval(std::size_t k, std::size_t n, double z = 1.96);

// ---------------------------------------------------------------------------
// trap frequency law

struct TrapFrequencyRow {
    std::size_t width = 0;
    std::size_t draws = 0;
    std::size_t with_trapped = 0;
    double fraction = 0.0;
    double predicted = 0.0;
    double sigma = 0.0;
    bool within_band = false;
    /// Rescaling the same draws by any positive factor leaves every indicator unchanged.
    bool scale_invariant = false;
};

/// Fraction of width-H initializations with at least one strictly trapped neuron.
std::vector<TrapFrequencyRow> trap_frequency_law(const InitSpec& init, const DomainBox& box,
                                                 const std::vector<std::size_t>& widths, std::size_t draws,
                                                 double p_hat, std::uint64_t seed, double band = 4.0);

// ---------------------------------------------------------------------------
// trap invariance

struct TrapInvarianceRow {
    OptimizerKind kind = OptimizerKind::sgd;
    std::size_t runs = 0;
    std::size_t frozen = 0;
};

struct TrapInvarianceReport {
    std::vector<TrapInvarianceRow> rows;
    bool passed = false;
};

/// Runs every optimizer from inits with one neuron forced strictly trapped and
/// checks that its d+1 inner parameters never change by a single bit.
TrapInvarianceReport trap_invariance_check(const Problem& problem, std::size_t width,
                                           const std::vector<OptimizerConfig>& optimizers, std::size_t runs,
                                           std::uint64_t steps, std::size_t batch_size, const InitSpec& init,
                                           std::uint64_t seed);

/// One moderately sized config per optimizer kind.
std::vector<OptimizerConfig> default_optimizer_suite();

// ---------------------------------------------------------------------------
// gradient correctness

struct GradCheckOptions {
    std::size_t samples = 100;
    std::size_t max_width = 4;
    double margin = 1e-3;
    double tolerance = 1e-5;
    double outer_tolerance = 1e-6;
    std::size_t batch_size = 16;
    std::vector<double> r_values{10.0, 100.0, 1000.0};
};

struct GradCheckReport {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    /// max_j |G_j - FD_j| / max_j |FD_j|
    double max_error_empirical = 0.0;
    double max_error_population = 0.0;
    double max_error_outer = 0.0;
    /// ||grad L_r - G|| for theta = (1, 0, 1, 0), f = 0 on [0, 1].
    std::vector<double> reference_discrepancy;
    bool reference_decreasing = false;
    /// Random thetas whose discrepancy is not decreasing while still above 1e-12.
    std::size_t smooth_failures = 0;
    bool passed = false;

    nlohmann::json to_json() const;
};

GradCheckReport gradient_check(const Problem& problem, const QuadratureCfg& cfg, const GradCheckOptions& options,
                               std::uint64_t seed);

// ---------------------------------------------------------------------------
// optimizer algebra

struct AlgebraReport {
    std::size_t histories = 0;
    double max_error_momentum = 0.0;
    double max_error_adam = 0.0;
    /// Coordinates with an all-zero history that moved, summed over the five kinds.
    std::size_t zero_violations = 0;
    bool rmsprop_identical = false;
    bool passed = false;
};

AlgebraReport optimizer_algebra_check(std::size_t histories, std::uint64_t seed);

// ---------------------------------------------------------------------------
// non-convergence sweep

struct SweepOptions {
    std::vector<std::size_t> widths{4, 8, 16};
    std::size_t trials = 200;
    std::uint64_t steps = 5000;
    std::size_t batch_size = 32;
    std::uint64_t cadence = 1000;
    OptimizerConfig optimizer = OptimizerConfig::adam_default();
    InitSpec init = InitSpec::preset("normal-kappa-0.5");
    Activation activation{};
    QuadratureCfg quadrature{};
    GlobalInfOptions inf{};
    /// Overrides (m_{H-1} - m_H) / 2.
    std::optional<double> epsilon;
    std::size_t trap_samples = 1000000;
    double band = 4.0;
    double clarke_tolerance = 1e-5;
    double clarke_slack = 1e-4;
    bool keep_traces = true;
    unsigned jobs = 1;
};

struct SweepTrial {
    std::size_t width = 0;
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    std::size_t trapped_at_init = 0;
    double final_risk = 0.0;
    double final_gradient_norm = 0.0;
    bool nonconverged = false;
    ClarkeVerdict clarke = ClarkeVerdict::not_applicable;
    TrainTrace trace;
};

struct SweepRow {
    std::size_t width = 0;
    std::size_t trials = 0;
    std::size_t trapped_trials = 0;
    double trapped_fraction = 0.0;
    std::pair<double, double> trapped_ci{0.0, 0.0};
    double predicted = 0.0;
    double exp_bound = 0.0;
    double z_score = 0.0;
    bool within_band = false;
    double m_hat = 0.0;
    double m_hat_prev = 0.0;
    double epsilon = 0.0;
    bool m_hat_stable = true;
    std::size_t nonconverged_trials = 0;
    double nonconverged_fraction = 0.0;
    std::pair<double, double> nonconverged_ci{0.0, 0.0};
    std::size_t trapped_above = 0;
    bool trapped_all_above = false;
    std::size_t clarke_checked = 0;
    std::size_t clarke_violations = 0;
};

struct SweepReport {
    double p_hat = 0.0;
    double p_std_error = 0.0;
    std::vector<SweepRow> rows;
    std::vector<SweepTrial> trials;
    bool trapped_trend = false;
    bool nonconverged_trend = false;
    std::vector<std::string> warnings;
    std::string quadrature_fingerprint;
    std::uint64_t seed = 0;
    bool passed = false;

    static std::vector<std::string> csv_header();
    std::string to_csv() const;
    nlohmann::json to_json() const;
};

SweepReport nonconvergence_sweep(const Problem& problem, const SweepOptions& options, std::uint64_t seed);

// ---------------------------------------------------------------------------
// risk hierarchy

struct HierarchyOptions {
    std::size_t max_width = 3;
    GlobalInfOptions inf{};
    std::size_t improve_candidates = 256;
    double margin = 1e-4;
    double improve_floor = 1e-6;
    double embed_tolerance = 1e-12;
    double clarke_tolerance = 1e-5;
    double clarke_slack = 1e-4;
};

struct HierarchyLevel {
    std::size_t width = 0;
    double m_hat = 0.0;
    std::size_t restarts = 0;
    std::size_t hits = 0;
    bool stable = true;
    ShallowParams best;
    /// Risk of the best width-k vector embedded into the largest width.
    double embedded_risk = 0.0;
    double embed_error = 0.0;
    double improved_risk = 0.0;
    bool improved = false;
    double predicted_improvement = 0.0;
};

struct HierarchyReport {
    double xi_star = 0.0;
    double nu_star = 0.0;
    std::vector<HierarchyLevel> levels;
    bool m0_exact = false;
    bool strictly_decreasing = false;
    double min_margin = 0.0;
    bool margins_ok = false;
    bool embedding_ok = false;
    bool improvement_ok = false;
    std::size_t clarke_checked = 0;
    std::size_t clarke_violations = 0;
    std::vector<std::string> warnings;
    bool passed = false;

    std::string to_csv() const;
    nlohmann::json to_json() const;
};

HierarchyReport hierarchy_experiment(const Problem& problem, const HierarchyOptions& options, std::uint64_t seed);

// ---------------------------------------------------------------------------
// no inactive neurons near the infimum

struct NearOptReport {
    std::size_t width = 0;
    double m_hat = 0.0;
    double m_hat_prev = 0.0;
    std::size_t examined = 0;
    std::size_t below_prev = 0;
    std::size_t with_inactive = 0;
    /// Observed margin m_{H-1} - m_H, reported as the operative epsilon.
    double margin = 0.0;
    bool passed = false;
};

NearOptReport nearopt_no_inactive_check(const Problem& problem, std::size_t width, const GlobalInfOptions& options,
                                        std::uint64_t seed);

// ---------------------------------------------------------------------------
// Lyapunov suite (deep networks with scalar output)

/// V_xi(theta) = sum_k (k ||b^k||^2 + ||W^k||_F^2) - 2L <xi, b^L>
double lyapunov_v(const DeepParams& params, std::span<const double> xi);
std::vector<double> lyapunov_gradient(const DeepParams& params, std::span<const double> xi);
/// P(y) = L a^2 mu(box) prod_{p=0}^{L} (l_p + 1) (2y + 4L^2 ||xi||^2 + 1)^{L-1}
double lyapunov_p(const DeepArch& arch, const DomainBox& box, double mass, std::span<const double> xi, double y);

struct SandwichReport {
    std::size_t pairs = 0;
    std::size_t violations = 0;
    bool passed = false;
};

SandwichReport lyapunov_sandwich_check(const std::vector<std::size_t>& dims, std::size_t pairs, std::uint64_t seed);

struct IdentityReport {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    double max_error = 0.0;
    double max_shift_error = 0.0;
    bool passed = false;
};

/// <grad V_xi, G> = 4L int <N - f, N - xi> dmu at margin-filtered random theta.
IdentityReport lyapunov_identity_check(const Problem& problem, const std::vector<std::size_t>& dims,
                                       std::size_t samples, std::optional<double> xi, const QuadratureCfg& cfg,
                                       std::uint64_t seed, double tolerance = 1e-4, double margin = 1e-3);

struct LyapunovOptions {
    std::vector<std::size_t> dims{1, 2, 1};
    double learning_rate = 1e-3;
    std::uint64_t steps = 10000;
    double epsilon = 0.05;
    std::optional<double> xi;
    double init_scale = 0.1;
    std::uint64_t cadence = 100;
    /// Report the run as the Euler proxy of gradient flow (gamma = 1e-4).
    bool flow_proxy = false;
};

struct LyapunovSnapshot {
    std::uint64_t step = 0;
    double v = 0.0;
    double risk = 0.0;
    double norm = 0.0;
};

struct LyapunovRunReport {
    double xi = 0.0;
    double nu = 0.0;
    double epsilon = 0.0;
    double gamma = 0.0;
    double threshold = 0.0;
    bool below_threshold = false;
    bool sandwich_ok = true;
    /// V_xi(Theta_{n+1}) <= V_xi(Theta_n) for every n before the first hit of nu + eps.
    bool v_monotone = true;
    std::optional<std::uint64_t> first_hit;
    double min_risk = 0.0;
    bool reached = false;
    /// sup_{n <= T} ||Theta_n||^2 <= 2 V(Theta_0) + 4 L^2 ||xi||^2
    bool norm_bound_ok = true;
    std::vector<LyapunovSnapshot> snapshots;
    std::vector<std::string> warnings;
    bool passed = false;

    nlohmann::json to_json() const;
};

LyapunovRunReport lyapunov_gd_run(const Problem& problem, const LyapunovOptions& options, const QuadratureCfg& cfg,
                                  std::uint64_t seed);

} // namespace relulab
