#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace relulab {

/// n -> value for learning rates and moment coefficients.
class Schedule {
public:
    static Schedule constant(double value);
    /// value / (n + 1)^rho
    static Schedule power_decay(double value, double rho);
    /// Explicit list; the last entry repeats past the end.
    static Schedule list(std::vector<double> values);

    double operator()(std::uint64_t n) const;
    nlohmann::json to_json() const;

private:
    enum class Kind { constant, power, list };
    Kind kind_ = Kind::constant;
    double value_ = 0.0;
    double rho_ = 0.0;
    std::vector<double> values_;
};

Schedule schedule_from_json(const nlohmann::json& j, const std::string& path);

enum class OptimizerKind { sgd, momentum, adam, rmsprop, adagrad };

std::string to_string(OptimizerKind kind);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::sgd;
    Schedule learning_rate = Schedule::constant(1e-3);
    /// alpha_n: first-moment coefficient (momentum, adam).
    Schedule momentum = Schedule::constant(0.0);
    /// beta_n: second-moment coefficient (adam, rmsprop).
    Schedule second_moment = Schedule::constant(0.0);
    double epsilon = 1e-8;

    static OptimizerConfig sgd(double lr);
    static OptimizerConfig momentum_sgd(double lr, double alpha);
    static OptimizerConfig adam(double lr, double alpha, double beta, double epsilon);
    static OptimizerConfig rmsprop(double lr, double beta, double epsilon);
    static OptimizerConfig adagrad(double lr, double epsilon);
    /// alpha = 0.9, beta = 0.999, gamma = 1e-3, epsilon = 1e-8.
    static OptimizerConfig adam_default();
    static OptimizerConfig preset(const std::string& name);

    void validate() const;
    nlohmann::json to_json() const;
};

OptimizerConfig optimizer_config_from_json(const nlohmann::json& j, const std::string& path);

struct OptimizerState {
    std::uint64_t step = 0;
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    /// prod_{l=0}^{n-1} alpha_l and beta_l, for bias correction.
    double alpha_product = 1.0;
    double beta_product = 1.0;

    static OptimizerState zeros(std::size_t dim);
};

/// One recursion step: returns theta_{n+1} and advances the state.
void step(const OptimizerConfig& config, OptimizerState& state, std::span<double> theta, std::span<const double> gradient);

/// Phi_n(g_0, ..., g_n) in closed form, so that theta_{n+1} = theta_n - Phi_n.
std::vector<double> phi_closed_form(const OptimizerConfig& config, std::span<const std::vector<double>> history);

/// (theta, step index, seed) -> gradient.
using GradientSource = std::function<std::vector<double>(std::span<const double>, std::uint64_t, std::uint64_t)>;

struct Snapshot {
    std::uint64_t step = 0;
    std::vector<double> theta;
    double gradient_norm = 0.0;
    std::optional<double> risk;
    std::optional<double> empirical_risk;
    std::vector<std::size_t> inactive;
    std::vector<std::size_t> trapped;
};

struct TrainTrace {
    std::vector<Snapshot> snapshots;
    std::uint64_t seed = 0;
    std::uint64_t steps = 0;
    double wall_seconds = 0.0;
    std::vector<double> final_theta;
};

struct RunOptions {
    std::uint64_t steps = 0;
    /// Snapshot every `cadence` steps (0: only the first and last).
    std::uint64_t cadence = 0;
    bool keep_theta = true;
    /// Fills risk / inactive-set fields of a snapshot.
    std::function<void(Snapshot&)> annotate;
};

/// Theta_{n+1} = Theta_n - Phi_n(G_0, ..., G_n) through the recursive step.
TrainTrace run(const OptimizerConfig& config, std::vector<double> theta0, const GradientSource& gradient,
               const RunOptions& options, std::uint64_t seed);

} // namespace relulab
