#include "relulab/optimizer.hpp"

#include <chrono>
#include <cmath>

#include "relulab/errors.hpp"
#include "relulab/json_util.hpp"

namespace relulab {

Schedule Schedule::constant(double value) {
    Schedule s;
    s.kind_ = Kind::constant;
    s.value_ = value;
    return s;
}

Schedule Schedule::power_decay(double value, double rho) {
    Schedule s;
    s.kind_ = Kind::power;
    s.value_ = value;
    s.rho_ = rho;
    return s;
}

Schedule Schedule::list(std::vector<double> values) {
    if (values.empty()) {
        throw std::invalid_argument("schedule list must be non-empty");
    }
    Schedule s;
    s.kind_ = Kind::list;
    s.values_ = std::move(values);
    return s;
}

double Schedule::operator()(std::uint64_t n) const {
    switch (kind_) {
    case Kind::constant:
        return value_;
    case Kind::power:
        return value_ / std::pow(static_cast<double>(n) + 1.0, rho_);
    case Kind::list:
        return n < values_.size() ? values_[n] : values_.back();
    }
    return value_;
}

nlohmann::json Schedule::to_json() const {
    switch (kind_) {
    case Kind::constant:
        return value_;
    case Kind::power:
        return {{"kind", "power"}, {"value", value_}, {"rho", rho_}};
    case Kind::list:
        return {{"kind", "list"}, {"values", values_}};
    }
    return value_;
}

Schedule schedule_from_json(const nlohmann::json& j, const std::string& path) {
    using namespace json_util;
    if (j.is_number()) {
        return Schedule::constant(j.get<double>());
    }
    allow_keys(j, path, {"kind", "value", "rho", "values"});
    const auto kind = as_string(required(j, path, "kind"), child(path, "kind"));
    if (kind == "constant") {
        return Schedule::constant(as_number(required(j, path, "value"), child(path, "value")));
    }
    if (kind == "power") {
        return Schedule::power_decay(as_number(required(j, path, "value"), child(path, "value")),
                                     as_number(required(j, path, "rho"), child(path, "rho")));
    }
    if (kind == "list") {
        auto values = as_number_array(required(j, path, "values"), child(path, "values"));
        if (values.empty()) {
            throw ConfigError(child(path, "values"), "must be non-empty");
        }
        return Schedule::list(std::move(values));
    }
    throw ConfigError(child(path, "kind"), "unknown schedule kind '" + kind + "'");
}

std::string to_string(OptimizerKind kind) {
    switch (kind) {
    case OptimizerKind::sgd:
        return "sgd";
    case OptimizerKind::momentum:
        return "momentum";
    case OptimizerKind::adam:
        return "adam";
    case OptimizerKind::rmsprop:
        return "rmsprop";
    case OptimizerKind::adagrad:
        return "adagrad";
    }
    return "sgd";
}

OptimizerConfig OptimizerConfig::sgd(double lr) {
    OptimizerConfig c;
    c.kind = OptimizerKind::sgd;
    c.learning_rate = Schedule::constant(lr);
    return c;
}

OptimizerConfig OptimizerConfig::momentum_sgd(double lr, double alpha) {
    OptimizerConfig c;
    c.kind = OptimizerKind::momentum;
    c.learning_rate = Schedule::constant(lr);
    c.momentum = Schedule::constant(alpha);
    return c;
}

OptimizerConfig OptimizerConfig::adam(double lr, double alpha, double beta, double epsilon) {
    OptimizerConfig c;
    c.kind = OptimizerKind::adam;
    c.learning_rate = Schedule::constant(lr);
    c.momentum = Schedule::constant(alpha);
    c.second_moment = Schedule::constant(beta);
    c.epsilon = epsilon;
    return c;
}

OptimizerConfig OptimizerConfig::rmsprop(double lr, double beta, double epsilon) {
    OptimizerConfig c;
    c.kind = OptimizerKind::rmsprop;
    c.learning_rate = Schedule::constant(lr);
    c.second_moment = Schedule::constant(beta);
    c.epsilon = epsilon;
    return c;
}

OptimizerConfig OptimizerConfig::adagrad(double lr, double epsilon) {
    OptimizerConfig c;
    c.kind = OptimizerKind::adagrad;
    c.learning_rate = Schedule::constant(lr);
    c.epsilon = epsilon;
    return c;
}

OptimizerConfig OptimizerConfig::adam_default() {
    return adam(1e-3, 0.9, 0.999, 1e-8);
}

OptimizerConfig OptimizerConfig::preset(const std::string& name) {
    if (name == "adam-default") {
        return adam_default();
    }
    if (name == "sgd") {
        return sgd(1e-2);
    }
    if (name == "momentum-0.9") {
        return momentum_sgd(1e-2, 0.9);
    }
    throw std::invalid_argument("unknown optimizer preset '" + name + "'");
}

void OptimizerConfig::validate() const {
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("epsilon must be positive");
    }
    for (std::uint64_t n : {0, 1}) {
        const double lr = learning_rate(n);
        if (!(lr >= 0.0)) {
            throw std::invalid_argument("learning rates must be non-negative");
        }
        for (double c : {momentum(n), second_moment(n)}) {
            if (!(c >= 0.0 && c <= 1.0)) {
                throw std::invalid_argument("moment coefficients must lie in [0, 1]");
            }
        }
    }
    if (kind == OptimizerKind::adam || kind == OptimizerKind::rmsprop) {
        // max{alpha_1, beta_1} < 1; alpha_0, beta_0 < 1 keeps the n = 0 bias correction finite.
        const bool uses_alpha = kind == OptimizerKind::adam;
        for (std::uint64_t n : {0, 1}) {
            if ((uses_alpha && !(momentum(n) < 1.0)) || !(second_moment(n) < 1.0)) {
                throw std::invalid_argument("adam needs alpha_n, beta_n < 1 for n in {0, 1}");
            }
        }
    }
}

nlohmann::json OptimizerConfig::to_json() const {
    nlohmann::json j{{"kind", to_string(kind)}, {"learning_rate", learning_rate.to_json()}};
    if (kind == OptimizerKind::momentum || kind == OptimizerKind::adam) {
        j["momentum"] = momentum.to_json();
    }
    if (kind == OptimizerKind::adam || kind == OptimizerKind::rmsprop) {
        j["second_moment"] = second_moment.to_json();
    }
    if (kind == OptimizerKind::adam || kind == OptimizerKind::rmsprop || kind == OptimizerKind::adagrad) {
        j["epsilon"] = epsilon;
    }
    return j;
}

OptimizerConfig optimizer_config_from_json(const nlohmann::json& j, const std::string& path) {
    using namespace json_util;
    allow_keys(j, path, {"preset", "kind", "learning_rate", "momentum", "second_moment", "epsilon"});
    OptimizerConfig c;
    if (j.contains("preset")) {
        const auto name = as_string(j["preset"], child(path, "preset"));
        try {
            c = OptimizerConfig::preset(name);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(child(path, "preset"), e.what());
        }
    } else {
        const auto kind = as_string(required(j, path, "kind"), child(path, "kind"));
        if (kind == "sgd") {
            c.kind = OptimizerKind::sgd;
        } else if (kind == "momentum") {
            c.kind = OptimizerKind::momentum;
        } else if (kind == "adam") {
            c.kind = OptimizerKind::adam;
        } else if (kind == "rmsprop") {
            c.kind = OptimizerKind::rmsprop;
        } else if (kind == "adagrad") {
            c.kind = OptimizerKind::adagrad;
        } else {
            throw ConfigError(child(path, "kind"), "unknown optimizer kind '" + kind + "'");
        }
    }
    if (j.contains("learning_rate")) {
        c.learning_rate = schedule_from_json(j["learning_rate"], child(path, "learning_rate"));
    }
    if (j.contains("momentum")) {
        c.momentum = schedule_from_json(j["momentum"], child(path, "momentum"));
    }
    if (j.contains("second_moment")) {
        c.second_moment = schedule_from_json(j["second_moment"], child(path, "second_moment"));
    }
    c.epsilon = number_or(j, path, "epsilon", c.epsilon);
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
    return c;
}

OptimizerState OptimizerState::zeros(std::size_t dim) {
    OptimizerState s;
    s.first_moment.assign(dim, 0.0);
    s.second_moment.assign(dim, 0.0);
    return s;
}

void step(const OptimizerConfig& config, OptimizerState& state, std::span<double> theta, std::span<const double> gradient) {
    if (gradient.size() != theta.size()) {
        throw std::invalid_argument("gradient and parameter dimensions differ");
    }
    for (double g : gradient) {
        if (!std::isfinite(g)) {
            throw NonFiniteGradient("non-finite gradient at step " + std::to_string(state.step));
        }
    }
    if (state.first_moment.size() != theta.size()) {
        state.first_moment.assign(theta.size(), 0.0);
        state.second_moment.assign(theta.size(), 0.0);
    }
    const std::uint64_t n = state.step;
    const double lr = config.learning_rate(n);
    auto& m = state.first_moment;
    auto& M = state.second_moment;
    switch (config.kind) {
    case OptimizerKind::sgd:
        for (std::size_t j = 0; j < theta.size(); ++j) {
            theta[j] -= lr * gradient[j];
        }
        break;
    case OptimizerKind::momentum: {
        const double alpha = config.momentum(n);
        for (std::size_t j = 0; j < theta.size(); ++j) {
            m[j] = alpha * m[j] + (1.0 - alpha) * gradient[j];
            theta[j] -= lr * m[j];
        }
        break;
    }
    case OptimizerKind::adam:
    case OptimizerKind::rmsprop: {
        const double alpha = config.kind == OptimizerKind::adam ? config.momentum(n) : 0.0;
        const double beta = config.second_moment(n);
        state.alpha_product *= alpha;
        state.beta_product *= beta;
        const double m_scale = 1.0 - state.alpha_product;
        const double M_scale = 1.0 - state.beta_product;
        for (std::size_t j = 0; j < theta.size(); ++j) {
            m[j] = alpha * m[j] + (1.0 - alpha) * gradient[j];
            M[j] = beta * M[j] + (1.0 - beta) * gradient[j] * gradient[j];
            theta[j] -= lr / (config.epsilon + std::sqrt(M[j] / M_scale)) * (m[j] / m_scale);
        }
        break;
    }
    case OptimizerKind::adagrad:
        for (std::size_t j = 0; j < theta.size(); ++j) {
            M[j] += gradient[j] * gradient[j];
            theta[j] -= lr * gradient[j] / (config.epsilon + std::sqrt(M[j]));
        }
        break;
    }
    state.step = n + 1;
}

std::vector<double> phi_closed_form(const OptimizerConfig& config, std::span<const std::vector<double>> history) {
    if (history.empty()) {
        throw std::invalid_argument("gradient history must contain at least g_0");
    }
    const std::size_t n = history.size() - 1;
    const std::size_t dim = history.front().size();
    const double lr = config.learning_rate(n);
    std::vector<double> phi(dim, 0.0);

    // sum_k (1 - c_k) prod_{l=k+1}^{n} c_l * term_k
    auto moment = [&](const Schedule& coeff, auto&& term) {
        std::vector<double> out(dim, 0.0);
        for (std::size_t k = 0; k <= n; ++k) {
            double tail = 1.0;
            for (std::size_t l = k + 1; l <= n; ++l) {
                tail *= coeff(l);
            }
            const double factor = (1.0 - coeff(k)) * tail;
            for (std::size_t j = 0; j < dim; ++j) {
                out[j] += factor * term(history[k][j]);
            }
        }
        return out;
    };
    auto product = [&](const Schedule& coeff) {
        double p = 1.0;
        for (std::size_t l = 0; l <= n; ++l) {
            p *= coeff(l);
        }
        return p;
    };

    switch (config.kind) {
    case OptimizerKind::sgd:
        for (std::size_t j = 0; j < dim; ++j) {
            phi[j] = lr * history[n][j];
        }
        break;
    case OptimizerKind::momentum: {
        const auto m = moment(config.momentum, [](double g) { return g; });
        for (std::size_t j = 0; j < dim; ++j) {
            phi[j] = lr * m[j];
        }
        break;
    }
    case OptimizerKind::adam:
    case OptimizerKind::rmsprop: {
        const Schedule zero = Schedule::constant(0.0);
        const Schedule& alpha = config.kind == OptimizerKind::adam ? config.momentum : zero;
        const auto m = moment(alpha, [](double g) { return g; });
        const auto M = moment(config.second_moment, [](double g) { return g * g; });
        const double m_scale = 1.0 - product(alpha);
        const double M_scale = 1.0 - product(config.second_moment);
        for (std::size_t j = 0; j < dim; ++j) {
            phi[j] = lr / (config.epsilon + std::sqrt(M[j] / M_scale)) * (m[j] / m_scale);
        }
        break;
    }
    case OptimizerKind::adagrad: {
        for (std::size_t j = 0; j < dim; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k <= n; ++k) {
                acc += history[k][j] * history[k][j];
            }
            phi[j] = lr * history[n][j] / (config.epsilon + std::sqrt(acc));
        }
        break;
    }
    }
    return phi;
}

namespace {

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return std::sqrt(s);
}

} // namespace

TrainTrace run(const OptimizerConfig& config, std::vector<double> theta0, const GradientSource& gradient,
               const RunOptions& options, std::uint64_t seed) {
    config.validate();
    const auto started = std::chrono::steady_clock::now();
    TrainTrace trace;
    trace.seed = seed;
    trace.steps = options.steps;
    auto theta = std::move(theta0);
    auto state = OptimizerState::zeros(theta.size());

    auto record = [&](std::uint64_t n, double grad_norm) {
        Snapshot snap;
        snap.step = n;
        snap.gradient_norm = grad_norm;
        if (options.keep_theta || options.annotate) {
            snap.theta = theta;
        }
        if (options.annotate) {
            options.annotate(snap);
        }
        if (!options.keep_theta) {
            snap.theta.clear();
        }
        trace.snapshots.push_back(std::move(snap));
    };
    auto due = [&](std::uint64_t n) {
        return n == 0 || n == options.steps || (options.cadence > 0 && n % options.cadence == 0);
    };

    for (std::uint64_t n = 0; n < options.steps; ++n) {
        const auto g = gradient(theta, n, seed);
        if (due(n)) {
            record(n, norm2(g));
        }
        step(config, state, theta, g);
    }
    // The last snapshot reports the gradient at the final iterate.
    record(options.steps, norm2(gradient(theta, options.steps, seed)));
    trace.final_theta = theta;
    trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return trace;
}

} // namespace relulab
