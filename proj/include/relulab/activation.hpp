#pragma once

#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

namespace relulab {

enum class ActivationKind { relu, repu, clipped_relu, clipped_repu };

/// The family sigma(x) = (max{min{x, c}, 0})^k. ReLU is k = 1, c = +inf.
///
/// Derivatives follow the left-derivative convention used by backprop:
/// sigma'(x) = k * t^(k-1) on the open interval (0, c) and 0 elsewhere,
/// so in particular sigma'(0) = 0.
class Activation {
public:
    Activation() = default;

    static Activation relu() { return {}; }
    static Activation repu(int power);
    static Activation clipped_relu(double clip);
    static Activation clipped_repu(int power, double clip);

    ActivationKind kind() const;
    int power() const noexcept { return power_; }
    double clip() const noexcept { return clip_; }
    bool is_clipped() const noexcept { return clip_ != std::numeric_limits<double>::infinity(); }

    double operator()(double x) const noexcept {
        if (x <= 0.0) {
            return 0.0;
        }
        const double t = x < clip_ ? x : clip_;
        if (power_ == 1) {
            return t;
        }
        double out = t;
        for (int p = 1; p < power_; ++p) {
            out *= t;
        }
        return out;
    }

    double derivative(double x) const noexcept {
        if (x <= 0.0 || x >= clip_) {
            return 0.0;
        }
        if (power_ == 1) {
            return 1.0;
        }
        double out = static_cast<double>(power_);
        for (int p = 1; p < power_; ++p) {
            out *= x;
        }
        return out;
    }

    // Any point of (-inf, 0) is on the flat piece; -1 is the fixed choice.
    static constexpr double flat_representative() noexcept { return -1.0; }

    /// Pre-activation values at which sigma is not smooth.
    std::vector<double> breakpoints() const;

    std::string name() const;
    bool operator==(const Activation&) const = default;

private:
    Activation(int power, double clip) : power_(power), clip_(clip) {}

    int power_ = 1;
    double clip_ = std::numeric_limits<double>::infinity();
};

nlohmann::json to_json(const Activation& act);
Activation activation_from_json(const nlohmann::json& j, const std::string& path = "$");

} // namespace relulab
