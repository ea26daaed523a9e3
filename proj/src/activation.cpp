#include "relulab/activation.hpp"

#include <cmath>

#include "relulab/errors.hpp"
#include "relulab/json_util.hpp"

namespace relulab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_power(int power) {
    if (power < 1) {
        throw std::invalid_argument("activation power must be >= 1");
    }
}

void check_clip(double clip) {
    if (!(clip > 0.0)) {
        throw std::invalid_argument("activation clip must be positive");
    }
}

} // namespace

Activation Activation::repu(int power) {
    check_power(power);
    return Activation(power, kInf);
}

Activation Activation::clipped_relu(double clip) {
    check_clip(clip);
    return Activation(1, clip);
}

Activation Activation::clipped_repu(int power, double clip) {
    check_power(power);
    check_clip(clip);
    return Activation(power, clip);
}

ActivationKind Activation::kind() const {
    if (is_clipped()) {
        return power_ == 1 ? ActivationKind::clipped_relu : ActivationKind::clipped_repu;
    }
    return power_ == 1 ? ActivationKind::relu : ActivationKind::repu;
}

std::vector<double> Activation::breakpoints() const {
    std::vector<double> out{0.0};
    if (is_clipped()) {
        out.push_back(clip_);
    }
    return out;
}

std::string Activation::name() const {
    switch (kind()) {
    case ActivationKind::relu:
        return "relu";
    case ActivationKind::repu:
        return "repu";
    case ActivationKind::clipped_relu:
        return "clipped_relu";
    case ActivationKind::clipped_repu:
        return "clipped_repu";
    }
    return "relu";
}

nlohmann::json to_json(const Activation& act) {
    nlohmann::json j{{"kind", act.name()}};
    if (act.power() != 1) {
        j["power"] = act.power();
    }
    if (act.is_clipped()) {
        j["clip"] = act.clip();
    }
    return j;
}

Activation activation_from_json(const nlohmann::json& j, const std::string& path) {
    using namespace json_util;
    allow_keys(j, path, {"kind", "power", "clip"});
    const auto kind = as_string(required(j, path, "kind"), child(path, "kind"));
    const auto power = static_cast<int>(unsigned_or(j, path, "power", 1));
    // c = +inf canonicalizes to the unclipped variant.
    const double clip = number_or(j, path, "clip", kInf);
    try {
        if (kind == "relu") {
            return Activation::relu();
        }
        if (kind == "repu") {
            return Activation::repu(power);
        }
        if (kind == "clipped_relu") {
            return std::isinf(clip) ? Activation::relu() : Activation::clipped_relu(clip);
        }
        if (kind == "clipped_repu") {
            return std::isinf(clip) ? Activation::repu(power) : Activation::clipped_repu(power, clip);
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
    throw ConfigError(child(path, "kind"), "unknown activation '" + kind + "'");
}

} // namespace relulab
