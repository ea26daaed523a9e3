#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include <json.hpp>

#include "relulab/activation.hpp"

namespace relulab {

/// One hidden layer of `width` neurons on inputs of dimension `input_dim`.
///
/// Flat layout (1-based, as in the accessors): weight(i, j) at (i-1)d + j,
/// inner_bias(i) at dH + i, outer_weight(i) at dH + H + i and the outer bias
/// at dH + 2H + 1. Width 0 is the constant network.
struct ShallowArch {
    std::size_t input_dim = 1;
    std::size_t width = 0;
    Activation activation{};

    std::size_t param_count() const noexcept { return input_dim * width + 2 * width + 1; }

    // 0-based storage offsets for 1-based indices.
    std::size_t weight_index(std::size_t i, std::size_t j) const noexcept { return (i - 1) * input_dim + (j - 1); }
    std::size_t inner_bias_index(std::size_t i) const noexcept { return input_dim * width + (i - 1); }
    std::size_t outer_weight_index(std::size_t i) const noexcept { return input_dim * width + width + (i - 1); }
    std::size_t outer_bias_index() const noexcept { return input_dim * width + 2 * width; }

    bool operator==(const ShallowArch&) const = default;
};

/// Layer dimensions (l_0, ..., l_L) with L >= 1; the last layer is affine.
struct DeepArch {
    std::vector<std::size_t> dims;
    Activation activation{};

    DeepArch() = default;
    DeepArch(std::vector<std::size_t> layer_dims, Activation act = {});

    std::size_t depth() const noexcept { return dims.size() - 1; }
    std::size_t input_dim() const noexcept { return dims.front(); }
    std::size_t output_dim() const noexcept { return dims.back(); }
    std::size_t param_count() const noexcept;

    /// 0-based offset of the first parameter of layer k (1-based).
    std::size_t layer_offset(std::size_t k) const noexcept;
    std::size_t weight_index(std::size_t k, std::size_t i, std::size_t j) const noexcept {
        return layer_offset(k) + (i - 1) * dims[k - 1] + (j - 1);
    }
    std::size_t bias_index(std::size_t k, std::size_t i) const noexcept {
        return layer_offset(k) + dims[k] * dims[k - 1] + (i - 1);
    }

    bool operator==(const DeepArch&) const = default;
};

class ShallowParams {
public:
    ShallowParams() = default;
    ShallowParams(ShallowArch arch, std::vector<double> values);
    static ShallowParams zeros(ShallowArch arch);

    const ShallowArch& arch() const noexcept { return arch_; }
    std::size_t input_dim() const noexcept { return arch_.input_dim; }
    std::size_t width() const noexcept { return arch_.width; }

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    const std::vector<double>& vector() const noexcept { return values_; }

    double& weight(std::size_t i, std::size_t j) { return values_[arch_.weight_index(i, j)]; }
    double weight(std::size_t i, std::size_t j) const { return values_[arch_.weight_index(i, j)]; }
    double& inner_bias(std::size_t i) { return values_[arch_.inner_bias_index(i)]; }
    double inner_bias(std::size_t i) const { return values_[arch_.inner_bias_index(i)]; }
    double& outer_weight(std::size_t i) { return values_[arch_.outer_weight_index(i)]; }
    double outer_weight(std::size_t i) const { return values_[arch_.outer_weight_index(i)]; }
    double& outer_bias() { return values_[arch_.outer_bias_index()]; }
    double outer_bias() const { return values_[arch_.outer_bias_index()]; }

    /// inner_bias(i) + <weight(i, .), x>
    double preactivation(std::size_t i, std::span<const double> x) const;

    bool operator==(const ShallowParams&) const = default;

private:
    ShallowArch arch_{};
    std::vector<double> values_{0.0};
};

class DeepParams {
public:
    DeepParams() = default;
    DeepParams(DeepArch arch, std::vector<double> values);
    static DeepParams zeros(DeepArch arch);

    const DeepArch& arch() const noexcept { return arch_; }
    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    const std::vector<double>& vector() const noexcept { return values_; }

    double& weight(std::size_t k, std::size_t i, std::size_t j) { return values_[arch_.weight_index(k, i, j)]; }
    double weight(std::size_t k, std::size_t i, std::size_t j) const { return values_[arch_.weight_index(k, i, j)]; }
    double& bias(std::size_t k, std::size_t i) { return values_[arch_.bias_index(k, i)]; }
    double bias(std::size_t k, std::size_t i) const { return values_[arch_.bias_index(k, i)]; }

    bool operator==(const DeepParams&) const = default;

private:
    DeepArch arch_{};
    std::vector<double> values_;
};

using ParamVector = std::variant<ShallowParams, DeepParams>;

double realize(const ShallowParams& params, std::span<const double> x);
std::vector<double> realize(const DeepParams& params, std::span<const double> x);

/// A shallow network with width >= 1 is the depth-2 network (d, H, 1) with
/// the same flat parameter vector.
DeepParams as_deep(const ShallowParams& params);
ShallowParams as_shallow(const DeepParams& params);

nlohmann::json to_json(const ShallowArch& arch);
nlohmann::json to_json(const DeepArch& arch);
nlohmann::json to_json(const ParamVector& params);
ParamVector param_vector_from_json(const nlohmann::json& j, const std::string& path = "$");
ShallowArch shallow_arch_from_json(const nlohmann::json& j, const std::string& path);
DeepArch deep_arch_from_json(const nlohmann::json& j, const std::string& path);

} // namespace relulab
