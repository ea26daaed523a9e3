#include "relulab/ann.hpp"

#include <cmath>
#include <string>

#include "relulab/errors.hpp"
#include "relulab/json_util.hpp"

namespace relulab {

DeepArch::DeepArch(std::vector<std::size_t> layer_dims, Activation act)
    : dims(std::move(layer_dims)), activation(act) {
    if (dims.size() < 2) {
        throw std::invalid_argument("deep architecture needs at least two layer dimensions");
    }
    for (auto n : dims) {
        if (n == 0) {
            throw std::invalid_argument("deep architecture layer dimensions must be positive");
        }
    }
}

std::size_t DeepArch::param_count() const noexcept {
    std::size_t total = 0;
    for (std::size_t k = 1; k < dims.size(); ++k) {
        total += dims[k] * (dims[k - 1] + 1);
    }
    return total;
}

std::size_t DeepArch::layer_offset(std::size_t k) const noexcept {
    std::size_t offset = 0;
    for (std::size_t h = 1; h < k; ++h) {
        offset += dims[h] * (dims[h - 1] + 1);
    }
    return offset;
}

ShallowParams::ShallowParams(ShallowArch arch, std::vector<double> values)
    : arch_(arch), values_(std::move(values)) {
    if (arch_.input_dim == 0) {
        throw std::invalid_argument("input dimension must be positive");
    }
    if (values_.size() != arch_.param_count()) {
        throw DimensionMismatch("parameter vector has length " + std::to_string(values_.size()) + ", architecture needs " +
                                std::to_string(arch_.param_count()));
    }
}

ShallowParams ShallowParams::zeros(ShallowArch arch) {
    return ShallowParams(arch, std::vector<double>(arch.param_count(), 0.0));
}

double ShallowParams::preactivation(std::size_t i, std::span<const double> x) const {
    const double* w = values_.data() + arch_.weight_index(i, 1);
    double z = values_[arch_.inner_bias_index(i)];
    for (std::size_t j = 0; j < arch_.input_dim; ++j) {
        z += w[j] * x[j];
    }
    return z;
}

DeepParams::DeepParams(DeepArch arch, std::vector<double> values) : arch_(std::move(arch)), values_(std::move(values)) {
    if (values_.size() != arch_.param_count()) {
        throw DimensionMismatch("parameter vector has length " + std::to_string(values_.size()) + ", architecture needs " +
                                std::to_string(arch_.param_count()));
    }
}

DeepParams DeepParams::zeros(DeepArch arch) {
    const auto n = arch.param_count();
    return DeepParams(std::move(arch), std::vector<double>(n, 0.0));
}

double realize(const ShallowParams& params, std::span<const double> x) {
    const auto& arch = params.arch();
    if (x.size() != arch.input_dim) {
        throw DimensionMismatch("input has dimension " + std::to_string(x.size()) + ", network expects " +
                                std::to_string(arch.input_dim));
    }
    const auto theta = params.values();
    const std::size_t d = arch.input_dim;
    const std::size_t H = arch.width;
    double out = theta[arch.outer_bias_index()];
    for (std::size_t i = 0; i < H; ++i) {
        double z = theta[d * H + i];
        for (std::size_t j = 0; j < d; ++j) {
            z += theta[i * d + j] * x[j];
        }
        out += theta[d * H + H + i] * arch.activation(z);
    }
    return out;
}

std::vector<double> realize(const DeepParams& params, std::span<const double> x) {
    const auto& arch = params.arch();
    if (x.size() != arch.input_dim()) {
        throw DimensionMismatch("input has dimension " + std::to_string(x.size()) + ", network expects " +
                                std::to_string(arch.input_dim()));
    }
    const auto theta = params.values();
    std::vector<double> current(x.begin(), x.end());
    std::vector<double> next;
    const std::size_t L = arch.depth();
    for (std::size_t k = 1; k <= L; ++k) {
        const std::size_t rows = arch.dims[k];
        const std::size_t cols = arch.dims[k - 1];
        const double* w = theta.data() + arch.layer_offset(k);
        const double* b = w + rows * cols;
        next.assign(rows, 0.0);
        for (std::size_t i = 0; i < rows; ++i) {
            double z = b[i];
            for (std::size_t j = 0; j < cols; ++j) {
                z += w[i * cols + j] * current[j];
            }
            next[i] = k < L ? arch.activation(z) : z;
        }
        current.swap(next);
    }
    return current;
}

DeepParams as_deep(const ShallowParams& params) {
    if (params.width() == 0) {
        throw std::invalid_argument("a width-0 network has no deep counterpart");
    }
    DeepArch arch({params.input_dim(), params.width(), 1}, params.arch().activation);
    return DeepParams(std::move(arch), params.vector());
}

ShallowParams as_shallow(const DeepParams& params) {
    const auto& dims = params.arch().dims;
    if (dims.size() != 3 || dims[2] != 1) {
        throw std::invalid_argument("only (d, H, 1) deep networks are shallow");
    }
    return ShallowParams(ShallowArch{dims[0], dims[1], params.arch().activation}, params.vector());
}

nlohmann::json to_json(const ShallowArch& arch) {
    return {{"type", "shallow"},
            {"input_dim", arch.input_dim},
            {"width", arch.width},
            {"activation", to_json(arch.activation)}};
}

nlohmann::json to_json(const DeepArch& arch) {
    return {{"type", "deep"}, {"dims", arch.dims}, {"activation", to_json(arch.activation)}};
}

namespace {

nlohmann::json values_json(std::span<const double> values) {
    auto arr = nlohmann::json::array();
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("parameter vectors with non-finite entries cannot be serialized");
        }
        arr.push_back(v);
    }
    return arr;
}

} // namespace

nlohmann::json to_json(const ParamVector& params) {
    return std::visit(
        [](const auto& p) {
            return nlohmann::json{{"arch", to_json(p.arch())}, {"values", values_json(p.values())}};
        },
        params);
}

ShallowArch shallow_arch_from_json(const nlohmann::json& j, const std::string& path) {
    using namespace json_util;
    allow_keys(j, path, {"type", "input_dim", "width", "activation"});
    ShallowArch arch;
    arch.input_dim = unsigned_or(j, path, "input_dim", 1);
    if (arch.input_dim == 0) {
        throw ConfigError(child(path, "input_dim"), "must be positive");
    }
    arch.width = as_unsigned(required(j, path, "width"), child(path, "width"));
    if (j.contains("activation")) {
        arch.activation = activation_from_json(j["activation"], child(path, "activation"));
    }
    return arch;
}

DeepArch deep_arch_from_json(const nlohmann::json& j, const std::string& path) {
    using namespace json_util;
    allow_keys(j, path, {"type", "dims", "activation"});
    const auto& dims_json = required(j, path, "dims");
    if (!dims_json.is_array()) {
        throw ConfigError(child(path, "dims"), "expected an array");
    }
    std::vector<std::size_t> dims;
    for (std::size_t i = 0; i < dims_json.size(); ++i) {
        const auto n = as_unsigned(dims_json[i], child(child(path, "dims"), i));
        if (n == 0) {
            throw ConfigError(child(child(path, "dims"), i), "layer dimensions must be positive");
        }
        dims.push_back(n);
    }
    if (dims.size() < 2) {
        throw ConfigError(child(path, "dims"), "need at least input and output dimensions");
    }
    Activation act;
    if (j.contains("activation")) {
        act = activation_from_json(j["activation"], child(path, "activation"));
    }
    return DeepArch(std::move(dims), act);
}

ParamVector param_vector_from_json(const nlohmann::json& j, const std::string& path) {
    using namespace json_util;
    allow_keys(j, path, {"arch", "values"});
    const auto& arch_json = required(j, path, "arch");
    const auto arch_path = child(path, "arch");
    const auto type = as_string(required(arch_json, arch_path, "type"), child(arch_path, "type"));
    auto values = as_number_array(required(j, path, "values"), child(path, "values"));
    try {
        if (type == "shallow") {
            return ShallowParams(shallow_arch_from_json(arch_json, arch_path), std::move(values));
        }
        if (type == "deep") {
            return DeepParams(deep_arch_from_json(arch_json, arch_path), std::move(values));
        }
    } catch (const DimensionMismatch& e) {
        throw ConfigError(child(path, "values"), e.what());
    }
    throw ConfigError(child(arch_path, "type"), "expected 'shallow' or 'deep'");
}

} // namespace relulab
