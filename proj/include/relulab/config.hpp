#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "relulab/ann.hpp"
#include "relulab/landscape.hpp"
#include "relulab/measure.hpp"
#include "relulab/optimizer.hpp"
#include "relulab/quadrature.hpp"

namespace relulab {

Problem problem_from_json(const nlohmann::json& j, const std::string& path);

using ModelArch = std::variant<ShallowArch, DeepArch>;

/// Experiment kind plus its parameters, every default filled in.
struct ExperimentSpec {
    std::string kind = "risk";
    nlohmann::json params = nlohmann::json::object();

    std::uint64_t u64(const std::string& key) const;
    double real(const std::string& key) const;
    std::optional<double> optional_real(const std::string& key) const;
    bool flag(const std::string& key) const;
    std::string text(const std::string& key) const;
    std::vector<std::size_t> u64_list(const std::string& key) const;
    std::vector<double> real_list(const std::string& key) const;
};

/// Kinds with a parameter schema.
const std::vector<std::string>& experiment_kinds();
ExperimentSpec experiment_from_json(const nlohmann::json& j, const std::string& path);
ExperimentSpec default_experiment(const std::string& kind);

struct RunConfig {
    Problem problem{DomainBox(0.0, 1.0, 1), Measure::uniform(), Target::square()};
    ModelArch model = ShallowArch{1, 4, Activation::relu()};
    OptimizerConfig optimizer = OptimizerConfig::adam_default();
    InitSpec init = InitSpec::preset("normal-kappa-0.5");
    QuadratureCfg quadrature{};
    ExperimentSpec experiment{};
    std::optional<std::string> output_dir;
    std::uint64_t seed = 0;
    unsigned jobs = 1;

    nlohmann::json to_json() const;
    /// Content hash of the semantic fields (everything except output_dir and jobs).
    std::string fingerprint() const;
};

RunConfig config_from_json(const nlohmann::json& j, const std::string& path = "$");
RunConfig load_config(const std::filesystem::path& file);
nlohmann::json read_json_file(const std::filesystem::path& file);

} // namespace relulab
