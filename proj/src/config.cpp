#include "relulab/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "relulab/errors.hpp"
#include "relulab/hash.hpp"
#include "relulab/json_util.hpp"

namespace relulab {

using nlohmann::json;

namespace {

Target target_from_json(const json& j, const std::string& path) {
    using namespace json_util;
    const auto kind = as_string(required(j, path, "kind"), child(path, "kind"));
    try {
        if (kind == "square") {
            allow_keys(j, path, {"kind"});
            return Target::square();
        }
        if (kind == "identity") {
            allow_keys(j, path, {"kind"});
            return Target::identity();
        }
        if (kind == "abs_shift") {
            allow_keys(j, path, {"kind", "c"});
            return Target::abs_shift(number_or(j, path, "c", 0.5));
        }
        if (kind == "sine") {
            allow_keys(j, path, {"kind", "frequency"});
            return Target::sine(as_number(required(j, path, "frequency"), child(path, "frequency")));
        }
        if (kind == "constant") {
            allow_keys(j, path, {"kind", "value"});
            return Target::constant(as_number(required(j, path, "value"), child(path, "value")));
        }
        if (kind == "piecewise_linear") {
            allow_keys(j, path, {"kind", "knots"});
            const auto& arr = required(j, path, "knots");
            const auto kpath = child(path, "knots");
            if (!arr.is_array()) {
                throw ConfigError(kpath, "expected an array of [x, y] pairs");
            }
            std::vector<std::pair<double, double>> knots;
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const auto xy = as_number_array(arr[i], child(kpath, i));
                if (xy.size() != 2) {
                    throw ConfigError(child(kpath, i), "expected [x, y]");
                }
                knots.emplace_back(xy[0], xy[1]);
            }
            return Target::piecewise_linear(std::move(knots));
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
    throw ConfigError(child(path, "kind"), "unknown target '" + kind + "'");
}

Measure measure_from_json(const json& j, const std::string& path) {
    using namespace json_util;
    const auto kind = as_string(required(j, path, "kind"), child(path, "kind"));
    if (kind == "uniform") {
        allow_keys(j, path, {"kind", "mass"});
        if (j.contains("mass")) {
            const double mass = as_number(j["mass"], child(path, "mass"));
            if (!(mass > 0.0)) {
                throw ConfigError(child(path, "mass"), "must be positive");
            }
            return Measure::uniform(mass);
        }
        return Measure::uniform();
    }
    if (kind == "beta22") {
        allow_keys(j, path, {"kind"});
        return Measure::beta22();
    }
    if (kind == "empirical") {
        allow_keys(j, path, {"kind", "points", "weights"});
        const auto& pts = required(j, path, "points");
        if (!pts.is_array() || pts.empty()) {
            throw ConfigError(child(path, "points"), "expected a non-empty array of points");
        }
        std::vector<std::vector<double>> points;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            points.push_back(as_number_array(pts[i], child(child(path, "points"), i)));
        }
        auto weights = as_number_array(required(j, path, "weights"), child(path, "weights"));
        try {
            return Measure::empirical(std::move(points), std::move(weights));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(path, e.what());
        }
    }
    throw ConfigError(child(path, "kind"), "unknown measure '" + kind + "'");
}

NoiseModel noise_from_json(const json& j, const std::string& path) {
    using namespace json_util;
    const auto kind = as_string(required(j, path, "kind"), child(path, "kind"));
    try {
        if (kind == "none") {
            allow_keys(j, path, {"kind"});
            return NoiseModel::none();
        }
        if (kind == "gaussian") {
            allow_keys(j, path, {"kind", "sigma"});
            return NoiseModel::gaussian(as_number(required(j, path, "sigma"), child(path, "sigma")));
        }
        if (kind == "uniform") {
            allow_keys(j, path, {"kind", "half_width"});
            return NoiseModel::uniform(as_number(required(j, path, "half_width"), child(path, "half_width")));
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
    throw ConfigError(child(path, "kind"), "unknown noise '" + kind + "'");
}

// --- experiment schema -------------------------------------------------------

enum class ParamType { u64, real, optional_real, boolean, text, u64_list, real_list };

struct ParamSpec {
    std::string key;
    ParamType type;
    json fallback;
};

const std::map<std::string, std::vector<ParamSpec>>& schema() {
    using T = ParamType;
    static const std::map<std::string, std::vector<ParamSpec>> table{
        {"risk", {}},
        {"grad-check",
         {{"samples", T::u64, 100},
          {"max_width", T::u64, 4},
          {"margin", T::real, 1e-3},
          {"tolerance", T::real, 1e-5},
          {"outer_tolerance", T::real, 1e-6},
          {"batch_size", T::u64, 16},
          {"r_values", T::real_list, json::array({10.0, 100.0, 1000.0})}}},
        {"train",
         {{"steps", T::u64, 1000},
          {"batch_size", T::u64, 32},
          {"cadence", T::u64, 100},
          {"keep_theta", T::boolean, false}}},
        {"trap-prob", {{"samples", T::u64, 1000000}}},
        {"sweep",
         {{"widths", T::u64_list, json::array({4, 8, 16})},
          {"trials", T::u64, 200},
          {"steps", T::u64, 5000},
          {"batch_size", T::u64, 32},
          {"cadence", T::u64, 1000},
          {"epsilon", T::optional_real, nullptr},
          {"trap_samples", T::u64, 1000000},
          {"band", T::real, 4.0},
          {"restarts", T::u64, 32},
          {"adam_steps", T::u64, 2000},
          {"polish", T::text, "bfgs"},
          {"keep_traces", T::boolean, true}}},
        {"hierarchy",
         {{"max_width", T::u64, 3},
          {"restarts", T::u64, 32},
          {"adam_steps", T::u64, 2000},
          {"polish", T::text, "bfgs"},
          {"improve_candidates", T::u64, 256},
          {"margin", T::real, 1e-4}}},
        {"embed", {{"new_width", T::u64, 0}, {"new_dims", T::u64_list, json::array()}}},
        {"lyapunov",
         {{"pairs", T::u64, 1000},
          {"identity_samples", T::u64, 50},
          {"learning_rate", T::real, 1e-3},
          {"steps", T::u64, 10000},
          {"epsilon", T::real, 0.05},
          {"xi", T::optional_real, nullptr},
          {"init_scale", T::real, 0.1},
          {"cadence", T::u64, 100},
          {"flow_proxy", T::boolean, false}}},
    };
    return table;
}

json check_param(const ParamSpec& spec, const json& v, const std::string& path) {
    using namespace json_util;
    switch (spec.type) {
    case ParamType::u64:
        return as_unsigned(v, path);
    case ParamType::real:
        return as_number(v, path);
    case ParamType::optional_real:
        return v.is_null() ? json(nullptr) : json(as_number(v, path));
    case ParamType::boolean:
        return as_bool(v, path);
    case ParamType::text:
        return as_string(v, path);
    case ParamType::u64_list: {
        if (!v.is_array()) {
            throw ConfigError(path, "expected an array");
        }
        json out = json::array();
        for (std::size_t i = 0; i < v.size(); ++i) {
            out.push_back(as_unsigned(v[i], child(path, i)));
        }
        return out;
    }
    case ParamType::real_list:
        return as_number_array(v, path);
    }
    return v;
}

const json& param(const json& params, const std::string& key) {
    auto it = params.find(key);
    if (it == params.end()) {
        throw std::logic_error("experiment parameter '" + key + "' not in schema");
    }
    return *it;
}

} // namespace

Problem problem_from_json(const json& j, const std::string& path) {
    using namespace json_util;
    allow_keys(j, path, {"domain", "measure", "target", "noise"});
    const auto dpath = child(path, "domain");
    const auto& dom = required(j, path, "domain");
    allow_keys(dom, dpath, {"a", "b", "dim"});
    const double a = as_number(required(dom, dpath, "a"), child(dpath, "a"));
    const double b = as_number(required(dom, dpath, "b"), child(dpath, "b"));
    const auto dim = unsigned_or(dom, dpath, "dim", 1);
    if (!(b > a)) {
        throw ConfigError(dpath, "need a < b");
    }
    if (dim == 0) {
        throw ConfigError(child(dpath, "dim"), "must be positive");
    }
    Measure measure = j.contains("measure") ? measure_from_json(j["measure"], child(path, "measure")) : Measure::uniform();
    Target target = target_from_json(required(j, path, "target"), child(path, "target"));
    NoiseModel noise = j.contains("noise") ? noise_from_json(j["noise"], child(path, "noise")) : NoiseModel::none();
    return Problem{DomainBox(a, b, dim), std::move(measure), std::move(target), noise};
}

const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> kinds = [] {
        std::vector<std::string> out;
        for (const auto& [k, _] : schema()) {
            out.push_back(k);
        }
        return out;
    }();
    return kinds;
}

ExperimentSpec default_experiment(const std::string& kind) {
    auto it = schema().find(kind);
    if (it == schema().end()) {
        throw std::invalid_argument("unknown experiment kind '" + kind + "'");
    }
    ExperimentSpec spec;
    spec.kind = kind;
    for (const auto& p : it->second) {
        spec.params[p.key] = p.fallback;
    }
    return spec;
}

ExperimentSpec experiment_from_json(const json& j, const std::string& path) {
    using namespace json_util;
    require_object(j, path);
    const auto kind = as_string(required(j, path, "kind"), child(path, "kind"));
    auto it = schema().find(kind);
    if (it == schema().end()) {
        throw ConfigError(child(path, "kind"), "unknown experiment kind '" + kind + "'");
    }
    ExperimentSpec spec = default_experiment(kind);
    for (const auto& [key, value] : j.items()) {
        if (key == "kind") {
            continue;
        }
        const ParamSpec* found = nullptr;
        for (const auto& p : it->second) {
            if (p.key == key) {
                found = &p;
            }
        }
        if (!found) {
            throw ConfigError(child(path, key), "unknown key for experiment '" + kind + "'");
        }
        spec.params[key] = check_param(*found, value, child(path, key));
    }
    return spec;
}

std::uint64_t ExperimentSpec::u64(const std::string& key) const {
    return param(params, key).get<std::uint64_t>();
}

double ExperimentSpec::real(const std::string& key) const {
    return param(params, key).get<double>();
}

std::optional<double> ExperimentSpec::optional_real(const std::string& key) const {
    const auto& v = param(params, key);
    return v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
}

bool ExperimentSpec::flag(const std::string& key) const {
    return param(params, key).get<bool>();
}

std::string ExperimentSpec::text(const std::string& key) const {
    return param(params, key).get<std::string>();
}

std::vector<std::size_t> ExperimentSpec::u64_list(const std::string& key) const {
    return param(params, key).get<std::vector<std::size_t>>();
}

std::vector<double> ExperimentSpec::real_list(const std::string& key) const {
    return param(params, key).get<std::vector<double>>();
}

json RunConfig::to_json() const {
    json j;
    j["problem"] = problem.to_json();
    j["model"] = std::visit([](const auto& a) { return relulab::to_json(a); }, model);
    j["optimizer"] = optimizer.to_json();
    j["init"] = init.to_json();
    j["quadrature"] = quadrature.to_json();
    json e = experiment.params;
    e["kind"] = experiment.kind;
    j["experiment"] = e;
    if (output_dir) {
        j["output_dir"] = *output_dir;
    }
    j["seed"] = seed;
    j["jobs"] = jobs;
    return j;
}

std::string RunConfig::fingerprint() const {
    auto j = to_json();
    j.erase("output_dir");
    j.erase("jobs");
    return hex64(fnv1a64(j.dump()));
}

RunConfig config_from_json(const json& j, const std::string& path) {
    using namespace json_util;
    allow_keys(j, path,
               {"problem", "model", "optimizer", "init", "quadrature", "experiment", "output_dir", "seed", "jobs"});
    RunConfig cfg;
    cfg.problem = problem_from_json(required(j, path, "problem"), child(path, "problem"));
    const std::size_t d = cfg.problem.box.dim();
    cfg.quadrature = QuadratureCfg::default_for(d);
    if (j.contains("model")) {
        const auto mpath = child(path, "model");
        const auto& m = j["model"];
        const auto type = string_or(m, mpath, "type", "shallow");
        if (type == "shallow") {
            auto with_dim = m;
            if (!with_dim.contains("input_dim")) {
                with_dim["input_dim"] = d;
            }
            cfg.model = shallow_arch_from_json(with_dim, mpath);
            if (std::get<ShallowArch>(cfg.model).input_dim != d) {
                throw ConfigError(child(mpath, "input_dim"), "does not match the domain dimension");
            }
        } else if (type == "deep") {
            cfg.model = deep_arch_from_json(m, mpath);
            if (std::get<DeepArch>(cfg.model).input_dim() != d) {
                throw ConfigError(child(mpath, "dims"), "first layer does not match the domain dimension");
            }
        } else {
            throw ConfigError(child(mpath, "type"), "expected 'shallow' or 'deep'");
        }
    } else {
        cfg.model = ShallowArch{d, 4, Activation::relu()};
    }
    if (j.contains("optimizer")) {
        cfg.optimizer = optimizer_config_from_json(j["optimizer"], child(path, "optimizer"));
    }
    if (j.contains("init")) {
        cfg.init = init_spec_from_json(j["init"], child(path, "init"));
    }
    if (j.contains("quadrature")) {
        cfg.quadrature = quadrature_cfg_from_json(j["quadrature"], child(path, "quadrature"));
    }
    if (j.contains("experiment")) {
        cfg.experiment = experiment_from_json(j["experiment"], child(path, "experiment"));
    }
    if (j.contains("output_dir")) {
        cfg.output_dir = as_string(j["output_dir"], child(path, "output_dir"));
    }
    cfg.seed = unsigned_or(j, path, "seed", 0);
    cfg.jobs = static_cast<unsigned>(unsigned_or(j, path, "jobs", 1));
    if (cfg.jobs == 0) {
        throw ConfigError(child(path, "jobs"), "must be at least 1");
    }
    return cfg;
}

json read_json_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw ConfigError("$", "cannot open '" + file.string() + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw ConfigError("$", file.string() + ": " + e.what());
    }
}

RunConfig load_config(const std::filesystem::path& file) {
    return config_from_json(read_json_file(file));
}

} // namespace relulab
