#include "relulab/landscape.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "relulab/errors.hpp"
#include "relulab/gradient.hpp"
#include "relulab/json_util.hpp"
#include "relulab/parallel.hpp"
#include "relulab/risk.hpp"

namespace relulab {

bool trapped_event(std::span<const double> weights, double bias, const DomainBox& box) {
    double top = bias;
    for (double w : weights) {
        top += std::max(w * box.lower(), w * box.upper());
    }
    return top < 0.0;
}

NeuronStatus neuron_status(const ShallowParams& params, std::size_t i, const DomainBox& box) {
    if (i < 1 || i > params.width()) {
        throw std::out_of_range("neuron index " + std::to_string(i) + " outside 1.." + std::to_string(params.width()));
    }
    if (params.input_dim() != box.dim()) {
        throw DimensionMismatch("network and box dimensions differ");
    }
    NeuronStatus s;
    s.index = i;
    double top = params.inner_bias(i);
    for (std::size_t j = 1; j <= params.input_dim(); ++j) {
        const double w = params.weight(i, j);
        top += std::max(w * box.lower(), w * box.upper());
    }
    s.max_preactivation = top;
    s.inactive = top <= 0.0;
    s.strictly_trapped = top < 0.0;
    return s;
}

std::vector<std::size_t> inactive_set(const ShallowParams& params, const DomainBox& box) {
    std::vector<std::size_t> out;
    for (std::size_t i = 1; i <= params.width(); ++i) {
        if (neuron_status(params, i, box).inactive) {
            out.push_back(i);
        }
    }
    return out;
}

std::vector<std::size_t> strictly_trapped_set(const ShallowParams& params, const DomainBox& box) {
    std::vector<std::size_t> out;
    for (std::size_t i = 1; i <= params.width(); ++i) {
        if (neuron_status(params, i, box).strictly_trapped) {
            out.push_back(i);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// initialization

namespace {

class InitSampler {
public:
    explicit InitSampler(const InitSpec& spec) : density_(spec.density) {
        if (density_ == InitSpec::Density::table) {
            table_ = std::piecewise_constant_distribution<double>(spec.table_edges.begin(), spec.table_edges.end(),
                                                                  spec.table_weights.begin());
        }
    }

    double operator()(Rng& rng) {
        switch (density_) {
        case InitSpec::Density::normal:
            return normal_(rng);
        case InitSpec::Density::uniform:
            return uniform_(rng);
        case InitSpec::Density::table:
            return table_(rng);
        }
        return 0.0;
    }

private:
    InitSpec::Density density_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{-1.0, 1.0};
    std::piecewise_constant_distribution<double> table_;
};

std::string density_name(InitSpec::Density d) {
    switch (d) {
    case InitSpec::Density::normal:
        return "normal";
    case InitSpec::Density::uniform:
        return "uniform";
    case InitSpec::Density::table:
        return "table";
    }
    return "normal";
}

} // namespace

InitSpec InitSpec::preset(const std::string& name) {
    InitSpec s;
    s.name = name;
    if (name == "normal-kappa-0.5") {
        s.density = Density::normal;
        s.kappa = 0.5;
    } else if (name == "uniform-kappa-0.5") {
        s.density = Density::uniform;
        s.kappa = 0.5;
    } else if (name == "normal-unscaled") {
        s.density = Density::normal;
        s.kappa = 0.0;
    } else {
        throw std::invalid_argument("unknown init preset '" + name + "'");
    }
    return s;
}

InitSpec InitSpec::table(std::vector<double> edges, std::vector<double> weights, double kappa) {
    InitSpec s;
    s.name = "table";
    s.density = Density::table;
    s.kappa = kappa;
    s.table_edges = std::move(edges);
    s.table_weights = std::move(weights);
    s.validate();
    return s;
}

void InitSpec::validate() const {
    if (!std::isfinite(kappa)) {
        throw std::invalid_argument("kappa must be finite");
    }
    if (density != Density::table) {
        return;
    }
    if (table_edges.size() < 2 || table_weights.size() + 1 != table_edges.size()) {
        throw std::invalid_argument("table density needs m + 1 edges and m weights");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < table_weights.size(); ++k) {
        if (!(table_edges[k + 1] > table_edges[k])) {
            throw std::invalid_argument("table edges must be strictly increasing");
        }
        if (!(table_weights[k] >= 0.0) || !std::isfinite(table_weights[k])) {
            throw std::invalid_argument("table weights must be finite and non-negative");
        }
        total += table_weights[k];
    }
    if (!(total > 0.0)) {
        throw std::invalid_argument("table weights must not all vanish");
    }
}

double InitSpec::draw(Rng& rng) const {
    InitSampler sampler(*this);
    return sampler(rng);
}

nlohmann::json InitSpec::to_json() const {
    nlohmann::json j{{"density", density_name(density)}, {"kappa", kappa}, {"scale_outer", scale_outer}};
    if (density == Density::table) {
        j["edges"] = table_edges;
        j["weights"] = table_weights;
    }
    return j;
}

InitSpec init_spec_from_json(const nlohmann::json& j, const std::string& path) {
    using namespace json_util;
    allow_keys(j, path, {"preset", "density", "kappa", "edges", "weights", "scale_outer"});
    InitSpec s;
    if (j.contains("preset")) {
        if (j.contains("density") || j.contains("edges") || j.contains("weights")) {
            throw ConfigError(child(path, "preset"), "preset cannot be combined with an explicit density");
        }
        const auto name = as_string(j["preset"], child(path, "preset"));
        try {
            s = InitSpec::preset(name);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(child(path, "preset"), e.what());
        }
    } else {
        const auto density = as_string(required(j, path, "density"), child(path, "density"));
        s.name = density;
        if (density == "normal") {
            s.density = InitSpec::Density::normal;
        } else if (density == "uniform") {
            s.density = InitSpec::Density::uniform;
        } else if (density == "table") {
            s.density = InitSpec::Density::table;
            s.table_edges = as_number_array(required(j, path, "edges"), child(path, "edges"));
            s.table_weights = as_number_array(required(j, path, "weights"), child(path, "weights"));
        } else {
            throw ConfigError(child(path, "density"), "unknown density '" + density + "'");
        }
        s.kappa = number_or(j, path, "kappa", 0.5);
    }
    if (j.contains("kappa") && j.contains("preset")) {
        s.kappa = as_number(j["kappa"], child(path, "kappa"));
    }
    s.scale_outer = bool_or(j, path, "scale_outer", true);
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
    return s;
}

ShallowParams sample_init(const ShallowArch& arch, const InitSpec& init, std::uint64_t seed) {
    init.validate();
    auto params = ShallowParams::zeros(arch);
    if (arch.width == 0) {
        return params;
    }
    Rng rng(seed);
    InitSampler draw(init);
    const double scale = std::pow(static_cast<double>(arch.width), -init.kappa);
    auto v = params.values();
    const std::size_t inner = arch.input_dim * arch.width + arch.width;
    for (std::size_t k = 0; k < inner; ++k) {
        v[k] = scale * draw(rng);
    }
    for (std::size_t i = 1; i <= arch.width; ++i) {
        const double z = draw(rng);
        params.outer_weight(i) = init.scale_outer ? scale * z : z;
    }
    return params;
}

TrapProbability trap_probability(const InitSpec& init, const DomainBox& box, std::size_t n_samples, std::uint64_t seed,
                                 unsigned jobs) {
    if (n_samples == 0) {
        throw std::invalid_argument("trap_probability needs at least one sample");
    }
    init.validate();
    constexpr std::size_t chunk = 1 << 16;
    const std::size_t chunks = (n_samples + chunk - 1) / chunk;
    std::vector<std::size_t> counts(chunks, 0);
    const std::size_t d = box.dim();
    parallel_for(chunks, jobs, [&](std::size_t c) {
        Rng rng = make_rng(seed, c);
        InitSampler draw(init);
        std::vector<double> w(d);
        const std::size_t begin = c * chunk;
        const std::size_t end = std::min(n_samples, begin + chunk);
        std::size_t hits = 0;
        for (std::size_t s = begin; s < end; ++s) {
            for (auto& x : w) {
                x = draw(rng);
            }
            const double bias = draw(rng);
            hits += trapped_event(w, bias, box) ? 1 : 0;
        }
        counts[c] = hits;
    });
    std::size_t total = 0;
    for (auto c : counts) {
        total += c;
    }
    TrapProbability out;
    out.samples = n_samples;
    out.p_hat = static_cast<double>(total) / static_cast<double>(n_samples);
    out.std_error = std::sqrt(out.p_hat * (1.0 - out.p_hat) / static_cast<double>(n_samples));
    return out;
}

TrappingBound trapping_bound(double p_hat, std::size_t width) {
    if (!(p_hat >= 0.0 && p_hat <= 1.0)) {
        throw std::invalid_argument("p_hat must lie in [0, 1]");
    }
    if (width < 1) {
        throw std::invalid_argument("trapping bound needs H >= 1");
    }
    const double H = static_cast<double>(width);
    return {std::exp(-H * p_hat), 1.0 - std::pow(1.0 - p_hat, H)};
}

// ---------------------------------------------------------------------------
// embeddings

ShallowParams embed_shallow(const ShallowParams& params, std::size_t new_width) {
    const std::size_t H = params.width();
    if (new_width < H) {
        throw std::invalid_argument("cannot embed width " + std::to_string(H) + " into width " + std::to_string(new_width));
    }
    ShallowArch arch = params.arch();
    arch.width = new_width;
    auto out = ShallowParams::zeros(arch);
    const std::size_t d = arch.input_dim;
    for (std::size_t i = 1; i <= new_width; ++i) {
        if (i <= H) {
            for (std::size_t j = 1; j <= d; ++j) {
                out.weight(i, j) = params.weight(i, j);
            }
            out.inner_bias(i) = params.inner_bias(i);
            out.outer_weight(i) = params.outer_weight(i);
        } else {
            out.inner_bias(i) = Activation::flat_representative();
        }
    }
    out.outer_bias() = params.outer_bias();
    return out;
}

DeepParams embed_deep(const DeepParams& params, const std::vector<std::size_t>& new_dims) {
    const auto& old = params.arch();
    if (new_dims.size() != old.dims.size()) {
        throw DimensionMismatch("embedding needs equal depth");
    }
    if (new_dims.front() != old.dims.front() || new_dims.back() != old.dims.back()) {
        throw DimensionMismatch("embedding needs equal input and output dimensions");
    }
    for (std::size_t k = 0; k < new_dims.size(); ++k) {
        if (new_dims[k] < old.dims[k]) {
            throw DimensionMismatch("embedding cannot shrink layer " + std::to_string(k));
        }
    }
    DeepArch arch(new_dims, old.activation);
    auto out = DeepParams::zeros(arch);
    const std::size_t L = arch.depth();
    for (std::size_t k = 1; k <= L; ++k) {
        for (std::size_t i = 1; i <= new_dims[k]; ++i) {
            const bool old_row = i <= old.dims[k];
            for (std::size_t j = 1; j <= new_dims[k - 1]; ++j) {
                if (old_row && j <= old.dims[k - 1]) {
                    out.weight(k, i, j) = params.weight(k, i, j);
                }
            }
            if (old_row) {
                out.bias(k, i) = params.bias(k, i);
            } else {
                // k < L here since output dims agree
                out.bias(k, i) = Activation::flat_representative();
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// neuron addition

ImproveResult add_neuron_improve(const ShallowParams& params, const Problem& problem, const QuadratureCfg& cfg,
                                 std::size_t candidates, std::uint64_t seed, double tolerance) {
    if (candidates == 0) {
        throw std::invalid_argument("add_neuron_improve needs at least one candidate");
    }
    const std::size_t d = params.input_dim();
    const std::size_t H = params.width();
    const auto& box = problem.box;
    const auto& act = params.arch().activation;

    ImproveResult best;
    best.risk_before = risk_population(params, problem, cfg);
    best.params = embed_shallow(params, H + 1);
    best.risk_after = best.risk_before;
    best.candidates = candidates;

    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> w(d);
    double best_abs = -1.0;
    std::vector<double> best_w(d);
    double best_b = 0.0;
    for (std::size_t c = 0; c < candidates; ++c) {
        double norm = 0.0;
        do {
            norm = 0.0;
            for (auto& x : w) {
                x = normal(rng);
                norm += x * x;
            }
        } while (norm == 0.0);
        const double radius = std::pow(10.0, -1.0 + 2.0 * unit(rng));
        norm = std::sqrt(norm);
        double lo = 0.0;
        double hi = 0.0;
        for (auto& x : w) {
            x *= radius / norm;
            lo += std::min(x * box.lower(), x * box.upper());
            hi += std::max(x * box.lower(), x * box.upper());
        }
        const double b = -hi + (hi - lo) * unit(rng);

        auto trial = best.params;
        for (std::size_t j = 1; j <= d; ++j) {
            trial.weight(H + 1, j) = w[j - 1];
        }
        trial.inner_bias(H + 1) = b;
        trial.outer_weight(H + 1) = 0.0;
        const auto nodes = risk_nodes(trial, problem, cfg);
        double D = 0.0;
        double S = 0.0;
        for (std::size_t q = 0; q < nodes.size(); ++q) {
            const auto x = nodes.point(q);
            double z = b;
            for (std::size_t j = 0; j < d; ++j) {
                z += w[j] * x[j];
            }
            const double s = act(z);
            const double r = realize(params, x) - problem.target(x);
            D += nodes.weights[q] * s * r;
            S += nodes.weights[q] * s * s;
        }
        if (S > 0.0 && std::abs(D) > best_abs) {
            best_abs = std::abs(D);
            best.derivative = D;
            best.feature_norm = S;
            best_w = w;
            best_b = b;
        }
    }
    for (std::size_t j = 1; j <= d; ++j) {
        best.params.weight(H + 1, j) = best_w[j - 1];
    }
    best.params.inner_bias(H + 1) = best_b;
    if (best_abs <= tolerance) {
        // Keep the appended neuron switched off so the realization is unchanged.
        best.params = embed_shallow(params, H + 1);
        return best;
    }
    best.outer_weight = -best.derivative / best.feature_norm;
    best.predicted_improvement = best.derivative * best.derivative / best.feature_norm;
    best.params.outer_weight(H + 1) = best.outer_weight;
    best.risk_after = risk_population(best.params, problem, cfg);
    best.improved = best.risk_after < best.risk_before;
    return best;
}

// ---------------------------------------------------------------------------
// Clarke bound

std::string to_string(ClarkeVerdict v) {
    switch (v) {
    case ClarkeVerdict::pass:
        return "pass";
    case ClarkeVerdict::fail:
        return "fail";
    case ClarkeVerdict::not_applicable:
        return "not_applicable";
    }
    return "not_applicable";
}

namespace {

template <class Params>
ClarkeCheck clarke_impl(const Params& params, const Problem& problem, const QuadratureCfg& cfg, double tolerance,
                        double slack) {
    const auto rg = risk_and_gradient(params, problem, cfg);
    ClarkeCheck out;
    double sq = 0.0;
    for (double g : rg.gradient) {
        sq += g * g;
    }
    out.gradient_norm = std::sqrt(sq);
    out.risk = rg.risk;
    out.nu = best_constant(problem, cfg).nu;
    if (out.gradient_norm > tolerance) {
        out.verdict = ClarkeVerdict::not_applicable;
    } else {
        out.verdict = out.risk <= out.nu + slack ? ClarkeVerdict::pass : ClarkeVerdict::fail;
    }
    return out;
}

} // namespace

ClarkeCheck clarke_bound_check(const ShallowParams& params, const Problem& problem, const QuadratureCfg& cfg,
                               double tolerance, double slack) {
    return clarke_impl(params, problem, cfg, tolerance, slack);
}

ClarkeCheck clarke_bound_check(const DeepParams& params, const Problem& problem, const QuadratureCfg& cfg,
                               double tolerance, double slack) {
    return clarke_impl(params, problem, cfg, tolerance, slack);
}

} // namespace relulab
