#include "relulab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "relulab/errors.hpp"
#include "relulab/hash.hpp"
#include "relulab/json_util.hpp"

namespace relulab {

QuadratureCfg QuadratureCfg::default_for(std::size_t dim) {
    QuadratureCfg cfg;
    if (dim == 1) {
        cfg.mode = QuadratureMode::kink_split_1d;
    } else if (dim <= 3) {
        cfg.mode = QuadratureMode::tensor_gauss;
        cfg.order = 6;
        cfg.subdivisions = dim == 2 ? 16 : 8;
    } else {
        cfg.mode = QuadratureMode::quasi_mc;
    }
    return cfg;
}

QuadratureCfg QuadratureCfg::monte_carlo(std::size_t samples, std::uint64_t seed) {
    QuadratureCfg cfg;
    cfg.mode = QuadratureMode::mc;
    cfg.samples = samples;
    cfg.seed = seed;
    return cfg;
}

void QuadratureCfg::validate() const {
    if (!(tolerance > 0.0)) {
        throw std::invalid_argument("quadrature tolerance must be positive");
    }
    if (order < 2) {
        throw std::invalid_argument("quadrature order must be >= 2");
    }
    if ((mode == QuadratureMode::mc || mode == QuadratureMode::quasi_mc) && samples == 0) {
        throw std::invalid_argument("sample count must be positive");
    }
    if (mode == QuadratureMode::tensor_gauss && subdivisions == 0) {
        throw std::invalid_argument("subdivisions must be positive");
    }
}

std::string to_string(QuadratureMode mode) {
    switch (mode) {
    case QuadratureMode::kink_split_1d:
        return "kink_split_1d";
    case QuadratureMode::tensor_gauss:
        return "tensor_gauss";
    case QuadratureMode::quasi_mc:
        return "quasi_mc";
    case QuadratureMode::mc:
        return "mc";
    }
    return "kink_split_1d";
}

nlohmann::json QuadratureCfg::to_json() const {
    nlohmann::json j{{"mode", to_string(mode)}, {"order", order}, {"tolerance", tolerance}, {"max_depth", max_depth}};
    if (mode == QuadratureMode::mc || mode == QuadratureMode::quasi_mc) {
        j["samples"] = samples;
    }
    if (mode == QuadratureMode::mc) {
        j["seed"] = seed;
    }
    if (mode == QuadratureMode::tensor_gauss) {
        j["subdivisions"] = subdivisions;
    }
    return j;
}

std::string QuadratureCfg::fingerprint() const {
    return hex64(fnv1a64(to_json().dump()));
}

QuadratureCfg quadrature_cfg_from_json(const nlohmann::json& j, const std::string& path) {
    using namespace json_util;
    allow_keys(j, path, {"mode", "order", "samples", "subdivisions", "tolerance", "max_depth", "seed"});
    QuadratureCfg cfg;
    const auto mode = string_or(j, path, "mode", "kink_split_1d");
    if (mode == "kink_split_1d") {
        cfg.mode = QuadratureMode::kink_split_1d;
    } else if (mode == "tensor_gauss") {
        cfg.mode = QuadratureMode::tensor_gauss;
    } else if (mode == "quasi_mc") {
        cfg.mode = QuadratureMode::quasi_mc;
    } else if (mode == "mc") {
        cfg.mode = QuadratureMode::mc;
    } else {
        throw ConfigError(child(path, "mode"), "unknown quadrature mode '" + mode + "'");
    }
    cfg.order = unsigned_or(j, path, "order", cfg.order);
    cfg.samples = unsigned_or(j, path, "samples", cfg.samples);
    cfg.subdivisions = unsigned_or(j, path, "subdivisions", cfg.subdivisions);
    cfg.tolerance = number_or(j, path, "tolerance", cfg.tolerance);
    cfg.max_depth = unsigned_or(j, path, "max_depth", cfg.max_depth);
    cfg.seed = unsigned_or(j, path, "seed", cfg.seed);
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
    return cfg;
}

namespace {

GaussLegendreRule compute_gauss_legendre(std::size_t n) {
    GaussLegendreRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i < half; ++i) {
        // Newton iteration on P_n from the Chebyshev-like initial guess.
        double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = 1.0;
            double p2 = 0.0;
            for (std::size_t k = 1; k <= n; ++k) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * static_cast<double>(k) - 1.0) * z * p2 - (static_cast<double>(k) - 1.0) * p3) /
                     static_cast<double>(k);
            }
            dp = static_cast<double>(n) * (z * p1 - p2) / (z * z - 1.0);
            const double z_prev = z;
            z = z_prev - p1 / dp;
            if (std::abs(z - z_prev) <= 1e-15) {
                break;
            }
        }
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        rule.nodes[i] = -z;
        rule.nodes[n - 1 - i] = z;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) {
        rule.nodes[n / 2] = 0.0;
    }
    return rule;
}

double halton(std::uint64_t index, std::uint64_t base) {
    double f = 1.0;
    double r = 0.0;
    while (index > 0) {
        f /= static_cast<double>(base);
        r += f * static_cast<double>(index % base);
        index /= base;
    }
    return r;
}

constexpr std::uint64_t kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97};

// Weight of a unit Lebesgue cell at x under the measure.
double lebesgue_factor(const Measure& measure, const DomainBox& box, std::span<const double> x) {
    return measure.density_at(box, x);
}

void add_piece(WeightedPoints& out, const Measure& measure, const DomainBox& box, const GaussLegendreRule& rule, double lo,
               double hi) {
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        const double x = mid + half * rule.nodes[q];
        const double w = half * rule.weights[q] * lebesgue_factor(measure, box, std::span<const double>(&x, 1));
        out.push_back(std::span<const double>(&x, 1), w);
    }
}

double piece_integral(const Measure& measure, const DomainBox& box, const GaussLegendreRule& rule, double lo, double hi,
                      const std::function<double(double)>& probe) {
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    double sum = 0.0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        const double x = mid + half * rule.nodes[q];
        sum += rule.weights[q] * lebesgue_factor(measure, box, std::span<const double>(&x, 1)) * probe(x);
    }
    return half * sum;
}

void refine_piece(WeightedPoints& out, const Measure& measure, const DomainBox& box, const QuadratureCfg& cfg,
                  const GaussLegendreRule& rule, double lo, double hi, double whole,
                  const std::function<double(double)>& probe, std::size_t depth) {
    const double mid = 0.5 * (lo + hi);
    const double left = piece_integral(measure, box, rule, lo, mid, probe);
    const double right = piece_integral(measure, box, rule, mid, hi, probe);
    const double budget = cfg.tolerance * (hi - lo) / (box.upper() - box.lower());
    if (std::abs(whole - (left + right)) <= budget) {
        add_piece(out, measure, box, rule, lo, mid);
        add_piece(out, measure, box, rule, mid, hi);
        return;
    }
    if (depth >= cfg.max_depth) {
        throw ToleranceNotMet("adaptive quadrature exceeded depth " + std::to_string(cfg.max_depth) + " on [" +
                              std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    refine_piece(out, measure, box, cfg, rule, lo, mid, left, probe, depth + 1);
    refine_piece(out, measure, box, cfg, rule, mid, hi, right, probe, depth + 1);
}

WeightedPoints kink_split(const Measure& measure, const DomainBox& box, const QuadratureCfg& cfg,
                          std::span<const double> breakpoints, const std::function<double(double)>& probe) {
    if (box.dim() != 1) {
        throw std::invalid_argument("kink_split_1d quadrature requires a one-dimensional domain");
    }
    std::vector<double> cuts{box.lower()};
    for (double t : breakpoints) {
        if (t > box.lower() && t < box.upper()) {
            cuts.push_back(t);
        }
    }
    cuts.push_back(box.upper());
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    const auto& rule = gauss_legendre(cfg.order);
    WeightedPoints out;
    out.dim = 1;
    out.coords.reserve((cuts.size() - 1) * cfg.order);
    out.weights.reserve((cuts.size() - 1) * cfg.order);
    for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
        const double lo = cuts[p];
        const double hi = cuts[p + 1];
        if (!(hi > lo)) {
            continue;
        }
        if (!probe) {
            add_piece(out, measure, box, rule, lo, hi);
        } else {
            refine_piece(out, measure, box, cfg, rule, lo, hi, piece_integral(measure, box, rule, lo, hi, probe), probe, 0);
        }
    }
    return out;
}

WeightedPoints tensor_gauss(const Measure& measure, const DomainBox& box, const QuadratureCfg& cfg) {
    const auto& rule = gauss_legendre(cfg.order);
    const std::size_t d = box.dim();
    const std::size_t per_axis = cfg.subdivisions * cfg.order;
    const double cell = (box.upper() - box.lower()) / static_cast<double>(cfg.subdivisions);

    std::vector<double> axis_nodes(per_axis);
    std::vector<double> axis_weights(per_axis);
    for (std::size_t c = 0; c < cfg.subdivisions; ++c) {
        const double lo = box.lower() + cell * static_cast<double>(c);
        for (std::size_t q = 0; q < cfg.order; ++q) {
            axis_nodes[c * cfg.order + q] = lo + 0.5 * cell * (rule.nodes[q] + 1.0);
            axis_weights[c * cfg.order + q] = 0.5 * cell * rule.weights[q];
        }
    }

    std::size_t total = 1;
    for (std::size_t j = 0; j < d; ++j) {
        total *= per_axis;
    }
    WeightedPoints out;
    out.dim = d;
    out.coords.reserve(total * d);
    out.weights.reserve(total);
    std::vector<std::size_t> idx(d, 0);
    std::vector<double> x(d);
    for (std::size_t n = 0; n < total; ++n) {
        double w = 1.0;
        for (std::size_t j = 0; j < d; ++j) {
            x[j] = axis_nodes[idx[j]];
            w *= axis_weights[idx[j]];
        }
        out.push_back(x, w * lebesgue_factor(measure, box, x));
        for (std::size_t j = 0; j < d; ++j) {
            if (++idx[j] < per_axis) {
                break;
            }
            idx[j] = 0;
        }
    }
    return out;
}

WeightedPoints sampled(const Measure& measure, const DomainBox& box, const QuadratureCfg& cfg, bool quasi) {
    const std::size_t d = box.dim();
    if (quasi && d > std::size(kPrimes)) {
        throw std::invalid_argument("quasi_mc supports at most 25 dimensions");
    }
    Rng rng(derive_seed(cfg.seed, 0x51));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double width = box.upper() - box.lower();
    const double vol = box.volume();
    const double n = static_cast<double>(cfg.samples);
    WeightedPoints out;
    out.dim = d;
    out.coords.reserve(cfg.samples * d);
    out.weights.reserve(cfg.samples);
    std::vector<double> x(d);
    for (std::size_t s = 0; s < cfg.samples; ++s) {
        for (std::size_t j = 0; j < d; ++j) {
            const double u = quasi ? halton(s + 1, kPrimes[j]) : unit(rng);
            x[j] = box.lower() + width * u;
        }
        out.push_back(x, vol * lebesgue_factor(measure, box, x) / n);
    }
    return out;
}

} // namespace

const GaussLegendreRule& gauss_legendre(std::size_t order) {
    static std::mutex mutex;
    static std::map<std::size_t, GaussLegendreRule> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(order);
    if (it == cache.end()) {
        it = cache.emplace(order, compute_gauss_legendre(order)).first;
    }
    return it->second;
}

void WeightedPoints::push_back(std::span<const double> x, double w) {
    coords.insert(coords.end(), x.begin(), x.end());
    weights.push_back(w);
}

WeightedPoints discretize(const Measure& measure, const DomainBox& box, const QuadratureCfg& cfg,
                          std::span<const double> breakpoints, const std::function<double(double)>& probe) {
    cfg.validate();
    if (measure.kind() == Measure::Kind::empirical) {
        WeightedPoints out;
        out.dim = box.dim();
        for (std::size_t i = 0; i < measure.points().size(); ++i) {
            out.push_back(measure.points()[i], measure.weights()[i]);
        }
        return out;
    }
    switch (cfg.mode) {
    case QuadratureMode::kink_split_1d:
        return kink_split(measure, box, cfg, breakpoints, probe);
    case QuadratureMode::tensor_gauss:
        return tensor_gauss(measure, box, cfg);
    case QuadratureMode::quasi_mc:
        return sampled(measure, box, cfg, true);
    case QuadratureMode::mc:
        return sampled(measure, box, cfg, false);
    }
    return {};
}

bool rule_is_exact(const Measure& measure, const QuadratureCfg& cfg, int integrand_degree) {
    if (measure.kind() == Measure::Kind::empirical) {
        return true;
    }
    return measure.is_uniform() && integrand_degree >= 0 &&
           integrand_degree <= 2 * static_cast<int>(cfg.order) - 1;
}

} // namespace relulab
