#include "relulab/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "relulab/errors.hpp"
#include "relulab/quadrature.hpp"

namespace relulab {

DomainBox::DomainBox(double lower, double upper, std::size_t dim) : lower_(lower), upper_(upper), dim_(dim) {
    if (!std::isfinite(lower) || !std::isfinite(upper)) {
        throw std::invalid_argument("domain bounds must be finite");
    }
    if (!(upper > lower)) {
        // The degenerate box a = b is not supported.
        throw std::invalid_argument("domain requires b > a");
    }
    if (dim == 0) {
        throw std::invalid_argument("domain dimension must be positive");
    }
}

double DomainBox::volume() const noexcept {
    return std::pow(upper_ - lower_, static_cast<double>(dim_));
}

double DomainBox::bound() const noexcept {
    return std::max({std::abs(lower_), std::abs(upper_), 1.0});
}

bool DomainBox::contains(std::span<const double> x) const noexcept {
    if (x.size() != dim_) {
        return false;
    }
    return std::all_of(x.begin(), x.end(), [&](double v) { return v >= lower_ && v <= upper_; });
}

Measure Measure::uniform(std::optional<double> total_mass) {
    if (total_mass && !(*total_mass > 0.0 && std::isfinite(*total_mass))) {
        throw std::invalid_argument("measure mass must be finite and positive");
    }
    Measure m;
    m.kind_ = Kind::uniform;
    m.name_ = "uniform";
    m.mass_ = total_mass;
    return m;
}

Measure Measure::from_density(PointFunction density, double total_mass_hint, double upper_bound, std::string name) {
    if (!(total_mass_hint > 0.0 && std::isfinite(total_mass_hint))) {
        throw std::invalid_argument("measure mass must be finite and positive");
    }
    if (!(upper_bound > 0.0)) {
        throw std::invalid_argument("density upper bound must be positive");
    }
    Measure m;
    m.kind_ = Kind::density;
    m.name_ = std::move(name);
    m.mass_ = total_mass_hint;
    m.density_ = std::move(density);
    m.upper_bound_ = upper_bound;
    return m;
}

Measure Measure::beta22() {
    // Needs the box at evaluation time; density_at rescales 6t(1-t) to [a, b].
    Measure m;
    m.kind_ = Kind::density;
    m.name_ = "beta22";
    m.mass_ = 1.0;
    return m;
}

Measure Measure::empirical(std::vector<std::vector<double>> points, std::vector<double> weights) {
    if (points.empty() || points.size() != weights.size()) {
        throw std::invalid_argument("empirical measure needs matching non-empty points and weights");
    }
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw std::invalid_argument("empirical weights must be finite and non-negative");
        }
        total += w;
    }
    if (!(total > 0.0)) {
        throw std::invalid_argument("empirical measure must have positive mass");
    }
    Measure m;
    m.kind_ = Kind::empirical;
    m.name_ = "empirical";
    m.points_ = std::move(points);
    m.weights_ = std::move(weights);
    return m;
}

double Measure::total_mass(const DomainBox& box) const {
    switch (kind_) {
    case Kind::uniform:
        return mass_ ? *mass_ : box.volume();
    case Kind::density:
        return *mass_;
    case Kind::empirical:
        return std::accumulate(weights_.begin(), weights_.end(), 0.0);
    }
    return 0.0;
}

double Measure::density_at(const DomainBox& box, std::span<const double> x) const {
    switch (kind_) {
    case Kind::uniform:
        return total_mass(box) / box.volume();
    case Kind::density: {
        if (density_) {
            return density_(x);
        }
        const double width = box.upper() - box.lower();
        double p = 1.0;
        for (double v : x) {
            const double t = (v - box.lower()) / width;
            p *= (t > 0.0 && t < 1.0) ? 6.0 * t * (1.0 - t) / width : 0.0;
        }
        return p;
    }
    case Kind::empirical:
        throw std::logic_error("empirical measures have no Lebesgue density");
    }
    return 0.0;
}

double Measure::density_upper_bound(const DomainBox& box) const {
    switch (kind_) {
    case Kind::uniform:
        return total_mass(box) / box.volume();
    case Kind::density:
        if (density_) {
            return upper_bound_;
        }
        return std::pow(1.5 / (box.upper() - box.lower()), static_cast<double>(box.dim()));
    case Kind::empirical:
        break;
    }
    throw std::logic_error("empirical measures have no Lebesgue density");
}

nlohmann::json Measure::to_json() const {
    switch (kind_) {
    case Kind::uniform: {
        nlohmann::json j{{"kind", "uniform"}};
        if (mass_) {
            j["mass"] = *mass_;
        }
        return j;
    }
    case Kind::density:
        return {{"kind", name_}};
    case Kind::empirical:
        return {{"kind", "empirical"}, {"points", points_}, {"weights", weights_}};
    }
    return {};
}

Target::Target(std::string name, PointFunction fn, TargetFlags flags, std::vector<double> knots,
               std::optional<int> polynomial_degree, nlohmann::json params)
    : name_(std::move(name)),
      fn_(std::move(fn)),
      flags_(flags),
      knots_(std::move(knots)),
      degree_(polynomial_degree),
      params_(std::move(params)) {}

Target Target::square() {
    return Target(
        "square",
        [](std::span<const double> x) {
            double s = 0.0;
            for (double v : x) {
                s += v * v;
            }
            return s;
        },
        TargetFlags{true, true, false}, {}, 2);
}

Target Target::abs_shift(double c) {
    return Target(
        "abs_shift", [c](std::span<const double> x) { return std::abs(x[0] - c); }, TargetFlags{true, true, true}, {c},
        1, {{"c", c}});
}

Target Target::sine(double frequency) {
    return Target(
        "sine", [frequency](std::span<const double> x) { return std::sin(frequency * x[0]); },
        TargetFlags{true, true, false}, {}, std::nullopt, {{"frequency", frequency}});
}

Target Target::piecewise_linear(std::vector<std::pair<double, double>> knots) {
    if (knots.empty()) {
        throw std::invalid_argument("piecewise_linear needs at least one knot");
    }
    std::sort(knots.begin(), knots.end());
    for (std::size_t k = 1; k < knots.size(); ++k) {
        if (!(knots[k].first > knots[k - 1].first)) {
            throw std::invalid_argument("piecewise_linear knots must have distinct abscissae");
        }
    }
    std::vector<double> xs;
    auto params = nlohmann::json::array();
    for (const auto& [x, y] : knots) {
        xs.push_back(x);
        params.push_back({x, y});
    }
    auto fn = [knots](std::span<const double> x) {
        const double t = x[0];
        if (t <= knots.front().first) {
            return knots.front().second;
        }
        if (t >= knots.back().first) {
            return knots.back().second;
        }
        auto hi = std::upper_bound(knots.begin(), knots.end(), t,
                                   [](double v, const std::pair<double, double>& k) { return v < k.first; });
        auto lo = hi - 1;
        const double s = (t - lo->first) / (hi->first - lo->first);
        return lo->second + s * (hi->second - lo->second);
    };
    // Constant extension beyond the end knots is realizable by ReLU networks.
    return Target("piecewise_linear", fn, TargetFlags{true, true, true}, xs, 1, {{"knots", params}});
}

Target Target::constant(double value) {
    return Target(
        "constant", [value](std::span<const double>) { return value; }, TargetFlags{true, true, true}, {}, 0,
        {{"value", value}});
}

Target Target::identity() {
    return Target(
        "identity", [](std::span<const double> x) { return x[0]; }, TargetFlags{true, true, true}, {}, 1);
}

nlohmann::json Target::to_json() const {
    nlohmann::json j = params_.is_object() ? params_ : nlohmann::json::object();
    j["kind"] = name_;
    return j;
}

NoiseModel NoiseModel::gaussian(double sigma) {
    if (!(sigma >= 0.0)) {
        throw std::invalid_argument("noise sigma must be non-negative");
    }
    return NoiseModel(Kind::gaussian, sigma);
}

NoiseModel NoiseModel::uniform(double half_width) {
    if (!(half_width >= 0.0)) {
        throw std::invalid_argument("noise half-width must be non-negative");
    }
    return NoiseModel(Kind::uniform, half_width);
}

double NoiseModel::sample(Rng& rng) const {
    switch (kind_) {
    case Kind::none:
        return 0.0;
    case Kind::gaussian:
        return std::normal_distribution<double>(0.0, scale_)(rng);
    case Kind::uniform:
        return std::uniform_real_distribution<double>(-scale_, scale_)(rng);
    }
    return 0.0;
}

double NoiseModel::variance() const noexcept {
    switch (kind_) {
    case Kind::none:
        return 0.0;
    case Kind::gaussian:
        return scale_ * scale_;
    case Kind::uniform:
        return scale_ * scale_ / 3.0;
    }
    return 0.0;
}

nlohmann::json NoiseModel::to_json() const {
    switch (kind_) {
    case Kind::none:
        return {{"kind", "none"}};
    case Kind::gaussian:
        return {{"kind", "gaussian"}, {"sigma", scale_}};
    case Kind::uniform:
        return {{"kind", "uniform"}, {"half_width", scale_}};
    }
    return {};
}

nlohmann::json Problem::to_json() const {
    return {{"domain", {{"a", box.lower()}, {"b", box.upper()}, {"dim", box.dim()}}},
            {"measure", measure.to_json()},
            {"target", target.to_json()},
            {"noise", noise.to_json()}};
}

void Batch::push_back(std::span<const double> x, double y) {
    xs.insert(xs.end(), x.begin(), x.end());
    ys.push_back(y);
}

BestConstant best_constant(const Problem& problem, const QuadratureCfg& cfg) {
    const auto& knots = problem.target.knots();
    std::function<double(double)> probe;
    const auto degree = problem.target.polynomial_degree();
    if (!(degree && rule_is_exact(problem.measure, cfg, 2 * *degree))) {
        probe = [&](double x) {
            const double fx = problem.target(std::span<const double>(&x, 1));
            return fx * fx + std::abs(fx);
        };
    }
    const auto nodes = discretize(problem.measure, problem.box, cfg, knots, probe);
    double mass = 0.0;
    double first = 0.0;
    std::vector<double> fvals(nodes.size());
    for (std::size_t q = 0; q < nodes.size(); ++q) {
        fvals[q] = problem.target(nodes.point(q));
        mass += nodes.weights[q];
        first += nodes.weights[q] * fvals[q];
    }
    if (!(mass > 0.0)) {
        throw std::invalid_argument("measure has zero mass on the box");
    }
    BestConstant out;
    out.xi = first / mass;
    for (std::size_t q = 0; q < nodes.size(); ++q) {
        const double r = fvals[q] - out.xi;
        out.nu += nodes.weights[q] * r * r;
    }
    return out;
}

std::vector<double> sample_inputs(const Measure& measure, const DomainBox& box, std::size_t n, std::uint64_t seed) {
    if (n == 0) {
        throw std::invalid_argument("sample count must be >= 1");
    }
    const std::size_t d = box.dim();
    Rng rng(seed);
    std::vector<double> out;
    out.reserve(n * d);
    switch (measure.kind()) {
    case Measure::Kind::uniform: {
        std::uniform_real_distribution<double> u(box.lower(), box.upper());
        for (std::size_t s = 0; s < n * d; ++s) {
            out.push_back(u(rng));
        }
        return out;
    }
    case Measure::Kind::density: {
        std::uniform_real_distribution<double> u(box.lower(), box.upper());
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double envelope = measure.density_upper_bound(box);
        constexpr std::size_t kRetryCap = 1'000'000;
        std::vector<double> x(d);
        for (std::size_t s = 0; s < n; ++s) {
            std::size_t tries = 0;
            for (;;) {
                for (auto& v : x) {
                    v = u(rng);
                }
                if (unit(rng) * envelope < measure.density_at(box, x)) {
                    break;
                }
                if (++tries >= kRetryCap) {
                    throw SamplerStall("rejection sampler made no progress after " + std::to_string(kRetryCap) + " tries");
                }
            }
            out.insert(out.end(), x.begin(), x.end());
        }
        return out;
    }
    case Measure::Kind::empirical: {
        std::discrete_distribution<std::size_t> pick(measure.weights().begin(), measure.weights().end());
        for (std::size_t s = 0; s < n; ++s) {
            const auto& p = measure.points()[pick(rng)];
            if (p.size() != d) {
                throw DimensionMismatch("empirical point dimension does not match the domain");
            }
            out.insert(out.end(), p.begin(), p.end());
        }
        return out;
    }
    }
    return out;
}

Batch noisy_pairs(const Problem& problem, std::size_t n, std::uint64_t seed) {
    const std::size_t d = problem.box.dim();
    Batch batch;
    batch.dim = d;
    batch.xs = sample_inputs(problem.measure, problem.box, n, derive_seed(seed, 1));
    batch.ys.resize(n);
    Rng noise_rng(derive_seed(seed, 2));
    for (std::size_t m = 0; m < n; ++m) {
        batch.ys[m] = problem.target(batch.x(m)) + problem.noise.sample(noise_rng);
    }
    return batch;
}

} // namespace relulab
