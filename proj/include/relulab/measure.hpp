#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "relulab/rng.hpp"

namespace relulab {

/// The box [a, b]^d with b > a.
class DomainBox {
public:
    DomainBox(double lower, double upper, std::size_t dim);

    double lower() const noexcept { return lower_; }
    double upper() const noexcept { return upper_; }
    std::size_t dim() const noexcept { return dim_; }
    double volume() const noexcept;
    /// max{|a|, |b|, 1}
    double bound() const noexcept;
    bool contains(std::span<const double> x) const noexcept;

    bool operator==(const DomainBox&) const = default;

private:
    double lower_;
    double upper_;
    std::size_t dim_;
};

using PointFunction = std::function<double(std::span<const double>)>;

/// A finite, possibly unnormalized measure on the box.
class Measure {
public:
    enum class Kind { uniform, density, empirical };

    /// Lebesgue measure on the box scaled to `total_mass` (the box volume when omitted).
    static Measure uniform(std::optional<double> total_mass = std::nullopt);
    /// `density` must be positive on the open box and vanish on its boundary.
    /// `upper_bound` is the envelope for rejection sampling.
    static Measure from_density(PointFunction density, double total_mass_hint, double upper_bound, std::string name = "custom");
    /// The density 6x(1-x) rescaled to [a, b], tensorized over coordinates (a probability density).
    static Measure beta22();
    static Measure empirical(std::vector<std::vector<double>> points, std::vector<double> weights);

    Kind kind() const noexcept { return kind_; }
    const std::string& name() const noexcept { return name_; }
    double total_mass(const DomainBox& box) const;
    /// Lebesgue density at x (uniform and density kinds only).
    double density_at(const DomainBox& box, std::span<const double> x) const;
    double density_upper_bound(const DomainBox& box) const;
    bool is_uniform() const noexcept { return kind_ == Kind::uniform; }

    const std::vector<std::vector<double>>& points() const noexcept { return points_; }
    const std::vector<double>& weights() const noexcept { return weights_; }

    nlohmann::json to_json() const;

private:
    Kind kind_ = Kind::uniform;
    std::string name_ = "uniform";
    std::optional<double> mass_;
    PointFunction density_;
    double upper_bound_ = 0.0;
    std::vector<std::vector<double>> points_;
    std::vector<double> weights_;
};

struct TargetFlags {
    bool lipschitz = true;
    bool continuous = true;
    bool relu_representable = false;
};

/// Target function f on the box with capability flags.
class Target {
public:
    Target(std::string name, PointFunction fn, TargetFlags flags, std::vector<double> knots = {},
           std::optional<int> polynomial_degree = std::nullopt, nlohmann::json params = nlohmann::json::object());

    /// x -> sum_j x_j^2
    static Target square();
    /// x -> |x_1 - c|
    static Target abs_shift(double c);
    /// x -> sin(frequency * x_1)
    static Target sine(double frequency);
    /// Continuous interpolant of (x_k, y_k), constant beyond the end knots (d = 1).
    static Target piecewise_linear(std::vector<std::pair<double, double>> knots);
    static Target constant(double value);
    /// x -> x_1
    static Target identity();

    double operator()(std::span<const double> x) const { return fn_(x); }
    const std::string& name() const noexcept { return name_; }
    const TargetFlags& flags() const noexcept { return flags_; }
    /// Points along x_1 where f is not smooth.
    const std::vector<double>& knots() const noexcept { return knots_; }
    /// Degree when f is a polynomial between knots; empty otherwise.
    std::optional<int> polynomial_degree() const noexcept { return degree_; }

    nlohmann::json to_json() const;

private:
    std::string name_;
    PointFunction fn_;
    TargetFlags flags_;
    std::vector<double> knots_;
    std::optional<int> degree_;
    nlohmann::json params_;
};

/// Additive zero-mean output noise, so E[Y | X] = f(X) by construction.
class NoiseModel {
public:
    enum class Kind { none, gaussian, uniform };

    static NoiseModel none() { return NoiseModel(Kind::none, 0.0); }
    static NoiseModel gaussian(double sigma);
    static NoiseModel uniform(double half_width);

    Kind kind() const noexcept { return kind_; }
    double scale() const noexcept { return scale_; }
    double sample(Rng& rng) const;
    /// E|f(X) - Y|^2
    double variance() const noexcept;

    nlohmann::json to_json() const;

private:
    NoiseModel(Kind kind, double scale) : kind_(kind), scale_(scale) {}
    Kind kind_;
    double scale_;
};

struct Problem {
    DomainBox box;
    Measure measure;
    Target target;
    NoiseModel noise = NoiseModel::none();

    nlohmann::json to_json() const;
};

/// Flat list of input points plus outputs.
struct Batch {
    std::size_t dim = 1;
    std::vector<double> xs;
    std::vector<double> ys;

    std::size_t size() const noexcept { return ys.size(); }
    std::span<const double> x(std::size_t m) const noexcept { return {xs.data() + m * dim, dim}; }
    void push_back(std::span<const double> x, double y);
};

struct BestConstant {
    double xi = 0.0;
    double nu = 0.0;
};

struct QuadratureCfg;

/// xi* = (int f dmu) / mu(box), nu* = int (f - xi*)^2 dmu.
BestConstant best_constant(const Problem& problem, const QuadratureCfg& cfg);

/// n i.i.d. draws from the normalized measure, row-major (n x d).
std::vector<double> sample_inputs(const Measure& measure, const DomainBox& box, std::size_t n, std::uint64_t seed);

/// (X, Y) pairs with Y = f(X) + noise.
Batch noisy_pairs(const Problem& problem, std::size_t n, std::uint64_t seed);

} // namespace relulab
