#include "relulab/gradient.hpp"

#include <algorithm>
#include <cmath>

#include "relulab/errors.hpp"
#include "relulab/risk.hpp"

namespace relulab {

namespace {

// Shallow backprop over weighted points; `act` / `dact` supply sigma and sigma'.
template <class Act, class DAct>
RiskAndGradient shallow_backprop(const ShallowParams& params, const WeightedPoints& nodes, std::span<const double> ys,
                                 const Act& act, const DAct& dact) {
    const auto& arch = params.arch();
    const std::size_t d = arch.input_dim;
    const std::size_t H = arch.width;
    const auto theta = params.values();
    RiskAndGradient out;
    out.gradient.assign(theta.size(), 0.0);
    auto& g = out.gradient;
    std::vector<double> z(H);
    std::vector<double> a(H);
    for (std::size_t q = 0; q < nodes.size(); ++q) {
        const auto x = nodes.point(q);
        double n = theta[arch.outer_bias_index()];
        for (std::size_t i = 0; i < H; ++i) {
            double s = theta[d * H + i];
            for (std::size_t j = 0; j < d; ++j) {
                s += theta[i * d + j] * x[j];
            }
            z[i] = s;
            a[i] = act(s);
            n += theta[d * H + H + i] * a[i];
        }
        const double r = n - ys[q];
        const double w = nodes.weights[q];
        out.risk += w * r * r;
        const double e = 2.0 * w * r;
        g[arch.outer_bias_index()] += e;
        for (std::size_t i = 0; i < H; ++i) {
            g[d * H + H + i] += e * a[i];
            const double slope = dact(z[i]);
            if (slope == 0.0) {
                continue;
            }
            const double s = e * theta[d * H + H + i] * slope;
            g[d * H + i] += s;
            for (std::size_t j = 0; j < d; ++j) {
                g[i * d + j] += s * x[j];
            }
        }
    }
    return out;
}

RiskAndGradient deep_backprop(const DeepParams& params, const WeightedPoints& nodes, std::span<const double> ys) {
    const auto& arch = params.arch();
    const auto& act = arch.activation;
    const std::size_t L = arch.depth();
    const auto theta = params.values();
    RiskAndGradient out;
    out.gradient.assign(theta.size(), 0.0);
    auto& g = out.gradient;

    // pre[k] / post[k]: pre-activations and outputs of layer k (post[0] is the input).
    std::vector<std::vector<double>> pre(L + 1);
    std::vector<std::vector<double>> post(L + 1);
    for (std::size_t k = 0; k <= L; ++k) {
        pre[k].resize(arch.dims[k]);
        post[k].resize(arch.dims[k]);
    }
    std::vector<double> delta;
    std::vector<double> delta_prev;
    for (std::size_t q = 0; q < nodes.size(); ++q) {
        const auto x = nodes.point(q);
        std::copy(x.begin(), x.end(), post[0].begin());
        for (std::size_t k = 1; k <= L; ++k) {
            const std::size_t rows = arch.dims[k];
            const std::size_t cols = arch.dims[k - 1];
            const double* w = theta.data() + arch.layer_offset(k);
            const double* b = w + rows * cols;
            for (std::size_t i = 0; i < rows; ++i) {
                double s = b[i];
                for (std::size_t j = 0; j < cols; ++j) {
                    s += w[i * cols + j] * post[k - 1][j];
                }
                pre[k][i] = s;
                post[k][i] = k < L ? act(s) : s;
            }
        }
        const double r = post[L][0] - ys[q];
        const double wq = nodes.weights[q];
        out.risk += wq * r * r;

        delta.assign(1, 2.0 * wq * r);
        for (std::size_t k = L; k >= 1; --k) {
            const std::size_t rows = arch.dims[k];
            const std::size_t cols = arch.dims[k - 1];
            const std::size_t off = arch.layer_offset(k);
            const double* w = theta.data() + off;
            for (std::size_t i = 0; i < rows; ++i) {
                if (delta[i] == 0.0) {
                    continue;
                }
                for (std::size_t j = 0; j < cols; ++j) {
                    g[off + i * cols + j] += delta[i] * post[k - 1][j];
                }
                g[off + rows * cols + i] += delta[i];
            }
            if (k == 1) {
                break;
            }
            delta_prev.assign(cols, 0.0);
            for (std::size_t j = 0; j < cols; ++j) {
                const double slope = act.derivative(pre[k - 1][j]);
                if (slope == 0.0) {
                    continue;
                }
                double s = 0.0;
                for (std::size_t i = 0; i < rows; ++i) {
                    s += w[i * cols + j] * delta[i];
                }
                delta_prev[j] = s * slope;
            }
            delta.swap(delta_prev);
        }
    }
    return out;
}

WeightedPoints batch_points(const Batch& batch) {
    if (batch.size() == 0) {
        throw std::invalid_argument("gradient needs a non-empty batch");
    }
    WeightedPoints nodes;
    nodes.dim = batch.dim;
    nodes.coords = batch.xs;
    nodes.weights.assign(batch.size(), 1.0 / static_cast<double>(batch.size()));
    return nodes;
}

std::vector<double> target_values(const Target& target, const WeightedPoints& nodes) {
    std::vector<double> ys(nodes.size());
    for (std::size_t q = 0; q < nodes.size(); ++q) {
        ys[q] = target(nodes.point(q));
    }
    return ys;
}

} // namespace

RiskAndGradient weighted_risk_and_gradient(const ShallowParams& params, const WeightedPoints& nodes,
                                           std::span<const double> ys) {
    const auto& act = params.arch().activation;
    return shallow_backprop(
        params, nodes, ys, [&](double z) { return act(z); }, [&](double z) { return act.derivative(z); });
}

RiskAndGradient weighted_risk_and_gradient(const DeepParams& params, const WeightedPoints& nodes,
                                           std::span<const double> ys) {
    if (params.arch().output_dim() != 1) {
        throw DimensionMismatch("gradient needs a scalar-output network");
    }
    return deep_backprop(params, nodes, ys);
}

std::vector<double> gen_gradient_empirical(const ShallowParams& params, const Batch& batch) {
    const auto nodes = batch_points(batch);
    return weighted_risk_and_gradient(params, nodes, batch.ys).gradient;
}

std::vector<double> gen_gradient_empirical(const DeepParams& params, const Batch& batch) {
    const auto nodes = batch_points(batch);
    return weighted_risk_and_gradient(params, nodes, batch.ys).gradient;
}

RiskAndGradient risk_and_gradient(const ShallowParams& params, const Problem& problem, const QuadratureCfg& cfg) {
    const auto nodes = risk_nodes(params, problem, cfg);
    return weighted_risk_and_gradient(params, nodes, target_values(problem.target, nodes));
}

RiskAndGradient risk_and_gradient(const DeepParams& params, const Problem& problem, const QuadratureCfg& cfg) {
    const auto nodes = risk_nodes(params, problem, cfg);
    return weighted_risk_and_gradient(params, nodes, target_values(problem.target, nodes));
}

std::vector<double> gen_gradient_population(const ShallowParams& params, const Problem& problem, const QuadratureCfg& cfg) {
    return risk_and_gradient(params, problem, cfg).gradient;
}

std::vector<double> gen_gradient_population(const DeepParams& params, const Problem& problem, const QuadratureCfg& cfg) {
    return risk_and_gradient(params, problem, cfg).gradient;
}

std::vector<double> fd_gradient(std::span<const double> theta, const ScalarFunction& fn, std::optional<double> step) {
    if (step && !(*step > 0.0)) {
        throw std::invalid_argument("finite-difference step must be positive");
    }
    std::vector<double> point(theta.begin(), theta.end());
    std::vector<double> grad(theta.size());
    for (std::size_t j = 0; j < point.size(); ++j) {
        const double h = step ? *step : std::max(1e-6, 1e-7 * std::abs(theta[j]));
        point[j] = theta[j] + h;
        const double up = fn(point);
        point[j] = theta[j] - h;
        const double down = fn(point);
        point[j] = theta[j];
        grad[j] = (up - down) / (2.0 * h);
    }
    return grad;
}

SmoothRamp::SmoothRamp(double r, double lower, double upper) : r_(r), start_(lower / r), end_(upper / r) {
    if (!(r >= 1.0)) {
        throw std::invalid_argument("smoothing parameter r must be >= 1");
    }
    if (!(lower > 0.0 && upper > lower)) {
        throw std::invalid_argument("smoothing thresholds need 0 < lower < upper");
    }
}

// Hermite data: value 0, slope 0 at start; value end, slope 1 at end.
double SmoothRamp::operator()(double x) const noexcept {
    if (x <= start_) {
        return 0.0;
    }
    if (x >= end_) {
        return x;
    }
    const double h = end_ - start_;
    const double t = (x - start_) / h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    return end_ * (3.0 * t2 - 2.0 * t3) + h * (t3 - t2);
}

double SmoothRamp::derivative(double x) const noexcept {
    if (x <= start_) {
        return 0.0;
    }
    if (x >= end_) {
        return 1.0;
    }
    const double h = end_ - start_;
    const double t = (x - start_) / h;
    return (end_ * (6.0 * t - 6.0 * t * t) + h * (3.0 * t * t - 2.0 * t)) / h;
}

RiskAndGradient smoothed_risk_and_gradient(const ShallowParams& params, const Problem& problem, const QuadratureCfg& cfg,
                                           const SmoothRamp& ramp) {
    if (params.arch().activation.kind() != ActivationKind::relu) {
        throw std::invalid_argument("the smoothed family approximates ReLU only");
    }
    std::vector<double> cuts;
    if (cfg.mode == QuadratureMode::kink_split_1d && params.input_dim() == 1) {
        for (std::size_t i = 1; i <= params.width(); ++i) {
            const double w = params.weight(i, 1);
            if (w == 0.0) {
                continue;
            }
            for (double level : {0.0, ramp.start(), ramp.end()}) {
                cuts.push_back((level - params.inner_bias(i)) / w);
            }
        }
        const auto& knots = problem.target.knots();
        cuts.insert(cuts.end(), knots.begin(), knots.end());
    }
    const auto nodes = discretize(problem.measure, problem.box, cfg, cuts);
    return shallow_backprop(
        params, nodes, target_values(problem.target, nodes), [&](double z) { return ramp(z); },
        [&](double z) { return ramp.derivative(z); });
}

SmoothLimitReport smooth_limit_check(const ShallowParams& params, const Problem& problem, const QuadratureCfg& cfg,
                                     std::span<const double> r_schedule) {
    for (std::size_t k = 1; k < r_schedule.size(); ++k) {
        if (!(r_schedule[k] > r_schedule[k - 1])) {
            throw std::invalid_argument("r schedule must be increasing");
        }
    }
    const auto reference = gen_gradient_population(params, problem, cfg);
    SmoothLimitReport report;
    for (double r : r_schedule) {
        const auto smoothed = smoothed_risk_and_gradient(params, problem, cfg, SmoothRamp(r)).gradient;
        double sq = 0.0;
        for (std::size_t j = 0; j < reference.size(); ++j) {
            const double diff = smoothed[j] - reference[j];
            sq += diff * diff;
        }
        report.r_values.push_back(r);
        report.discrepancy.push_back(std::sqrt(sq));
    }
    report.strictly_decreasing = true;
    for (std::size_t k = 1; k < report.discrepancy.size(); ++k) {
        report.strictly_decreasing = report.strictly_decreasing && report.discrepancy[k] < report.discrepancy[k - 1];
    }
    return report;
}

} // namespace relulab
