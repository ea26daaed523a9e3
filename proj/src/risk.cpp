#include "relulab/risk.hpp"

#include <algorithm>
#include <cmath>

#include "relulab/errors.hpp"

namespace relulab {

std::vector<double> network_kinks_1d(const ShallowParams& params, double lower, double upper) {
    std::vector<double> out;
    if (params.input_dim() != 1) {
        return out;
    }
    const auto breaks = params.arch().activation.breakpoints();
    for (std::size_t i = 1; i <= params.width(); ++i) {
        const double w = params.weight(i, 1);
        if (w == 0.0) {
            continue;
        }
        for (double beta : breaks) {
            const double t = (beta - params.inner_bias(i)) / w;
            if (t > lower && t < upper) {
                out.push_back(t);
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

// Hidden pre-activations of layer k (1-based, k < L) at scalar input x.
void hidden_preactivations(const DeepParams& params, double x, std::size_t layer, std::vector<double>& z) {
    const auto& arch = params.arch();
    const auto theta = params.values();
    std::vector<double> current{x};
    for (std::size_t k = 1; k <= layer; ++k) {
        const std::size_t rows = arch.dims[k];
        const std::size_t cols = arch.dims[k - 1];
        const double* w = theta.data() + arch.layer_offset(k);
        const double* b = w + rows * cols;
        z.assign(rows, 0.0);
        for (std::size_t i = 0; i < rows; ++i) {
            double s = b[i];
            for (std::size_t j = 0; j < cols; ++j) {
                s += w[i * cols + j] * current[j];
            }
            z[i] = s;
        }
        if (k < layer) {
            current.resize(rows);
            for (std::size_t i = 0; i < rows; ++i) {
                current[i] = arch.activation(z[i]);
            }
        }
    }
}

} // namespace

std::vector<double> network_kinks_1d(const DeepParams& params, double lower, double upper) {
    const auto& arch = params.arch();
    if (arch.input_dim() != 1) {
        return {};
    }
    const auto breaks = arch.activation.breakpoints();
    std::vector<double> cuts{lower, upper};
    std::vector<double> z_lo;
    std::vector<double> z_hi;
    for (std::size_t k = 1; k < arch.depth(); ++k) {
        std::vector<double> found;
        for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
            const double u = cuts[p];
            const double v = cuts[p + 1];
            hidden_preactivations(params, u, k, z_lo);
            hidden_preactivations(params, v, k, z_hi);
            for (std::size_t i = 0; i < z_lo.size(); ++i) {
                for (double beta : breaks) {
                    const double a = z_lo[i] - beta;
                    const double b = z_hi[i] - beta;
                    if ((a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0)) {
                        const double t = u + (v - u) * a / (a - b);
                        if (t > u && t < v) {
                            found.push_back(t);
                        }
                    }
                }
            }
        }
        cuts.insert(cuts.end(), found.begin(), found.end());
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    }
    return {cuts.begin() + 1, cuts.end() - 1};
}

int risk_integrand_degree(const Activation& act, std::size_t depth, const Target& target) {
    const auto f_degree = target.polynomial_degree();
    // Deep RePU breakpoints are only located approximately.
    if (!f_degree || (act.power() > 1 && depth > 2)) {
        return -1;
    }
    int n_degree = 1;
    for (std::size_t k = 1; k < depth; ++k) {
        n_degree *= act.power();
    }
    return 2 * std::max(n_degree, *f_degree);
}

namespace {

template <class Params>
WeightedPoints nodes_for(const Params& params, const Problem& problem, const QuadratureCfg& cfg, std::size_t depth) {
    std::vector<double> cuts;
    if (cfg.mode == QuadratureMode::kink_split_1d) {
        cuts = network_kinks_1d(params, problem.box.lower(), problem.box.upper());
        const auto& knots = problem.target.knots();
        cuts.insert(cuts.end(), knots.begin(), knots.end());
    }
    std::function<double(double)> probe;
    const int degree = risk_integrand_degree(params.arch().activation, depth, problem.target);
    if (!rule_is_exact(problem.measure, cfg, degree)) {
        probe = [&](double x) {
            const std::span<const double> xs(&x, 1);
            double r;
            if constexpr (std::is_same_v<Params, ShallowParams>) {
                r = realize(params, xs) - problem.target(xs);
            } else {
                r = realize(params, xs)[0] - problem.target(xs);
            }
            return r * r;
        };
    }
    return discretize(problem.measure, problem.box, cfg, cuts, probe);
}

void check_dims(std::size_t net_dim, const Problem& problem) {
    if (net_dim != problem.box.dim()) {
        throw DimensionMismatch("network input dimension " + std::to_string(net_dim) + " does not match domain dimension " +
                                std::to_string(problem.box.dim()));
    }
}

} // namespace

WeightedPoints risk_nodes(const ShallowParams& params, const Problem& problem, const QuadratureCfg& cfg) {
    check_dims(params.input_dim(), problem);
    return nodes_for(params, problem, cfg, 2);
}

WeightedPoints risk_nodes(const DeepParams& params, const Problem& problem, const QuadratureCfg& cfg) {
    check_dims(params.arch().input_dim(), problem);
    if (params.arch().output_dim() != 1) {
        throw DimensionMismatch("risk needs a scalar-output network");
    }
    return nodes_for(params, problem, cfg, params.arch().depth());
}

double risk_on_nodes(const ShallowParams& params, const Target& target, const WeightedPoints& nodes) {
    double sum = 0.0;
    for (std::size_t q = 0; q < nodes.size(); ++q) {
        const auto x = nodes.point(q);
        const double r = realize(params, x) - target(x);
        sum += nodes.weights[q] * r * r;
    }
    return sum;
}

double risk_on_nodes(const DeepParams& params, const Target& target, const WeightedPoints& nodes) {
    double sum = 0.0;
    for (std::size_t q = 0; q < nodes.size(); ++q) {
        const auto x = nodes.point(q);
        const double r = realize(params, x)[0] - target(x);
        sum += nodes.weights[q] * r * r;
    }
    return sum;
}

double risk_population(const ShallowParams& params, const Problem& problem, const QuadratureCfg& cfg) {
    return risk_on_nodes(params, problem.target, risk_nodes(params, problem, cfg));
}

double risk_population(const DeepParams& params, const Problem& problem, const QuadratureCfg& cfg) {
    return risk_on_nodes(params, problem.target, risk_nodes(params, problem, cfg));
}

RiskEstimate risk_population_estimate(const ShallowParams& params, const Problem& problem, const QuadratureCfg& cfg) {
    const auto nodes = risk_nodes(params, problem, cfg);
    RiskEstimate est;
    est.nodes = nodes.size();
    est.fingerprint = cfg.fingerprint();
    if (!cfg.is_stochastic() || problem.measure.kind() == Measure::Kind::empirical) {
        est.value = risk_on_nodes(params, problem.target, nodes);
        return est;
    }
    // Each node carries weight mass * p(x) / n; n * w_q * r^2 are the i.i.d. terms.
    const double n = static_cast<double>(nodes.size());
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t q = 0; q < nodes.size(); ++q) {
        const auto x = nodes.point(q);
        const double r = realize(params, x) - problem.target(x);
        const double term = n * nodes.weights[q] * r * r;
        const double delta = term - mean;
        mean += delta / static_cast<double>(q + 1);
        m2 += delta * (term - mean);
    }
    est.value = mean;
    est.std_error = n > 1 ? std::sqrt(m2 / (n - 1.0) / n) : 0.0;
    return est;
}

double risk_empirical(const ShallowParams& params, const Batch& batch) {
    if (batch.size() == 0) {
        throw std::invalid_argument("empirical risk needs a non-empty batch");
    }
    double sum = 0.0;
    for (std::size_t m = 0; m < batch.size(); ++m) {
        const double r = realize(params, batch.x(m)) - batch.ys[m];
        sum += r * r;
    }
    return sum / static_cast<double>(batch.size());
}

double risk_empirical(const DeepParams& params, const Batch& batch) {
    if (batch.size() == 0) {
        throw std::invalid_argument("empirical risk needs a non-empty batch");
    }
    double sum = 0.0;
    for (std::size_t m = 0; m < batch.size(); ++m) {
        const double r = realize(params, batch.x(m))[0] - batch.ys[m];
        sum += r * r;
    }
    return sum / static_cast<double>(batch.size());
}

} // namespace relulab
