#include "relulab/global_inf.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <random>

#include "relulab/gradient.hpp"
#include "relulab/parallel.hpp"
#include "relulab/risk.hpp"

namespace relulab {

nlohmann::json GlobalInfOptions::to_json() const {
    return {{"restarts", restarts},
            {"adam_steps", adam_steps},
            {"optimizer", optimizer.to_json()},
            {"polish", polish == PolishMethod::gd ? "gd" : "bfgs"},
            {"polish_iterations", polish_iterations},
            {"polish_gradient_tolerance", polish_gradient_tolerance},
            {"max_seconds", max_seconds}};
}

namespace {

std::vector<double> targets_at(const Target& f, const WeightedPoints& nodes) {
    std::vector<double> ys(nodes.size());
    for (std::size_t q = 0; q < nodes.size(); ++q) {
        ys[q] = f(nodes.point(q));
    }
    return ys;
}

// Outer least squares on fixed nodes, solved on sqrt(w)-scaled rows rather
// than through the normal equations.
void solve_outer_on_nodes(ShallowParams& params, const WeightedPoints& nodes, std::span<const double> ys) {
    const std::size_t H = params.width();
    const auto& act = params.arch().activation;
    Eigen::MatrixXd A(nodes.size(), H + 1);
    Eigen::VectorXd rhs(nodes.size());
    for (std::size_t q = 0; q < nodes.size(); ++q) {
        const double s = std::sqrt(nodes.weights[q]);
        const auto x = nodes.point(q);
        for (std::size_t i = 1; i <= H; ++i) {
            A(q, i - 1) = s * act(params.preactivation(i, x));
        }
        A(q, H) = s;
        rhs(q) = s * ys[q];
    }
    const Eigen::VectorXd beta = A.completeOrthogonalDecomposition().solve(rhs);
    for (std::size_t i = 1; i <= H; ++i) {
        params.outer_weight(i) = beta(i - 1);
    }
    params.outer_bias() = beta(H);
}

struct Reduced {
    double risk = 0.0;
    std::vector<double> gradient; // inner coordinates only
};

Reduced reduced_eval(ShallowParams& params, const Problem& problem, const QuadratureCfg& cfg) {
    const auto nodes = risk_nodes(params, problem, cfg);
    const auto ys = targets_at(problem.target, nodes);
    solve_outer_on_nodes(params, nodes, ys);
    auto rg = weighted_risk_and_gradient(params, nodes, ys);
    const std::size_t inner = params.input_dim() * params.width() + params.width();
    rg.gradient.resize(inner);
    return {rg.risk, std::move(rg.gradient)};
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        s += a[k] * b[k];
    }
    return s;
}

double norm(std::span<const double> a) {
    return std::sqrt(dot(a, a));
}

} // namespace

double solve_outer_layer(ShallowParams& params, const Problem& problem, const QuadratureCfg& cfg) {
    const auto nodes = risk_nodes(params, problem, cfg);
    const auto ys = targets_at(problem.target, nodes);
    solve_outer_on_nodes(params, nodes, ys);
    return risk_on_nodes(params, problem.target, nodes);
}

double polish(ShallowParams& params, const Problem& problem, const QuadratureCfg& cfg, PolishMethod method,
              std::size_t iterations, double gradient_tolerance) {
    if (params.width() == 0) {
        return solve_outer_layer(params, problem, cfg);
    }
    const std::size_t n = params.input_dim() * params.width() + params.width();
    auto current = reduced_eval(params, problem, cfg);
    // Inverse Hessian approximation (bfgs only), row-major n x n.
    std::vector<double> Hinv;
    auto reset = [&] {
        Hinv.assign(n * n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            Hinv[k * n + k] = 1.0;
        }
    };
    reset();
    bool fresh = true;
    double gd_step = 1.0;
    int stalled = 0;
    std::vector<double> dir(n);
    for (std::size_t it = 0; it < iterations; ++it) {
        const double gnorm = norm(current.gradient);
        if (!(gnorm > gradient_tolerance)) {
            break;
        }
        if (method == PolishMethod::bfgs) {
            for (std::size_t r = 0; r < n; ++r) {
                double s = 0.0;
                for (std::size_t c = 0; c < n; ++c) {
                    s -= Hinv[r * n + c] * current.gradient[c];
                }
                dir[r] = s;
            }
            if (!(dot(dir, current.gradient) < 0.0)) {
                reset();
                fresh = true;
                for (std::size_t k = 0; k < n; ++k) {
                    dir[k] = -current.gradient[k];
                }
            }
        } else {
            for (std::size_t k = 0; k < n; ++k) {
                dir[k] = -current.gradient[k];
            }
        }
        const double slope = dot(dir, current.gradient);
        double t = method == PolishMethod::bfgs ? 1.0 : gd_step;
        ShallowParams trial = params;
        Reduced next;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            trial = params;
            auto v = trial.values();
            for (std::size_t k = 0; k < n; ++k) {
                v[k] += t * dir[k];
            }
            next = reduced_eval(trial, problem, cfg);
            if (next.risk <= current.risk + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            if (method == PolishMethod::bfgs && !fresh) {
                reset();
                fresh = true;
                continue;
            }
            break;
        }
        if (method == PolishMethod::bfgs) {
            std::vector<double> s(n);
            std::vector<double> y(n);
            for (std::size_t k = 0; k < n; ++k) {
                s[k] = t * dir[k];
                y[k] = next.gradient[k] - current.gradient[k];
            }
            const double sy = dot(s, y);
            if (sy > 1e-12 * norm(s) * norm(y)) {
                if (fresh) {
                    // scale the initial matrix before the first update
                    const double scale = sy / dot(y, y);
                    for (auto& h : Hinv) {
                        h *= scale;
                    }
                    fresh = false;
                }
                std::vector<double> Hy(n, 0.0);
                for (std::size_t r = 0; r < n; ++r) {
                    for (std::size_t c = 0; c < n; ++c) {
                        Hy[r] += Hinv[r * n + c] * y[c];
                    }
                }
                const double yHy = dot(y, Hy);
                const double rho = 1.0 / sy;
                for (std::size_t r = 0; r < n; ++r) {
                    for (std::size_t c = 0; c < n; ++c) {
                        Hinv[r * n + c] += rho * ((1.0 + rho * yHy) * s[r] * s[c] - Hy[r] * s[c] - s[r] * Hy[c]);
                    }
                }
            }
        } else {
            gd_step = 2.0 * t;
        }
        // Stop once the risk no longer moves beyond rounding.
        stalled = current.risk - next.risk <= 1e-14 * current.risk ? stalled + 1 : 0;
        params = std::move(trial);
        current = std::move(next);
        if (stalled >= 5) {
            break;
        }
    }
    return current.risk;
}

GlobalInfResult global_inf_estimate(const Problem& problem, std::size_t width, const GlobalInfOptions& options,
                                    std::uint64_t seed) {
    if (options.restarts < 1) {
        throw std::invalid_argument("global_inf_estimate needs at least one restart");
    }
    GlobalInfResult result;
    result.width = width;
    const std::size_t d = problem.box.dim();
    const ShallowArch arch{d, width, options.activation};
    if (width == 0) {
        const auto bc = best_constant(problem, options.quadrature);
        result.best = ShallowParams::zeros(arch);
        result.best.outer_bias() = bc.xi;
        result.value = bc.nu;
        result.hits = 1;
        return result;
    }

    const auto started = std::chrono::steady_clock::now();
    std::vector<std::optional<RestartOutcome>> outcomes(options.restarts);
    std::atomic<bool> exhausted{false};
    parallel_for(options.restarts, options.jobs, [&](std::size_t r) {
        if (options.max_seconds > 0.0 && r > 0) {
            const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            if (elapsed > options.max_seconds) {
                exhausted = true;
                return;
            }
        }
        RestartOutcome out;
        out.index = r;
        out.seed = derive_seed(seed, r);
        Rng rng(out.seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);

        // Every neuron starts with its kink inside the box.
        auto params = ShallowParams::zeros(arch);
        for (std::size_t i = 1; i <= width; ++i) {
            double sq = 0.0;
            std::vector<double> w(d);
            do {
                sq = 0.0;
                for (auto& x : w) {
                    x = normal(rng);
                    sq += x * x;
                }
            } while (sq == 0.0);
            const double scale = std::pow(2.0, -1.0 + 2.0 * unit(rng)) / std::sqrt(sq);
            double b = 0.0;
            for (std::size_t j = 1; j <= d; ++j) {
                params.weight(i, j) = scale * w[j - 1];
                const double x0 = problem.box.lower() + (problem.box.upper() - problem.box.lower()) * unit(rng);
                b -= params.weight(i, j) * x0;
            }
            params.inner_bias(i) = b;
        }
        solve_outer_layer(params, problem, options.quadrature);

        if (options.adam_steps > 0) {
            auto state = OptimizerState::zeros(params.values().size());
            for (std::uint64_t n = 0; n < options.adam_steps; ++n) {
                const auto g = gen_gradient_population(params, problem, options.quadrature);
                step(options.optimizer, state, params.values(), g);
            }
        }
        out.risk = polish(params, problem, options.quadrature, options.polish, options.polish_iterations,
                          options.polish_gradient_tolerance);
        out.gradient_norm = norm(gen_gradient_population(params, problem, options.quadrature));
        out.params = std::move(params);
        outcomes[r] = std::move(out);
    });

    result.budget_exhausted = exhausted;
    bool have = false;
    for (auto& o : outcomes) {
        if (!o) {
            continue;
        }
        if (!have || o->risk < result.value) {
            result.value = o->risk;
            result.best = o->params;
            have = true;
        }
        result.restarts.push_back(std::move(*o));
    }
    if (!have) {
        throw std::runtime_error("global_inf_estimate: budget exhausted before the first restart");
    }
    const double band = std::max(1e-12, 1e-3 * result.value);
    for (const auto& o : result.restarts) {
        result.hits += o.risk <= result.value + band ? 1 : 0;
    }
    result.stable = result.hits >= 2;
    return result;
}

} // namespace relulab
