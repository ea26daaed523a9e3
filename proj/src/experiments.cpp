#include "relulab/experiments.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <bit>
#include <cmath>
#include <map>
#include <random>

#include "relulab/csv.hpp"
#include "relulab/errors.hpp"
#include "relulab/gradient.hpp"
#include "relulab/parallel.hpp"
#include "relulab/risk.hpp"

namespace relulab {

namespace {

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) {
        m = std::max(m, std::abs(x));
    }
    return m;
}

// max_j |a_j - b_j| / max_j |b_j|
double normwise_error(std::span<const double> a, std::span<const double> b) {
    double diff = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        diff = std::max(diff, std::abs(a[k] - b[k]));
    }
    const double scale = max_abs(b);
    if (scale == 0.0) {
        return diff;
    }
    return diff / scale;
}

bool same_bits(double a, double b) {
    return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

GradientSource minibatch_source(const Problem& problem, const ShallowArch& arch, std::size_t batch_size) {
    return [&problem, arch, batch_size](std::span<const double> theta, std::uint64_t n, std::uint64_t seed) {
        const ShallowParams params(arch, {theta.begin(), theta.end()});
        const auto batch = noisy_pairs(problem, batch_size, derive_seed(seed, n));
        return gen_gradient_empirical(params, batch);
    };
}

} // namespace

std::pair<double, double> wilson_interval(std::size_t k, std::size_t n, double z) {
    if (n == 0) {
        return {0.0, 1.0};
    }
    const double N = static_cast<double>(n);
    const double p = static_cast<double>(k) / N;
    const double z2 = z * z;
    const double centre = (p + z2 / (2.0 * N)) / (1.0 + z2 / N);
    const double half = z * std::sqrt(p * (1.0 - p) / N + z2 / (4.0 * N * N)) / (1.0 + z2 / N);
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

// ---------------------------------------------------------------------------

std::vector<TrapFrequencyRow> trap_frequency_law(const InitSpec& init, const DomainBox& box,
                                                 const std::vector<std::size_t>& widths, std::size_t draws,
                                                 double p_hat, std::uint64_t seed, double band) {
    std::vector<TrapFrequencyRow> rows;
    for (std::size_t H : widths) {
        if (H == 0) {
            throw std::invalid_argument("trap frequency needs H >= 1");
        }
        TrapFrequencyRow row;
        row.width = H;
        row.draws = draws;
        row.scale_invariant = true;
        const ShallowArch arch{box.dim(), H, Activation::relu()};
        const double undo = std::pow(static_cast<double>(H), init.kappa);
        for (std::size_t k = 0; k < draws; ++k) {
            const auto theta = sample_init(arch, init, derive_seed(seed, H, k));
            const bool trapped = !strictly_trapped_set(theta, box).empty();
            row.with_trapped += trapped ? 1 : 0;
            // Same underlying draw, rescaled.
            for (double lambda : {undo, 3.7}) {
                auto scaled = theta;
                auto v = scaled.values();
                for (std::size_t j = 0; j < box.dim() * H + H; ++j) {
                    v[j] *= lambda;
                }
                row.scale_invariant = row.scale_invariant && (!strictly_trapped_set(scaled, box).empty() == trapped);
            }
        }
        row.fraction = static_cast<double>(row.with_trapped) / static_cast<double>(draws);
        row.predicted = trapping_bound(p_hat, H).at_least_one;
        row.sigma = std::sqrt(row.predicted * (1.0 - row.predicted) / static_cast<double>(draws));
        row.within_band = std::abs(row.fraction - row.predicted) <= band * row.sigma;
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------

std::vector<OptimizerConfig> default_optimizer_suite() {
    return {OptimizerConfig::sgd(0.05), OptimizerConfig::momentum_sgd(0.05, 0.9),
            OptimizerConfig::adam(1e-2, 0.9, 0.999, 1e-8), OptimizerConfig::rmsprop(1e-2, 0.999, 1e-8),
            OptimizerConfig::adagrad(0.1, 1e-8)};
}

TrapInvarianceReport trap_invariance_check(const Problem& problem, std::size_t width,
                                           const std::vector<OptimizerConfig>& optimizers, std::size_t runs,
                                           std::uint64_t steps, std::size_t batch_size, const InitSpec& init,
                                           std::uint64_t seed) {
    if (width == 0) {
        throw std::invalid_argument("trap invariance needs H >= 1");
    }
    const std::size_t d = problem.box.dim();
    const ShallowArch arch{d, width, Activation::relu()};
    TrapInvarianceReport report;
    report.passed = true;
    for (std::size_t k = 0; k < optimizers.size(); ++k) {
        TrapInvarianceRow row;
        row.kind = optimizers[k].kind;
        for (std::size_t r = 0; r < runs; ++r) {
            const std::uint64_t run_seed = derive_seed(seed, k, r);
            auto theta0 = sample_init(arch, init, run_seed);
            const std::size_t i = 1 + r % width;
            double top = 0.0;
            for (std::size_t j = 1; j <= d; ++j) {
                const double w = theta0.weight(i, j);
                top += std::max(w * problem.box.lower(), w * problem.box.upper());
            }
            theta0.inner_bias(i) = -top - 0.5;
            if (!neuron_status(theta0, i, problem.box).strictly_trapped) {
                throw std::logic_error("failed to construct a trapped neuron");
            }
            std::vector<std::size_t> watched;
            for (std::size_t j = 1; j <= d; ++j) {
                watched.push_back(arch.weight_index(i, j));
            }
            watched.push_back(arch.inner_bias_index(i));

            RunOptions opts;
            opts.steps = steps;
            opts.cadence = 1;
            opts.keep_theta = true;
            const auto trace = run(optimizers[k], theta0.vector(), minibatch_source(problem, arch, batch_size), opts,
                                   run_seed);
            bool frozen = trace.snapshots.size() == steps + 1;
            for (const auto& snap : trace.snapshots) {
                for (auto idx : watched) {
                    frozen = frozen && same_bits(snap.theta[idx], theta0.vector()[idx]);
                }
            }
            row.runs += 1;
            row.frozen += frozen ? 1 : 0;
        }
        report.passed = report.passed && row.frozen == row.runs;
        report.rows.push_back(row);
    }
    return report;
}

// ---------------------------------------------------------------------------

nlohmann::json GradCheckReport::to_json() const {
    return {{"accepted", accepted},
            {"rejected", rejected},
            {"max_error_empirical", max_error_empirical},
            {"max_error_population", max_error_population},
            {"max_error_outer", max_error_outer},
            {"reference_discrepancy", reference_discrepancy},
            {"reference_decreasing", reference_decreasing},
            {"smooth_failures", smooth_failures},
            {"passed", passed}};
}

GradCheckReport gradient_check(const Problem& problem, const QuadratureCfg& cfg, const GradCheckOptions& options,
                               std::uint64_t seed) {
    const std::size_t d = problem.box.dim();
    GradCheckReport report;
    Rng rng(derive_seed(seed, 0));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> width_pick(1, std::max<std::size_t>(1, options.max_width));

    auto converging = [](const std::vector<double>& disc) {
        for (std::size_t k = 1; k < disc.size(); ++k) {
            if (!(disc[k] < disc[k - 1]) && disc[k - 1] > 1e-12) {
                return false;
            }
        }
        return true;
    };

    std::size_t attempts = 0;
    while (report.accepted < options.samples) {
        if (++attempts > 50 * options.samples + 100) {
            throw std::runtime_error("gradient check: too many rejected samples");
        }
        const ShallowArch arch{d, width_pick(rng), Activation::relu()};
        auto params = ShallowParams::zeros(arch);
        for (auto& v : params.values()) {
            v = normal(rng);
        }
        const auto batch = noisy_pairs(problem, options.batch_size, derive_seed(seed, 1, attempts));
        const auto nodes = risk_nodes(params, problem, cfg);

        // Outer coordinates: the loss is smooth in them everywhere, so no filter.
        {
            const auto g = gen_gradient_population(params, problem, cfg);
            const auto fd = fd_gradient(params.values(), [&](std::span<const double> t) {
                return risk_population(ShallowParams(arch, {t.begin(), t.end()}), problem, cfg);
            });
            const std::size_t first_outer = arch.outer_weight_index(1);
            const std::span<const double> go(g.data() + first_outer, g.size() - first_outer);
            const std::span<const double> fo(fd.data() + first_outer, fd.size() - first_outer);
            report.max_error_outer = std::max(report.max_error_outer, normwise_error(go, fo));
        }

        double closest = std::numeric_limits<double>::infinity();
        auto scan = [&](std::span<const double> x) {
            for (std::size_t i = 1; i <= arch.width; ++i) {
                closest = std::min(closest, std::abs(params.preactivation(i, x)));
            }
        };
        for (std::size_t m = 0; m < batch.size(); ++m) {
            scan(batch.x(m));
        }
        for (std::size_t q = 0; q < nodes.size(); ++q) {
            scan(nodes.point(q));
        }
        if (d == 1) {
            const double a = problem.box.lower();
            const double b = problem.box.upper();
            scan(std::span<const double>(&a, 1));
            scan(std::span<const double>(&b, 1));
        }
        if (closest < options.margin) {
            report.rejected += 1;
            continue;
        }
        report.accepted += 1;

        const auto ge = gen_gradient_empirical(params, batch);
        const auto fe = fd_gradient(params.values(), [&](std::span<const double> t) {
            return risk_empirical(ShallowParams(arch, {t.begin(), t.end()}), batch);
        });
        report.max_error_empirical = std::max(report.max_error_empirical, normwise_error(ge, fe));

        const auto gp = gen_gradient_population(params, problem, cfg);
        const auto fp = fd_gradient(params.values(), [&](std::span<const double> t) {
            return risk_population(ShallowParams(arch, {t.begin(), t.end()}), problem, cfg);
        });
        report.max_error_population = std::max(report.max_error_population, normwise_error(gp, fp));

        if (d == 1 && !options.r_values.empty()) {
            const auto smooth = smooth_limit_check(params, problem, cfg, options.r_values);
            report.smooth_failures += converging(smooth.discrepancy) ? 0 : 1;
        }
    }

    if (!options.r_values.empty()) {
        const Problem zero{DomainBox(0.0, 1.0, 1), Measure::uniform(), Target::constant(0.0)};
        const ShallowParams ref(ShallowArch{1, 1, Activation::relu()}, {1.0, 0.0, 1.0, 0.0});
        const auto smooth = smooth_limit_check(ref, zero, QuadratureCfg::default_for(1), options.r_values);
        report.reference_discrepancy = smooth.discrepancy;
        report.reference_decreasing = smooth.strictly_decreasing;
    } else {
        report.reference_decreasing = true;
    }
    report.passed = report.max_error_empirical <= options.tolerance &&
                    report.max_error_population <= options.tolerance &&
                    report.max_error_outer <= options.outer_tolerance && report.reference_decreasing &&
                    report.smooth_failures == 0;
    return report;
}

// ---------------------------------------------------------------------------

AlgebraReport optimizer_algebra_check(std::size_t histories, std::uint64_t seed) {
    AlgebraReport report;
    report.histories = histories;
    report.rmsprop_identical = true;
    constexpr std::size_t dim = 6;
    constexpr std::size_t zero_block = 2;
    for (std::size_t h = 0; h < histories; ++h) {
        Rng rng(derive_seed(seed, h));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const std::size_t len = 1 + static_cast<std::size_t>(unit(rng) * 30.0);
        std::vector<std::vector<double>> history(len, std::vector<double>(dim));
        for (auto& g : history) {
            for (std::size_t j = 0; j < dim; ++j) {
                g[j] = j < zero_block ? 0.0 : normal(rng) * std::pow(10.0, -2.0 + 4.0 * unit(rng));
            }
        }
        std::vector<double> gammas(len);
        std::vector<double> alphas(len);
        std::vector<double> betas(len);
        for (std::size_t n = 0; n < len; ++n) {
            gammas[n] = 1e-3 + unit(rng);
            alphas[n] = 0.95 * unit(rng);
            betas[n] = 0.5 + 0.499 * unit(rng);
        }
        const double eps = std::pow(10.0, -8.0 + 6.0 * unit(rng));

        OptimizerConfig momentum;
        momentum.kind = OptimizerKind::momentum;
        momentum.learning_rate = Schedule::list(gammas);
        momentum.momentum = Schedule::list(alphas);

        OptimizerConfig adam;
        adam.kind = OptimizerKind::adam;
        adam.learning_rate = Schedule::list(gammas);
        adam.momentum = Schedule::list(alphas);
        adam.second_moment = Schedule::list(betas);
        adam.epsilon = eps;

        OptimizerConfig sgd = momentum;
        sgd.kind = OptimizerKind::sgd;
        OptimizerConfig rmsprop = adam;
        rmsprop.kind = OptimizerKind::rmsprop;
        OptimizerConfig adagrad = adam;
        adagrad.kind = OptimizerKind::adagrad;
        OptimizerConfig adam_zero = adam;
        adam_zero.momentum = Schedule::constant(0.0);

        for (const auto* cfg : {&sgd, &momentum, &adam, &rmsprop, &adagrad}) {
            auto state = OptimizerState::zeros(dim);
            for (std::size_t n = 0; n < len; ++n) {
                // theta = 0 before each step, so -theta is the update with no cancellation.
                std::vector<double> theta(dim, 0.0);
                step(*cfg, state, theta, history[n]);
                std::vector<double> update(dim);
                for (std::size_t j = 0; j < dim; ++j) {
                    update[j] = -theta[j];
                }
                const auto closed =
                    phi_closed_form(*cfg, std::span<const std::vector<double>>(history.data(), n + 1));
                for (std::size_t j = 0; j < zero_block; ++j) {
                    report.zero_violations += (update[j] != 0.0 || closed[j] != 0.0) ? 1 : 0;
                }
                const double err = normwise_error(update, closed);
                if (cfg == &momentum) {
                    report.max_error_momentum = std::max(report.max_error_momentum, err);
                } else if (cfg == &adam) {
                    report.max_error_adam = std::max(report.max_error_adam, err);
                }
            }
        }

        auto s1 = OptimizerState::zeros(dim);
        auto s2 = OptimizerState::zeros(dim);
        std::vector<double> t1(dim, 0.5);
        std::vector<double> t2(dim, 0.5);
        for (std::size_t n = 0; n < len; ++n) {
            step(adam_zero, s1, t1, history[n]);
            step(rmsprop, s2, t2, history[n]);
            for (std::size_t j = 0; j < dim; ++j) {
                report.rmsprop_identical = report.rmsprop_identical && same_bits(t1[j], t2[j]);
            }
        }
    }
    report.passed = report.max_error_momentum <= 1e-12 && report.max_error_adam <= 1e-12 &&
                    report.zero_violations == 0 && report.rmsprop_identical;
    return report;
}

// ---------------------------------------------------------------------------

std::vector<std::string> SweepReport::csv_header() {
    return {"width",          "trials",           "p_hat",           "trapped_trials",   "trapped_fraction",
            "trapped_ci_low", "trapped_ci_high",  "predicted",       "exp_bound",        "z_score",
            "within_band",    "m_hat",            "m_hat_prev",      "epsilon",          "m_hat_stable",
            "nonconverged",   "nonconverged_fraction", "nonconverged_ci_low", "nonconverged_ci_high",
            "trapped_above",  "trapped_all_above", "clarke_checked", "clarke_violations", "quadrature",
            "seed"};
}

std::string SweepReport::to_csv() const {
    std::string out = csv::row(csv_header());
    auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
    for (const auto& r : rows) {
        out += csv::row({std::to_string(r.width), std::to_string(r.trials), csv::number(p_hat),
                         std::to_string(r.trapped_trials), csv::number(r.trapped_fraction),
                         csv::number(r.trapped_ci.first), csv::number(r.trapped_ci.second), csv::number(r.predicted),
                         csv::number(r.exp_bound), csv::number(r.z_score), flag(r.within_band), csv::number(r.m_hat),
                         csv::number(r.m_hat_prev), csv::number(r.epsilon), flag(r.m_hat_stable),
                         std::to_string(r.nonconverged_trials), csv::number(r.nonconverged_fraction),
                         csv::number(r.nonconverged_ci.first), csv::number(r.nonconverged_ci.second),
                         std::to_string(r.trapped_above), flag(r.trapped_all_above), std::to_string(r.clarke_checked),
                         std::to_string(r.clarke_violations), quadrature_fingerprint, std::to_string(seed)});
    }
    return out;
}

nlohmann::json SweepReport::to_json() const {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows) {
        rows_json.push_back({{"width", r.width},
                             {"trials", r.trials},
                             {"trapped_trials", r.trapped_trials},
                             {"trapped_fraction", r.trapped_fraction},
                             {"trapped_ci", {r.trapped_ci.first, r.trapped_ci.second}},
                             {"predicted", r.predicted},
                             {"exp_bound", r.exp_bound},
                             {"z_score", r.z_score},
                             {"within_band", r.within_band},
                             {"m_hat", r.m_hat},
                             {"m_hat_prev", r.m_hat_prev},
                             {"epsilon", r.epsilon},
                             {"m_hat_stable", r.m_hat_stable},
                             {"nonconverged_trials", r.nonconverged_trials},
                             {"nonconverged_fraction", r.nonconverged_fraction},
                             {"nonconverged_ci", {r.nonconverged_ci.first, r.nonconverged_ci.second}},
                             {"trapped_above", r.trapped_above},
                             {"trapped_all_above", r.trapped_all_above},
                             {"clarke_checked", r.clarke_checked},
                             {"clarke_violations", r.clarke_violations}});
    }
    return {{"p_hat", p_hat},
            {"p_std_error", p_std_error},
            {"rows", rows_json},
            {"trapped_trend", trapped_trend},
            {"nonconverged_trend", nonconverged_trend},
            {"warnings", warnings},
            {"quadrature", quadrature_fingerprint},
            {"seed", seed},
            {"passed", passed}};
}

SweepReport nonconvergence_sweep(const Problem& problem, const SweepOptions& options, std::uint64_t seed) {
    if (problem.target.flags().relu_representable) {
        throw PreconditionFailed("target '" + problem.target.name() +
                                 "' is exactly representable by ReLU networks; the sweep needs m_H > 0");
    }
    if (options.widths.empty() || options.trials == 0) {
        throw std::invalid_argument("sweep needs widths and trials");
    }
    auto widths = options.widths;
    std::sort(widths.begin(), widths.end());
    if (widths.front() == 0) {
        throw std::invalid_argument("sweep widths must be >= 1");
    }
    options.optimizer.validate();

    SweepReport report;
    report.seed = seed;
    report.quadrature_fingerprint = options.quadrature.fingerprint();

    const auto tp = trap_probability(options.init, problem.box, options.trap_samples, derive_seed(seed, 1), options.jobs);
    report.p_hat = tp.p_hat;
    report.p_std_error = tp.std_error;

    GlobalInfOptions inf = options.inf;
    inf.quadrature = options.quadrature;
    inf.activation = options.activation;
    inf.jobs = options.jobs;
    std::map<std::size_t, GlobalInfResult> m_hat;
    for (std::size_t H : widths) {
        for (std::size_t w : {H - 1, H}) {
            if (!m_hat.count(w)) {
                m_hat.emplace(w, global_inf_estimate(problem, w, inf, derive_seed(seed, 2, w)));
            }
        }
    }
    auto epsilon_for = [&](std::size_t H) {
        return options.epsilon ? *options.epsilon : (m_hat.at(H - 1).value - m_hat.at(H).value) / 2.0;
    };
    const std::size_t top = widths.back();
    if (!(m_hat.at(top).value > epsilon_for(top))) {
        throw PreconditionFailed("estimated m_H at the largest width does not exceed epsilon; the target looks representable");
    }

    // Trials in (width, trial) order; each writes only its own slot.
    struct Job {
        std::size_t width;
        std::size_t trial;
    };
    std::vector<Job> jobs;
    for (std::size_t H : widths) {
        for (std::size_t t = 0; t < options.trials; ++t) {
            jobs.push_back({H, t});
        }
    }
    report.trials.resize(jobs.size());
    parallel_for(jobs.size(), options.jobs, [&](std::size_t k) {
        const auto [H, t] = jobs[k];
        const ShallowArch arch{problem.box.dim(), H, options.activation};
        SweepTrial trial;
        trial.width = H;
        trial.trial = t;
        trial.seed = derive_seed(seed, 3, (static_cast<std::uint64_t>(H) << 32) | t);
        const auto theta0 = sample_init(arch, options.init, trial.seed);
        trial.trapped_at_init = strictly_trapped_set(theta0, problem.box).size();

        RunOptions opts;
        opts.steps = options.steps;
        opts.cadence = options.cadence;
        opts.keep_theta = false;
        opts.annotate = [&](Snapshot& snap) {
            const ShallowParams p(arch, snap.theta);
            snap.risk = risk_population(p, problem, options.quadrature);
            const auto batch = noisy_pairs(problem, options.batch_size, derive_seed(trial.seed, snap.step));
            snap.empirical_risk = risk_empirical(p, batch);
            snap.inactive = inactive_set(p, problem.box);
            snap.trapped = strictly_trapped_set(p, problem.box);
        };
        trial.trace = run(options.optimizer, theta0.vector(), minibatch_source(problem, arch, options.batch_size), opts,
                          trial.seed);
        const ShallowParams final_params(arch, trial.trace.final_theta);
        const auto clarke =
            clarke_bound_check(final_params, problem, options.quadrature, options.clarke_tolerance, options.clarke_slack);
        trial.final_risk = clarke.risk;
        trial.final_gradient_norm = clarke.gradient_norm;
        trial.clarke = clarke.verdict;
        trial.nonconverged = trial.final_risk > m_hat.at(H).value + epsilon_for(H);
        if (!options.keep_traces) {
            trial.trace.snapshots.clear();
        }
        report.trials[k] = std::move(trial);
    });

    report.passed = true;
    for (std::size_t H : widths) {
        SweepRow row;
        row.width = H;
        row.m_hat = m_hat.at(H).value;
        row.m_hat_prev = m_hat.at(H - 1).value;
        row.epsilon = epsilon_for(H);
        row.m_hat_stable = m_hat.at(H).stable && m_hat.at(H - 1).stable;
        for (const auto& t : report.trials) {
            if (t.width != H) {
                continue;
            }
            row.trials += 1;
            const bool trapped = t.trapped_at_init > 0;
            row.trapped_trials += trapped ? 1 : 0;
            row.nonconverged_trials += t.nonconverged ? 1 : 0;
            row.trapped_above += trapped && t.final_risk > row.m_hat + row.epsilon ? 1 : 0;
            if (t.clarke != ClarkeVerdict::not_applicable) {
                row.clarke_checked += 1;
                row.clarke_violations += t.clarke == ClarkeVerdict::fail ? 1 : 0;
            }
        }
        const double n = static_cast<double>(row.trials);
        row.trapped_fraction = static_cast<double>(row.trapped_trials) / n;
        row.trapped_ci = wilson_interval(row.trapped_trials, row.trials);
        row.nonconverged_fraction = static_cast<double>(row.nonconverged_trials) / n;
        row.nonconverged_ci = wilson_interval(row.nonconverged_trials, row.trials);
        const auto bound = trapping_bound(report.p_hat, H);
        row.predicted = bound.at_least_one;
        row.exp_bound = bound.exp_bound;
        const double sigma = std::sqrt(row.predicted * (1.0 - row.predicted) / n);
        row.z_score = sigma > 0.0 ? (row.trapped_fraction - row.predicted) / sigma : 0.0;
        row.within_band = std::abs(row.trapped_fraction - row.predicted) <= options.band * sigma;
        row.trapped_all_above = row.trapped_above == row.trapped_trials;
        if (!row.m_hat_stable) {
            report.warnings.push_back("m_hat for width " + std::to_string(H) +
                                      " or its predecessor was reached by a single restart; consider more restarts");
        }
        report.passed = report.passed && row.within_band && row.trapped_all_above && row.clarke_violations == 0;
        report.rows.push_back(row);
    }
    report.trapped_trend = true;
    report.nonconverged_trend = true;
    for (std::size_t k = 1; k < report.rows.size(); ++k) {
        report.trapped_trend =
            report.trapped_trend && report.rows[k].trapped_fraction >= report.rows[k - 1].trapped_fraction;
        report.nonconverged_trend =
            report.nonconverged_trend && report.rows[k].nonconverged_fraction >= report.rows[k - 1].nonconverged_fraction;
        if (report.rows[k].m_hat > report.rows[k - 1].m_hat) {
            report.warnings.push_back("m_hat increased from width " + std::to_string(report.rows[k - 1].width) + " to " +
                                      std::to_string(report.rows[k].width));
        }
    }
    report.passed = report.passed && report.trapped_trend && report.nonconverged_trend;
    return report;
}

// ---------------------------------------------------------------------------

std::string HierarchyReport::to_csv() const {
    std::string out = csv::row({"width", "m_hat", "restarts", "hits", "stable", "embedded_risk", "embed_error",
                                "improved_risk", "improved", "predicted_improvement"});
    for (const auto& l : levels) {
        out += csv::row({std::to_string(l.width), csv::number(l.m_hat), std::to_string(l.restarts),
                         std::to_string(l.hits), l.stable ? "true" : "false", csv::number(l.embedded_risk),
                         csv::number(l.embed_error), csv::number(l.improved_risk), l.improved ? "true" : "false",
                         csv::number(l.predicted_improvement)});
    }
    return out;
}

nlohmann::json HierarchyReport::to_json() const {
    nlohmann::json lv = nlohmann::json::array();
    for (const auto& l : levels) {
        lv.push_back({{"width", l.width},
                      {"m_hat", l.m_hat},
                      {"restarts", l.restarts},
                      {"hits", l.hits},
                      {"stable", l.stable},
                      {"best", relulab::to_json(ParamVector(l.best))},
                      {"embedded_risk", l.embedded_risk},
                      {"embed_error", l.embed_error},
                      {"improved_risk", l.improved_risk},
                      {"improved", l.improved},
                      {"predicted_improvement", l.predicted_improvement}});
    }
    return {{"xi_star", xi_star},
            {"nu_star", nu_star},
            {"levels", lv},
            {"m0_exact", m0_exact},
            {"strictly_decreasing", strictly_decreasing},
            {"min_margin", min_margin},
            {"margins_ok", margins_ok},
            {"embedding_ok", embedding_ok},
            {"improvement_ok", improvement_ok},
            {"clarke_checked", clarke_checked},
            {"clarke_violations", clarke_violations},
            {"warnings", warnings},
            {"passed", passed}};
}

HierarchyReport hierarchy_experiment(const Problem& problem, const HierarchyOptions& options, std::uint64_t seed) {
    if (!problem.target.flags().continuous) {
        throw PreconditionFailed("the distinct-risk-levels result needs a continuous target");
    }
    const auto& cfg = options.inf.quadrature;
    HierarchyReport report;
    const auto bc = best_constant(problem, cfg);
    report.xi_star = bc.xi;
    report.nu_star = bc.nu;
    const std::size_t n = options.max_width;

    for (std::size_t k = 0; k <= n; ++k) {
        auto est = global_inf_estimate(problem, k, options.inf, derive_seed(seed, k));
        HierarchyLevel level;
        level.width = k;
        level.m_hat = est.value;
        level.restarts = est.restarts.size();
        level.hits = est.hits;
        level.stable = est.stable;
        level.best = est.best;
        for (const auto& o : est.restarts) {
            if (o.gradient_norm < options.clarke_tolerance) {
                report.clarke_checked += 1;
                report.clarke_violations += o.risk <= bc.nu + options.clarke_slack ? 0 : 1;
            }
        }
        if (k == 0) {
            report.clarke_checked += 1;
            const auto c = clarke_bound_check(est.best, problem, cfg, options.clarke_tolerance, options.clarke_slack);
            report.clarke_violations += c.verdict == ClarkeVerdict::fail ? 1 : 0;
        }
        if (!level.stable) {
            report.warnings.push_back("m_hat at width " + std::to_string(k) + " was reached by a single restart");
        }
        report.levels.push_back(std::move(level));
    }

    report.m0_exact = report.levels[0].m_hat == bc.nu;
    report.strictly_decreasing = true;
    report.min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= n; ++k) {
        const double gap = report.levels[k - 1].m_hat - report.levels[k].m_hat;
        report.min_margin = std::min(report.min_margin, gap);
        report.strictly_decreasing = report.strictly_decreasing && gap > 0.0;
    }
    report.margins_ok = n == 0 || report.min_margin > options.margin;

    report.embedding_ok = true;
    report.improvement_ok = true;
    for (auto& level : report.levels) {
        const double own = risk_population(level.best, problem, cfg);
        const auto wide = embed_shallow(level.best, n);
        level.embedded_risk = risk_population(wide, problem, cfg);
        level.embed_error = std::abs(level.embedded_risk - own);
        report.embedding_ok = report.embedding_ok && level.embed_error <= options.embed_tolerance;

        const auto imp = add_neuron_improve(level.best, problem, cfg, options.improve_candidates,
                                            derive_seed(seed, 100, level.width));
        level.improved_risk = imp.risk_after;
        level.improved = imp.improved;
        level.predicted_improvement = imp.predicted_improvement;
        if (own > options.improve_floor) {
            report.improvement_ok = report.improvement_ok && imp.improved;
        }
    }
    report.passed = report.m0_exact && report.strictly_decreasing && report.margins_ok && report.embedding_ok &&
                    report.improvement_ok && report.clarke_violations == 0;
    return report;
}

// ---------------------------------------------------------------------------

NearOptReport nearopt_no_inactive_check(const Problem& problem, std::size_t width, const GlobalInfOptions& options,
                                        std::uint64_t seed) {
    if (width == 0) {
        throw std::invalid_argument("near-optimality check needs H >= 1");
    }
    NearOptReport report;
    report.width = width;
    const auto prev = global_inf_estimate(problem, width - 1, options, derive_seed(seed, width - 1));
    if (!(prev.value > 0.0)) {
        throw PreconditionFailed("m_{H-1} must be positive");
    }
    auto cur = global_inf_estimate(problem, width, options, derive_seed(seed, width));
    report.m_hat = cur.value;
    report.m_hat_prev = prev.value;
    report.margin = prev.value - cur.value;
    auto outcomes = cur.restarts;
    std::sort(outcomes.begin(), outcomes.end(), [](const auto& a, const auto& b) {
        return a.risk < b.risk || (a.risk == b.risk && a.index < b.index);
    });
    const std::size_t decile = std::max<std::size_t>(1, (outcomes.size() + 9) / 10);
    for (std::size_t k = 0; k < decile && k < outcomes.size(); ++k) {
        report.examined += 1;
        if (outcomes[k].risk < prev.value) {
            report.below_prev += 1;
            report.with_inactive += inactive_set(outcomes[k].params, problem.box).empty() ? 0 : 1;
        }
    }
    report.passed = report.with_inactive == 0;
    return report;
}

// ---------------------------------------------------------------------------

double lyapunov_v(const DeepParams& params, std::span<const double> xi) {
    const auto& arch = params.arch();
    const std::size_t L = arch.depth();
    if (xi.size() != arch.output_dim()) {
        throw DimensionMismatch("xi must have the output dimension");
    }
    double v = 0.0;
    for (std::size_t k = 1; k <= L; ++k) {
        for (std::size_t i = 1; i <= arch.dims[k]; ++i) {
            for (std::size_t j = 1; j <= arch.dims[k - 1]; ++j) {
                const double w = params.weight(k, i, j);
                v += w * w;
            }
            const double b = params.bias(k, i);
            v += static_cast<double>(k) * b * b;
        }
    }
    for (std::size_t i = 1; i <= arch.output_dim(); ++i) {
        v -= 2.0 * static_cast<double>(L) * xi[i - 1] * params.bias(L, i);
    }
    return v;
}

std::vector<double> lyapunov_gradient(const DeepParams& params, std::span<const double> xi) {
    const auto& arch = params.arch();
    const std::size_t L = arch.depth();
    if (xi.size() != arch.output_dim()) {
        throw DimensionMismatch("xi must have the output dimension");
    }
    std::vector<double> g(arch.param_count(), 0.0);
    for (std::size_t k = 1; k <= L; ++k) {
        for (std::size_t i = 1; i <= arch.dims[k]; ++i) {
            for (std::size_t j = 1; j <= arch.dims[k - 1]; ++j) {
                g[arch.weight_index(k, i, j)] = 2.0 * params.weight(k, i, j);
            }
            g[arch.bias_index(k, i)] = 2.0 * static_cast<double>(k) * params.bias(k, i);
        }
    }
    for (std::size_t i = 1; i <= arch.output_dim(); ++i) {
        g[arch.bias_index(L, i)] -= 2.0 * static_cast<double>(L) * xi[i - 1];
    }
    return g;
}

double lyapunov_p(const DeepArch& arch, const DomainBox& box, double mass, std::span<const double> xi, double y) {
    const double L = static_cast<double>(arch.depth());
    double xi2 = 0.0;
    for (double x : xi) {
        xi2 += x * x;
    }
    double prod = 1.0;
    for (auto l : arch.dims) {
        prod *= static_cast<double>(l) + 1.0;
    }
    const double a = box.bound();
    return L * a * a * mass * prod * std::pow(2.0 * y + 4.0 * L * L * xi2 + 1.0, L - 1.0);
}

SandwichReport lyapunov_sandwich_check(const std::vector<std::size_t>& dims, std::size_t pairs, std::uint64_t seed) {
    const DeepArch arch(dims);
    const double L = static_cast<double>(arch.depth());
    SandwichReport report;
    report.pairs = pairs;
    for (std::size_t s = 0; s < pairs; ++s) {
        Rng rng(derive_seed(seed, s));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double theta_scale = std::pow(10.0, -2.0 + 3.0 * unit(rng));
        const double xi_scale = std::pow(10.0, -2.0 + 3.0 * unit(rng));
        auto params = DeepParams::zeros(arch);
        double theta2 = 0.0;
        for (auto& v : params.values()) {
            v = theta_scale * normal(rng);
            theta2 += v * v;
        }
        std::vector<double> xi(arch.output_dim());
        double xi2 = 0.0;
        for (auto& x : xi) {
            x = xi_scale * normal(rng);
            xi2 += x * x;
        }
        const double v = lyapunov_v(params, xi);
        const bool ok = 0.5 * theta2 - 2.0 * L * L * xi2 <= v && v <= 2.0 * L * theta2 + L * xi2;
        report.violations += ok ? 0 : 1;
    }
    report.passed = report.violations == 0;
    return report;
}

namespace {

// Smallest |hidden pre-activation| of a scalar-input deep net at x.
double hidden_margin(const DeepParams& params, std::span<const double> x) {
    const auto& arch = params.arch();
    std::vector<double> current(x.begin(), x.end());
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < arch.depth(); ++k) {
        std::vector<double> next(arch.dims[k]);
        for (std::size_t i = 1; i <= arch.dims[k]; ++i) {
            double z = params.bias(k, i);
            for (std::size_t j = 1; j <= arch.dims[k - 1]; ++j) {
                z += params.weight(k, i, j) * current[j - 1];
            }
            margin = std::min(margin, std::abs(z));
            next[i - 1] = arch.activation(z);
        }
        current = std::move(next);
    }
    return margin;
}

} // namespace

IdentityReport lyapunov_identity_check(const Problem& problem, const std::vector<std::size_t>& dims,
                                       std::size_t samples, std::optional<double> xi_opt, const QuadratureCfg& cfg,
                                       std::uint64_t seed, double tolerance, double margin) {
    const DeepArch arch(dims);
    if (arch.output_dim() != 1 || arch.input_dim() != problem.box.dim()) {
        throw DimensionMismatch("identity check needs matching input dimension and scalar output");
    }
    const double L = static_cast<double>(arch.depth());
    const double xi = xi_opt ? *xi_opt : best_constant(problem, cfg).xi;
    IdentityReport report;
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::size_t attempts = 0;
    while (report.accepted < samples) {
        if (++attempts > 50 * samples + 100) {
            throw std::runtime_error("identity check: filtered-sample shortfall");
        }
        auto params = DeepParams::zeros(arch);
        for (auto& v : params.values()) {
            v = normal(rng);
        }
        const auto nodes = risk_nodes(params, problem, cfg);
        double closest = std::numeric_limits<double>::infinity();
        for (std::size_t q = 0; q < nodes.size(); ++q) {
            closest = std::min(closest, hidden_margin(params, nodes.point(q)));
        }
        if (closest < margin) {
            report.rejected += 1;
            continue;
        }
        report.accepted += 1;
        std::vector<double> ys(nodes.size());
        double rhs = 0.0;
        double residual_mass = 0.0;
        for (std::size_t q = 0; q < nodes.size(); ++q) {
            const auto x = nodes.point(q);
            ys[q] = problem.target(x);
            const double N = realize(params, x)[0];
            rhs += nodes.weights[q] * (N - ys[q]) * (N - xi);
            residual_mass += nodes.weights[q] * (N - ys[q]);
        }
        rhs *= 4.0 * L;
        const auto G = weighted_risk_and_gradient(params, nodes, ys).gradient;
        const std::array<double, 1> xs{xi};
        const auto gv = lyapunov_gradient(params, xs);
        double lhs = 0.0;
        for (std::size_t k = 0; k < G.size(); ++k) {
            lhs += gv[k] * G[k];
        }
        report.max_error = std::max(report.max_error, std::abs(lhs - rhs) / std::max(std::abs(rhs), 1e-300));

        // Shifting xi by delta moves both sides by -4L delta int (N - f) dmu.
        const double delta = normal(rng);
        const std::array<double, 1> shifted{xi + delta};
        const auto gv2 = lyapunov_gradient(params, shifted);
        double lhs2 = 0.0;
        for (std::size_t k = 0; k < G.size(); ++k) {
            lhs2 += gv2[k] * G[k];
        }
        const double expected = -4.0 * L * delta * residual_mass;
        report.max_shift_error =
            std::max(report.max_shift_error, std::abs((lhs2 - lhs) - expected) / std::max(std::abs(expected), 1e-300));
    }
    report.passed = report.max_error <= tolerance && report.max_shift_error <= tolerance;
    return report;
}

nlohmann::json LyapunovRunReport::to_json() const {
    nlohmann::json snaps = nlohmann::json::array();
    for (const auto& s : snapshots) {
        snaps.push_back({{"step", s.step}, {"v", s.v}, {"risk", s.risk}, {"norm", s.norm}});
    }
    nlohmann::json j{{"xi", xi},
                     {"nu", nu},
                     {"epsilon", epsilon},
                     {"gamma", gamma},
                     {"threshold", threshold},
                     {"below_threshold", below_threshold},
                     {"sandwich_ok", sandwich_ok},
                     {"v_monotone", v_monotone},
                     {"min_risk", min_risk},
                     {"reached", reached},
                     {"norm_bound_ok", norm_bound_ok},
                     {"snapshots", snaps},
                     {"warnings", warnings},
                     {"passed", passed}};
    j["first_hit"] = first_hit ? nlohmann::json(*first_hit) : nlohmann::json(nullptr);
    return j;
}

LyapunovRunReport lyapunov_gd_run(const Problem& problem, const LyapunovOptions& options, const QuadratureCfg& cfg,
                                  std::uint64_t seed) {
    const DeepArch arch(options.dims);
    if (arch.output_dim() != 1 || arch.input_dim() != problem.box.dim()) {
        throw DimensionMismatch("Lyapunov run needs matching input dimension and scalar output");
    }
    if (!(options.epsilon > 0.0)) {
        throw std::invalid_argument("epsilon must be positive");
    }
    const double L = static_cast<double>(arch.depth());
    const auto bc = best_constant(problem, cfg);
    const double mass = problem.measure.total_mass(problem.box);
    LyapunovRunReport report;
    report.xi = options.xi ? *options.xi : bc.xi;
    // nu = int (f - xi)^2 dmu, which splits around the mean
    report.nu = bc.nu + mass * (report.xi - bc.xi) * (report.xi - bc.xi);
    report.epsilon = options.epsilon;
    report.gamma = options.flow_proxy ? 1e-4 : options.learning_rate;
    const std::array<double, 1> xi{report.xi};

    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto params = DeepParams::zeros(arch);
    for (auto& v : params.values()) {
        v = options.init_scale * normal(rng);
    }
    const double v0 = lyapunov_v(params, xi);
    report.threshold =
        options.epsilon / (2.0 * (report.nu + options.epsilon) * lyapunov_p(arch, problem.box, mass, xi, v0));
    report.below_threshold = report.gamma < report.threshold;
    if (!report.below_threshold) {
        report.warnings.push_back("learning rate is not below the a-priori threshold; monotonicity and reach are observations only");
    }
    if (options.flow_proxy) {
        report.warnings.push_back("gradient-flow proxy: explicit Euler steps with gamma = 1e-4");
    }
    const double norm_cap = 2.0 * v0 + 4.0 * L * L * report.xi * report.xi;

    double prev_v = v0;
    bool hit_before_prev = false;
    report.min_risk = std::numeric_limits<double>::infinity();
    for (std::uint64_t n = 0; n <= options.steps; ++n) {
        const auto rg = risk_and_gradient(params, problem, cfg);
        const double v = lyapunov_v(params, xi);
        double theta2 = 0.0;
        for (double x : params.values()) {
            theta2 += x * x;
        }
        const bool sandwich =
            0.5 * theta2 - 2.0 * L * L * report.xi * report.xi <= v && v <= 2.0 * L * theta2 + L * report.xi * report.xi;
        report.sandwich_ok = report.sandwich_ok && sandwich;
        if (n > 0 && !hit_before_prev) {
            // rounding allowance for V itself
            report.v_monotone = report.v_monotone && v <= prev_v + 1e-13 * std::max(1.0, std::abs(prev_v));
        }
        if (!report.first_hit) {
            report.norm_bound_ok = report.norm_bound_ok && theta2 <= norm_cap;
        }
        if (!report.first_hit && rg.risk <= report.nu + options.epsilon) {
            report.first_hit = n;
        }
        hit_before_prev = report.first_hit.has_value();
        report.min_risk = std::min(report.min_risk, rg.risk);
        if (n % std::max<std::uint64_t>(1, options.cadence) == 0 || n == options.steps ||
            (report.first_hit && *report.first_hit == n)) {
            report.snapshots.push_back({n, v, rg.risk, std::sqrt(theta2)});
        }
        prev_v = v;
        if (n == options.steps) {
            break;
        }
        auto values = params.values();
        for (std::size_t k = 0; k < values.size(); ++k) {
            values[k] -= report.gamma * rg.gradient[k];
        }
    }
    report.reached = report.min_risk <= report.nu + options.epsilon;
    report.passed = report.sandwich_ok;
    if (report.below_threshold) {
        report.passed = report.passed && report.v_monotone && report.reached && report.norm_bound_ok;
    }
    return report;
}

} // namespace relulab
