// One PASS/FAIL line per acceptance criterion. Exit status is the number of failures.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include "relulab/cli.hpp"
#include "relulab/experiments.hpp"
#include "relulab/landscape.hpp"
#include "relulab/report.hpp"
#include "relulab/rng.hpp"

using namespace relulab;
namespace fs = std::filesystem;

namespace {

int failures = 0;

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

void verdict(int id, bool ok, double seconds, double budget, const std::string& detail) {
    const bool in_time = budget <= 0.0 || seconds < budget;
    const bool pass = ok && in_time;
    if (!pass) {
        ++failures;
    }
    std::printf("criterion %2d: %s  (%.2f s%s)  %s\n", id, pass ? "PASS" : "FAIL", seconds,
                in_time ? "" : ", over budget", detail.c_str());
    std::fflush(stdout);
}

template <class... A>
std::string fmt(const char* f, A... a) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

Problem square_on_unit() {
    return Problem{DomainBox(0.0, 1.0, 1), Measure::uniform(), Target::square()};
}

} // namespace

int main() {
    const auto problem = square_on_unit();
    const auto init = InitSpec::preset("normal-kappa-0.5");
    const std::uint64_t seed = 20240601;

    // 1
    double p_hat = 0.375;
    {
        Timer t;
        const auto p = trap_probability(InitSpec::preset("normal-unscaled"), problem.box, 1000000, seed);
        p_hat = p.p_hat;
        const double se = std::sqrt(0.375 * 0.625 / 1e6);
        const double z = (p.p_hat - 0.375) / se;
        verdict(1, std::abs(z) <= 4.0, t.seconds(), 10.0, fmt("p_hat %.6f, z %.2f", p.p_hat, z));
    }

    // 2
    {
        Timer t;
        const auto rows = trap_frequency_law(init, problem.box, {2, 4, 8, 16}, 10000, p_hat, derive_seed(seed, 2));
        bool ok = rows.size() == 4;
        std::string detail;
        for (const auto& r : rows) {
            ok = ok && r.within_band && r.scale_invariant;
            detail += fmt("H=%zu %.4f vs %.4f; ", r.width, r.fraction, r.predicted);
        }
        verdict(2, ok, t.seconds(), 60.0, detail);
    }

    // 3
    {
        Timer t;
        const auto r = trap_invariance_check(problem, 4, default_optimizer_suite(), 20, 500, 32, init, derive_seed(seed, 3));
        std::string detail;
        for (const auto& row : r.rows) {
            detail += fmt("%s %zu/%zu; ", to_string(row.kind).c_str(), row.frozen, row.runs);
        }
        verdict(3, r.passed && r.rows.size() == 5, t.seconds(), 60.0, detail);
    }

    // 4
    SweepReport sweep;
    {
        Timer t;
        SweepOptions o;
        o.widths = {4, 8, 16};
        o.trials = 200;
        o.steps = 5000;
        o.keep_traces = false;
        o.jobs = std::max(1u, std::thread::hardware_concurrency());
        sweep = nonconvergence_sweep(problem, o, seed);
        std::string detail;
        for (const auto& r : sweep.rows) {
            detail += fmt("H=%zu trapped %zu/%zu z %.2f above %zu; ", r.width, r.trapped_trials, r.trials, r.z_score,
                          r.trapped_above);
        }
        verdict(4, sweep.passed, t.seconds(), 600.0, detail);
    }

    // 5
    {
        Timer t;
        const auto r = gradient_check(problem, QuadratureCfg::default_for(1), GradCheckOptions{}, derive_seed(seed, 5));
        verdict(5, r.passed && r.accepted == 100, t.seconds(), 60.0,
                fmt("empirical %.2e population %.2e outer %.2e", r.max_error_empirical, r.max_error_population,
                    r.max_error_outer));
    }

    // 6
    {
        Timer t;
        const auto r = optimizer_algebra_check(50, derive_seed(seed, 6));
        verdict(6, r.passed, t.seconds(), 5.0,
                fmt("momentum %.2e adam %.2e zero-violations %zu", r.max_error_momentum, r.max_error_adam,
                    r.zero_violations));
    }

    // 7
    HierarchyReport hierarchy;
    {
        Timer t;
        HierarchyOptions o;
        o.inf.jobs = std::max(1u, std::thread::hardware_concurrency());
        hierarchy = hierarchy_experiment(problem, o, derive_seed(seed, 7));
        std::string detail;
        for (const auto& l : hierarchy.levels) {
            detail += fmt("m%zu %.6e; ", l.width, l.m_hat);
        }
        detail += fmt("min margin %.2e", hierarchy.min_margin);
        verdict(7, hierarchy.passed, t.seconds(), 300.0, detail);
    }

    // 8
    {
        std::size_t checked = hierarchy.clarke_checked, violations = hierarchy.clarke_violations;
        for (const auto& r : sweep.rows) {
            checked += r.clarke_checked;
            violations += r.clarke_violations;
        }
        verdict(8, violations == 0, 0.0, 0.0, fmt("%zu stationary points checked, %zu violations", checked, violations));
    }

    // 9
    {
        Timer t;
        const auto s = lyapunov_sandwich_check({1, 2, 1}, 1000, derive_seed(seed, 9, 0));
        const auto i = lyapunov_identity_check(problem, {1, 2, 1}, 50, std::nullopt, QuadratureCfg::default_for(1),
                                               derive_seed(seed, 9, 1));
        const auto g = lyapunov_gd_run(problem, LyapunovOptions{}, QuadratureCfg::default_for(1), derive_seed(seed, 9, 2));
        verdict(9, s.passed && i.passed && g.passed, t.seconds(), 120.0,
                fmt("sandwich %zu/%zu, identity err %.2e, V monotone %d, min risk %.6f vs %.6f", s.pairs - s.violations,
                    s.pairs, i.max_error, int(g.v_monotone), g.min_risk, g.nu + g.epsilon));
    }

    // 10
    {
        Timer t;
        const auto dir = fs::temp_directory_path() / "relulab-acceptance";
        fs::remove_all(dir);
        fs::create_directories(dir);
        std::ofstream(dir / "sweep.json") << R"({"problem": {"domain": {"a": 0, "b": 1}, "target": {"kind": "square"}},
            "seed": 7, "experiment": {"kind": "sweep", "widths": [4, 8], "trials": 20, "steps": 500, "cadence": 100,
            "restarts": 4, "adam_steps": 300, "trap_samples": 20000}})";
        std::ostringstream out, err;
        const int run = cli_main({"relulab", "sweep", "--config", (dir / "sweep.json").string(), "--out",
                                  (dir / "run").string(), "--jobs", "4"},
                                 out, err);
        std::ostringstream rout, rerr;
        const int replay = cli_main({"relulab", "report", "--manifest", (dir / "run" / "manifest.json").string(), "--out",
                                     (dir / "replay").string()},
                                    rout, rerr);
        const bool same_csv = fs::exists(dir / "replay" / "sweep.csv") &&
                              read_file(dir / "run" / "sweep.csv") == read_file(dir / "replay" / "sweep.csv");
        verdict(10, run != 2 && replay == 0 && same_csv, t.seconds(), 0.0,
                fmt("run exit %d, replay exit %d, csv identical %d", run, replay, int(same_csv)));
        if (replay != 0) {
            std::cerr << err.str() << rerr.str() << rout.str();
        }
    }

    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
