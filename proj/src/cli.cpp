#include "relulab/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include <unistd.h>

#include "relulab/config.hpp"
#include "relulab/csv.hpp"
#include "relulab/errors.hpp"
#include "relulab/experiments.hpp"
#include "relulab/global_inf.hpp"
#include "relulab/json_util.hpp"
#include "relulab/gradient.hpp"
#include "relulab/report.hpp"
#include "relulab/risk.hpp"

namespace relulab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kOutDirEnv = "RELULAB_OUT_DIR";

const std::vector<std::string> kCommands{"risk",      "grad-check", "train",    "trap-prob", "sweep",
                                         "hierarchy", "embed",      "lyapunov", "report"};

struct Flags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> jobs;
    std::string theta;
    std::string manifest;
};

// Inputs beyond the config that a replay needs.
struct Inputs {
    json theta; // param vector or null
};

struct Outcome {
    bool passed = true;
};

PolishMethod polish_from(const ExperimentSpec& e) {
    const auto name = e.text("polish");
    if (name == "bfgs") {
        return PolishMethod::bfgs;
    }
    if (name == "gd") {
        return PolishMethod::gd;
    }
    throw ConfigError("$.experiment.polish", "expected 'bfgs' or 'gd'");
}

const ShallowArch& shallow_model(const RunConfig& cfg, const std::string& cmd) {
    if (!std::holds_alternative<ShallowArch>(cfg.model)) {
        throw ConfigError("$.model.type", "'" + cmd + "' needs a shallow model");
    }
    return std::get<ShallowArch>(cfg.model);
}

std::string fmt(double v) {
    return csv::number(v);
}

ParamVector theta_or_default(const RunConfig& cfg, const Inputs& in) {
    if (!in.theta.is_null()) {
        auto p = param_vector_from_json(in.theta, "$theta");
        const bool matches = std::visit(
            [&](const auto& params) {
                using P = std::decay_t<decltype(params)>;
                if constexpr (std::is_same_v<P, ShallowParams>) {
                    return params.input_dim() == cfg.problem.box.dim();
                } else {
                    return params.arch().input_dim() == cfg.problem.box.dim();
                }
            },
            p);
        if (!matches) {
            throw ConfigError("$theta.arch", "input dimension does not match the domain");
        }
        return p;
    }
    if (const auto* arch = std::get_if<ShallowArch>(&cfg.model)) {
        return sample_init(*arch, cfg.init, derive_seed(cfg.seed, 0));
    }
    const auto& arch = std::get<DeepArch>(cfg.model);
    auto p = DeepParams::zeros(arch);
    Rng rng(derive_seed(cfg.seed, 0));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : p.values()) {
        v = normal(rng);
    }
    return p;
}

Outcome cmd_risk(const RunConfig& cfg, const Inputs& in, RunWriter& w, std::ostream& out) {
    const auto theta = theta_or_default(cfg, in);
    const auto bc = best_constant(cfg.problem, cfg.quadrature);
    json j{{"quadrature", cfg.quadrature.fingerprint()}, {"seed", cfg.seed}, {"xi_star", bc.xi}, {"nu_star", bc.nu}};
    if (const auto* p = std::get_if<ShallowParams>(&theta)) {
        const auto est = risk_population_estimate(*p, cfg.problem, cfg.quadrature);
        j["risk"] = est.value;
        j["std_error"] = est.std_error;
        j["nodes"] = est.nodes;
        out << "risk = " << fmt(est.value);
        if (est.std_error > 0.0) {
            out << " +- " << fmt(est.std_error);
        }
        out << "  (quadrature " << est.fingerprint << ", " << est.nodes << " nodes)\n";
    } else {
        const auto& d = std::get<DeepParams>(theta);
        const double r = risk_population(d, cfg.problem, cfg.quadrature);
        j["risk"] = r;
        j["nodes"] = risk_nodes(d, cfg.problem, cfg.quadrature).size();
        out << "risk = " << fmt(r) << "  (quadrature " << cfg.quadrature.fingerprint() << ")\n";
    }
    j["theta"] = to_json(theta);
    w.add(w.write("risk.json", j.dump(2) + "\n"));
    return {};
}

Outcome cmd_grad_check(const RunConfig& cfg, RunWriter& w, std::ostream& out) {
    const auto& e = cfg.experiment;
    GradCheckOptions opts;
    opts.samples = e.u64("samples");
    opts.max_width = e.u64("max_width");
    opts.margin = e.real("margin");
    opts.tolerance = e.real("tolerance");
    opts.outer_tolerance = e.real("outer_tolerance");
    opts.batch_size = e.u64("batch_size");
    opts.r_values = e.real_list("r_values");
    const auto report = gradient_check(cfg.problem, cfg.quadrature, opts, cfg.seed);
    auto j = report.to_json();
    j["quadrature"] = cfg.quadrature.fingerprint();
    j["seed"] = cfg.seed;
    w.add(w.write("grad_check.json", j.dump(2) + "\n"));
    out << "accepted " << report.accepted << " (rejected " << report.rejected << ")\n"
        << "max relative error: empirical " << fmt(report.max_error_empirical) << ", population "
        << fmt(report.max_error_population) << ", outer " << fmt(report.max_error_outer) << "\n"
        << "smoothed family discrepancies:";
    for (double v : report.reference_discrepancy) {
        out << ' ' << fmt(v);
    }
    out << "\n" << (report.passed ? "PASS" : "FAIL") << "\n";
    return {report.passed};
}

Outcome cmd_train(const RunConfig& cfg, RunWriter& w, std::ostream& out) {
    const auto& e = cfg.experiment;
    const auto& arch = shallow_model(cfg, "train");
    const auto& problem = cfg.problem;
    const auto theta0 = sample_init(arch, cfg.init, derive_seed(cfg.seed, 0));
    const std::size_t batch_size = e.u64("batch_size");
    const std::uint64_t run_seed = derive_seed(cfg.seed, 1);
    RunOptions opts;
    opts.steps = e.u64("steps");
    opts.cadence = e.u64("cadence");
    opts.keep_theta = e.flag("keep_theta");
    opts.annotate = [&](Snapshot& snap) {
        const ShallowParams p(arch, snap.theta);
        snap.risk = risk_population(p, problem, cfg.quadrature);
        snap.empirical_risk = risk_empirical(p, noisy_pairs(problem, batch_size, derive_seed(run_seed, snap.step)));
        snap.inactive = inactive_set(p, problem.box);
        snap.trapped = strictly_trapped_set(p, problem.box);
    };
    GradientSource source = [&](std::span<const double> theta, std::uint64_t n, std::uint64_t seed) {
        const ShallowParams p(arch, {theta.begin(), theta.end()});
        return gen_gradient_empirical(p, noisy_pairs(problem, batch_size, derive_seed(seed, n)));
    };
    const auto trace = run(cfg.optimizer, theta0.vector(), source, opts, run_seed);
    w.add(w.write("trace.jsonl", trace_jsonl(trace)));
    const auto& last = trace.snapshots.back();
    json j{{"steps", opts.steps},
           {"final_risk", *last.risk},
           {"final_gradient_norm", last.gradient_norm},
           {"inactive", last.inactive},
           {"trapped", last.trapped},
           {"trapped_at_init", trace.snapshots.front().trapped},
           {"final_theta", to_json(ParamVector(ShallowParams(arch, trace.final_theta)))},
           {"quadrature", cfg.quadrature.fingerprint()},
           {"seed", cfg.seed}};
    w.add(w.write("summary.json", j.dump(2) + "\n"));
    out << "final risk " << fmt(*last.risk) << " after " << opts.steps << " steps, gradient norm "
        << fmt(last.gradient_norm) << ", " << last.trapped.size() << " trapped neuron(s)\n";
    return {};
}

Outcome cmd_trap_prob(const RunConfig& cfg, RunWriter& w, std::ostream& out) {
    const std::size_t n = cfg.experiment.u64("samples");
    const auto tp = trap_probability(cfg.init, cfg.problem.box, n, cfg.seed, cfg.jobs);
    json j{{"p_hat", tp.p_hat},
           {"std_error", tp.std_error},
           {"samples", tp.samples},
           {"init", cfg.init.to_json()},
           {"seed", cfg.seed}};
    w.add(w.write("trap_prob.json", j.dump(2) + "\n"));
    out << "p_hat = " << fmt(tp.p_hat) << " +- " << fmt(tp.std_error) << "  (" << tp.samples << " samples)\n";
    return {};
}

Outcome cmd_sweep(const RunConfig& cfg, RunWriter& w, std::ostream& out) {
    const auto& e = cfg.experiment;
    const auto& arch = shallow_model(cfg, "sweep");
    SweepOptions opts;
    opts.widths = e.u64_list("widths");
    opts.trials = e.u64("trials");
    opts.steps = e.u64("steps");
    opts.batch_size = e.u64("batch_size");
    opts.cadence = e.u64("cadence");
    opts.optimizer = cfg.optimizer;
    opts.init = cfg.init;
    opts.activation = arch.activation;
    opts.quadrature = cfg.quadrature;
    opts.inf.restarts = e.u64("restarts");
    opts.inf.adam_steps = e.u64("adam_steps");
    opts.inf.polish = polish_from(e);
    opts.epsilon = e.optional_real("epsilon");
    opts.trap_samples = e.u64("trap_samples");
    opts.band = e.real("band");
    opts.keep_traces = e.flag("keep_traces");
    opts.jobs = cfg.jobs;
    const auto report = nonconvergence_sweep(cfg.problem, opts, cfg.seed);

    w.add(w.write("sweep.csv", report.to_csv()));
    auto j = report.to_json();
    json trials = json::array();
    for (const auto& t : report.trials) {
        trials.push_back({{"width", t.width},
                          {"trial", t.trial},
                          {"seed", t.seed},
                          {"trapped_at_init", t.trapped_at_init},
                          {"final_risk", t.final_risk},
                          {"final_gradient_norm", t.final_gradient_norm},
                          {"nonconverged", t.nonconverged},
                          {"clarke", to_string(t.clarke)}});
        if (opts.keep_traces) {
            w.add(w.write("traces/w" + std::to_string(t.width) + "_t" + std::to_string(t.trial) + ".jsonl",
                          trace_jsonl(t.trace)));
        }
    }
    j["trials"] = trials;
    w.add(w.write("sweep.json", j.dump(2) + "\n"));

    out << "p_hat = " << fmt(report.p_hat) << " +- " << fmt(report.p_std_error) << "\n";
    for (const auto& r : report.rows) {
        out << "H=" << r.width << ": trapped " << r.trapped_trials << "/" << r.trials << " (predicted "
            << fmt(r.predicted) << ", z " << fmt(r.z_score) << "), m_hat " << fmt(r.m_hat) << ", eps "
            << fmt(r.epsilon) << ", above m_hat+eps " << r.nonconverged_trials << ", trapped above "
            << r.trapped_above << "/" << r.trapped_trials << ", clarke violations " << r.clarke_violations << "\n";
    }
    for (const auto& msg : report.warnings) {
        out << "warning: " << msg << "\n";
    }
    out << (report.passed ? "PASS" : "FAIL") << "\n";
    return {report.passed};
}

Outcome cmd_hierarchy(const RunConfig& cfg, RunWriter& w, std::ostream& out) {
    const auto& e = cfg.experiment;
    const auto& arch = shallow_model(cfg, "hierarchy");
    HierarchyOptions opts;
    opts.max_width = e.u64("max_width");
    opts.inf.restarts = e.u64("restarts");
    opts.inf.adam_steps = e.u64("adam_steps");
    opts.inf.polish = polish_from(e);
    opts.inf.activation = arch.activation;
    opts.inf.quadrature = cfg.quadrature;
    opts.inf.jobs = cfg.jobs;
    opts.improve_candidates = e.u64("improve_candidates");
    opts.margin = e.real("margin");
    const auto report = hierarchy_experiment(cfg.problem, opts, cfg.seed);
    w.add(w.write("hierarchy.csv", report.to_csv()));
    auto j = report.to_json();
    j["quadrature"] = cfg.quadrature.fingerprint();
    j["seed"] = cfg.seed;
    w.add(w.write("hierarchy.json", j.dump(2) + "\n"));
    for (const auto& l : report.levels) {
        out << "m_hat_" << l.width << " = " << fmt(l.m_hat) << "  (hits " << l.hits << "/" << l.restarts
            << ", improved to " << fmt(l.improved_risk) << ")\n";
    }
    out << "min margin " << fmt(report.min_margin) << ", embedding " << (report.embedding_ok ? "exact" : "BROKEN")
        << ", clarke " << report.clarke_violations << "/" << report.clarke_checked << " violations\n";
    for (const auto& msg : report.warnings) {
        out << "warning: " << msg << "\n";
    }
    out << (report.passed ? "PASS" : "FAIL") << "\n";
    return {report.passed};
}

Outcome cmd_embed(const RunConfig& cfg, const Inputs& in, RunWriter& w, std::ostream& out) {
    if (in.theta.is_null()) {
        throw ConfigError("$theta", "embed needs --theta");
    }
    const auto theta = theta_or_default(cfg, in);
    json j{{"quadrature", cfg.quadrature.fingerprint()}};
    ParamVector wide;
    double before = 0.0;
    double after = 0.0;
    if (const auto* p = std::get_if<ShallowParams>(&theta)) {
        const std::size_t n = cfg.experiment.u64("new_width");
        if (n < p->width()) {
            throw ConfigError("$.experiment.new_width", "must be at least the current width");
        }
        const auto e = embed_shallow(*p, n);
        before = risk_population(*p, cfg.problem, cfg.quadrature);
        after = risk_population(e, cfg.problem, cfg.quadrature);
        wide = e;
    } else {
        const auto& d = std::get<DeepParams>(theta);
        const auto dims = cfg.experiment.u64_list("new_dims");
        DeepParams e;
        try {
            e = embed_deep(d, dims);
        } catch (const DimensionMismatch& ex) {
            throw ConfigError("$.experiment.new_dims", ex.what());
        }
        before = risk_population(d, cfg.problem, cfg.quadrature);
        after = risk_population(e, cfg.problem, cfg.quadrature);
        wide = e;
    }
    j["risk_before"] = before;
    j["risk_after"] = after;
    j["difference"] = after - before;
    w.add(w.write("embed.json", j.dump(2) + "\n"));
    w.add(w.write("embedded.json", to_json(wide).dump(2) + "\n"));
    out << "risk " << fmt(before) << " -> " << fmt(after) << "\n";
    return {};
}

Outcome cmd_lyapunov(const RunConfig& cfg, RunWriter& w, std::ostream& out) {
    const auto& e = cfg.experiment;
    std::vector<std::size_t> dims;
    if (const auto* a = std::get_if<DeepArch>(&cfg.model)) {
        dims = a->dims;
    } else {
        const auto& s = std::get<ShallowArch>(cfg.model);
        dims = {s.input_dim, s.width, 1};
    }
    const auto sandwich = lyapunov_sandwich_check(dims, e.u64("pairs"), derive_seed(cfg.seed, 0));
    const auto identity = lyapunov_identity_check(cfg.problem, dims, e.u64("identity_samples"), e.optional_real("xi"),
                                                  cfg.quadrature, derive_seed(cfg.seed, 1));
    LyapunovOptions opts;
    opts.dims = dims;
    opts.learning_rate = e.real("learning_rate");
    opts.steps = e.u64("steps");
    opts.epsilon = e.real("epsilon");
    opts.xi = e.optional_real("xi");
    opts.init_scale = e.real("init_scale");
    opts.cadence = e.u64("cadence");
    opts.flow_proxy = e.flag("flow_proxy");
    const auto run_report = lyapunov_gd_run(cfg.problem, opts, cfg.quadrature, derive_seed(cfg.seed, 2));
    json j{{"sandwich", {{"pairs", sandwich.pairs}, {"violations", sandwich.violations}, {"passed", sandwich.passed}}},
           {"identity",
            {{"accepted", identity.accepted},
             {"rejected", identity.rejected},
             {"max_error", identity.max_error},
             {"max_shift_error", identity.max_shift_error},
             {"passed", identity.passed}}},
           {"run", run_report.to_json()},
           {"quadrature", cfg.quadrature.fingerprint()},
           {"seed", cfg.seed}};
    w.add(w.write("lyapunov.json", j.dump(2) + "\n"));
    out << "sandwich: " << sandwich.violations << " violations in " << sandwich.pairs << " pairs\n"
        << "identity: max relative error " << fmt(identity.max_error) << " over " << identity.accepted << " samples\n"
        << "gd: gamma " << fmt(run_report.gamma) << " (threshold " << fmt(run_report.threshold) << "), V monotone "
        << (run_report.v_monotone ? "yes" : "no") << ", min risk " << fmt(run_report.min_risk) << " vs nu+eps "
        << fmt(run_report.nu + run_report.epsilon) << "\n";
    for (const auto& msg : run_report.warnings) {
        out << "warning: " << msg << "\n";
    }
    const bool passed = sandwich.passed && identity.passed && run_report.passed;
    out << (passed ? "PASS" : "FAIL") << "\n";
    return {passed};
}

Outcome dispatch(const std::string& cmd, const RunConfig& cfg, const Inputs& in, RunWriter& w, std::ostream& out) {
    if (cmd == "risk") {
        return cmd_risk(cfg, in, w, out);
    }
    if (cmd == "grad-check") {
        return cmd_grad_check(cfg, w, out);
    }
    if (cmd == "train") {
        return cmd_train(cfg, w, out);
    }
    if (cmd == "trap-prob") {
        return cmd_trap_prob(cfg, w, out);
    }
    if (cmd == "sweep") {
        return cmd_sweep(cfg, w, out);
    }
    if (cmd == "hierarchy") {
        return cmd_hierarchy(cfg, w, out);
    }
    if (cmd == "embed") {
        return cmd_embed(cfg, in, w, out);
    }
    if (cmd == "lyapunov") {
        return cmd_lyapunov(cfg, w, out);
    }
    throw std::logic_error("unhandled command " + cmd);
}

// Runs a command, writes its outputs plus the manifest.
Outcome execute(const std::string& cmd, const RunConfig& cfg, const Inputs& in, const fs::path& dir, std::ostream& out) {
    RunWriter writer(dir);
    const auto started = std::chrono::steady_clock::now();
    const auto outcome = dispatch(cmd, cfg, in, writer, out);
    ManifestInfo info;
    info.command = cmd;
    info.inputs = in.theta.is_null() ? json::object() : json{{"theta", in.theta}};
    info.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const auto manifest = write_manifest(writer, cfg, info);
    out << "manifest: " << manifest.string() << "\n";
    return outcome;
}

RunConfig resolve_config(const std::string& cmd, const Flags& flags) {
    RunConfig cfg;
    if (!flags.config.empty()) {
        const auto raw = read_json_file(flags.config);
        cfg = config_from_json(raw);
        if (!raw.contains("experiment")) {
            cfg.experiment = default_experiment(cmd);
        } else if (cfg.experiment.kind != cmd) {
            throw ConfigError("$.experiment.kind",
                              "'" + cfg.experiment.kind + "' does not match the subcommand '" + cmd + "'");
        }
    } else {
        cfg.experiment = default_experiment(cmd);
    }
    if (flags.seed) {
        cfg.seed = *flags.seed;
    }
    if (flags.jobs) {
        if (*flags.jobs == 0) {
            throw ConfigError("--jobs", "must be at least 1");
        }
        cfg.jobs = *flags.jobs;
    }
    return cfg;
}

fs::path output_dir(const Flags& flags, const RunConfig& cfg) {
    if (!flags.out.empty()) {
        return flags.out;
    }
    if (cfg.output_dir) {
        return *cfg.output_dir;
    }
    if (const char* env = std::getenv(kOutDirEnv); env && *env) {
        return env;
    }
    return "relulab-out";
}

fs::path make_temp_dir() {
    std::string tmpl = (fs::temp_directory_path() / "relulab-replay-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) {
        throw Error("cannot create a temporary directory");
    }
    return tmpl;
}

int cmd_report(const Flags& flags, std::ostream& out, std::ostream& err) {
    if (flags.manifest.empty()) {
        throw ConfigError("--manifest", "report needs --manifest PATH");
    }
    const fs::path manifest_path = flags.manifest;
    const auto manifest = read_json_file(manifest_path);
    using namespace json_util;
    const auto command = as_string(required(manifest, "$", "command"), "$.command");
    if (command == "report" ||
        std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end()) {
        throw ConfigError("$.command", "not a replayable command: '" + command + "'");
    }
    auto cfg = config_from_json(required(manifest, "$", "config"), "$.config");
    if (flags.jobs) {
        cfg.jobs = *flags.jobs;
    }
    Inputs in;
    if (manifest.contains("inputs") && manifest["inputs"].contains("theta")) {
        in.theta = manifest["inputs"]["theta"];
    }
    const std::string recorded_fp = string_or(manifest, "$", "fingerprint", "");
    if (!recorded_fp.empty() && recorded_fp != cfg.fingerprint()) {
        err << "warning: config fingerprint differs from the manifest (" << recorded_fp << " vs " << cfg.fingerprint()
            << ")\n";
    }
    const bool temporary = flags.out.empty();
    const fs::path dir = temporary ? make_temp_dir() : fs::path(flags.out);
    std::ostringstream sink;
    execute(command, cfg, in, dir, sink);

    const fs::path original_dir = manifest_path.parent_path();
    std::size_t differing = 0;
    std::size_t compared = 0;
    for (const auto& f : required(manifest, "$", "files")) {
        const auto rel = f.at("path").get<std::string>();
        const auto expected_hash = f.at("hash").get<std::string>();
        std::string replayed;
        try {
            replayed = read_file(dir / rel);
        } catch (const Error&) {
            out << "MISSING  " << rel << "\n";
            ++differing;
            continue;
        }
        bool same = file_hash(replayed) == expected_hash;
        // Byte comparison when the original output is still next to the manifest.
        if (fs::exists(original_dir / rel)) {
            same = same && read_file(original_dir / rel) == replayed;
        }
        ++compared;
        differing += same ? 0 : 1;
        out << (same ? "same     " : "DIFFERS  ") << rel << "\n";
    }
    if (temporary) {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
    out << compared << " file(s) compared, " << differing << " differ\n";
    return differing == 0 ? 0 : 1;
}

} // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"relulab: ReLU network landscape experiments"};
    app.name(args.empty() ? "relulab" : args.front());
    app.require_subcommand(1);
    Flags flags;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", flags.config, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--out", flags.out, "output directory (default: config output_dir, then $RELULAB_OUT_DIR)");
        sub->add_option("--seed", seed, "base seed (overrides the config)");
        sub->add_option("--jobs", jobs, "worker threads");
    };
    for (const auto& name : kCommands) {
        auto* sub = app.add_subcommand(name);
        if (name == "report") {
            sub->description("replay a manifest and compare its outputs byte for byte");
            sub->add_option("--manifest", flags.manifest, "manifest.json of an earlier run")->required();
            sub->add_option("--out", flags.out, "keep the replay in this directory");
            sub->add_option("--jobs", jobs, "worker threads");
            continue;
        }
        add_common(sub);
        if (name == "risk" || name == "embed") {
            sub->add_option("--theta", flags.theta, "parameter vector JSON")->check(CLI::ExistingFile);
        }
    }

    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) {
        rev.pop_back();
    }
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    }
    const auto* sub = app.get_subcommands().front();
    const std::string cmd = sub->get_name();
    if (cmd != "report" && sub->count("--seed") > 0) {
        flags.seed = seed;
    }
    if (sub->count("--jobs") > 0) {
        flags.jobs = jobs;
    }

    try {
        if (cmd == "report") {
            return cmd_report(flags, out, err);
        }
        const auto cfg = resolve_config(cmd, flags);
        Inputs in;
        if (!flags.theta.empty()) {
            in.theta = read_json_file(flags.theta);
            param_vector_from_json(in.theta, "$theta");
        }
        const auto outcome = execute(cmd, cfg, in, output_dir(flags, cfg), out);
        return outcome.passed ? 0 : 1;
    } catch (const ConfigError& e) {
        err << "config error at " << e.what() << "\n";
        return 2;
    } catch (const PreconditionFailed& e) {
        err << "precondition failed: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    return cli_main(std::vector<std::string>(argv, argv + argc), out, err);
}

} // namespace relulab
