#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "relulab/cli.hpp"
#include "relulab/config.hpp"
#include "relulab/errors.hpp"
#include "relulab/report.hpp"

using namespace relulab;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "relulab");
    std::ostringstream out, err;
    const int code = cli_main(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("relulab-test-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write(const fs::path& file, const std::string& text) {
    std::ofstream(file) << text;
    return file;
}

const char* kProblem = R"("problem": {"domain": {"a": 0, "b": 1}, "target": {"kind": "square"}})";

} // namespace

TEST_CASE("trap-prob prints p_hat near 3/8") {
    const auto dir = scratch("trap");
    const auto cfg = write(dir / "c.json", std::string("{") + kProblem +
                                               R"(, "init": {"preset": "normal-kappa-0.5"},
                                                  "experiment": {"kind": "trap-prob", "samples": 200000}})");
    const auto r = cli({"trap-prob", "--config", cfg.string(), "--out", (dir / "o").string()});
    REQUIRE(r.code == 0);
    const auto pos = r.out.find("p_hat = ");
    REQUIRE(pos != std::string::npos);
    const double p = std::stod(r.out.substr(pos + 8));
    CHECK(std::abs(p - 0.375) < 4.0 * std::sqrt(0.375 * 0.625 / 200000));
    CHECK(fs::exists(dir / "o" / "manifest.json"));
    CHECK(fs::exists(dir / "o" / "trap_prob.json"));
}

TEST_CASE("risk of the width-0 best constant prints nu*") {
    const auto dir = scratch("risk");
    const auto cfg = write(dir / "c.json", std::string("{") + kProblem + R"(, "model": {"type": "shallow", "width": 0}})");
    const auto theta = write(dir / "t.json",
                             R"({"arch": {"type": "shallow", "input_dim": 1, "width": 0}, "values": [0.3333333333333333]})");
    const auto r = cli({"risk", "--config", cfg.string(), "--theta", theta.string(), "--out", (dir / "o").string()});
    REQUIRE(r.code == 0);
    const double v = std::stod(r.out.substr(r.out.find("risk = ") + 7));
    CHECK(v == doctest::Approx(4.0 / 45.0).epsilon(1e-14));
}

TEST_CASE("malformed configs exit 2 with a schema path") {
    const auto dir = scratch("bad");
    auto bad = write(dir / "a.json", std::string("{") + kProblem + R"(, "optimizer": {"kind": "adam", "learning_rat": 1}})");
    auto r = cli({"train", "--config", bad.string(), "--out", (dir / "o").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("$.optimizer.learning_rat") != std::string::npos);

    bad = write(dir / "b.json", R"({"problem": {"domain": {"a": 1, "b": 0}, "target": {"kind": "square"}}})");
    r = cli({"risk", "--config", bad.string(), "--out", (dir / "o").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("$.problem.domain") != std::string::npos);

    bad = write(dir / "c.json", std::string("{") + kProblem + R"(, "experiment": {"kind": "sweep", "trials": -3}})");
    r = cli({"sweep", "--config", bad.string(), "--out", (dir / "o").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("$.experiment.trials") != std::string::npos);

    bad = write(dir / "d.json", std::string("{") + kProblem + R"(, "experiment": {"kind": "hierarchy"}})");
    r = cli({"sweep", "--config", bad.string(), "--out", (dir / "o").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("$.experiment.kind") != std::string::npos);

    bad = write(dir / "e.json", "{ not json");
    r = cli({"risk", "--config", bad.string()});
    CHECK(r.code == 2);

    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({}).code == 2);
}

TEST_CASE("config round trip and fingerprint") {
    const auto j = nlohmann::json::parse(std::string("{") + kProblem + R"(,
        "model": {"type": "shallow", "width": 3, "activation": {"kind": "clipped_relu", "clip": 2}},
        "optimizer": {"kind": "adam", "learning_rate": {"kind": "power", "value": 0.01, "rho": 0.5},
                      "momentum": 0.9, "second_moment": 0.99, "epsilon": 1e-7},
        "init": {"density": "uniform", "kappa": 0.25},
        "experiment": {"kind": "sweep", "widths": [2, 5], "epsilon": 0.001},
        "output_dir": "somewhere", "seed": 42, "jobs": 2})");
    const auto a = config_from_json(j);
    const auto b = config_from_json(a.to_json());
    CHECK(a.to_json() == b.to_json());
    CHECK(a.fingerprint() == b.fingerprint());

    // non-semantic fields do not move the fingerprint
    auto c = a;
    c.jobs = 7;
    c.output_dir = "elsewhere";
    CHECK(c.fingerprint() == a.fingerprint());

    // every semantic change does
    std::vector<nlohmann::json> variants;
    auto mutate = [&](auto fn) {
        auto m = j;
        fn(m);
        variants.push_back(m);
    };
    mutate([](auto& m) { m["seed"] = 43; });
    mutate([](auto& m) { m["problem"]["domain"]["b"] = 2; });
    mutate([](auto& m) { m["problem"]["target"] = {{"kind", "sine"}, {"frequency", 3}}; });
    mutate([](auto& m) { m["model"]["width"] = 4; });
    mutate([](auto& m) { m["optimizer"]["epsilon"] = 1e-6; });
    mutate([](auto& m) { m["init"]["kappa"] = 0.5; });
    mutate([](auto& m) { m["experiment"]["trials"] = 5; });
    mutate([](auto& m) { m["quadrature"] = {{"order", 10}}; });
    for (const auto& v : variants) {
        CHECK(config_from_json(v).fingerprint() != a.fingerprint());
    }
}

TEST_CASE("experiment defaults are explicit") {
    const auto e = default_experiment("sweep");
    CHECK(e.u64_list("widths") == std::vector<std::size_t>{4, 8, 16});
    CHECK(e.u64("trials") == 200);
    CHECK_FALSE(e.optional_real("epsilon").has_value());
    CHECK_THROWS_AS(experiment_from_json(nlohmann::json{{"kind", "sweep"}, {"bogus", 1}}, "$.experiment"), ConfigError);
}

TEST_CASE("sweep manifest replays byte for byte") {
    const auto dir = scratch("replay");
    const auto cfg = write(dir / "c.json", std::string("{") + kProblem + R"(, "seed": 5,
        "experiment": {"kind": "sweep", "widths": [4, 8], "trials": 4, "steps": 100, "cadence": 25,
                       "restarts": 3, "adam_steps": 100, "trap_samples": 5000}})");
    const auto out = dir / "o";
    const auto r = cli({"sweep", "--config", cfg.string(), "--out", out.string(), "--jobs", "2"});
    REQUIRE(r.code != 2);
    REQUIRE(fs::exists(out / "sweep.csv"));
    CHECK(fs::exists(out / "traces" / "w8_t3.jsonl"));
    const auto replay = cli({"report", "--manifest", (out / "manifest.json").string()});
    CHECK(replay.code == 0);
    CHECK(replay.out.find("0 differ") != std::string::npos);

    // tampering is detected
    {
        std::ofstream(out / "sweep.csv", std::ios::app) << "x";
    }
    CHECK(cli({"report", "--manifest", (out / "manifest.json").string()}).code == 1);
}

TEST_CASE("output directory comes from the environment when not given") {
    const auto dir = scratch("env");
    const auto cfg = write(dir / "c.json", std::string("{") + kProblem + R"(, "experiment": {"kind": "trap-prob", "samples": 1000}})");
    setenv("RELULAB_OUT_DIR", (dir / "from-env").string().c_str(), 1);
    const auto r = cli({"trap-prob", "--config", cfg.string()});
    unsetenv("RELULAB_OUT_DIR");
    CHECK(r.code == 0);
    CHECK(fs::exists(dir / "from-env" / "manifest.json"));
}
