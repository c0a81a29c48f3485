#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "sbdlab/experiment.hpp"

using namespace sbdlab;
namespace fs = std::filesystem;

namespace {

const char* kKineticText = R"(
# logistic relaxation on a ring
[experiment]
kind = kinetic

[domain]
dim = 1
edge = 20.0
points = 32

[params]
mortality = 1.0

[kernel.birth]
shape = gaussian
amplitude = 1.1968268412042982   ; mass 3 at sigma 1
sigma = 1.0

[kernel.competition]
shape = gaussian
amplitude = 1.1398350868612364   ; mass 2 at sigma 0.7
sigma = 0.7

[initial]
kind = constant
value = 0.25

[run]
t_end = 1.0
dt = 0.002
store_every = 100
)";

std::string replace_once(std::string text, const std::string& from, const std::string& to) {
    const std::size_t at = text.find(from);
    REQUIRE(at != std::string::npos);
    return text.replace(at, from.size(), to);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("sbdlab_test_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("number formatting survives a round trip") {
    for (double v : {0.0, 1.0, -2.5, 0.1, 3.141592653589793, 1e-17, 6.02e23, -1.7976931348623157e308}) {
        const std::string s = format_number(v);
        CHECK(std::stod(s) == v);
    }
}

TEST_CASE("content hashes match the reference fnv1a vectors") {
    CHECK(content_hash("") == "fnv1a64:cbf29ce484222325");
    CHECK(content_hash("a") == "fnv1a64:af63dc4c8601ec8c");
    CHECK(content_hash("hello") == "fnv1a64:a430d84680aabd0b");
    CHECK(content_hash("x") != content_hash("y"));
}

TEST_CASE("configs parse into typed experiments") {
    const ExperimentConfig cfg = parse_config(kKineticText, "demo");
    CHECK(cfg.kind == ExperimentKind::kinetic);
    CHECK(cfg.domain.dim() == 1);
    CHECK(cfg.domain.edge() == 20.0);
    CHECK(cfg.domain.points_per_axis() == 32);
    CHECK(cfg.params.mortality == 1.0);
    CHECK(cfg.params.birth.shape == KernelShape::gaussian);
    CHECK(cfg.params.birth.sigma == 1.0);
    CHECK(cfg.initial.kind == InitialCondition::Kind::constant);
    CHECK(cfg.initial.value == 0.25);
    CHECK(cfg.run.t_end == 1.0);
    CHECK(cfg.run.dt == 0.002);
    CHECK(cfg.run.store_every == 100);
    CHECK(cfg.name == "demo");
    CHECK(cfg.config_hash.rfind("fnv1a64:", 0) == 0);
    CHECK_NOTHROW(dry_check(cfg));
}

TEST_CASE("config errors name the offending key") {
    auto message_of = [](const std::string& text) {
        try {
            parse_config(text, "bad");
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };

    // unknown keys anywhere are rejected
    std::string msg = message_of(std::string(kKineticText) + "\n[run]\nbogus_knob = 3\n");
    CHECK(msg.find("run.bogus_knob") != std::string::npos);

    // malformed number
    msg = message_of(replace_once(kKineticText, "t_end = 1.0", "t_end = ten"));
    CHECK(msg.find("run.t_end") != std::string::npos);

    // negative mortality caught by model validation under the params section
    msg = message_of(replace_once(kKineticText, "mortality = 1.0", "mortality = -1.0"));
    CHECK(msg.find("params") != std::string::npos);
    CHECK(msg.find("mortality") != std::string::npos);

    // missing required key
    msg = message_of(replace_once(kKineticText, "kind = constant\nvalue = 0.25", "kind = constant"));
    CHECK(msg.find("initial.value") != std::string::npos);

    // duplicate key
    msg = message_of(std::string(kKineticText) + "\n[domain]\ndim = 1\n");
    CHECK(msg.find("duplicate") != std::string::npos);
    CHECK(msg.find("domain.dim") != std::string::npos);

    // unknown experiment kind
    msg = message_of(replace_once(kKineticText, "kind = kinetic", "kind = frobnicate"));
    CHECK(msg.find("experiment.kind") != std::string::npos);

    // nonsense kernel shape
    msg = message_of(replace_once(kKineticText, "shape = gaussian", "shape = pyramid"));
    CHECK(msg.find("kernel.birth.shape") != std::string::npos);
}

TEST_CASE("deeper checks reject inconsistent run sections") {
    // kernel support exceeding half the box surfaces in dry_check
    std::string text = replace_once(kKineticText, "edge = 20.0", "edge = 5.0");
    const ExperimentConfig cfg = parse_config(text, "tight");
    CHECK_THROWS_AS(dry_check(cfg), PeriodizationOverlapError);

    // snapshot times must be increasing and inside [0, t_end]
    text = std::string(kKineticText) + "\n[run]\nsnapshot_times = 0.5, 0.25\n";
    CHECK_THROWS_AS(dry_check(parse_config(text, "order")), ConfigError);
    text = std::string(kKineticText) + "\n[run]\nsnapshot_times = 0.5, 2.0\n";
    CHECK_THROWS_AS(dry_check(parse_config(text, "range")), ConfigError);
}

TEST_CASE("kinetic runs write a complete, hashed manifest") {
    TempDir tmp("kinetic");
    const ExperimentConfig cfg = parse_config(kKineticText, "demo");
    RunOptions opts;
    opts.output_dir = (tmp.path / "out").string();
    const RunManifest man = run_experiment(cfg, opts);

    CHECK(man.kind == "kinetic");
    CHECK(man.certificates_passed);
    REQUIRE(man.outputs.size() == 2);  // trajectory.csv + summary.json
    for (const OutputRecord& rec : man.outputs) {
        const std::string bytes = slurp(fs::path(man.directory) / rec.path);
        CHECK(bytes.size() == rec.bytes);
        CHECK(content_hash(bytes) == rec.hash);
    }
    const std::string traj = slurp(fs::path(man.directory) / "trajectory.csv");
    CHECK(traj.rfind("t,i,rho\n", 0) == 0);
    const std::string summary = slurp(fs::path(man.directory) / "summary.json");
    CHECK(summary.find(cfg.config_hash) != std::string::npos);
    CHECK(summary.find("homogeneous_reference") != std::string::npos);
    CHECK(fs::exists(fs::path(man.directory) / "manifest.json"));
}

TEST_CASE("reruns are byte identical") {
    TempDir tmp("rerun");
    const ExperimentConfig cfg = parse_config(kKineticText, "demo");
    RunOptions a, b;
    a.output_dir = (tmp.path / "a").string();
    b.output_dir = (tmp.path / "b").string();
    const RunManifest ma = run_experiment(cfg, a);
    const RunManifest mb = run_experiment(cfg, b);
    REQUIRE(ma.outputs.size() == mb.outputs.size());
    for (std::size_t i = 0; i < ma.outputs.size(); ++i) {
        CHECK(ma.outputs[i].path == mb.outputs[i].path);
        CHECK(ma.outputs[i].hash == mb.outputs[i].hash);
        CHECK(slurp(fs::path(ma.directory) / ma.outputs[i].path) ==
              slurp(fs::path(mb.directory) / mb.outputs[i].path));
    }
}

TEST_CASE("certify experiments gate the manifest") {
    TempDir tmp("certify");
    std::string text = replace_once(kKineticText, "kind = kinetic", "kind = certify");
    text = replace_once(text, "value = 0.25", "value = 0.9");
    text += R"(
[certify]
check = excess-mass-bound
theta = 0.1
)";
    // at theta 0.1 the dispersal dominates everywhere, the excess mass is about
    // 2.8 > m, so the hypotheses fail and the run must still pass (nothing to check)
    ExperimentConfig cfg = parse_config(text, "cert_demo");
    RunOptions opts;
    opts.output_dir = (tmp.path / "out").string();
    const RunManifest man = run_experiment(cfg, opts);
    CHECK(man.certificates_passed);
    const std::string cert = slurp(fs::path(man.directory) / "certificate.json");
    CHECK(cert.find("\"hypotheses_hold\": false") != std::string::npos);
    CHECK(cert.find("not-checked") != std::string::npos);
    CHECK(cert.find("trajectory.csv") != std::string::npos);
}

TEST_CASE("environment root is used when no directory is given") {
    TempDir tmp("envroot");
    const ExperimentConfig cfg = parse_config(kKineticText, "envdemo");
    setenv(kOutputRootEnv, tmp.path.c_str(), 1);
    const RunManifest man = run_experiment(cfg, RunOptions{});
    unsetenv(kOutputRootEnv);
    CHECK(fs::path(man.directory) == tmp.path / "envdemo");
    CHECK(fs::exists(tmp.path / "envdemo" / "manifest.json"));
}

TEST_CASE("seed override lands in the manifest") {
    TempDir tmp("seed");
    std::string text = replace_once(kKineticText, "kind = kinetic", "kind = simulate");
    text = replace_once(text, "t_end = 1.0", "t_end = 0.5");
    text += "\n[run]\nruns = 4\nseed = 11\nsnapshot_times = 0.25, 0.5\n";
    const ExperimentConfig cfg = parse_config(text, "sim_demo");
    RunOptions opts;
    opts.output_dir = (tmp.path / "out").string();
    opts.seed_override = 99;
    const RunManifest man = run_experiment(cfg, opts);
    CHECK(man.seed == 99);
    const std::string manifest = slurp(fs::path(man.directory) / "manifest.json");
    CHECK(manifest.find("\"seed\": 99") != std::string::npos);
    const std::string pop = slurp(fs::path(man.directory) / "population.csv");
    CHECK(pop.rfind("t,run,population\n", 0) == 0);
}

}  // TEST_SUITE
