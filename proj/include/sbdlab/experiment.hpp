#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbdlab/field.hpp"
#include "sbdlab/hierarchy.hpp"
#include "sbdlab/model.hpp"

namespace sbdlab {

inline constexpr const char* kToolVersion = "0.1.0";
/// Environment variable naming the default root for experiment output dirs.
inline constexpr const char* kOutputRootEnv = "SBDLAB_OUTPUT_ROOT";

/// Configuration errors always name the offending key as section.key.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ExperimentKind { simulate, kinetic, hierarchy, vlasov_compare, epsilon_sweep, certify };

std::string to_string(ExperimentKind k);

struct InitialCondition {
    enum class Kind { constant, step, cosine, cells } kind = Kind::constant;
    double value = 0.0;              // constant
    double left = 0.0, right = 0.0;  // step: value on [0, L/2) vs [L/2, L)
    double base = 0.0, amplitude = 0.0;
    int mode = 1;                    // cosine: base + amplitude cos(2 pi mode x / L)
    std::vector<double> cells;       // explicit per-grid-point values

    DensityField build(const TorusDomain& dom) const;
};

struct RunSection {
    double t_end = 0.0;
    double dt = 0.0;  // 0: solver default
    int store_every = 1;
    int runs = 1;
    std::uint64_t seed = 0;
    std::vector<double> snapshot_times;
    std::size_t population_cap = 1000000;
};

struct HierarchySection {
    Closure closure = Closure::zero_third_cumulant;
    double alpha = 0.0;
    double alpha_star = 0.0;
    bool has_scales = false;
};

struct CertifySection {
    std::string check;  // dominated-bound | excess-mass-bound | global-bound | sandwich-homogenization
    double theta = 0.0;
    double delta = 1e-3;
    double kappa_minus = 0.0;
    double kappa_plus = 0.0;
};

struct PairCorrelationSection {
    double r_max = 0.0;
    int bins = 0;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::kinetic;
    TorusDomain domain{1, 1.0, 2};
    ModelParams params;
    InitialCondition initial;
    RunSection run;
    HierarchySection hierarchy;
    CertifySection certify;
    PairCorrelationSection pair;
    std::vector<double> sweep_epsilons;

    std::string name;         // config file stem, used for default output dirs
    std::string config_hash;  // fnv1a64 over the raw config bytes
};

ExperimentConfig parse_config(const std::string& text, const std::string& name);
ExperimentConfig load_config(const std::string& path);

/// Deeper static checks than parsing: kernels fit the domain, levels are
/// consistent.  Throws ConfigError; used by `validate` before any run.
void dry_check(const ExperimentConfig& cfg);

struct RunOptions {
    std::string output_dir;  // empty: resolved from env root / config name
    std::optional<std::uint64_t> seed_override;
    int threads = 1;
};

struct OutputRecord {
    std::string path;  // relative to the run directory
    std::string hash;
    std::size_t bytes = 0;
};

struct RunManifest {
    std::string directory;
    std::string kind;
    std::string config_hash;
    std::uint64_t seed = 0;
    int threads = 1;
    double wall_time_seconds = 0.0;
    std::vector<OutputRecord> outputs;
    bool certificates_passed = true;

    std::string json() const;
};

/// Executes the experiment and writes every output plus manifest.json into
/// the run directory.  Output bytes depend only on (config, seed); thread
/// count and wall time only show up in the manifest.
RunManifest run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// One row of the scaling comparison between the particle system and the
/// kinetic density; micro_scaled = epsilon * (mean population / volume).
struct VlasovRow {
    double t = 0.0;
    double epsilon = 0.0;
    double micro_scaled = 0.0;
    double kinetic = 0.0;
    double abs_error = 0.0;
    double mc_stderr = 0.0;
};

std::vector<VlasovRow> compare_vlasov(const ExperimentConfig& cfg, int threads = 1);

/// FNV-1a 64-bit content hash, rendered as "fnv1a64:<16 hex digits>".
std::string content_hash(const std::string& bytes);

/// Fixed-format scientific CSV number with 17 significant digits.
std::string format_number(double v);

}  // namespace sbdlab
