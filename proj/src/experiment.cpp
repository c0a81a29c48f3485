#include "sbdlab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sbdlab/analysis.hpp"
#include "sbdlab/kinetic.hpp"
#include "sbdlab/particle.hpp"

namespace sbdlab {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::simulate: return "simulate";
        case ExperimentKind::kinetic: return "kinetic";
        case ExperimentKind::hierarchy: return "hierarchy";
        case ExperimentKind::vlasov_compare: return "vlasov-compare";
        case ExperimentKind::epsilon_sweep: return "epsilon-sweep";
        case ExperimentKind::certify: return "certify";
    }
    return "?";
}

std::string content_hash(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// config text parsing

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

struct RawConfig {
    std::string name;
    std::map<std::string, std::string> kv;
    mutable std::set<std::string> consumed;

    bool has(const std::string& key) const {
        const bool present = kv.count(key) > 0;
        if (present) consumed.insert(key);
        return present;
    }
    const std::string& require_raw(const std::string& key) const {
        auto it = kv.find(key);
        if (it == kv.end()) throw ConfigError(name + ": missing required key '" + key + "'");
        consumed.insert(key);
        return it->second;
    }
    std::string get_string(const std::string& key) const { return require_raw(key); }
    std::string get_string(const std::string& key, const std::string& fallback) const {
        return has(key) ? kv.at(key) : fallback;
    }

    double parse_double(const std::string& key, const std::string& text) const {
        char* end = nullptr;
        const double v = std::strtod(text.c_str(), &end);
        if (end == text.c_str() || *end != '\0' || !std::isfinite(v))
            throw ConfigError(name + ": key '" + key + "' expects a finite number, got '" + text + "'");
        return v;
    }
    double get_double(const std::string& key) const { return parse_double(key, require_raw(key)); }
    double get_double(const std::string& key, double fallback) const {
        return has(key) ? parse_double(key, kv.at(key)) : fallback;
    }
    long get_long(const std::string& key, long fallback) const {
        if (!has(key)) return fallback;
        const double v = parse_double(key, kv.at(key));
        const long n = static_cast<long>(v);
        if (static_cast<double>(n) != v)
            throw ConfigError(name + ": key '" + key + "' expects an integer, got '" + kv.at(key) + "'");
        return n;
    }
    long get_long(const std::string& key) const {
        (void)require_raw(key);
        return get_long(key, 0);
    }
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        const std::string& text = kv.at(key);
        char* end = nullptr;
        const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
        if (end == text.c_str() || *end != '\0')
            throw ConfigError(name + ": key '" + key + "' expects a nonnegative integer, got '" + text + "'");
        return v;
    }
    bool get_bool(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string v = kv.at(key);
        if (v == "true" || v == "yes" || v == "1") return true;
        if (v == "false" || v == "no" || v == "0") return false;
        throw ConfigError(name + ": key '" + key + "' expects true/false, got '" + v + "'");
    }
    std::vector<double> get_list(const std::string& key) const {
        const std::string text = require_raw(key);
        std::vector<double> out;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty())
                throw ConfigError(name + ": key '" + key + "' has an empty list entry");
            out.push_back(parse_double(key, item));
        }
        if (out.empty()) throw ConfigError(name + ": key '" + key + "' expects a comma-separated list");
        return out;
    }
    std::vector<double> get_list(const std::string& key, std::vector<double> fallback) const {
        return has(key) ? get_list(key) : std::move(fallback);
    }

    void reject_unknown() const {
        for (const auto& [key, value] : kv)
            if (!consumed.count(key))
                throw ConfigError(name + ": unknown key '" + key + "'");
    }
};

RawConfig tokenize(const std::string& text, const std::string& name) {
    RawConfig raw;
    raw.name = name;
    std::string section;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::size_t comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(name + ":" + std::to_string(lineno) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError(name + ":" + std::to_string(lineno) + ": empty section name");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(name + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError(name + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string full = section.empty() ? key : section + "." + key;
        if (raw.kv.count(full))
            throw ConfigError(name + ": duplicate key '" + full + "'");
        raw.kv[full] = value;
    }
    return raw;
}

KernelSpec parse_kernel(const RawConfig& raw, const std::string& section, int dim) {
    const std::string shape = raw.get_string(section + ".shape");
    try {
        if (shape == "ball")
            return KernelSpec::ball(dim, raw.get_double(section + ".amplitude"),
                                    raw.get_double(section + ".radius"));
        if (shape == "gaussian")
            return KernelSpec::gaussian(dim, raw.get_double(section + ".amplitude"),
                                        raw.get_double(section + ".sigma"));
        if (shape == "tabulated")
            return KernelSpec::tabulated(dim, raw.get_list(section + ".radii"),
                                         raw.get_list(section + ".values"));
        if (shape == "zero") return KernelSpec::zero(dim);
    } catch (const InvalidKernelError& e) {
        throw ConfigError(raw.name + ": section '" + section + "': " + e.what());
    }
    throw ConfigError(raw.name + ": key '" + section + ".shape' expects ball | gaussian | tabulated | zero, got '" +
                      shape + "'");
}

ExperimentKind parse_kind(const RawConfig& raw) {
    const std::string kind = raw.get_string("experiment.kind");
    if (kind == "simulate") return ExperimentKind::simulate;
    if (kind == "kinetic") return ExperimentKind::kinetic;
    if (kind == "hierarchy") return ExperimentKind::hierarchy;
    if (kind == "vlasov-compare") return ExperimentKind::vlasov_compare;
    if (kind == "epsilon-sweep") return ExperimentKind::epsilon_sweep;
    if (kind == "certify") return ExperimentKind::certify;
    throw ConfigError(raw.name + ": key 'experiment.kind' names no known experiment: '" + kind + "'");
}

}  // namespace

DensityField InitialCondition::build(const TorusDomain& dom) const {
    DensityField f(dom);
    const int M = dom.points_per_axis();
    switch (kind) {
        case Kind::constant:
            for (double& v : f.values) v = value;
            break;
        case Kind::step:
            for (int i = 0; i < M; ++i) {
                const double v = i < M / 2 ? left : right;
                if (dom.dim() == 1) {
                    f.values[dom.flat_index(i)] = v;
                } else {
                    for (int j = 0; j < M; ++j) f.values[dom.flat_index(i, j)] = v;
                }
            }
            break;
        case Kind::cosine: {
            const double w = 2.0 * 3.14159265358979323846 * mode / dom.edge();
            for (int i = 0; i < M; ++i) {
                const double v = base + amplitude * std::cos(w * i * dom.spacing());
                if (dom.dim() == 1) {
                    f.values[dom.flat_index(i)] = v;
                } else {
                    for (int j = 0; j < M; ++j) f.values[dom.flat_index(i, j)] = v;
                }
            }
            break;
        }
        case Kind::cells:
            if (cells.size() != dom.size())
                throw ConfigError("initial.values: expected " + std::to_string(dom.size()) +
                                  " entries for this grid, got " + std::to_string(cells.size()));
            f.values = cells;
            break;
    }
    for (double v : f.values)
        if (v < 0.0) throw ConfigError("initial: density must be nonnegative everywhere");
    return f;
}

ExperimentConfig parse_config(const std::string& text, const std::string& name) {
    RawConfig raw = tokenize(text, name);
    ExperimentConfig cfg;
    cfg.name = name;
    cfg.config_hash = content_hash(text);
    cfg.kind = parse_kind(raw);

    const int dim = static_cast<int>(raw.get_long("domain.dim", 1));
    const double edge = raw.get_double("domain.edge");
    const int points = static_cast<int>(raw.get_long("domain.points"));
    try {
        cfg.domain = TorusDomain(dim, edge, points);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(name + ": section 'domain': " + e.what());
    }

    cfg.params.mortality = raw.get_double("params.mortality");
    cfg.params.epsilon = raw.get_double("params.epsilon", 1.0);
    cfg.params.rescaled = raw.get_bool("params.rescaled", false);
    cfg.params.birth = parse_kernel(raw, "kernel.birth", dim);
    cfg.params.competition = parse_kernel(raw, "kernel.competition", dim);
    try {
        cfg.params.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(name + ": section 'params': " + e.what());
    }

    if (raw.has("initial.kind")) {
        const std::string ik = raw.kv.at("initial.kind");
        if (ik == "constant") {
            cfg.initial.kind = InitialCondition::Kind::constant;
            cfg.initial.value = raw.get_double("initial.value");
        } else if (ik == "step") {
            cfg.initial.kind = InitialCondition::Kind::step;
            cfg.initial.left = raw.get_double("initial.left");
            cfg.initial.right = raw.get_double("initial.right");
        } else if (ik == "cosine") {
            cfg.initial.kind = InitialCondition::Kind::cosine;
            cfg.initial.base = raw.get_double("initial.base");
            cfg.initial.amplitude = raw.get_double("initial.amplitude");
            cfg.initial.mode = static_cast<int>(raw.get_long("initial.mode", 1));
        } else if (ik == "cells") {
            cfg.initial.kind = InitialCondition::Kind::cells;
            cfg.initial.cells = raw.get_list("initial.values");
        } else {
            throw ConfigError(name + ": key 'initial.kind' expects constant | step | cosine | cells, got '" + ik +
                              "'");
        }
    } else {
        throw ConfigError(name + ": missing required key 'initial.kind'");
    }

    cfg.run.t_end = raw.get_double("run.t_end");
    if (!(cfg.run.t_end >= 0.0)) throw ConfigError(name + ": key 'run.t_end' must be >= 0");
    cfg.run.dt = raw.get_double("run.dt", 0.0);
    if (cfg.run.dt < 0.0) throw ConfigError(name + ": key 'run.dt' must be > 0 when given");
    cfg.run.store_every = static_cast<int>(raw.get_long("run.store_every", 1));
    if (cfg.run.store_every < 1) throw ConfigError(name + ": key 'run.store_every' must be >= 1");
    cfg.run.seed = raw.get_u64("run.seed", 0);
    cfg.run.runs = static_cast<int>(raw.get_long("run.runs", 1));
    if (cfg.run.runs < 1) throw ConfigError(name + ": key 'run.runs' must be >= 1");
    cfg.run.population_cap = static_cast<std::size_t>(raw.get_u64("run.population_cap", 1000000));
    if (raw.has("run.snapshot_times")) cfg.run.snapshot_times = raw.get_list("run.snapshot_times");

    const bool needs_chain = cfg.kind == ExperimentKind::hierarchy || cfg.kind == ExperimentKind::epsilon_sweep;
    if (raw.has("hierarchy.closure") || needs_chain) {
        const std::string cl = raw.get_string("hierarchy.closure", "zero-third-cumulant");
        if (cl == "zero-third-cumulant")
            cfg.hierarchy.closure = Closure::zero_third_cumulant;
        else if (cl == "mean-field")
            cfg.hierarchy.closure = Closure::mean_field;
        else
            throw ConfigError(name + ": key 'hierarchy.closure' expects zero-third-cumulant | mean-field, got '" +
                              cl + "'");
    }
    if (raw.has("hierarchy.alpha") || raw.has("hierarchy.alpha_star")) {
        cfg.hierarchy.alpha = raw.get_double("hierarchy.alpha");
        cfg.hierarchy.alpha_star = raw.get_double("hierarchy.alpha_star");
        cfg.hierarchy.has_scales = true;
        if (!(cfg.hierarchy.alpha < cfg.hierarchy.alpha_star))
            throw ConfigError(name + ": key 'hierarchy.alpha' must be strictly below 'hierarchy.alpha_star'");
    }
    if (cfg.kind == ExperimentKind::epsilon_sweep && !cfg.hierarchy.has_scales)
        throw ConfigError(name + ": epsilon-sweep needs 'hierarchy.alpha' and 'hierarchy.alpha_star'");

    if (cfg.kind == ExperimentKind::vlasov_compare || cfg.kind == ExperimentKind::epsilon_sweep) {
        cfg.sweep_epsilons = raw.get_list("sweep.epsilons");
        for (double e : cfg.sweep_epsilons)
            if (!(e > 0.0) || e > 1.0)
                throw ConfigError(name + ": key 'sweep.epsilons' entries must lie in (0, 1]");
    }
    if (cfg.kind == ExperimentKind::vlasov_compare && cfg.run.snapshot_times.empty())
        throw ConfigError(name + ": vlasov-compare needs 'run.snapshot_times'");

    if (cfg.kind == ExperimentKind::certify) {
        cfg.certify.check = raw.get_string("certify.check");
        const std::set<std::string> known{"dominated-bound", "excess-mass-bound", "global-bound",
                                          "sandwich-homogenization"};
        if (!known.count(cfg.certify.check))
            throw ConfigError(name +
                              ": key 'certify.check' expects dominated-bound | excess-mass-bound | "
                              "global-bound | sandwich-homogenization, got '" +
                              cfg.certify.check + "'");
        cfg.certify.delta = raw.get_double("certify.delta", 1e-3);
        if (cfg.certify.check == "sandwich-homogenization") {
            cfg.certify.kappa_minus = raw.get_double("certify.kappa_minus");
            cfg.certify.kappa_plus = raw.get_double("certify.kappa_plus");
        } else if (cfg.certify.check != "global-bound") {
            cfg.certify.theta = raw.get_double("certify.theta");
        } else {
            cfg.certify.theta = raw.get_double("certify.theta", 0.0);
        }
    }

    if (raw.has("pair_correlation.r_max") || raw.has("pair_correlation.bins")) {
        cfg.pair.r_max = raw.get_double("pair_correlation.r_max");
        cfg.pair.bins = static_cast<int>(raw.get_long("pair_correlation.bins"));
        if (!(cfg.pair.r_max > 0.0) || cfg.pair.bins < 1)
            throw ConfigError(name + ": pair_correlation needs r_max > 0 and bins >= 1");
    }

    raw.reject_unknown();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::stringstream buf;
    buf << in.rdbuf();
    std::string stem = fs::path(path).stem().string();
    ExperimentConfig cfg = parse_config(buf.str(), stem.empty() ? path : stem);
    return cfg;
}

void dry_check(const ExperimentConfig& cfg) {
    // kernels must fit on the torus; periodize enforces the 2x support rule
    (void)periodize(cfg.params.birth, cfg.domain);
    (void)periodize(cfg.params.competition, cfg.domain);
    (void)cfg.initial.build(cfg.domain);
    const bool needs_chain = cfg.kind == ExperimentKind::hierarchy || cfg.kind == ExperimentKind::epsilon_sweep;
    if (needs_chain && cfg.domain.dim() != 1)
        throw ConfigError(cfg.name + ": hierarchy experiments need a d = 1 domain");
    for (std::size_t i = 0; i < cfg.run.snapshot_times.size(); ++i) {
        if (cfg.run.snapshot_times[i] < 0.0 || cfg.run.snapshot_times[i] > cfg.run.t_end)
            throw ConfigError(cfg.name + ": key 'run.snapshot_times' entries must lie in [0, t_end]");
        if (i > 0 && !(cfg.run.snapshot_times[i] > cfg.run.snapshot_times[i - 1]))
            throw ConfigError(cfg.name + ": key 'run.snapshot_times' must be strictly increasing");
    }
    if (cfg.kind == ExperimentKind::certify && cfg.certify.check == "sandwich-homogenization") {
        if (!(cfg.certify.kappa_minus > 0.0) || !(cfg.certify.kappa_plus > cfg.certify.kappa_minus))
            throw ConfigError(cfg.name + ": certify.kappa_minus/kappa_plus must satisfy 0 < minus < plus");
    }
}

// ---------------------------------------------------------------------------
// experiment execution

namespace {

std::string resolve_output_dir(const ExperimentConfig& cfg, const RunOptions& opts) {
    if (!opts.output_dir.empty()) return opts.output_dir;
    const char* root = std::getenv(kOutputRootEnv);
    const std::string base = root && *root ? root : "runs";
    return base + "/" + (cfg.name.empty() ? "experiment" : cfg.name);
}

struct OutputSink {
    std::vector<std::pair<std::string, std::string>> files;  // (relative path, bytes)
    void add(const std::string& rel, std::string bytes) { files.emplace_back(rel, std::move(bytes)); }
};

void append_field_rows(std::string& csv, double t, const DensityField& f) {
    const int M = f.domain.points_per_axis();
    if (f.domain.dim() == 1) {
        for (int i = 0; i < M; ++i) {
            csv += format_number(t);
            csv += ',';
            csv += std::to_string(i);
            csv += ',';
            csv += format_number(f.values[f.domain.flat_index(i)]);
            csv += '\n';
        }
    } else {
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < M; ++j) {
                csv += format_number(t);
                csv += ',';
                csv += std::to_string(i);
                csv += ',';
                csv += std::to_string(j);
                csv += ',';
                csv += format_number(f.values[f.domain.flat_index(i, j)]);
                csv += '\n';
            }
    }
}

json domain_json(const TorusDomain& dom) {
    return json{{"dim", dom.dim()}, {"edge", dom.edge()}, {"points", dom.points_per_axis()}};
}

json certificate_json(const Certificate& cert) {
    json details = json::object();
    for (const auto& [k, v] : cert.details) details[k] = v;
    json j{{"check", cert.check_id},
           {"hypotheses_hold", cert.hypotheses_hold},
           {"details", details},
           {"delta", cert.delta}};
    if (cert.bound_theta) j["bound"] = *cert.bound_theta;
    switch (cert.conclusion) {
        case Certificate::Conclusion::not_checked: j["conclusion"] = "not-checked"; break;
        case Certificate::Conclusion::verified: j["conclusion"] = "verified"; break;
        case Certificate::Conclusion::violated: j["conclusion"] = "violated"; break;
    }
    if (std::isfinite(cert.worst_margin)) j["worst_margin"] = cert.worst_margin;
    if (cert.conclusion == Certificate::Conclusion::violated)
        j["violation"] = json{{"time", cert.violation_time}, {"index", cert.violation_index}};
    if (!cert.equilibrium_gap.empty()) {
        json gaps = json::array();
        for (const auto& [t, g] : cert.equilibrium_gap) gaps.push_back(json::array({t, g}));
        j["equilibrium_gap"] = gaps;
    }
    return j;
}

std::string trajectory_csv(const Trajectory& traj) {
    std::string csv = traj.fields.front().domain.dim() == 1 ? "t,i,rho\n" : "t,i,j,rho\n";
    for (std::size_t s = 0; s < traj.fields.size(); ++s) append_field_rows(csv, traj.times[s], traj.fields[s]);
    return csv;
}

Trajectory run_kinetic_trajectory(const ExperimentConfig& cfg) {
    const DensityField rho0 = cfg.initial.build(cfg.domain);
    IntegrateOptions opts;
    opts.dt = cfg.run.dt;
    opts.store_every = cfg.run.store_every;
    return integrate(rho0, cfg.params, cfg.run.t_end, opts);
}

void execute_kinetic(const ExperimentConfig& cfg, OutputSink& sink) {
    const Trajectory traj = run_kinetic_trajectory(cfg);
    sink.add("trajectory.csv", trajectory_csv(traj));

    const KineticOperator op(cfg.params, cfg.domain);
    json summary{{"kind", "kinetic"},
                 {"config_hash", cfg.config_hash},
                 {"domain", domain_json(cfg.domain)},
                 {"mortality", cfg.params.mortality},
                 {"birth_mass", kernel_stats(cfg.params.birth).mass},
                 {"birth_mass_grid", op.birth_mass()},
                 {"competition_mass", kernel_stats(cfg.params.competition).mass},
                 {"competition_mass_grid", op.competition_mass()},
                 {"times_stored", traj.times.size()},
                 {"clamped_points", traj.clamped_points},
                 {"final_sup", traj.fields.back().max()},
                 {"final_min", traj.fields.back().min()}};
    if (cfg.initial.kind == InitialCondition::Kind::constant) {
        // spatially constant data: report agreement with the closed form
        const BernoulliSolution psi = bernoulli_exact(cfg.initial.value, cfg.params);
        double worst = 0.0;
        for (std::size_t s = 0; s < traj.times.size(); ++s) {
            const double exact = psi(traj.times[s]);
            const double got = traj.fields[s].mean();
            const double scale = std::max(std::abs(exact), 1e-300);
            worst = std::max(worst, std::abs(got - exact) / scale);
        }
        summary["homogeneous_reference"] = {
            {"regime", psi.regime == BernoulliSolution::Regime::supercritical ? "supercritical"
                       : psi.regime == BernoulliSolution::Regime::subcritical ? "subcritical"
                                                                              : "critical"},
            {"equilibrium", psi.equilibrium},
            {"max_rel_deviation", worst}};
    }
    sink.add("summary.json", summary.dump(2) + "\n");
}

void execute_simulate(const ExperimentConfig& cfg, const RunOptions& opts, std::uint64_t seed, OutputSink& sink) {
    const DensityField rho0 = cfg.initial.build(cfg.domain);
    EnsembleOptions eo;
    eo.t_end = cfg.run.t_end;
    eo.snapshot_times = cfg.run.snapshot_times;
    eo.runs = cfg.run.runs;
    eo.seed = seed;
    eo.population_cap = cfg.run.population_cap;
    eo.threads = opts.threads;
    eo.pair_r_max = cfg.pair.r_max;
    eo.pair_bins = cfg.pair.bins;
    const EnsembleResult ens = run_ensemble(cfg.domain, rho0, cfg.params, eo);

    std::string pop_csv = "t,run,population\n";
    for (const CorrelationEstimate& est : ens.snapshots)
        for (std::size_t r = 0; r < est.populations.size(); ++r) {
            pop_csv += format_number(est.time);
            pop_csv += ',';
            pop_csv += std::to_string(est.run_ids[r]);
            pop_csv += ',';
            pop_csv += std::to_string(est.populations[r]);
            pop_csv += '\n';
        }
    sink.add("population.csv", std::move(pop_csv));

    std::string dens_csv = cfg.domain.dim() == 1 ? "t,i,k1_hat\n" : "t,i,j,k1_hat\n";
    for (const CorrelationEstimate& est : ens.snapshots) append_field_rows(dens_csv, est.time, est.k1_field);
    sink.add("density.csv", std::move(dens_csv));

    if (cfg.pair.bins > 0) {
        std::string pair_csv = "t,r_bin_center,k2_hat,stderr\n";
        for (const CorrelationEstimate& est : ens.snapshots)
            for (std::size_t b = 0; b < est.r_centers.size(); ++b) {
                pair_csv += format_number(est.time);
                pair_csv += ',';
                pair_csv += format_number(est.r_centers[b]);
                pair_csv += ',';
                pair_csv += format_number(est.k2_hat[b]);
                pair_csv += ',';
                pair_csv += format_number(est.k2_stderr[b]);
                pair_csv += '\n';
            }
        sink.add("pair_correlation.csv", std::move(pair_csv));
    }

    json snaps = json::array();
    for (const CorrelationEstimate& est : ens.snapshots)
        snaps.push_back(json{{"t", est.time},
                             {"runs", est.runs},
                             {"mean_density", est.mean_density},
                             {"density_stderr", est.density_stderr}});
    json summary{{"kind", "simulate"},
                 {"config_hash", cfg.config_hash},
                 {"domain", domain_json(cfg.domain)},
                 {"runs", cfg.run.runs},
                 {"blown_up_runs", ens.blown_up_runs},
                 {"snapshots", snaps}};
    sink.add("summary.json", summary.dump(2) + "\n");
}

void execute_hierarchy(const ExperimentConfig& cfg, OutputSink& sink) {
    const DensityField rho0 = cfg.initial.build(cfg.domain);
    const CorrelationChain chain0 = product_state(rho0, cfg.hierarchy.closure);
    ChainEvolveOptions eo;
    if (cfg.run.dt > 0.0) eo.dt = cfg.run.dt;
    eo.store_every = cfg.run.store_every;
    const ChainTrajectory traj = evolve_chain(chain0, cfg.params, cfg.params.epsilon, cfg.run.t_end, eo);

    std::string k1_csv = "t,i,k1\n";
    for (std::size_t s = 0; s < traj.chains.size(); ++s) {
        const CorrelationChain& c = traj.chains[s];
        for (std::size_t i = 0; i < c.points(); ++i) {
            k1_csv += format_number(traj.times[s]);
            k1_csv += ',';
            k1_csv += std::to_string(i);
            k1_csv += ',';
            k1_csv += format_number(c.k1[i]);
            k1_csv += '\n';
        }
    }
    sink.add("chain_k1.csv", std::move(k1_csv));

    std::string k2_csv = "i,j,k2\n";
    const CorrelationChain& last = traj.chains.back();
    for (std::size_t i = 0; i < last.points(); ++i)
        for (std::size_t j = 0; j < last.points(); ++j) {
            k2_csv += std::to_string(i);
            k2_csv += ',';
            k2_csv += std::to_string(j);
            k2_csv += ',';
            k2_csv += format_number(last.k2[i * last.points() + j]);
            k2_csv += '\n';
        }
    sink.add("chain_k2_final.csv", std::move(k2_csv));

    json residuals = json::array();
    for (std::size_t s = 0; s < traj.chains.size(); ++s)
        residuals.push_back(json::array({traj.times[s], traj.chains[s].product_residual()}));
    json summary{{"kind", "hierarchy"},
                 {"config_hash", cfg.config_hash},
                 {"domain", domain_json(cfg.domain)},
                 {"closure", cfg.hierarchy.closure == Closure::zero_third_cumulant ? "zero-third-cumulant"
                                                                                   : "mean-field"},
                 {"epsilon", cfg.params.epsilon},
                 {"dt", traj.dt},
                 {"max_k2_asymmetry", traj.max_asymmetry},
                 {"product_residual", residuals}};
    if (cfg.hierarchy.has_scales) {
        const TimeHorizon th =
            time_horizon(cfg.hierarchy.alpha, cfg.hierarchy.alpha_star, cfg.params, cfg.domain);
        json horizon{{"alpha", th.alpha},
                     {"alpha_star", th.alpha_star},
                     {"t_max", th.t_max},
                     {"exceeded", cfg.run.t_end > th.t_max}};
        if (th.domination_theta) horizon["domination_theta"] = *th.domination_theta;
        if (th.domination_margin) horizon["domination_margin"] = *th.domination_margin;
        summary["time_horizon"] = horizon;
    }
    sink.add("summary.json", summary.dump(2) + "\n");
}

void execute_epsilon_sweep(const ExperimentConfig& cfg, OutputSink& sink) {
    const DensityField rho0 = cfg.initial.build(cfg.domain);
    const CorrelationChain chain0 = product_state(rho0, cfg.hierarchy.closure);
    ChainEvolveOptions eo;
    if (cfg.run.dt > 0.0) eo.dt = cfg.run.dt;
    eo.store_every = cfg.run.store_every;
    const EpsilonConvergenceReport rep = epsilon_sweep(chain0, cfg.params, cfg.sweep_epsilons, cfg.run.t_end,
                                                       cfg.hierarchy.alpha, cfg.hierarchy.alpha_star, eo);

    std::string csv = "epsilon,distance\n";
    for (std::size_t i = 0; i < rep.epsilons.size(); ++i) {
        csv += format_number(rep.epsilons[i]);
        csv += ',';
        csv += format_number(rep.distances[i]);
        csv += '\n';
    }
    sink.add("epsilon_sweep.csv", std::move(csv));

    bool monotone = true;
    for (std::size_t i = 1; i < rep.epsilons.size(); ++i) {
        // distances listed in the epsilon order of the config; compare by eps
        for (std::size_t j = 0; j < i; ++j)
            if (rep.epsilons[i] < rep.epsilons[j] && !(rep.distances[i] < rep.distances[j])) monotone = false;
    }
    json summary{{"kind", "epsilon-sweep"},
                 {"config_hash", cfg.config_hash},
                 {"domain", domain_json(cfg.domain)},
                 {"epsilons", rep.epsilons},
                 {"distances", rep.distances},
                 {"fitted_slope", rep.fitted_slope},
                 {"alpha", rep.alpha},
                 {"alpha_star", rep.alpha_star},
                 {"kappa", rep.kappa},
                 {"rate_constant", rep.rate_constant},
                 {"monotone_in_epsilon", monotone},
                 {"t_end", rep.t_end},
                 {"dt", rep.dt}};
    sink.add("epsilon_sweep.json", summary.dump(2) + "\n");
}

void execute_vlasov(const ExperimentConfig& cfg, const RunOptions& opts, std::uint64_t seed, OutputSink& sink) {
    ExperimentConfig used = cfg;
    used.run.seed = seed;
    const std::vector<VlasovRow> rows = compare_vlasov(used, opts.threads);
    std::string csv = "t,epsilon,eps_times_micro_density,kinetic_density,abs_error\n";
    for (const VlasovRow& r : rows) {
        csv += format_number(r.t);
        csv += ',';
        csv += format_number(r.epsilon);
        csv += ',';
        csv += format_number(r.micro_scaled);
        csv += ',';
        csv += format_number(r.kinetic);
        csv += ',';
        csv += format_number(r.abs_error);
        csv += '\n';
    }
    sink.add("vlasov_compare.csv", std::move(csv));

    json per_eps = json::array();
    for (double eps : cfg.sweep_epsilons) {
        double max_err = 0.0, max_stderr = 0.0;
        for (const VlasovRow& r : rows)
            if (r.epsilon == eps) {
                max_err = std::max(max_err, r.abs_error);
                max_stderr = std::max(max_stderr, r.mc_stderr);
            }
        per_eps.push_back(json{{"epsilon", eps}, {"max_abs_error", max_err}, {"max_mc_stderr", max_stderr}});
    }
    json summary{{"kind", "vlasov-compare"},
                 {"config_hash", cfg.config_hash},
                 {"domain", domain_json(cfg.domain)},
                 {"runs_per_epsilon", cfg.run.runs},
                 {"per_epsilon", per_eps}};
    sink.add("summary.json", summary.dump(2) + "\n");
}

bool execute_certify(const ExperimentConfig& cfg, OutputSink& sink) {
    const Trajectory traj = run_kinetic_trajectory(cfg);
    const std::string traj_csv = trajectory_csv(traj);
    const std::string traj_hash = content_hash(traj_csv);
    sink.add("trajectory.csv", std::string(traj_csv));

    Certificate cert;
    if (cfg.certify.check == "dominated-bound") {
        cert = certify_dominated_bound(cfg.params, cfg.domain, cfg.certify.theta, cfg.certify.delta);
        if (cert.hypotheses_hold) verify_bound_on_trajectory(traj, cert);
    } else if (cfg.certify.check == "excess-mass-bound") {
        cert = certify_excess_mass_bound(cfg.params, cfg.domain, cfg.certify.theta, cfg.certify.delta);
        if (cert.hypotheses_hold) verify_bound_on_trajectory(traj, cert);
    } else if (cfg.certify.check == "global-bound") {
        const double floor_theta =
            cfg.certify.theta > 0.0 ? cfg.certify.theta : traj.fields.front().max() + cfg.certify.delta;
        cert = certify_global_support_bound(cfg.params, cfg.domain, cfg.certify.delta, floor_theta);
        if (cert.hypotheses_hold) verify_bound_on_trajectory(traj, cert);
    } else {
        cert = certify_sandwich(traj, cfg.params, cfg.certify.kappa_minus, cfg.certify.kappa_plus);
    }

    json j = certificate_json(cert);
    j["config_hash"] = cfg.config_hash;
    j["trajectory"] = json{{"path", "trajectory.csv"}, {"hash", traj_hash}};
    sink.add("certificate.json", j.dump(2) + "\n");

    const bool failed = cert.hypotheses_hold && cert.conclusion == Certificate::Conclusion::violated;
    return !failed;
}

}  // namespace

std::vector<VlasovRow> compare_vlasov(const ExperimentConfig& cfg, int threads) {
    if (cfg.kind != ExperimentKind::vlasov_compare)
        throw ConfigError(cfg.name + ": compare_vlasov needs kind = vlasov-compare");
    const DensityField rho0 = cfg.initial.build(cfg.domain);
    const std::vector<double>& times = cfg.run.snapshot_times;

    // kinetic reference, advanced exactly to each observation time; the
    // scaling only touches the particle side, so this column is shared
    const KineticOperator op(cfg.params, cfg.domain);
    std::vector<double> kinetic;
    {
        DensityField field = rho0;
        double t_prev = 0.0;
        IntegrateOptions io;
        io.dt = cfg.run.dt;
        io.store_every = 1 << 30;  // only the final state is needed
        for (double t : times) {
            if (t > t_prev) {
                const Trajectory seg = integrate(op, field, t - t_prev, io);
                field = seg.fields.back();
            }
            kinetic.push_back(field.mean());
            t_prev = t;
        }
    }

    std::vector<VlasovRow> rows;
    for (std::size_t e = 0; e < cfg.sweep_epsilons.size(); ++e) {
        const double eps = cfg.sweep_epsilons[e];
        ModelParams scaled = cfg.params;
        scaled.epsilon = eps;
        scaled.rescaled = true;
        DensityField micro0 = rho0;
        for (double& v : micro0.values) v /= eps;

        EnsembleOptions eo;
        eo.t_end = times.back();
        eo.snapshot_times = times;
        eo.runs = cfg.run.runs;
        std::uint64_t mix = cfg.run.seed;
        (void)splitmix64(mix);
        eo.seed = cfg.run.seed ^ splitmix64(mix) ^ (0x9E3779B97F4A7C15ULL * (e + 1));
        eo.population_cap = cfg.run.population_cap;
        eo.threads = threads;
        const EnsembleResult ens = run_ensemble(cfg.domain, micro0, scaled, eo);

        for (std::size_t s = 0; s < times.size(); ++s) {
            VlasovRow row;
            row.t = times[s];
            row.epsilon = eps;
            row.micro_scaled = eps * ens.snapshots[s].mean_density;
            row.kinetic = kinetic[s];
            row.abs_error = std::abs(row.micro_scaled - row.kinetic);
            row.mc_stderr = eps * ens.snapshots[s].density_stderr;
            rows.push_back(row);
        }
    }
    return rows;
}

std::string RunManifest::json() const {
    nlohmann::json outs = nlohmann::json::array();
    for (const OutputRecord& o : outputs)
        outs.push_back(nlohmann::json{{"path", o.path}, {"hash", o.hash}, {"bytes", o.bytes}});
    nlohmann::json j{{"tool", "sbdlab"},
                     {"version", kToolVersion},
                     {"kind", kind},
                     {"config_hash", config_hash},
                     {"seed", seed},
                     {"threads", threads},
                     {"wall_time_seconds", wall_time_seconds},
                     {"certificates_passed", certificates_passed},
                     {"outputs", outs}};
    return j.dump(2) + "\n";
}

RunManifest run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    dry_check(cfg);

    RunManifest man;
    man.kind = to_string(cfg.kind);
    man.config_hash = cfg.config_hash;
    man.seed = opts.seed_override.value_or(cfg.run.seed);
    man.threads = std::max(1, opts.threads);
    man.directory = resolve_output_dir(cfg, opts);

    OutputSink sink;
    switch (cfg.kind) {
        case ExperimentKind::kinetic: execute_kinetic(cfg, sink); break;
        case ExperimentKind::simulate: execute_simulate(cfg, opts, man.seed, sink); break;
        case ExperimentKind::hierarchy: execute_hierarchy(cfg, sink); break;
        case ExperimentKind::epsilon_sweep: execute_epsilon_sweep(cfg, sink); break;
        case ExperimentKind::vlasov_compare: execute_vlasov(cfg, opts, man.seed, sink); break;
        case ExperimentKind::certify: man.certificates_passed = execute_certify(cfg, sink); break;
    }

    fs::create_directories(man.directory);
    for (const auto& [rel, bytes] : sink.files) {
        const fs::path path = fs::path(man.directory) / rel;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("run_experiment: cannot write " + path.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.close();
        man.outputs.push_back(OutputRecord{rel, content_hash(bytes), bytes.size()});
    }
    man.wall_time_seconds =
        std::chrono::duration_cast<std::chrono::duration<double>>(std::chrono::steady_clock::now() - t0).count();
    {
        const fs::path path = fs::path(man.directory) / "manifest.json";
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("run_experiment: cannot write " + path.string());
        const std::string bytes = man.json();
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    return man;
}

}  // namespace sbdlab
