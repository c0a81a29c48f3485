// Python bindings for the main operations: kinetic solves, particle
// ensembles, correlation-chain evolution, certificates and the experiment
// runner.  Heavy calls release the GIL; results come back as numpy arrays and
// plain dicts so the module stays dependency-light on the Python side.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "sbdlab/analysis.hpp"
#include "sbdlab/experiment.hpp"
#include "sbdlab/hierarchy.hpp"
#include "sbdlab/kinetic.hpp"
#include "sbdlab/particle.hpp"

namespace py = pybind11;
using namespace sbdlab;

namespace {

// Accepts a scalar (constant field) or an array matching the grid.
DensityField to_field(const TorusDomain& dom, const py::object& data) {
    if (py::isinstance<py::float_>(data) || py::isinstance<py::int_>(data))
        return DensityField::constant(dom, data.cast<double>());
    const auto arr = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(data);
    if (!arr) throw std::invalid_argument("initial data must be a number or an array");
    if (static_cast<std::size_t>(arr.size()) != dom.size())
        throw std::invalid_argument("initial data has " + std::to_string(arr.size()) +
                                    " entries but the grid has " + std::to_string(dom.size()));
    std::vector<double> v(arr.data(), arr.data() + arr.size());
    return DensityField(dom, std::move(v));
}

py::array_t<double> field_array(const DensityField& f) {
    const int m = f.domain.points_per_axis();
    py::array_t<double> out(f.domain.dim() == 1 ? std::vector<py::ssize_t>{m}
                                                : std::vector<py::ssize_t>{m, m});
    std::memcpy(out.mutable_data(), f.values.data(), f.values.size() * sizeof(double));
    return out;
}

// (n_times, M) or (n_times, M, M)
py::array_t<double> stack_fields(const std::vector<DensityField>& fields) {
    const auto n = static_cast<py::ssize_t>(fields.size());
    const int m = fields.empty() ? 0 : fields.front().domain.points_per_axis();
    const int dim = fields.empty() ? 1 : fields.front().domain.dim();
    py::array_t<double> out(dim == 1 ? std::vector<py::ssize_t>{n, m}
                                     : std::vector<py::ssize_t>{n, m, m});
    double* dst = out.mutable_data();
    for (const DensityField& f : fields) {
        std::memcpy(dst, f.values.data(), f.values.size() * sizeof(double));
        dst += f.values.size();
    }
    return out;
}

py::array_t<double> square_array(const std::vector<double>& k2, int m) {
    py::array_t<double> out(std::vector<py::ssize_t>{m, m});
    std::memcpy(out.mutable_data(), k2.data(), k2.size() * sizeof(double));
    return out;
}

py::dict trajectory_dict(const Trajectory& traj) {
    py::dict d;
    d["times"] = py::cast(traj.times);
    d["densities"] = stack_fields(traj.fields);
    d["clamped_points"] = traj.clamped_points;
    return d;
}

Closure parse_closure(const std::string& name) {
    if (name == "zero-third-cumulant") return Closure::zero_third_cumulant;
    if (name == "mean-field") return Closure::mean_field;
    throw std::invalid_argument("closure must be 'zero-third-cumulant' or 'mean-field', got '" + name + "'");
}

const char* conclusion_name(Certificate::Conclusion c) {
    switch (c) {
        case Certificate::Conclusion::verified: return "verified";
        case Certificate::Conclusion::violated: return "violated";
        default: return "not-checked";
    }
}

py::dict certificate_dict(const Certificate& cert) {
    py::dict d;
    d["check"] = cert.check_id;
    d["hypotheses_hold"] = cert.hypotheses_hold;
    py::dict details;
    for (const auto& [key, value] : cert.details) details[py::str(key)] = value;
    d["details"] = details;
    d["bound_theta"] = cert.bound_theta ? py::cast(*cert.bound_theta) : py::none();
    d["delta"] = cert.delta;
    d["conclusion"] = conclusion_name(cert.conclusion);
    d["worst_margin"] = cert.worst_margin;
    d["violation_time"] = cert.violation_time;
    d["equilibrium_gap"] = py::cast(cert.equilibrium_gap);
    return d;
}

py::dict manifest_dict(const RunManifest& man) {
    py::dict d;
    d["directory"] = man.directory;
    d["kind"] = man.kind;
    d["config_hash"] = man.config_hash;
    d["seed"] = man.seed;
    d["threads"] = man.threads;
    d["wall_time_seconds"] = man.wall_time_seconds;
    d["certificates_passed"] = man.certificates_passed;
    py::list outputs;
    for (const OutputRecord& rec : man.outputs) {
        py::dict o;
        o["path"] = rec.path;
        o["hash"] = rec.hash;
        o["bytes"] = rec.bytes;
        outputs.append(o);
    }
    d["outputs"] = outputs;
    return d;
}

}  // namespace

PYBIND11_MODULE(_sbdlab, m) {
    m.doc() = "spatial birth-death process laboratory";
    m.attr("__version__") = kToolVersion;
    m.attr("OUTPUT_ROOT_ENV") = kOutputRootEnv;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<InvalidKernelError>(m, "InvalidKernelError", PyExc_ValueError);
    py::register_exception<PeriodizationOverlapError>(m, "PeriodizationOverlapError", PyExc_ValueError);

    py::class_<TorusDomain>(m, "TorusDomain")
        .def(py::init<int, double, int>(), py::arg("dim"), py::arg("edge"), py::arg("points"))
        .def_property_readonly("dim", &TorusDomain::dim)
        .def_property_readonly("edge", &TorusDomain::edge)
        .def_property_readonly("points", &TorusDomain::points_per_axis)
        .def_property_readonly("spacing", &TorusDomain::spacing)
        .def_property_readonly("volume", &TorusDomain::volume)
        .def("__repr__", [](const TorusDomain& d) {
            return "TorusDomain(dim=" + std::to_string(d.dim()) + ", edge=" + std::to_string(d.edge()) +
                   ", points=" + std::to_string(d.points_per_axis()) + ")";
        });

    py::class_<KernelSpec>(m, "Kernel")
        .def_static("ball", &KernelSpec::ball, py::arg("dim"), py::arg("amplitude"), py::arg("radius"))
        .def_static("gaussian", &KernelSpec::gaussian, py::arg("dim"), py::arg("amplitude"),
                    py::arg("sigma"))
        .def_static("tabulated", &KernelSpec::tabulated, py::arg("dim"), py::arg("radii"),
                    py::arg("values"))
        .def_static("zero", &KernelSpec::zero, py::arg("dim"))
        .def("value", &KernelSpec::value, py::arg("r"))
        .def_property_readonly("dim", [](const KernelSpec& k) { return k.dim; })
        .def_property_readonly("mass", [](const KernelSpec& k) { return kernel_stats(k).mass; })
        .def_property_readonly("sup", [](const KernelSpec& k) { return kernel_stats(k).sup_norm; })
        .def_property_readonly("support_radius", &KernelSpec::support_radius);

    py::class_<ModelParams>(m, "Model")
        .def(py::init<double, KernelSpec, KernelSpec, double, bool>(), py::arg("mortality"),
             py::arg("birth"), py::arg("competition"), py::arg("epsilon") = 1.0,
             py::arg("rescaled") = false)
        .def_readonly("mortality", &ModelParams::mortality)
        .def_readonly("birth", &ModelParams::birth)
        .def_readonly("competition", &ModelParams::competition)
        .def_readonly("epsilon", &ModelParams::epsilon)
        .def_readonly("rescaled", &ModelParams::rescaled);

    py::class_<BernoulliSolution>(m, "HomogeneousSolution")
        .def("__call__", &BernoulliSolution::operator(), py::arg("t"))
        .def_readonly("growth", &BernoulliSolution::growth)
        .def_readonly("equilibrium", &BernoulliSolution::equilibrium);

    m.def("homogeneous_exact", &bernoulli_exact, py::arg("psi0"), py::arg("model"),
          "Closed-form solution of the homogeneous (space-free) equation.");

    m.def(
        "integrate",
        [](const TorusDomain& dom, const py::object& rho0, const ModelParams& p, double t_end,
           double dt, int store_every) {
            const DensityField f = to_field(dom, rho0);
            Trajectory traj;
            {
                py::gil_scoped_release release;
                IntegrateOptions opts;
                opts.dt = dt;
                opts.store_every = store_every;
                traj = integrate(f, p, t_end, opts);
            }
            return trajectory_dict(traj);
        },
        py::arg("domain"), py::arg("rho0"), py::arg("model"), py::arg("t_end"), py::arg("dt") = 0.0,
        py::arg("store_every") = 1,
        "RK4 solve of the nonlocal density equation; dt <= 0 picks the stability default.");

    m.def(
        "picard_solve",
        [](const TorusDomain& dom, const py::object& rho0, const ModelParams& p, double t_end,
           double dt, int max_iterations, double tolerance) {
            const DensityField f = to_field(dom, rho0);
            Trajectory traj;
            {
                py::gil_scoped_release release;
                PicardOptions opts;
                opts.dt = dt;
                opts.max_iterations = max_iterations;
                opts.tolerance = tolerance;
                traj = picard_solve(f, p, t_end, opts);
            }
            return trajectory_dict(traj);
        },
        py::arg("domain"), py::arg("rho0"), py::arg("model"), py::arg("t_end"), py::arg("dt") = 0.01,
        py::arg("max_iterations") = 80, py::arg("tolerance") = 1e-12,
        "Mild-form fixed-point solve of the same equation (independent of the RK4 path).");

    m.def(
        "run_ensemble",
        [](const TorusDomain& dom, const py::object& rho0, const ModelParams& p, double t_end,
           const std::vector<double>& snapshot_times, int runs, std::uint64_t seed, int threads,
           double pair_r_max, int pair_bins, std::size_t population_cap) {
            const DensityField f = to_field(dom, rho0);
            EnsembleResult result;
            {
                py::gil_scoped_release release;
                EnsembleOptions opts;
                opts.t_end = t_end;
                opts.snapshot_times = snapshot_times;
                opts.runs = runs;
                opts.seed = seed;
                opts.threads = threads;
                opts.pair_r_max = pair_r_max;
                opts.pair_bins = pair_bins;
                opts.population_cap = population_cap;
                result = run_ensemble(dom, f, p, opts);
            }
            py::list snapshots;
            for (const CorrelationEstimate& s : result.snapshots) {
                py::dict d;
                d["time"] = s.time;
                d["runs"] = s.runs;
                d["mean_density"] = s.mean_density;
                d["density_stderr"] = s.density_stderr;
                d["populations"] = py::cast(s.populations);
                d["k1"] = field_array(s.k1_field);
                d["r_centers"] = py::cast(s.r_centers);
                d["k2_hat"] = py::cast(s.k2_hat);
                d["k2_stderr"] = py::cast(s.k2_stderr);
                snapshots.append(d);
            }
            py::dict out;
            out["snapshots"] = snapshots;
            out["blown_up_runs"] = py::cast(result.blown_up_runs);
            return out;
        },
        py::arg("domain"), py::arg("rho0"), py::arg("model"), py::arg("t_end"),
        py::arg("snapshot_times"), py::arg("runs") = 1, py::arg("seed") = 0, py::arg("threads") = 1,
        py::arg("pair_r_max") = 0.0, py::arg("pair_bins") = 0,
        py::arg("population_cap") = std::size_t{1000000},
        "Monte Carlo ensemble of the particle process with density and pair statistics.");

    m.def(
        "evolve_chain",
        [](const TorusDomain& dom, const py::object& rho0, const ModelParams& p, double eps,
           double t_end, double dt, int store_every, const std::string& closure) {
            const Closure cl = parse_closure(closure);
            const DensityField f = to_field(dom, rho0);
            ChainTrajectory traj;
            std::vector<double> residuals;
            {
                py::gil_scoped_release release;
                ChainEvolveOptions opts;
                opts.dt = dt;
                opts.store_every = store_every;
                traj = evolve_chain(product_state(f, cl), p, eps, t_end, opts);
                residuals.reserve(traj.chains.size());
                for (const CorrelationChain& c : traj.chains) residuals.push_back(c.product_residual());
            }
            py::dict d;
            d["times"] = py::cast(traj.times);
            std::vector<DensityField> k1s;
            k1s.reserve(traj.chains.size());
            for (const CorrelationChain& c : traj.chains) k1s.emplace_back(dom, c.k1);
            d["k1"] = stack_fields(k1s);
            d["k2_final"] = square_array(traj.chains.back().k2, dom.points_per_axis());
            d["max_asymmetry"] = traj.max_asymmetry;
            d["product_residuals"] = py::cast(residuals);
            return d;
        },
        py::arg("domain"), py::arg("rho0"), py::arg("model"), py::arg("epsilon"), py::arg("t_end"),
        py::arg("dt") = 1e-3, py::arg("store_every") = 1,
        py::arg("closure") = "zero-third-cumulant",
        "Truncated correlation-chain evolution started from the product state of rho0.");

    m.def(
        "epsilon_sweep",
        [](const TorusDomain& dom, const py::object& rho0, const ModelParams& p,
           const std::vector<double>& epsilons, double t_end, double alpha, double alpha_star,
           double dt, int store_every, const std::string& closure) {
            const Closure cl = parse_closure(closure);
            const DensityField f = to_field(dom, rho0);
            EpsilonConvergenceReport report;
            {
                py::gil_scoped_release release;
                ChainEvolveOptions opts;
                opts.dt = dt;
                opts.store_every = store_every;
                report = epsilon_sweep(product_state(f, cl), p, epsilons, t_end, alpha, alpha_star, opts);
            }
            py::dict d;
            d["epsilons"] = py::cast(report.epsilons);
            d["distances"] = py::cast(report.distances);
            d["fitted_slope"] = report.fitted_slope;
            d["kappa"] = report.kappa;
            d["rate_constant"] = report.rate_constant;
            d["t_end"] = report.t_end;
            d["dt"] = report.dt;
            return d;
        },
        py::arg("domain"), py::arg("rho0"), py::arg("model"), py::arg("epsilons"), py::arg("t_end"),
        py::arg("alpha"), py::arg("alpha_star"), py::arg("dt") = 1e-3, py::arg("store_every") = 1,
        py::arg("closure") = "zero-third-cumulant",
        "Weighted-norm distance of the chain at each epsilon to the epsilon=0 evolution.");

    m.def(
        "time_horizon",
        [](double alpha, double alpha_star, const ModelParams& p, const TorusDomain& dom) {
            const TimeHorizon h = time_horizon(alpha, alpha_star, p, dom);
            py::dict d;
            d["t_max"] = h.t_max;
            d["domination_theta"] = h.domination_theta ? py::cast(*h.domination_theta) : py::none();
            d["domination_margin"] = h.domination_margin ? py::cast(*h.domination_margin) : py::none();
            return d;
        },
        py::arg("alpha"), py::arg("alpha_star"), py::arg("model"), py::arg("domain"),
        "Guaranteed chain existence horizon between the two norm scales.");

    m.def(
        "certify_dominated_bound",
        [](const ModelParams& p, const TorusDomain& dom, double theta, double delta) {
            return certificate_dict(certify_dominated_bound(p, dom, theta, delta));
        },
        py::arg("model"), py::arg("domain"), py::arg("theta"), py::arg("delta") = 1e-3);
    m.def(
        "certify_excess_mass_bound",
        [](const ModelParams& p, const TorusDomain& dom, double theta, double delta) {
            return certificate_dict(certify_excess_mass_bound(p, dom, theta, delta));
        },
        py::arg("model"), py::arg("domain"), py::arg("theta"), py::arg("delta") = 1e-3);
    m.def(
        "certify_global_support_bound",
        [](const ModelParams& p, const TorusDomain& dom, double delta, double min_theta) {
            return certificate_dict(certify_global_support_bound(p, dom, delta, min_theta));
        },
        py::arg("model"), py::arg("domain"), py::arg("delta") = 1e-3, py::arg("min_theta") = 0.0);

    m.def(
        "validate_config",
        [](const std::string& text, const std::string& name) {
            const ExperimentConfig cfg = parse_config(text, name);
            dry_check(cfg);
            py::dict d;
            d["name"] = cfg.name;
            d["kind"] = to_string(cfg.kind);
            d["config_hash"] = cfg.config_hash;
            return d;
        },
        py::arg("text"), py::arg("name") = "config",
        "Parses and statically checks a config; raises ConfigError on problems.");

    m.def(
        "run_config",
        [](const std::string& text, const std::string& name, const std::string& output_dir,
           const std::optional<std::uint64_t>& seed_override, int threads) {
            const ExperimentConfig cfg = parse_config(text, name);
            dry_check(cfg);
            RunManifest man;
            {
                py::gil_scoped_release release;
                RunOptions opts;
                opts.output_dir = output_dir;
                opts.seed_override = seed_override;
                opts.threads = threads;
                man = run_experiment(cfg, opts);
            }
            return manifest_dict(man);
        },
        py::arg("text"), py::arg("name") = "config", py::arg("output_dir") = "",
        py::arg("seed_override") = py::none(), py::arg("threads") = 1,
        "Runs a config given as text and returns the manifest of written outputs.");

    m.def(
        "run_config_file",
        [](const std::string& path, const std::string& output_dir,
           const std::optional<std::uint64_t>& seed_override, int threads) {
            const ExperimentConfig cfg = load_config(path);
            dry_check(cfg);
            RunManifest man;
            {
                py::gil_scoped_release release;
                RunOptions opts;
                opts.output_dir = output_dir;
                opts.seed_override = seed_override;
                opts.threads = threads;
                man = run_experiment(cfg, opts);
            }
            return manifest_dict(man);
        },
        py::arg("path"), py::arg("output_dir") = "", py::arg("seed_override") = py::none(),
        py::arg("threads") = 1, "Runs a config file on disk, like the command line tool.");

    m.def("content_hash", &content_hash, py::arg("data"),
          "FNV-1a 64 content hash used in manifests.");
}
