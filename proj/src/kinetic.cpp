#include "sbdlab/kinetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace sbdlab {

double BernoulliSolution::operator()(double t) const {
    if (quadratic == 0.0)
        return psi0 * std::exp(growth * t);
    if (growth == 0.0)
        return psi0 / (1.0 + quadratic * psi0 * t);
    // psi0 / (e^{-g t} + beta psi0 (1 - e^{-g t}) / g): stable for either sign of g
    const double decay = std::exp(-growth * t);
    const double denom = decay + quadratic * psi0 * (-std::expm1(-growth * t)) / growth;
    return psi0 / denom;
}

BernoulliSolution bernoulli_exact(double psi0, const ModelParams& p) {
    if (!(psi0 >= 0.0) || !std::isfinite(psi0))
        throw std::invalid_argument("bernoulli_exact: initial density must be finite and >= 0");
    p.validate();
    BernoulliSolution s;
    s.psi0 = psi0;
    s.growth = kernel_stats(p.birth).mass - p.mortality;
    s.quadratic = kernel_stats(p.competition).mass;
    s.regime = s.growth > 0.0   ? BernoulliSolution::Regime::supercritical
               : s.growth < 0.0 ? BernoulliSolution::Regime::subcritical
                                : BernoulliSolution::Regime::critical;
    s.equilibrium = (s.growth > 0.0 && s.quadratic > 0.0) ? s.growth / s.quadratic : 0.0;
    return s;
}

KineticOperator::KineticOperator(const ModelParams& p, const TorusDomain& dom)
    : dom_(dom),
      mortality_(p.mortality),
      birth_(periodize(p.birth, dom)),
      competition_(periodize(p.competition, dom)) {
    p.validate();
    if (p.dim() != dom.dim())
        throw std::invalid_argument("KineticOperator: kernel and domain dimensions differ");
}

void KineticOperator::rhs_into(const DensityField& rho, DensityField& out) const {
    require_same_domain(rho.domain, dom_, "KineticOperator::rhs");
    const DensityField pressure = torus_convolve(rho, competition_);
    const DensityField recruitment = torus_convolve(rho, birth_);
    out.values.resize(rho.values.size());
    for (std::size_t i = 0; i < rho.values.size(); ++i)
        out.values[i] = -mortality_ * rho.values[i] - pressure.values[i] * rho.values[i] + recruitment.values[i];
}

DensityField KineticOperator::rhs(const DensityField& rho) const {
    DensityField out(dom_);
    rhs_into(rho, out);
    return out;
}

DensityField kinetic_rhs(const DensityField& rho, const ModelParams& p) {
    return KineticOperator(p, rho.domain).rhs(rho);
}

double default_time_step(const KineticOperator& op, const DensityField& rho0) {
    const double rate = op.mortality() + op.birth_mass() + op.competition_mass() * rho0.sup_norm();
    return rate > 0.0 ? 0.1 / rate : 0.1;
}

namespace {

StepDiagnostics diagnose(double t, double dt, const DensityField& rho, double min_before_clamp) {
    StepDiagnostics d;
    d.time = t;
    d.dt = dt;
    d.sup = rho.sup_norm();
    d.min_value = min_before_clamp;
    return d;
}

}  // namespace

Trajectory integrate(const KineticOperator& op, const DensityField& rho0, double t_end, IntegrateOptions opts) {
    require_same_domain(rho0.domain, op.domain(), "integrate");
    if (!(t_end >= 0.0))
        throw std::invalid_argument("integrate: t_end must be >= 0");
    double dt = opts.dt > 0.0 ? opts.dt : default_time_step(op, rho0);
    const long n_steps = t_end > 0.0 ? std::max<long>(1, static_cast<long>(std::ceil(t_end / dt - 1e-9))) : 0;
    const int stride = std::max(1, opts.store_every);

    Trajectory traj;
    traj.times.push_back(0.0);
    traj.fields.push_back(rho0);
    traj.diagnostics.push_back(diagnose(0.0, dt, rho0, rho0.min()));

    DensityField rho = rho0;
    DensityField s1(op.domain()), s2(op.domain()), s3(op.domain()), s4(op.domain()), tmp(op.domain());
    double t = 0.0;
    for (long step = 0; step < n_steps; ++step) {
        const double h = std::min(dt, t_end - t);
        op.rhs_into(rho, s1);
        for (std::size_t i = 0; i < rho.values.size(); ++i) tmp.values[i] = rho.values[i] + 0.5 * h * s1.values[i];
        op.rhs_into(tmp, s2);
        for (std::size_t i = 0; i < rho.values.size(); ++i) tmp.values[i] = rho.values[i] + 0.5 * h * s2.values[i];
        op.rhs_into(tmp, s3);
        for (std::size_t i = 0; i < rho.values.size(); ++i) tmp.values[i] = rho.values[i] + h * s3.values[i];
        op.rhs_into(tmp, s4);
        for (std::size_t i = 0; i < rho.values.size(); ++i)
            rho.values[i] += h / 6.0 * (s1.values[i] + 2.0 * s2.values[i] + 2.0 * s3.values[i] + s4.values[i]);
        t += h;

        const double sup = rho.sup_norm();
        const double min_before = rho.min();
        if (!std::isfinite(sup))
            throw InstabilityError("integrate: non-finite density at step " + std::to_string(step + 1) +
                                   " (t = " + std::to_string(t) + "); reduce dt");
        if (min_before < 0.0) {
            if (min_before < -opts.clamp_tol * std::max(sup, 1.0))
                throw InstabilityError("integrate: density undershoot " + std::to_string(min_before) +
                                       " beyond clamp tolerance at step " + std::to_string(step + 1) +
                                       " (t = " + std::to_string(t) + "); reduce dt");
            for (double& v : rho.values)
                if (v < 0.0) {
                    v = 0.0;
                    ++traj.clamped_points;
                }
        }
        if ((step + 1) % stride == 0 || step + 1 == n_steps) {
            traj.times.push_back(t);
            traj.fields.push_back(rho);
            traj.diagnostics.push_back(diagnose(t, h, rho, min_before));
        }
    }
    return traj;
}

Trajectory integrate(const DensityField& rho0, const ModelParams& p, double t_end, const IntegrateOptions& opts) {
    return integrate(KineticOperator(p, rho0.domain), rho0, t_end, opts);
}

Trajectory picard_solve(const DensityField& rho0, const ModelParams& p, double t_end, const PicardOptions& opts) {
    if (!(t_end > 0.0))
        throw std::invalid_argument("picard_solve: t_end must be > 0");
    if (!(opts.dt > 0.0))
        throw std::invalid_argument("picard_solve: dt must be > 0");
    const KineticOperator op(p, rho0.domain);
    const std::size_t n_points = rho0.values.size();
    const int n_panels = std::max(1, static_cast<int>(std::ceil(t_end / opts.dt - 1e-9)));
    const double dt = t_end / n_panels;
    const int n_times = n_panels + 1;

    // Shift that makes the integral map monotone: u_t = exp(-shift t) rho_t.
    const double shift = std::max(0.0, op.birth_mass() - op.mortality());
    const double total_decay = op.mortality() + shift;

    std::vector<DensityField> u(static_cast<std::size_t>(n_times), rho0);
    std::vector<DensityField> u_next = u;
    std::vector<std::vector<double>> cum(static_cast<std::size_t>(n_times));   // int_0^t e^{shift s} (a- * u_s) ds
    std::vector<std::vector<double>> gain(static_cast<std::size_t>(n_times));  // (a+ * u_t) / survival_t
    std::vector<std::vector<double>> survival(static_cast<std::size_t>(n_times));

    double previous_residual = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        // survival_t(x) = exp(-total_decay t - cum_t(x)); trapezoid for cum.
        std::vector<double> w_prev(n_points), w_cur(n_points);
        for (int j = 0; j < n_times; ++j) {
            const double tj = j * dt;
            const DensityField comp = torus_convolve(u[static_cast<std::size_t>(j)], op.competition_kernel());
            const double tilt = std::exp(shift * tj);
            for (std::size_t x = 0; x < n_points; ++x) w_cur[x] = tilt * comp.values[x];
            auto& c = cum[static_cast<std::size_t>(j)];
            c.resize(n_points);
            if (j == 0) {
                std::fill(c.begin(), c.end(), 0.0);
            } else {
                const auto& cp = cum[static_cast<std::size_t>(j - 1)];
                for (std::size_t x = 0; x < n_points; ++x) c[x] = cp[x] + 0.5 * dt * (w_prev[x] + w_cur[x]);
            }
            auto& s = survival[static_cast<std::size_t>(j)];
            s.resize(n_points);
            for (std::size_t x = 0; x < n_points; ++x) s[x] = std::exp(-total_decay * tj - c[x]);
            const DensityField born = torus_convolve(u[static_cast<std::size_t>(j)], op.birth_kernel());
            auto& g = gain[static_cast<std::size_t>(j)];
            g.resize(n_points);
            for (std::size_t x = 0; x < n_points; ++x) g[x] = born.values[x] / s[x];
            std::swap(w_prev, w_cur);
        }
        // u_next_t = survival_t (rho0 + int_0^t gain_s ds), prefix trapezoid in s.
        std::vector<double> prefix(n_points, 0.0);
        for (int j = 0; j < n_times; ++j) {
            if (j > 0) {
                const auto& ga = gain[static_cast<std::size_t>(j - 1)];
                const auto& gb = gain[static_cast<std::size_t>(j)];
                for (std::size_t x = 0; x < n_points; ++x) prefix[x] += 0.5 * dt * (ga[x] + gb[x]);
            }
            auto& un = u_next[static_cast<std::size_t>(j)];
            const auto& s = survival[static_cast<std::size_t>(j)];
            for (std::size_t x = 0; x < n_points; ++x) un.values[x] = s[x] * (rho0.values[x] + prefix[x]);
        }
        double residual = 0.0;
        for (int j = 0; j < n_times; ++j)
            for (std::size_t x = 0; x < n_points; ++x)
                residual = std::max(residual,
                                    std::abs(u_next[static_cast<std::size_t>(j)].values[x] -
                                             u[static_cast<std::size_t>(j)].values[x]));
        if (!std::isfinite(residual))
            throw ConvergenceFailureError("picard_solve: iteration diverged (non-finite residual)");
        u.swap(u_next);
        if (residual <= opts.tolerance) {
            previous_residual = residual;
            break;
        }
        if (iter >= 2 && residual >= previous_residual)
            throw ConvergenceFailureError("picard_solve: fixed point failed to contract (residual " +
                                          std::to_string(residual) + " after " + std::to_string(iter + 1) +
                                          " sweeps); shorten the horizon");
        previous_residual = residual;
        if (iter + 1 == opts.max_iterations && residual > 1e3 * opts.tolerance)
            throw ConvergenceFailureError("picard_solve: residual " + std::to_string(residual) +
                                          " after max iterations");
    }

    Trajectory traj;
    traj.times.reserve(static_cast<std::size_t>(n_times));
    traj.fields.reserve(static_cast<std::size_t>(n_times));
    for (int j = 0; j < n_times; ++j) {
        const double tj = j * dt;
        DensityField rho = u[static_cast<std::size_t>(j)];
        const double tilt = std::exp(shift * tj);
        for (double& v : rho.values) v *= tilt;
        traj.diagnostics.push_back(diagnose(tj, dt, rho, rho.min()));
        traj.times.push_back(tj);
        traj.fields.push_back(std::move(rho));
    }
    return traj;
}

}  // namespace sbdlab
