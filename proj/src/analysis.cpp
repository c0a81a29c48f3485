#include "sbdlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sbdlab {

std::optional<double> domination_theta(const GridKernel& plus, const GridKernel& minus) {
    require_same_domain(plus.domain, minus.domain, "domination_theta");
    double theta = 0.0;
    for (std::size_t i = 0; i < plus.values.size(); ++i) {
        const double p = plus.values[i];
        const double q = minus.values[i];
        if (q < kKernelSetTolerance) {
            if (p > kKernelSetTolerance) return std::nullopt;  // dispersal escapes the competition support
            continue;
        }
        theta = std::max(theta, p / q);
    }
    return theta;
}

KernelComparison compare_kernels(const GridKernel& plus, const GridKernel& minus, double theta) {
    require_same_domain(plus.domain, minus.domain, "compare_kernels");
    if (!(theta > 0.0))
        throw std::invalid_argument("compare_kernels: theta must be > 0");
    KernelComparison c;
    c.theta = theta;
    const double cv = plus.domain.cell_volume();
    std::size_t members = 0;
    for (std::size_t i = 0; i < plus.values.size(); ++i) {
        if (plus.values[i] > theta * minus.values[i] + kKernelSetTolerance) {
            ++members;
            c.f_plus += plus.values[i];
            c.f_minus += minus.values[i];
        }
    }
    c.f_plus *= cv;
    c.f_minus *= cv;
    c.region_measure = static_cast<double>(members) * cv;
    c.excess = c.f_plus - theta * c.f_minus;
    c.regime = members == 0 ? KernelComparison::Regime::dominated : KernelComparison::Regime::non_dominated;
    return c;
}

namespace {

struct BallPair {
    double alpha, R, beta, r, ball_R, ball_r;  // amplitudes, radii, ball measures
};

std::optional<BallPair> as_ball_pair(const KernelSpec& plus, const KernelSpec& minus) {
    if (plus.shape != KernelShape::ball || minus.shape != KernelShape::ball) return std::nullopt;
    if (plus.amplitude <= 0.0 || minus.amplitude <= 0.0) return std::nullopt;
    if (!(plus.radius > minus.radius)) return std::nullopt;
    BallPair b;
    b.alpha = plus.amplitude;
    b.R = plus.radius;
    b.beta = minus.amplitude;
    b.r = minus.radius;
    const double pi = 3.14159265358979323846;
    b.ball_R = plus.dim == 1 ? 2.0 * b.R : pi * b.R * b.R;
    b.ball_r = plus.dim == 1 ? 2.0 * b.r : pi * b.r * b.r;
    return b;
}

}  // namespace

std::optional<double> ball_pair_excess(const KernelSpec& plus, const KernelSpec& minus, double theta) {
    const auto b = as_ball_pair(plus, minus);
    if (!b) return std::nullopt;
    if (theta < b->alpha / b->beta) return b->alpha * b->ball_R - theta * b->beta * b->ball_r;
    return b->alpha * (b->ball_R - b->ball_r);
}

std::optional<double> ball_pair_tail_mass(const KernelSpec& plus, const KernelSpec& minus) {
    const auto b = as_ball_pair(plus, minus);
    if (!b) return std::nullopt;
    return b->alpha * (b->ball_R - b->ball_r);
}

bool ratio_hypothesis_holds(const GridKernel& plus, const GridKernel& minus, double mortality) {
    require_same_domain(plus.domain, minus.domain, "ratio_hypothesis_holds");
    const double cv = plus.domain.cell_volume();
    double plus_mass = 0.0, minus_mass = 0.0;
    for (double v : plus.values) plus_mass += v;
    for (double v : minus.values) minus_mass += v;
    plus_mass *= cv;
    minus_mass *= cv;
    if (plus_mass <= 0.0) return false;
    const double surplus = plus_mass - mortality;
    if (surplus <= 0.0) return true;  // right-hand side nonpositive, holds trivially
    if (minus_mass <= 0.0) return false;
    // pointwise a+(x) <a-> >= (<a+> - m) a-(x), degree zero in the a- scale
    for (std::size_t i = 0; i < plus.values.size(); ++i)
        if (plus.values[i] * minus_mass < surplus * minus.values[i] - kKernelSetTolerance)
            return false;
    return true;
}

double Certificate::detail(const std::string& key) const {
    for (const auto& [k, v] : details)
        if (k == key) return v;
    throw std::out_of_range("Certificate: no detail named '" + key + "'");
}

Certificate certify_dominated_bound(const ModelParams& p, const TorusDomain& dom, double theta,
                                           double delta) {
    p.validate();
    if (!(theta > 0.0))
        throw std::invalid_argument("certify_dominated_bound: theta must be > 0");
    Certificate cert;
    cert.check_id = "dominated-bound";
    cert.bound_theta = theta;
    cert.delta = delta;
    const GridKernel plus = periodize(p.birth, dom);
    const GridKernel minus = periodize(p.competition, dom);
    const auto least = domination_theta(plus, minus);
    cert.details.emplace_back("theta", theta);
    cert.details.emplace_back("delta", delta);
    cert.details.emplace_back("mortality", p.mortality);
    if (least) cert.details.emplace_back("least_domination_theta", *least);
    cert.hypotheses_hold = least.has_value() && *least <= theta;
    return cert;
}

Certificate certify_excess_mass_bound(const ModelParams& p, const TorusDomain& dom, double theta,
                                             double delta) {
    p.validate();
    if (!(theta > 0.0))
        throw std::invalid_argument("certify_excess_mass_bound: theta must be > 0");
    Certificate cert;
    cert.check_id = "excess-mass-bound";
    cert.bound_theta = theta;
    cert.delta = delta;
    const GridKernel plus = periodize(p.birth, dom);
    const GridKernel minus = periodize(p.competition, dom);
    const KernelComparison cmp = compare_kernels(plus, minus, theta);
    const auto closed = ball_pair_excess(p.birth, p.competition, theta);
    const double excess = closed ? *closed : cmp.excess;
    cert.details.emplace_back("theta", theta);
    cert.details.emplace_back("delta", delta);
    cert.details.emplace_back("mortality", p.mortality);
    cert.details.emplace_back("excess", excess);
    cert.details.emplace_back("excess_grid", cmp.excess);
    cert.details.emplace_back("f_plus", cmp.f_plus);
    cert.details.emplace_back("f_minus", cmp.f_minus);
    cert.details.emplace_back("region_measure", cmp.region_measure);
    if (closed) cert.details.emplace_back("excess_closed_form", *closed);
    if (const auto tail = ball_pair_tail_mass(p.birth, p.competition))
        cert.details.emplace_back("ball_tail_mass", *tail);
    // grid sums of an indicator can miss the region boundary by at most one
    // cell layer in each kernel; record that quadrature allowance
    const double quad = 2.0 * std::max(kernel_stats(p.birth).sup_norm, theta * kernel_stats(p.competition).sup_norm) *
                        dom.cell_volume();
    cert.details.emplace_back("grid_quadrature_allowance", quad);
    cert.hypotheses_hold = excess < p.mortality;
    return cert;
}

Certificate certify_global_support_bound(const ModelParams& p, const TorusDomain& dom, double delta,
                                                double min_theta) {
    p.validate();
    Certificate cert;
    cert.check_id = "global-bound";
    cert.delta = delta;
    const GridKernel plus = periodize(p.birth, dom);
    const GridKernel minus = periodize(p.competition, dom);
    const double cv = dom.cell_volume();
    double outside_mass = 0.0;  // dispersal mass where competition vanishes
    for (std::size_t i = 0; i < plus.values.size(); ++i)
        if (minus.values[i] < kKernelSetTolerance) outside_mass += plus.values[i];
    outside_mass *= cv;
    cert.details.emplace_back("mortality", p.mortality);
    cert.details.emplace_back("outside_support_mass", outside_mass);
    if (const auto tail = ball_pair_tail_mass(p.birth, p.competition))
        cert.details.emplace_back("ball_tail_mass", *tail);
    cert.hypotheses_hold = outside_mass < p.mortality;
    if (!cert.hypotheses_hold) return cert;
    // find a certified level: smallest scanned theta whose excess drops below m
    double theta = std::max({1e-6, min_theta, p.mortality, kernel_stats(p.birth).mass});
    for (int tries = 0; tries < 400; ++tries) {
        const auto closed = ball_pair_excess(p.birth, p.competition, theta);
        const double excess = closed ? *closed : compare_kernels(plus, minus, theta).excess;
        if (excess < p.mortality) {
            cert.bound_theta = theta;
            cert.details.emplace_back("theta", theta);
            cert.details.emplace_back("excess", excess);
            break;
        }
        theta *= 1.25;
    }
    if (!cert.bound_theta) cert.hypotheses_hold = false;  // no finite level found in the scan
    return cert;
}

Certificate& verify_bound_on_trajectory(const Trajectory& traj, Certificate& cert) {
    if (!cert.bound_theta)
        throw std::invalid_argument("verify_bound_on_trajectory: certificate carries no bound level");
    if (traj.fields.empty())
        throw std::invalid_argument("verify_bound_on_trajectory: empty trajectory");
    const double theta = *cert.bound_theta;
    const double start = traj.fields.front().max();
    if (start > theta - cert.delta)
        throw std::invalid_argument("verify_bound_on_trajectory: initial density " + std::to_string(start) +
                                    " exceeds theta - delta = " + std::to_string(theta - cert.delta));
    cert.conclusion = Certificate::Conclusion::verified;
    cert.worst_margin = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < traj.fields.size(); ++s) {
        const double sup = traj.fields[s].max();
        const double margin = theta - sup;
        if (margin < cert.worst_margin) cert.worst_margin = margin;
        if (sup > theta && cert.conclusion == Certificate::Conclusion::verified) {
            cert.conclusion = Certificate::Conclusion::violated;
            cert.violation_time = traj.times[s];
            std::size_t where = 0;
            for (std::size_t i = 0; i < traj.fields[s].values.size(); ++i)
                if (traj.fields[s].values[i] > traj.fields[s].values[where]) where = i;
            cert.violation_index = where;
        }
    }
    return cert;
}

Certificate certify_sandwich(const Trajectory& traj, const ModelParams& p, double kappa_minus,
                                    double kappa_plus) {
    p.validate();
    if (traj.fields.empty())
        throw std::invalid_argument("certify_sandwich: empty trajectory");
    Certificate cert;
    cert.check_id = "sandwich-homogenization";
    const TorusDomain& dom = traj.fields.front().domain;
    const GridKernel plus = periodize(p.birth, dom);
    const GridKernel minus = periodize(p.competition, dom);
    const double plus_mass = plus.discrete_mass;
    const double minus_mass = minus.discrete_mass;
    const double growth = plus_mass - p.mortality;
    const double q = minus_mass > 0.0 ? growth / minus_mass : 0.0;

    // least admissible pinch slope: a+ >= kappa_plus a- everywhere on the grid
    bool kernel_pinch = true;
    for (std::size_t i = 0; i < plus.values.size(); ++i)
        if (plus.values[i] + kKernelSetTolerance < kappa_plus * minus.values[i]) {
            kernel_pinch = false;
            break;
        }
    const bool ratio_ok = ratio_hypothesis_holds(plus, minus, p.mortality);
    const double rho0_min = traj.fields.front().min();
    const double rho0_max = traj.fields.front().max();
    const bool initial_pinched = kappa_minus < rho0_min && rho0_max < kappa_plus;

    cert.details.emplace_back("q", q);
    cert.details.emplace_back("kappa_minus", kappa_minus);
    cert.details.emplace_back("kappa_plus", kappa_plus);
    cert.details.emplace_back("mortality", p.mortality);
    cert.details.emplace_back("birth_mass", plus_mass);
    cert.details.emplace_back("competition_mass", minus_mass);
    cert.details.emplace_back("ratio_hypothesis", ratio_ok ? 1.0 : 0.0);
    cert.details.emplace_back("kernel_pinch", kernel_pinch ? 1.0 : 0.0);
    cert.details.emplace_back("initial_pinched", initial_pinched ? 1.0 : 0.0);
    cert.hypotheses_hold = growth > 0.0 && minus_mass > 0.0 && ratio_ok && kernel_pinch &&
                           kappa_plus > q && kappa_minus > 0.0 && kappa_minus < q && initial_pinched;

    // homogeneous envelopes started at the pinch levels
    BernoulliSolution lower, upper;
    lower.psi0 = kappa_minus;
    upper.psi0 = kappa_plus;
    lower.growth = upper.growth = growth;
    lower.quadratic = upper.quadratic = minus_mass;

    cert.conclusion = Certificate::Conclusion::verified;
    cert.worst_margin = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < traj.fields.size(); ++s) {
        const double t = traj.times[s];
        const double lo = lower(t);
        const double hi = upper(t);
        const double fmin = traj.fields[s].min();
        const double fmax = traj.fields[s].max();
        const double margin = std::min(fmin - lo, hi - fmax);
        if (margin < cert.worst_margin) cert.worst_margin = margin;
        if (margin <= 0.0 && cert.conclusion == Certificate::Conclusion::verified) {
            cert.conclusion = Certificate::Conclusion::violated;
            cert.violation_time = t;
            std::size_t where = 0;
            double worst = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < traj.fields[s].values.size(); ++i) {
                const double v = traj.fields[s].values[i];
                const double m_here = std::min(v - lo, hi - v);
                if (m_here < worst) {
                    worst = m_here;
                    where = i;
                }
            }
            cert.violation_index = where;
        }
        double gap = 0.0;
        for (double v : traj.fields[s].values) gap = std::max(gap, std::abs(v - q));
        cert.equilibrium_gap.emplace_back(t, gap);
    }
    return cert;
}

}  // namespace sbdlab
