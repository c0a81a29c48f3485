#include "sbdlab/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sbdlab/analysis.hpp"
#include "sbdlab/kinetic.hpp"

namespace sbdlab {

CorrelationChain::CorrelationChain(const TorusDomain& dom, Closure cl)
    : domain(dom), k1(dom.size(), 0.0), k2(dom.size() * dom.size(), 0.0), closure(cl) {
    if (dom.dim() != 1)
        throw std::invalid_argument("CorrelationChain: the truncated chain is implemented for d = 1 grids only");
}

double CorrelationChain::max_k2_asymmetry() const {
    const std::size_t n = points();
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            worst = std::max(worst, std::abs(k2[i * n + j] - k2[j * n + i]));
    return worst;
}

void CorrelationChain::symmetrize_k2() {
    const std::size_t n = points();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = 0.5 * (k2[i * n + j] + k2[j * n + i]);
            k2[i * n + j] = v;
            k2[j * n + i] = v;
        }
}

double CorrelationChain::product_residual() const {
    const std::size_t n = points();
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            worst = std::max(worst, std::abs(k2[i * n + j] - k1[i] * k1[j]));
    return worst;
}

CorrelationChain product_state(const DensityField& rho, Closure cl) {
    CorrelationChain c(rho.domain, cl);
    c.k0 = 1.0;
    c.k1 = rho.values;
    const std::size_t n = c.points();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            c.k2[i * n + j] = c.k1[i] * c.k1[j];
    return c;
}

NormScale sub_poissonian_norm(const CorrelationChain& chain, double alpha) {
    double sup1 = 0.0, sup2 = 0.0;
    for (double v : chain.k1) sup1 = std::max(sup1, std::abs(v));
    for (double v : chain.k2) sup2 = std::max(sup2, std::abs(v));
    NormScale n;
    n.alpha = alpha;
    n.value = std::max({std::abs(chain.k0), std::exp(alpha) * sup1, std::exp(2.0 * alpha) * sup2});
    return n;
}

CorrelationChain chain_difference(const CorrelationChain& a, const CorrelationChain& b) {
    require_same_domain(a.domain, b.domain, "chain_difference");
    CorrelationChain d(a.domain, a.closure);
    d.k0 = a.k0 - b.k0;
    for (std::size_t i = 0; i < d.k1.size(); ++i) d.k1[i] = a.k1[i] - b.k1[i];
    for (std::size_t i = 0; i < d.k2.size(); ++i) d.k2[i] = a.k2[i] - b.k2[i];
    return d;
}

ChainOperator::ChainOperator(const ModelParams& p, const TorusDomain& dom)
    : dom_(dom), mortality_(p.mortality) {
    p.validate();
    if (dom.dim() != 1)
        throw std::invalid_argument("ChainOperator: d = 1 grids only");
    if (p.dim() != 1)
        throw std::invalid_argument("ChainOperator: kernels must be one-dimensional");
    GridKernel plus = periodize(p.birth, dom);
    GridKernel minus = periodize(p.competition, dom);
    plus_ring_ = std::move(plus.values);
    minus_ring_ = std::move(minus.values);
    plus_mass_ = plus.discrete_mass;
    minus_mass_ = minus.discrete_mass;
}

namespace {

// out[q][p] = h * sum_l ring[(p - l) mod M] row_q[l] for every row q of a
// row-major M x M matrix: each k2 row convolved against the kernel ring.
void convolve_rows(const std::vector<double>& ring, const std::vector<double>& mat, int M, double h,
                   std::vector<double>& out) {
    out.resize(mat.size());
    for (int q = 0; q < M; ++q) {
        const double* row = mat.data() + static_cast<std::size_t>(q) * M;
        double* dst = out.data() + static_cast<std::size_t>(q) * M;
        for (int p = 0; p < M; ++p) {
            double s = 0.0;
            for (int l = 0; l <= p; ++l) s += ring[static_cast<std::size_t>(p - l)] * row[l];
            for (int l = p + 1; l < M; ++l) s += ring[static_cast<std::size_t>(p - l + M)] * row[l];
            dst[p] = s * h;
        }
    }
}

void convolve_vector(const std::vector<double>& ring, const std::vector<double>& v, int M, double h,
                     std::vector<double>& out) {
    out.resize(v.size());
    for (int p = 0; p < M; ++p) {
        double s = 0.0;
        for (int l = 0; l <= p; ++l) s += ring[static_cast<std::size_t>(p - l)] * v[static_cast<std::size_t>(l)];
        for (int l = p + 1; l < M; ++l) s += ring[static_cast<std::size_t>(p - l + M)] * v[static_cast<std::size_t>(l)];
        out[static_cast<std::size_t>(p)] = s * h;
    }
}

}  // namespace

void ChainOperator::rhs_into(const CorrelationChain& chain, double eps, CorrelationChain& out) const {
    require_same_domain(chain.domain, dom_, "ChainOperator");
    const int M = dom_.points_per_axis();
    const double h = dom_.cell_volume();
    const std::size_t n = static_cast<std::size_t>(M);

    // comp_rows[q][p] = int a-(x_p - y) k2(x_q, y) dy, and likewise for births.
    static thread_local std::vector<double> comp_rows, birth_rows, comp_k1, birth_k1;
    convolve_rows(minus_ring_, chain.k2, M, h, comp_rows);
    convolve_rows(plus_ring_, chain.k2, M, h, birth_rows);
    convolve_vector(minus_ring_, chain.k1, M, h, comp_k1);
    convolve_vector(plus_ring_, chain.k1, M, h, birth_k1);

    out.k0 = 0.0;
    out.k1.resize(n);
    out.k2.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        const double pair_pressure = comp_rows[i * n + i];  // int a-(x_i - y) k2(x_i, y) dy
        out.k1[i] = -mortality_ * chain.k1[i] - pair_pressure + birth_k1[i];
    }

    const bool cumulant = chain.closure == Closure::zero_third_cumulant;
    for (std::size_t i = 0; i < n; ++i) {
        const double k1i = chain.k1[i];
        const double diag_i = comp_rows[i * n + i];
        for (std::size_t j = 0; j < n; ++j) {
            const double k1j = chain.k1[j];
            const double k2ij = chain.k2[i * n + j];
            // death of the pair through a third point, closed at order 3
            double loss_i, loss_j;
            if (cumulant) {
                loss_i = k1i * comp_rows[j * n + i] + k1j * diag_i + (k2ij - 2.0 * k1i * k1j) * comp_k1[i];
                loss_j = k1j * comp_rows[i * n + j] + k1i * comp_rows[j * n + j] +
                         (k2ij - 2.0 * k1i * k1j) * comp_k1[j];
            } else {
                loss_i = k1i * k1j * comp_k1[i];
                loss_j = k1i * k1j * comp_k1[j];
            }
            double d = -2.0 * mortality_ * k2ij - loss_i - loss_j + birth_rows[j * n + i] + birth_rows[i * n + j];
            if (eps != 0.0) {
                const std::size_t sep = static_cast<std::size_t>(i >= j ? i - j : i - j + n);
                d += eps * (-2.0 * minus_ring_[sep] * k2ij + plus_ring_[sep] * (k1i + k1j));
            }
            out.k2[i * n + j] = d;
        }
    }
}

CorrelationChain ChainOperator::apply_vlasov(const CorrelationChain& chain) const {
    CorrelationChain out(dom_, chain.closure);
    rhs_into(chain, 0.0, out);
    return out;
}

CorrelationChain ChainOperator::apply_correction(const CorrelationChain& chain) const {
    require_same_domain(chain.domain, dom_, "ChainOperator");
    const std::size_t n = static_cast<std::size_t>(dom_.points_per_axis());
    CorrelationChain out(dom_, chain.closure);
    out.k0 = 0.0;
    // k1 row of the correction vanishes identically; only pairs feel it.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t sep = i >= j ? i - j : i - j + n;
            out.k2[i * n + j] = -2.0 * minus_ring_[sep] * chain.k2[i * n + j] +
                                plus_ring_[sep] * (chain.k1[i] + chain.k1[j]);
        }
    return out;
}

CorrelationChain apply_vlasov(const CorrelationChain& chain, const ModelParams& p) {
    return ChainOperator(p, chain.domain).apply_vlasov(chain);
}

CorrelationChain apply_correction(const CorrelationChain& chain, const ModelParams& p) {
    return ChainOperator(p, chain.domain).apply_correction(chain);
}

struct ChainEvolver {
    static void rhs(const ChainOperator& op, const CorrelationChain& chain, double eps, CorrelationChain& out) {
        op.rhs_into(chain, eps, out);
    }
};

ChainTrajectory evolve_chain(const CorrelationChain& chain0, const ModelParams& p, double eps, double t_end,
                             const ChainEvolveOptions& opts) {
    if (!(t_end >= 0.0))
        throw std::invalid_argument("evolve_chain: t_end must be >= 0");
    if (!(opts.dt > 0.0))
        throw std::invalid_argument("evolve_chain: dt must be > 0");
    const ChainOperator op(p, chain0.domain);
    const long n_steps = t_end > 0.0 ? std::max<long>(1, static_cast<long>(std::ceil(t_end / opts.dt - 1e-9))) : 0;
    const int stride = std::max(1, opts.store_every);

    ChainTrajectory traj;
    traj.dt = opts.dt;
    traj.times.push_back(0.0);
    traj.chains.push_back(chain0);

    CorrelationChain state = chain0;
    CorrelationChain s1(chain0.domain, chain0.closure), s2 = s1, s3 = s1, s4 = s1, tmp = s1;
    const std::size_t n1 = state.k1.size(), n2 = state.k2.size();
    double t = 0.0;
    for (long step = 0; step < n_steps; ++step) {
        const double h = std::min(opts.dt, t_end - t);
        ChainEvolver::rhs(op, state, eps, s1);
        for (std::size_t i = 0; i < n1; ++i) tmp.k1[i] = state.k1[i] + 0.5 * h * s1.k1[i];
        for (std::size_t i = 0; i < n2; ++i) tmp.k2[i] = state.k2[i] + 0.5 * h * s1.k2[i];
        ChainEvolver::rhs(op, tmp, eps, s2);
        for (std::size_t i = 0; i < n1; ++i) tmp.k1[i] = state.k1[i] + 0.5 * h * s2.k1[i];
        for (std::size_t i = 0; i < n2; ++i) tmp.k2[i] = state.k2[i] + 0.5 * h * s2.k2[i];
        ChainEvolver::rhs(op, tmp, eps, s3);
        for (std::size_t i = 0; i < n1; ++i) tmp.k1[i] = state.k1[i] + h * s3.k1[i];
        for (std::size_t i = 0; i < n2; ++i) tmp.k2[i] = state.k2[i] + h * s3.k2[i];
        ChainEvolver::rhs(op, tmp, eps, s4);
        for (std::size_t i = 0; i < n1; ++i)
            state.k1[i] += h / 6.0 * (s1.k1[i] + 2.0 * s2.k1[i] + 2.0 * s3.k1[i] + s4.k1[i]);
        for (std::size_t i = 0; i < n2; ++i)
            state.k2[i] += h / 6.0 * (s1.k2[i] + 2.0 * s2.k2[i] + 2.0 * s3.k2[i] + s4.k2[i]);
        t += h;

        traj.max_asymmetry = std::max(traj.max_asymmetry, state.max_k2_asymmetry());
        state.symmetrize_k2();
        double sup = 0.0;
        for (double v : state.k2) sup = std::max(sup, std::abs(v));
        for (double v : state.k1) sup = std::max(sup, std::abs(v));
        if (!std::isfinite(sup))
            throw InstabilityError("evolve_chain: non-finite correlation value at step " +
                                   std::to_string(step + 1) + " (t = " + std::to_string(t) + "); reduce dt");
        if ((step + 1) % stride == 0 || step + 1 == n_steps) {
            traj.times.push_back(t);
            traj.chains.push_back(state);
        }
    }
    return traj;
}

TimeHorizon time_horizon(double alpha, double alpha_star, const ModelParams& p, const TorusDomain& dom) {
    if (!(alpha < alpha_star))
        throw std::invalid_argument("time_horizon: requires alpha < alpha_star");
    TimeHorizon h;
    h.alpha = alpha;
    h.alpha_star = alpha_star;
    const double plus_mass = kernel_stats(p.birth).mass;
    const double minus_mass = kernel_stats(p.competition).mass;
    const double denom = plus_mass + minus_mass * std::exp(-alpha);
    h.t_max = denom > 0.0 ? (alpha_star - alpha) / denom : std::numeric_limits<double>::infinity();
    const GridKernel plus = periodize(p.birth, dom);
    const GridKernel minus = periodize(p.competition, dom);
    h.domination_theta = domination_theta(plus, minus);
    if (h.domination_theta)
        h.domination_margin = std::exp(alpha_star) * *h.domination_theta;
    return h;
}

EpsilonConvergenceReport epsilon_sweep(const CorrelationChain& chain0, const ModelParams& p,
                                       const std::vector<double>& epsilons, double t_end, double alpha,
                                       double alpha_star, const ChainEvolveOptions& opts) {
    if (epsilons.empty())
        throw std::invalid_argument("epsilon_sweep: need at least one epsilon");
    for (double e : epsilons)
        if (!(e > 0.0) || e > 1.0)
            throw std::invalid_argument("epsilon_sweep: every epsilon must lie in (0, 1]");
    if (!(alpha < alpha_star))
        throw std::invalid_argument("epsilon_sweep: requires alpha < alpha_star");

    EpsilonConvergenceReport rep;
    rep.epsilons = epsilons;
    rep.alpha = alpha;
    rep.alpha_star = alpha_star;
    rep.kappa = alpha_star - alpha;
    rep.t_end = t_end;
    rep.dt = opts.dt;
    const double e_const = 2.718281828459045;
    const double factor = 2.0 / (e_const * rep.kappa);
    rep.rate_constant = factor * factor * (kernel_stats(p.competition).sup_norm +
                                           kernel_stats(p.birth).sup_norm * std::exp(alpha_star));

    const ChainTrajectory base = evolve_chain(chain0, p, 0.0, t_end, opts);
    rep.distances.reserve(epsilons.size());
    for (double eps : epsilons) {
        const ChainTrajectory traj = evolve_chain(chain0, p, eps, t_end, opts);
        double dist = 0.0;
        const std::size_t shared = std::min(base.chains.size(), traj.chains.size());
        for (std::size_t s = 0; s < shared; ++s) {
            const CorrelationChain diff = chain_difference(traj.chains[s], base.chains[s]);
            dist = std::max(dist, sub_poissonian_norm(diff, alpha).value);
        }
        rep.distances.push_back(dist);
    }

    // least-squares slope of log(distance) against log(eps)
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const std::size_t n = epsilons.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double x = std::log(epsilons[i]);
        const double y = std::log(std::max(rep.distances[i], 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = n * sxx - sx * sx;
    rep.fitted_slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
    return rep;
}

}  // namespace sbdlab
