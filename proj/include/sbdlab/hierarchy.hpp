#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sbdlab/field.hpp"
#include "sbdlab/model.hpp"

namespace sbdlab {

/// Rule used to express the third correlation function through the first two,
/// truncating the moment hierarchy at order 2.
enum class Closure {
    zero_third_cumulant,  // k3 = k1 k2 + k1 k2 + k1 k2 - 2 k1 k1 k1 (all pairings)
    mean_field,           // k3 = k1 k1 k1
};

/// Truncated chain of correlation functions on a d=1 grid: k0 (scalar),
/// k1 (M values) and k2 (M x M, row-major, symmetric).  Evolved states keep
/// k0 = 1; chain differences carry k0 = 0.
struct CorrelationChain {
    TorusDomain domain;
    double k0 = 1.0;
    std::vector<double> k1;
    std::vector<double> k2;
    Closure closure = Closure::zero_third_cumulant;

    explicit CorrelationChain(const TorusDomain& dom, Closure cl = Closure::zero_third_cumulant);

    std::size_t points() const { return k1.size(); }
    double k2_at(int i, int j) const { return k2[static_cast<std::size_t>(i) * points() + j]; }
    double& k2_at(int i, int j) { return k2[static_cast<std::size_t>(i) * points() + j]; }

    double max_k2_asymmetry() const;
    void symmetrize_k2();

    /// max |k2(i,j) - k1(i) k1(j)|: zero exactly on product states.
    double product_residual() const;
};

/// Uncorrelated chain built from a density: k1 = rho, k2 = rho (x) rho.
CorrelationChain product_state(const DensityField& rho, Closure cl = Closure::zero_third_cumulant);

/// Weighted chain norm max(|k0|, e^alpha sup|k1|, e^{2 alpha} sup|k2|);
/// nondecreasing in alpha.
struct NormScale {
    double alpha = 0.0;
    double value = 0.0;
};
NormScale sub_poissonian_norm(const CorrelationChain& chain, double alpha);

CorrelationChain chain_difference(const CorrelationChain& a, const CorrelationChain& b);

/// Evolution operator for the truncated chain.  The drift part is the
/// mean-field (closure) dynamics; the correction part collects the pair terms
/// that enter at order epsilon.
class ChainOperator {
public:
    ChainOperator(const ModelParams& p, const TorusDomain& dom);

    /// Closure-truncated drift: d/dt (k1, k2) without the epsilon correction.
    CorrelationChain apply_vlasov(const CorrelationChain& chain) const;
    /// Pair-interaction correction; its k1 row vanishes identically.
    CorrelationChain apply_correction(const CorrelationChain& chain) const;

    const TorusDomain& domain() const { return dom_; }
    double birth_mass() const { return plus_mass_; }
    double competition_mass() const { return minus_mass_; }

private:
    void rhs_into(const CorrelationChain& chain, double eps, CorrelationChain& out) const;
    friend struct ChainEvolver;

    TorusDomain dom_;
    double mortality_;
    std::vector<double> plus_ring_;   // periodised dispersal kernel on the grid
    std::vector<double> minus_ring_;  // periodised competition kernel
    double plus_mass_ = 0.0;
    double minus_mass_ = 0.0;
};

CorrelationChain apply_vlasov(const CorrelationChain& chain, const ModelParams& p);
CorrelationChain apply_correction(const CorrelationChain& chain, const ModelParams& p);

struct ChainTrajectory {
    std::vector<double> times;
    std::vector<CorrelationChain> chains;
    double max_asymmetry = 0.0;  // worst |k2 - k2^T| entry seen before re-symmetrising
    double dt = 0.0;
};

struct ChainEvolveOptions {
    double dt = 1e-3;
    int store_every = 1;
};

/// RK4 on the truncated chain with drift + eps * correction; k2 is
/// re-symmetrised after every step and the drift magnitude recorded.
ChainTrajectory evolve_chain(const CorrelationChain& chain0, const ModelParams& p, double eps,
                             double t_end, const ChainEvolveOptions& opts = {});

/// Guaranteed existence horizon for the weighted-norm estimate at scale alpha,
/// given data bounded at scale alpha_star > alpha.
struct TimeHorizon {
    double alpha = 0.0;
    double alpha_star = 0.0;
    double t_max = 0.0;
    std::optional<double> domination_theta;  // sup a+/a- on the grid, when finite
    std::optional<double> domination_margin; // e^{alpha_star} * theta, < 1 required for domination
};
TimeHorizon time_horizon(double alpha, double alpha_star, const ModelParams& p, const TorusDomain& dom);

struct EpsilonConvergenceReport {
    std::vector<double> epsilons;
    std::vector<double> distances;  // sup over stored times of the chain-norm distance to eps = 0
    double fitted_slope = 0.0;      // log-log least squares
    double alpha = 0.0;
    double alpha_star = 0.0;
    double kappa = 0.0;           // alpha_star - alpha
    double rate_constant = 0.0;   // (2/(e kappa))^2 (sup a- + sup a+ e^{alpha_star}), for reference
    double t_end = 0.0;
    double dt = 0.0;
};

/// Evolves the chain for eps = 0 and each requested eps > 0 and reports the
/// weighted-norm distances together with their log-log slope in eps.
EpsilonConvergenceReport epsilon_sweep(const CorrelationChain& chain0, const ModelParams& p,
                                       const std::vector<double>& epsilons, double t_end,
                                       double alpha, double alpha_star,
                                       const ChainEvolveOptions& opts = {});

}  // namespace sbdlab
