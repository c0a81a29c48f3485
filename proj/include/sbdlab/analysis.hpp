#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sbdlab/kernels.hpp"
#include "sbdlab/kinetic.hpp"
#include "sbdlab/model.hpp"

namespace sbdlab {

/// Grid set membership uses absolute tolerances: a point belongs to the
/// excess region when a+ > theta a- + 1e-12, and to the no-competition region
/// when a- < 1e-12.
constexpr double kKernelSetTolerance = 1e-12;

/// Comparison of dispersal against competition at threshold theta.
struct KernelComparison {
    double theta = 0.0;
    double region_measure = 0.0;  // measure of the grid set {a+ > theta a-}
    double f_plus = 0.0;          // dispersal mass inside that set
    double f_minus = 0.0;         // competition mass inside that set
    double excess = 0.0;          // f_plus - theta * f_minus
    enum class Regime { dominated, non_dominated } regime = Regime::dominated;
};

/// Least theta with a+ <= theta a- everywhere on the grid, or nullopt when
/// dispersal reaches outside the competition support (no finite theta).
/// An identically zero a+ reports 0 (any positive theta works).
std::optional<double> domination_theta(const GridKernel& plus, const GridKernel& minus);

KernelComparison compare_kernels(const GridKernel& plus, const GridKernel& minus, double theta);

/// Closed-form excess for a pair of ball indicators a+ = alpha 1_{B_R},
/// a- = beta 1_{B_r} with R > r:
///   alpha |B_R| - theta beta |B_r|      for theta < alpha / beta,
///   alpha (|B_R| - |B_r|)               otherwise.
/// nullopt when the pair is not of that shape.
std::optional<double> ball_pair_excess(const KernelSpec& plus, const KernelSpec& minus, double theta);

/// Dispersal mass outside the competition ball, alpha (|B_R| - |B_r|), for
/// ball pairs with R > r; nullopt otherwise.
std::optional<double> ball_pair_tail_mass(const KernelSpec& plus, const KernelSpec& minus);

/// Dimensionless recruitment/competition shape condition
/// a+(x)/<a+> >= (1 - m/<a+>) a-(x)/<a-> checked pointwise on the grid;
/// homogeneous of degree zero in a-, so rescaling a- cannot change the verdict.
bool ratio_hypothesis_holds(const GridKernel& plus, const GridKernel& minus, double mortality);

/// Machine-checkable record of one bound: which check ran, whether its
/// hypotheses hold on this model, and whether the claimed conclusion held on
/// an actual trajectory.  A certificate whose hypotheses hold but whose
/// conclusion is violated is a hard failure for the whole artifact.
struct Certificate {
    std::string check_id;  // dominated-bound | excess-mass-bound | global-bound | sandwich-homogenization
    bool hypotheses_hold = false;
    std::vector<std::pair<std::string, double>> details;  // named hypothesis quantities, stable order

    std::optional<double> bound_theta;  // sup bound being certified, when applicable
    double delta = 1e-3;                // required initial clearance below the bound

    enum class Conclusion { not_checked, verified, violated };
    Conclusion conclusion = Conclusion::not_checked;
    double worst_margin = std::numeric_limits<double>::quiet_NaN();  // min slack over time; < 0 means violated
    double violation_time = std::numeric_limits<double>::quiet_NaN();
    std::size_t violation_index = 0;

    std::vector<std::pair<double, double>> equilibrium_gap;  // (t, sup|rho - q|), sandwich check only

    double detail(const std::string& key) const;  // throws if absent
};

/// Bound sup rho_t <= theta under full domination a+ <= theta a-.
Certificate certify_dominated_bound(const ModelParams& p, const TorusDomain& dom, double theta,
                                           double delta = 1e-3);

/// Bound sup rho_t <= theta under the excess-mass condition g(theta) < m.
/// Ball-indicator pairs use the closed form; anything else uses the grid sums
/// (one-cell quadrature uncertainty is recorded in the details).
Certificate certify_excess_mass_bound(const ModelParams& p, const TorusDomain& dom, double theta,
                                             double delta = 1e-3);

/// Global boundedness from dispersal mass outside the competition support:
/// requires that mass < m, and certifies the smallest scanned theta whose
/// excess falls below m.  min_theta lets callers start the scan above the
/// initial density so the certified level is verifiable on a trajectory.
Certificate certify_global_support_bound(const ModelParams& p, const TorusDomain& dom,
                                                double delta = 1e-3, double min_theta = 0.0);

/// Checks sup rho_0 <= theta - delta, then sup rho_t <= theta at every stored
/// time; fills conclusion, worst margin and first violation (if any).
Certificate& verify_bound_on_trajectory(const Trajectory& traj, Certificate& cert);

/// Two-sided pinch between homogeneous solutions: kappa_minus < rho_t(x) <
/// kappa_plus propagates to psi^-(t) < rho_t(x) < psi^+(t) where psi^± solve
/// the homogeneous ODE from kappa_±.  Also records sup|rho_t - q| per time.
Certificate certify_sandwich(const Trajectory& traj, const ModelParams& p, double kappa_minus,
                                    double kappa_plus);

}  // namespace sbdlab
