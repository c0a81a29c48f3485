#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbdlab/field.hpp"
#include "sbdlab/model.hpp"

namespace sbdlab {

/// Raised when the fixed-step integrator detects a non-finite value or a
/// negative undershoot beyond the clamp tolerance.
class InstabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when the integral-equation fixed point stops contracting.
class ConvergenceFailureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Closed-form solution of the spatially homogeneous density ODE
/// psi' = (<a+> - m) psi - <a-> psi^2.
struct BernoulliSolution {
    double psi0 = 0.0;
    double growth = 0.0;       // <a+> - m
    double quadratic = 0.0;    // <a->
    double equilibrium = 0.0;  // growth / quadratic when both nonzero
    enum class Regime { subcritical, critical, supercritical } regime = Regime::critical;

    double operator()(double t) const;
};

/// bernoulli_exact uses the kernel masses of `p`; psi0 must be >= 0.
BernoulliSolution bernoulli_exact(double psi0, const ModelParams& p);

/// Density evolution operator on a fixed grid.  Periodises both kernels once;
/// rhs(rho) = -m rho - (a- * rho) rho + (a+ * rho).
class KineticOperator {
public:
    KineticOperator(const ModelParams& p, const TorusDomain& dom);

    DensityField rhs(const DensityField& rho) const;
    void rhs_into(const DensityField& rho, DensityField& out) const;

    const GridKernel& birth_kernel() const { return birth_; }
    const GridKernel& competition_kernel() const { return competition_; }
    double mortality() const { return mortality_; }
    /// Masses of the periodised kernels (the masses the grid dynamics sees).
    double birth_mass() const { return birth_.discrete_mass; }
    double competition_mass() const { return competition_.discrete_mass; }
    const TorusDomain& domain() const { return dom_; }

private:
    TorusDomain dom_;
    double mortality_;
    GridKernel birth_;
    GridKernel competition_;
};

/// Convenience free-function form of the right-hand side.
DensityField kinetic_rhs(const DensityField& rho, const ModelParams& p);

struct StepDiagnostics {
    double time = 0.0;
    double dt = 0.0;
    double sup = 0.0;       // max |rho|
    double min_value = 0.0; // min rho before clamping
};

/// Stored density trajectory with per-stored-step diagnostics.
struct Trajectory {
    std::vector<double> times;
    std::vector<DensityField> fields;
    std::vector<StepDiagnostics> diagnostics;
    std::size_t clamped_points = 0;  // negative undershoots zeroed during the run

    const DensityField& at_time_index(std::size_t i) const { return fields[i]; }
};

struct IntegrateOptions {
    double dt = 0.0;          // <= 0: use the default stability heuristic
    int store_every = 1;      // keep every k-th step (first and last always kept)
    double clamp_tol = 1e-10; // relative undershoot tolerated and zeroed
};

/// Default step: 0.1 / (m + <a+> + <a-> sup rho0), from the periodised masses.
double default_time_step(const KineticOperator& op, const DensityField& rho0);

/// Classical fixed-step RK4 for the density equation between t = 0 and t_end.
Trajectory integrate(const DensityField& rho0, const ModelParams& p, double t_end,
                     const IntegrateOptions& opts = {});
Trajectory integrate(const KineticOperator& op, const DensityField& rho0, double t_end,
                     IntegrateOptions opts = {});

struct PicardOptions {
    double dt = 0.01;       // trapezoid panel width (also the output spacing)
    int max_iterations = 80;
    double tolerance = 1e-12;  // fixed-point sup-distance between sweeps
};

/// Solves the equivalent integral (mild) formulation by Picard iteration on
/// the exponentially tilted density u_t = exp(-eps_shift t) rho_t with
/// eps_shift = max(0, <a+> - m), then maps back to rho.  Fails with
/// ConvergenceFailureError when the iteration stops contracting.
Trajectory picard_solve(const DensityField& rho0, const ModelParams& p, double t_end,
                        const PicardOptions& opts = {});

}  // namespace sbdlab
