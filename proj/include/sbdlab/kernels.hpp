#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbdlab/field.hpp"

namespace sbdlab {

class InvalidKernelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a kernel's support does not fit on the torus (edge < 2x support):
/// periodisation would alias images onto each other, so we refuse instead.
class PeriodizationOverlapError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class KernelShape { ball, gaussian, tabulated };

/// Radially symmetric, nonnegative interaction kernel a(x) = profile(|x|) in
/// d in {1,2}.  Amplitudes are stored raw; integrated mass is always reported
/// separately through kernel_stats, never folded into the amplitude.
struct KernelSpec {
    KernelShape shape = KernelShape::ball;
    int dim = 1;
    double amplitude = 0.0;  // ball and gaussian profiles
    double radius = 0.0;     // ball
    double sigma = 0.0;      // gaussian length scale
    std::vector<double> table_radii;   // tabulated profile, strictly increasing, starts at 0
    std::vector<double> table_values;  // nonnegative samples

    static KernelSpec ball(int dim, double amplitude, double radius);
    static KernelSpec gaussian(int dim, double amplitude, double sigma);
    static KernelSpec tabulated(int dim, std::vector<double> radii, std::vector<double> values);
    /// Identically zero kernel (ball of amplitude 0).
    static KernelSpec zero(int dim) { return ball(dim, 0.0, 1.0); }

    /// Profile value at radius r >= 0. Tabulated profiles interpolate linearly
    /// and clamp to 0 beyond the last sample.
    double value(double r) const;

    /// Radius beyond which the profile is treated as zero.  Exact for ball and
    /// tabulated shapes; gaussians are cut at 6 sigma (relative mass error of
    /// the tail < 1e-8).
    double support_radius() const;

    bool compactly_supported() const { return shape != KernelShape::gaussian; }
    bool is_zero() const;

    void validate() const;  // throws InvalidKernelError
};

struct KernelStats {
    double mass = 0.0;      // integral over R^d
    double sup_norm = 0.0;  // essential sup of the profile
};

/// Integral and sup norm of the kernel.  Closed forms for ball and gaussian
/// shapes; per-segment exact quadrature of the interpolated profile for
/// tabulated shapes.
KernelStats kernel_stats(const KernelSpec& k);

/// Integral of the kernel over the centred ball of radius r_max
/// (d=1: 2*int_0^r a; d=2: 2*pi*int_0^r s a(s) ds).
double radial_mass(const KernelSpec& k, double r_max);

/// Kernel wrapped onto the torus grid: values[i] = sum over images n in Z^d of
/// a(x_i + n L), summed until the remainder is below 1e-12 relative.
/// Values are exactly symmetric under index negation mod M.
struct GridKernel {
    TorusDomain domain;
    std::vector<double> values;
    double discrete_mass = 0.0;  // sum(values) * cell volume

    explicit GridKernel(const TorusDomain& dom) : domain(dom), values(dom.size(), 0.0) {}

    double at(int i, int j = 0) const { return values[domain.flat_index(i, j)]; }
};

/// Wrap a kernel onto the grid.  Compactly supported kernels require
/// L >= 2 x support radius (PeriodizationOverlapError otherwise).
GridKernel periodize(const KernelSpec& k, const TorusDomain& dom);

/// Circular convolution (kernel * f)(x_i) = cellvol * sum_j kernel[i-j] f[j].
/// Direct summation: O(M^2) in d=1 and O(M^4) in d=2, which is exact for the
/// grid quadrature and cheap at the grid sizes used here.
DensityField torus_convolve(const DensityField& f, const GridKernel& kernel);

}  // namespace sbdlab
