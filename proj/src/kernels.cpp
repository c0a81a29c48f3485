#include "sbdlab/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace sbdlab {

namespace {

constexpr double kGaussianCutSigmas = 6.0;
constexpr double kImageTruncation = 1e-12;  // relative image-sum remainder
constexpr double kPi = 3.14159265358979323846;

void check_dim(int dim) {
    if (dim != 1 && dim != 2)
        throw InvalidKernelError("kernel: dim must be 1 or 2, got " + std::to_string(dim));
}

}  // namespace

KernelSpec KernelSpec::ball(int dim, double amplitude, double radius) {
    KernelSpec k;
    k.shape = KernelShape::ball;
    k.dim = dim;
    k.amplitude = amplitude;
    k.radius = radius;
    k.validate();
    return k;
}

KernelSpec KernelSpec::gaussian(int dim, double amplitude, double sigma) {
    KernelSpec k;
    k.shape = KernelShape::gaussian;
    k.dim = dim;
    k.amplitude = amplitude;
    k.sigma = sigma;
    k.validate();
    return k;
}

KernelSpec KernelSpec::tabulated(int dim, std::vector<double> radii, std::vector<double> values) {
    KernelSpec k;
    k.shape = KernelShape::tabulated;
    k.dim = dim;
    k.table_radii = std::move(radii);
    k.table_values = std::move(values);
    k.validate();
    return k;
}

void KernelSpec::validate() const {
    check_dim(dim);
    switch (shape) {
        case KernelShape::ball:
            if (!(amplitude >= 0.0) || !std::isfinite(amplitude))
                throw InvalidKernelError("ball kernel: amplitude must be finite and >= 0");
            if (!(radius > 0.0) || !std::isfinite(radius))
                throw InvalidKernelError("ball kernel: radius must be finite and > 0");
            break;
        case KernelShape::gaussian:
            if (!(amplitude >= 0.0) || !std::isfinite(amplitude))
                throw InvalidKernelError("gaussian kernel: amplitude must be finite and >= 0");
            if (!(sigma > 0.0) || !std::isfinite(sigma))
                throw InvalidKernelError("gaussian kernel: sigma must be finite and > 0");
            break;
        case KernelShape::tabulated: {
            if (table_radii.size() < 2 || table_radii.size() != table_values.size())
                throw InvalidKernelError("tabulated kernel: need >= 2 (radius, value) samples");
            if (table_radii.front() != 0.0)
                throw InvalidKernelError("tabulated kernel: first sample radius must be 0");
            for (std::size_t i = 0; i + 1 < table_radii.size(); ++i)
                if (!(table_radii[i] < table_radii[i + 1]))
                    throw InvalidKernelError("tabulated kernel: radii must be strictly increasing");
            for (double v : table_values) {
                if (!std::isfinite(v))
                    throw InvalidKernelError("tabulated kernel: non-finite sample value");
                if (v < 0.0)
                    throw InvalidKernelError("tabulated kernel: negative sample value");
            }
            break;
        }
    }
}

double KernelSpec::value(double r) const {
    switch (shape) {
        case KernelShape::ball:
            return r <= radius ? amplitude : 0.0;
        case KernelShape::gaussian:
            return amplitude * std::exp(-0.5 * (r / sigma) * (r / sigma));
        case KernelShape::tabulated: {
            if (r >= table_radii.back()) return r == table_radii.back() ? table_values.back() : 0.0;
            auto it = std::upper_bound(table_radii.begin(), table_radii.end(), r);
            const std::size_t hi = static_cast<std::size_t>(it - table_radii.begin());
            if (hi == 0) return table_values.front();
            const std::size_t lo = hi - 1;
            const double t = (r - table_radii[lo]) / (table_radii[hi] - table_radii[lo]);
            return table_values[lo] + t * (table_values[hi] - table_values[lo]);
        }
    }
    return 0.0;
}

double KernelSpec::support_radius() const {
    switch (shape) {
        case KernelShape::ball:
            return amplitude > 0.0 ? radius : 0.0;
        case KernelShape::gaussian:
            return amplitude > 0.0 ? kGaussianCutSigmas * sigma : 0.0;
        case KernelShape::tabulated: {
            // last radius with a nonzero value anywhere at or beyond it
            for (std::size_t i = table_radii.size(); i-- > 0;)
                if (table_values[i] > 0.0)
                    return i + 1 < table_radii.size() ? table_radii[i + 1] : table_radii[i];
            return 0.0;
        }
    }
    return 0.0;
}

bool KernelSpec::is_zero() const {
    if (shape == KernelShape::tabulated) {
        for (double v : table_values)
            if (v > 0.0) return false;
        return true;
    }
    return amplitude == 0.0;
}

namespace {

// Integral of surface(d,r) * profile(r) over one linear segment [r0, r1] where
// the profile interpolates v0 -> v1 (exact antiderivatives; surface is 2 in
// d=1 and 2 pi r in d=2).
double segment_mass(int dim, double r0, double r1, double v0, double v1) {
    const double dr = r1 - r0;
    if (dr <= 0.0) return 0.0;
    if (dim == 1) return (v0 + v1) * dr;  // 2 * trapezoid
    // 2 pi int (r0 + s dr)(v0 + s (v1-v0)) dr ds over s in [0,1]
    const double dv = v1 - v0;
    return 2.0 * kPi * dr * (r0 * v0 + 0.5 * (r0 * dv + dr * v0) + dr * dv / 3.0);
}

}  // namespace

double radial_mass(const KernelSpec& k, double r_max) {
    if (r_max <= 0.0) return 0.0;
    switch (k.shape) {
        case KernelShape::ball: {
            const double r = std::min(r_max, k.radius);
            return k.dim == 1 ? 2.0 * k.amplitude * r : kPi * r * r * k.amplitude;
        }
        case KernelShape::gaussian: {
            const double s = k.sigma;
            if (k.dim == 1)
                return k.amplitude * s * std::sqrt(2.0 * kPi) * std::erf(r_max / (s * std::sqrt(2.0)));
            return k.amplitude * 2.0 * kPi * s * s * (1.0 - std::exp(-0.5 * (r_max / s) * (r_max / s)));
        }
        case KernelShape::tabulated: {
            double total = 0.0;
            for (std::size_t i = 0; i + 1 < k.table_radii.size(); ++i) {
                const double r0 = k.table_radii[i];
                if (r0 >= r_max) break;
                double r1 = k.table_radii[i + 1];
                double v0 = k.table_values[i];
                double v1 = k.table_values[i + 1];
                if (r1 > r_max) {  // split the segment at r_max
                    v1 = v0 + (v1 - v0) * (r_max - r0) / (r1 - r0);
                    r1 = r_max;
                }
                total += segment_mass(k.dim, r0, r1, v0, v1);
            }
            return total;
        }
    }
    return 0.0;
}

KernelStats kernel_stats(const KernelSpec& k) {
    KernelStats s;
    switch (k.shape) {
        case KernelShape::ball:
            s.mass = k.dim == 1 ? 2.0 * k.amplitude * k.radius : kPi * k.radius * k.radius * k.amplitude;
            s.sup_norm = k.amplitude;
            break;
        case KernelShape::gaussian:
            s.mass = k.dim == 1 ? k.amplitude * k.sigma * std::sqrt(2.0 * kPi)
                                : k.amplitude * 2.0 * kPi * k.sigma * k.sigma;
            s.sup_norm = k.amplitude;
            break;
        case KernelShape::tabulated:
            s.mass = radial_mass(k, k.table_radii.back());
            // linear interpolation attains its max at a sample point
            s.sup_norm = *std::max_element(k.table_values.begin(), k.table_values.end());
            break;
    }
    return s;
}

namespace {

// Sum of kernel values over all images x + nL of a signed axis offset; image
// terms are added outward until they fall below the relative truncation.
double image_sum_1d(const KernelSpec& k, double x, double L) {
    double total = k.value(std::abs(x));
    for (int n = 1;; ++n) {
        const double t = k.value(std::abs(x + n * L)) + k.value(std::abs(x - n * L));
        total += t;
        if (n * L - std::abs(x) > k.support_radius()) break;
        if (total > 0.0 && t < kImageTruncation * total && n > 1) break;
    }
    return total;
}

double image_sum_2d(const KernelSpec& k, double x, double y, double L) {
    const double support = k.support_radius();
    const int nmax = std::max(1, static_cast<int>(std::ceil((support + std::abs(x) + std::abs(y)) / L)));
    double total = 0.0;
    for (int nx = -nmax; nx <= nmax; ++nx)
        for (int ny = -nmax; ny <= nmax; ++ny) {
            const double dx = x + nx * L;
            const double dy = y + ny * L;
            total += k.value(std::sqrt(dx * dx + dy * dy));
        }
    return total;
}

}  // namespace

GridKernel periodize(const KernelSpec& k, const TorusDomain& dom) {
    k.validate();
    if (k.dim != dom.dim())
        throw InvalidKernelError("periodize: kernel and domain dimensions differ");
    if (!k.is_zero() && dom.edge() < 2.0 * k.support_radius())
        throw PeriodizationOverlapError(
            "periodize: torus edge " + std::to_string(dom.edge()) + " is smaller than twice the kernel support " +
            std::to_string(k.support_radius()) + "; images would overlap");

    GridKernel g(dom);
    const int M = dom.points_per_axis();
    const double L = dom.edge();
    if (dom.dim() == 1) {
        // fill indices 0..M/2 and mirror so that values are exactly symmetric
        for (int i = 0; i <= M / 2; ++i) {
            const double v = image_sum_1d(k, dom.signed_coordinate(i), L);
            g.values[static_cast<std::size_t>(i)] = v;
            if (i > 0 && i < M) g.values[static_cast<std::size_t>((M - i) % M)] = v;
        }
    } else {
        for (int i = 0; i <= M / 2; ++i)
            for (int j = 0; j <= M / 2; ++j) {
                const double v = image_sum_2d(k, dom.signed_coordinate(i), dom.signed_coordinate(j), L);
                const int mi = (M - i) % M;
                const int mj = (M - j) % M;
                g.values[dom.flat_index(i, j)] = v;
                g.values[dom.flat_index(mi, j)] = v;
                g.values[dom.flat_index(i, mj)] = v;
                g.values[dom.flat_index(mi, mj)] = v;
            }
    }
    double sum = 0.0;
    for (double v : g.values) sum += v;
    g.discrete_mass = sum * dom.cell_volume();
    return g;
}

DensityField torus_convolve(const DensityField& f, const GridKernel& kernel) {
    require_same_domain(f.domain, kernel.domain, "torus_convolve");
    const TorusDomain& dom = f.domain;
    const int M = dom.points_per_axis();
    DensityField out(dom);
    if (dom.dim() == 1) {
        for (int i = 0; i < M; ++i) {
            double s = 0.0;
            // split j so that the kernel index i - j never needs a modulo
            for (int j = 0; j <= i; ++j) s += kernel.values[static_cast<std::size_t>(i - j)] * f.values[static_cast<std::size_t>(j)];
            for (int j = i + 1; j < M; ++j) s += kernel.values[static_cast<std::size_t>(i - j + M)] * f.values[static_cast<std::size_t>(j)];
            out.values[static_cast<std::size_t>(i)] = s * dom.cell_volume();
        }
    } else {
        const double cv = dom.cell_volume();
        for (int i1 = 0; i1 < M; ++i1)
            for (int i2 = 0; i2 < M; ++i2) {
                double s = 0.0;
                for (int j1 = 0; j1 < M; ++j1) {
                    const int d1 = i1 - j1 < 0 ? i1 - j1 + M : i1 - j1;
                    const double* krow = kernel.values.data() + dom.flat_index(d1, 0);
                    const double* frow = f.values.data() + dom.flat_index(j1, 0);
                    for (int j2 = 0; j2 < M; ++j2) {
                        const int d2 = i2 - j2 < 0 ? i2 - j2 + M : i2 - j2;
                        s += krow[d2] * frow[j2];
                    }
                }
                out.values[dom.flat_index(i1, i2)] = s * cv;
            }
    }
    return out;
}

}  // namespace sbdlab
