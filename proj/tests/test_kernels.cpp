#include <doctest.h>

#include <cmath>
#include <vector>

#include "sbdlab/kernels.hpp"

using namespace sbdlab;

namespace {

// Composite Simpson quadrature of the radial mass integral; independent of the
// closed forms in kernel_stats.
double quadrature_mass(const KernelSpec& k, double r_max, int panels = 40000) {
    auto integrand = [&](double r) {
        return k.dim == 1 ? 2.0 * k.value(r) : 2.0 * 3.14159265358979323846 * r * k.value(r);
    };
    const double h = r_max / panels;
    double s = integrand(0.0) + integrand(r_max);
    for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * integrand(i * h);
    return s * h / 3.0;
}

// Brute-force periodisation with a wide fixed image count.
double image_sum_reference(const KernelSpec& k, const TorusDomain& dom, int i, int j = 0) {
    const int span = 40;
    double s = 0.0;
    if (dom.dim() == 1) {
        const double x = dom.signed_coordinate(i);
        for (int n = -span; n <= span; ++n) s += k.value(std::abs(x + n * dom.edge()));
    } else {
        const double x = dom.signed_coordinate(i);
        const double y = dom.signed_coordinate(j);
        for (int n = -span; n <= span; ++n)
            for (int m = -span; m <= span; ++m) {
                const double dx = x + n * dom.edge();
                const double dy = y + m * dom.edge();
                s += k.value(std::sqrt(dx * dx + dy * dy));
            }
    }
    return s;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("torus domain geometry") {
    TorusDomain dom(1, 10.0, 8);
    CHECK(dom.spacing() == doctest::Approx(1.25));
    CHECK(dom.cell_volume() == doctest::Approx(1.25));
    CHECK(dom.size() == 8);
    CHECK(dom.wrap(10.0) == doctest::Approx(0.0));
    CHECK(dom.wrap(-0.5) == doctest::Approx(9.5));
    CHECK(dom.min_image(9.0) == doctest::Approx(-1.0));
    CHECK(dom.distance({0.5, 0.0}, {9.5, 0.0}) == doctest::Approx(1.0));

    // signed coordinates cover [-L/2, L/2) and match wrap semantics
    for (int i = 0; i < 8; ++i) {
        const double x = dom.signed_coordinate(i);
        CHECK(x >= -5.0);
        CHECK(x <= 5.0);
        CHECK(dom.wrap(x) == doctest::Approx(i * dom.spacing()).epsilon(1e-12));
    }

    TorusDomain dom2(2, 4.0, 4);
    CHECK(dom2.size() == 16);
    CHECK(dom2.cell_volume() == doctest::Approx(1.0));
    CHECK(dom2.flat_index(2, 3) == 11);
    CHECK(dom2.distance({0.0, 0.0}, {3.5, 3.5}) == doctest::Approx(std::sqrt(0.5)));

    CHECK_THROWS_AS(TorusDomain(3, 1.0, 4), std::invalid_argument);
    CHECK_THROWS_AS(TorusDomain(1, -1.0, 4), std::invalid_argument);
    CHECK_THROWS_AS(TorusDomain(1, 1.0, 1), std::invalid_argument);
}

TEST_CASE("kernel validation") {
    CHECK_THROWS_AS(KernelSpec::ball(1, -1.0, 1.0), InvalidKernelError);
    CHECK_THROWS_AS(KernelSpec::ball(1, 1.0, 0.0), InvalidKernelError);
    CHECK_THROWS_AS(KernelSpec::gaussian(2, 1.0, -0.5), InvalidKernelError);
    CHECK_THROWS_AS(KernelSpec::tabulated(1, {0.0}, {1.0}), InvalidKernelError);
    CHECK_THROWS_AS(KernelSpec::tabulated(1, {0.5, 1.0}, {1.0, 0.0}), InvalidKernelError);
    CHECK_THROWS_AS(KernelSpec::tabulated(1, {0.0, 1.0, 0.5}, {1.0, 0.5, 0.0}), InvalidKernelError);
    CHECK_THROWS_AS(KernelSpec::tabulated(1, {0.0, 1.0}, {1.0, -0.2}), InvalidKernelError);
    CHECK_NOTHROW(KernelSpec::tabulated(2, {0.0, 0.5, 1.0}, {2.0, 1.0, 0.0}));
}

TEST_CASE("closed-form masses match quadrature") {
    const KernelSpec b1 = KernelSpec::ball(1, 1.5, 2.0);
    CHECK(kernel_stats(b1).mass == doctest::Approx(6.0));
    CHECK(kernel_stats(b1).mass == doctest::Approx(quadrature_mass(b1, 2.0)).epsilon(1e-10));

    const KernelSpec b2 = KernelSpec::ball(2, 0.7, 1.5);
    CHECK(kernel_stats(b2).mass == doctest::Approx(0.7 * 3.14159265358979323846 * 2.25));
    CHECK(kernel_stats(b2).mass == doctest::Approx(quadrature_mass(b2, 1.5)).epsilon(1e-10));

    const KernelSpec g1 = KernelSpec::gaussian(1, 2.0, 0.8);
    CHECK(kernel_stats(g1).mass == doctest::Approx(quadrature_mass(g1, 10.0)).epsilon(1e-12));

    const KernelSpec g2 = KernelSpec::gaussian(2, 0.4, 1.2);
    CHECK(kernel_stats(g2).mass == doctest::Approx(quadrature_mass(g2, 15.0)).epsilon(1e-12));

    const KernelSpec t1 = KernelSpec::tabulated(1, {0.0, 0.4, 1.0, 1.7}, {2.0, 1.2, 0.3, 0.0});
    CHECK(kernel_stats(t1).mass == doctest::Approx(quadrature_mass(t1, 1.7)).epsilon(1e-9));
    CHECK(kernel_stats(t1).sup_norm == doctest::Approx(2.0));

    const KernelSpec t2 = KernelSpec::tabulated(2, {0.0, 0.5, 1.3}, {1.0, 0.8, 0.1});
    CHECK(kernel_stats(t2).mass == doctest::Approx(quadrature_mass(t2, 1.3)).epsilon(1e-9));

    // radial_mass is a prefix of the full mass and reaches it at the support
    CHECK(radial_mass(b1, 1.0) == doctest::Approx(3.0));
    CHECK(radial_mass(b1, 5.0) == doctest::Approx(6.0));
    CHECK(radial_mass(g1, 0.9) == doctest::Approx(quadrature_mass(g1, 0.9)).epsilon(1e-9));
    CHECK(radial_mass(t2, 0.8) == doctest::Approx(quadrature_mass(t2, 0.8)).epsilon(1e-9));
}

TEST_CASE("support radius and zero detection") {
    CHECK(KernelSpec::ball(1, 1.0, 0.75).support_radius() == doctest::Approx(0.75));
    CHECK(KernelSpec::gaussian(1, 1.0, 0.5).support_radius() == doctest::Approx(3.0));
    // trailing zero samples do not extend the support
    const KernelSpec t = KernelSpec::tabulated(1, {0.0, 1.0, 2.0, 3.0}, {1.0, 0.5, 0.0, 0.0});
    CHECK(t.support_radius() == doctest::Approx(2.0));
    CHECK(KernelSpec::zero(1).is_zero());
    CHECK(KernelSpec::gaussian(1, 0.0, 1.0).is_zero());
    CHECK(!KernelSpec::ball(2, 0.1, 1.0).is_zero());
    CHECK(kernel_stats(KernelSpec::zero(2)).mass == 0.0);
}

TEST_CASE("tabulated interpolation") {
    const KernelSpec t = KernelSpec::tabulated(1, {0.0, 1.0, 2.0}, {4.0, 2.0, 0.0});
    CHECK(t.value(0.0) == doctest::Approx(4.0));
    CHECK(t.value(0.5) == doctest::Approx(3.0));
    CHECK(t.value(1.5) == doctest::Approx(1.0));
    CHECK(t.value(2.5) == 0.0);
}

TEST_CASE("periodize matches brute-force image sums") {
    TorusDomain dom(1, 7.0, 14);
    const KernelSpec g = KernelSpec::gaussian(1, 1.3, 0.55);
    const GridKernel pg = periodize(g, dom);
    for (int i = 0; i < 14; ++i)
        CHECK(pg.at(i) == doctest::Approx(image_sum_reference(g, dom, i)).epsilon(1e-11));

    TorusDomain dom2(2, 5.0, 10);
    const KernelSpec g2 = KernelSpec::gaussian(2, 0.6, 0.4);
    const GridKernel pg2 = periodize(g2, dom2);
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j)
            CHECK(pg2.at(i, j) == doctest::Approx(image_sum_reference(g2, dom2, i, j)).epsilon(1e-11));
}

TEST_CASE("periodized kernels are exactly symmetric") {
    TorusDomain dom(1, 9.0, 12);
    const GridKernel pg = periodize(KernelSpec::gaussian(1, 1.0, 0.7), dom);
    for (int i = 1; i < 12; ++i) CHECK(pg.at(i) == pg.at(12 - i));

    TorusDomain dom2(2, 6.0, 9);
    const GridKernel pg2 = periodize(KernelSpec::gaussian(2, 1.0, 0.5), dom2);
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 9; ++j) {
            const int mi = (9 - i) % 9, mj = (9 - j) % 9;
            CHECK(pg2.at(i, j) == pg2.at(mi, mj));
            CHECK(pg2.at(i, j) == pg2.at(j, i));  // radial profile
        }
}

TEST_CASE("grid mass of a smooth kernel matches the continuum mass") {
    // Midpoint quadrature of a periodised gaussian is spectrally accurate.
    TorusDomain dom(1, 20.0, 64);
    const KernelSpec g = KernelSpec::gaussian(1, 2.0, 1.0);
    const GridKernel pg = periodize(g, dom);
    CHECK(pg.discrete_mass == doctest::Approx(kernel_stats(g).mass).epsilon(1e-11));

    TorusDomain dom2(2, 12.0, 48);
    const KernelSpec g2 = KernelSpec::gaussian(2, 0.5, 0.8);
    CHECK(periodize(g2, dom2).discrete_mass == doctest::Approx(kernel_stats(g2).mass).epsilon(1e-11));
}

TEST_CASE("ball kernels with half-offset radii have exact grid mass") {
    TorusDomain dom(1, 20.0, 100);  // h = 0.2; radii 0.5 and 0.3 avoid ties
    CHECK(periodize(KernelSpec::ball(1, 1.0, 0.5), dom).discrete_mass == doctest::Approx(1.0));
    CHECK(periodize(KernelSpec::ball(1, 2.0, 0.3), dom).discrete_mass == doctest::Approx(1.2));
}

TEST_CASE("periodize refuses kernels wider than half the box") {
    TorusDomain dom(1, 3.0, 8);
    CHECK_THROWS_AS(periodize(KernelSpec::ball(1, 1.0, 1.6), dom), PeriodizationOverlapError);
    CHECK_NOTHROW(periodize(KernelSpec::ball(1, 1.0, 1.5), dom));
    // gaussians use the 6 sigma cutoff as their effective support
    CHECK_THROWS_AS(periodize(KernelSpec::gaussian(1, 1.0, 0.3), dom), PeriodizationOverlapError);
}

TEST_CASE("torus_convolve equals the direct wrapped double loop") {
    TorusDomain dom(1, 5.0, 9);
    const GridKernel pg = periodize(KernelSpec::gaussian(1, 1.0, 0.4), dom);
    DensityField f(dom);
    for (int i = 0; i < 9; ++i) f.values[i] = 0.3 + 0.1 * i + 0.05 * i * i;
    const DensityField c = torus_convolve(f, pg);
    for (int i = 0; i < 9; ++i) {
        double s = 0.0;
        for (int j = 0; j < 9; ++j) s += pg.at(((i - j) % 9 + 9) % 9) * f.values[j];
        CHECK(c.values[i] == doctest::Approx(s * dom.cell_volume()).epsilon(1e-12));
    }

    TorusDomain dom2(2, 4.0, 5);
    const GridKernel pg2 = periodize(KernelSpec::gaussian(2, 0.8, 0.3), dom2);
    DensityField f2(dom2);
    for (std::size_t k = 0; k < f2.values.size(); ++k) f2.values[k] = std::sin(0.7 * k) + 1.5;
    const DensityField c2 = torus_convolve(f2, pg2);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            double s = 0.0;
            for (int p = 0; p < 5; ++p)
                for (int q = 0; q < 5; ++q)
                    s += pg2.at(((i - p) % 5 + 5) % 5, ((j - q) % 5 + 5) % 5) *
                         f2.values[dom2.flat_index(p, q)];
            CHECK(c2.values[dom2.flat_index(i, j)] ==
                  doctest::Approx(s * dom2.cell_volume()).epsilon(1e-12));
        }
}

TEST_CASE("convolution properties") {
    TorusDomain dom(1, 8.0, 32);
    const GridKernel pg = periodize(KernelSpec::gaussian(1, 1.0, 0.5), dom);

    // constant field: result is mass * constant
    const DensityField ones = DensityField::constant(dom, 2.5);
    const DensityField c = torus_convolve(ones, pg);
    for (double v : c.values) CHECK(v == doctest::Approx(2.5 * pg.discrete_mass).epsilon(1e-12));

    // translation equivariance: convolving a shifted field shifts the result
    DensityField f(dom);
    for (int i = 0; i < 32; ++i) f.values[i] = std::exp(std::sin(2.0 * 3.14159265 * i / 32.0));
    DensityField fs(dom);
    for (int i = 0; i < 32; ++i) fs.values[(i + 5) % 32] = f.values[i];
    const DensityField cf = torus_convolve(f, pg);
    const DensityField cfs = torus_convolve(fs, pg);
    for (int i = 0; i < 32; ++i)
        CHECK(cfs.values[(i + 5) % 32] == doctest::Approx(cf.values[i]).epsilon(1e-12));

    // domain mismatch is an error
    TorusDomain other(1, 8.0, 16);
    CHECK_THROWS_AS(torus_convolve(DensityField(other), pg), DomainMismatchError);
}

}  // TEST_SUITE
