#include <doctest.h>

#include <cmath>
#include <vector>

#include "sbdlab/hierarchy.hpp"
#include "sbdlab/kinetic.hpp"
#include "sbdlab/rng.hpp"

using namespace sbdlab;

namespace {

ModelParams chain_params(double m, double plus_mass, double sigma_plus, double minus_mass,
                         double sigma_minus) {
    const double rt2pi = std::sqrt(2.0 * 3.14159265358979323846);
    ModelParams p;
    p.mortality = m;
    p.birth = KernelSpec::gaussian(1, plus_mass / (sigma_plus * rt2pi), sigma_plus);
    p.competition = KernelSpec::gaussian(1, minus_mass / (sigma_minus * rt2pi), sigma_minus);
    return p;
}

// Literal evaluation of the truncated-chain drift with explicit wrapped sums.
// ring value at separation (i - y) is looked up with a plain modulo; nothing
// here shares code with the production row-convolution path.
struct BruteForceChainRhs {
    std::vector<double> aplus, aminus;
    double m, h;
    int M;

    BruteForceChainRhs(const ModelParams& p, const TorusDomain& dom)
        : aplus(periodize(p.birth, dom).values),
          aminus(periodize(p.competition, dom).values),
          m(p.mortality),
          h(dom.cell_volume()),
          M(dom.points_per_axis()) {}

    double ringp(int d) const { return aplus[static_cast<std::size_t>(((d % M) + M) % M)]; }
    double ringm(int d) const { return aminus[static_cast<std::size_t>(((d % M) + M) % M)]; }

    double third(const CorrelationChain& c, int i, int j, int y) const {
        if (c.closure == Closure::mean_field) return c.k1[i] * c.k1[j] * c.k1[y];
        return c.k1[i] * c.k2_at(j, y) + c.k1[j] * c.k2_at(i, y) + c.k1[y] * c.k2_at(i, j) -
               2.0 * c.k1[i] * c.k1[j] * c.k1[y];
    }

    CorrelationChain drift(const CorrelationChain& c) const {
        CorrelationChain out(c.domain, c.closure);
        out.k0 = 0.0;
        for (int i = 0; i < M; ++i) {
            double pair_death = 0.0, birth = 0.0;
            for (int y = 0; y < M; ++y) {
                pair_death += ringm(i - y) * c.k2_at(i, y);
                birth += ringp(i - y) * c.k1[y];
            }
            out.k1[i] = -m * c.k1[i] - h * pair_death + h * birth;
        }
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < M; ++j) {
                double loss_i = 0.0, loss_j = 0.0, gain_i = 0.0, gain_j = 0.0;
                for (int y = 0; y < M; ++y) {
                    loss_i += ringm(i - y) * third(c, i, j, y);
                    loss_j += ringm(j - y) * third(c, j, i, y);
                    gain_i += ringp(i - y) * c.k2_at(y, j);
                    gain_j += ringp(j - y) * c.k2_at(i, y);
                }
                out.k2_at(i, j) =
                    -2.0 * m * c.k2_at(i, j) - h * (loss_i + loss_j) + h * (gain_i + gain_j);
            }
        return out;
    }

    CorrelationChain correction(const CorrelationChain& c) const {
        CorrelationChain out(c.domain, c.closure);
        out.k0 = 0.0;
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < M; ++j)
                out.k2_at(i, j) =
                    -2.0 * ringm(i - j) * c.k2_at(i, j) + ringp(i - j) * (c.k1[i] + c.k1[j]);
        return out;
    }
};

CorrelationChain wiggly_chain(const TorusDomain& dom, Closure cl, std::uint64_t seed) {
    RngStream rng(seed, 0);
    CorrelationChain c(dom, cl);
    c.k0 = 1.0;
    const int M = dom.points_per_axis();
    for (int i = 0; i < M; ++i) c.k1[i] = rng.uniform(0.3, 1.4);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j <= i; ++j) {
            const double v = c.k1[i] * c.k1[j] + rng.uniform(-0.2, 0.2);
            c.k2_at(i, j) = v;
            c.k2_at(j, i) = v;
        }
    return c;
}

}  // namespace

TEST_SUITE("hierarchy") {

TEST_CASE("product state and residuals") {
    TorusDomain dom(1, 5.0, 10);
    DensityField rho(dom);
    for (int i = 0; i < 10; ++i) rho.values[i] = 0.5 + 0.07 * i;
    const CorrelationChain c = product_state(rho);
    CHECK(c.k0 == 1.0);
    CHECK(c.points() == 10);
    CHECK(c.k2_at(3, 7) == doctest::Approx(rho.values[3] * rho.values[7]));
    CHECK(c.product_residual() == 0.0);
    CHECK(c.max_k2_asymmetry() == 0.0);

    TorusDomain flat(2, 5.0, 4);
    CHECK_THROWS_AS(CorrelationChain{flat}, std::invalid_argument);
}

TEST_CASE("weighted norm") {
    TorusDomain dom(1, 4.0, 4);
    CorrelationChain c(dom);
    c.k0 = 1.0;
    c.k1 = {0.5, -2.0, 1.0, 0.0};
    for (double& v : c.k2) v = 0.25;
    c.k2_at(2, 1) = -3.0;
    c.k2_at(1, 2) = -3.0;

    // hand values at alpha = 0 and a positive alpha
    CHECK(sub_poissonian_norm(c, 0.0).value == doctest::Approx(3.0));
    const double a = 0.7;
    CHECK(sub_poissonian_norm(c, a).value ==
          doctest::Approx(std::max({1.0, std::exp(a) * 2.0, std::exp(2 * a) * 3.0})));

    // nondecreasing in alpha
    double prev = 0.0;
    for (double alpha : {-1.0, -0.3, 0.0, 0.4, 1.1}) {
        const double v = sub_poissonian_norm(c, alpha).value;
        CHECK(v >= prev);
        prev = v;
    }

    // difference chains subtract componentwise and carry k0 = 0
    const CorrelationChain d = chain_difference(c, c);
    CHECK(d.k0 == 0.0);
    CHECK(sub_poissonian_norm(d, 2.0).value == 0.0);
}

TEST_CASE("chain drift matches the literal wrapped-sum evaluation") {
    TorusDomain dom(1, 3.0, 6);
    ModelParams p = chain_params(0.8, 1.1, 0.25, 0.9, 0.2);

    for (Closure cl : {Closure::zero_third_cumulant, Closure::mean_field}) {
        const CorrelationChain c = wiggly_chain(dom, cl, 411);
        const BruteForceChainRhs oracle(p, dom);
        const CorrelationChain got = apply_vlasov(c, p);
        const CorrelationChain want = oracle.drift(c);
        CHECK(got.k0 == 0.0);
        for (int i = 0; i < 6; ++i) CHECK(got.k1[i] == doctest::Approx(want.k1[i]).epsilon(1e-10));
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j)
                CHECK(got.k2_at(i, j) == doctest::Approx(want.k2_at(i, j)).epsilon(1e-10));
    }
}

TEST_CASE("pair correction matches the literal evaluation and skips k1") {
    TorusDomain dom(1, 3.0, 6);
    const ModelParams p = chain_params(0.5, 0.9, 0.22, 1.3, 0.25);
    const CorrelationChain c = wiggly_chain(dom, Closure::zero_third_cumulant, 97);
    const BruteForceChainRhs oracle(p, dom);
    const CorrelationChain got = apply_correction(c, p);
    const CorrelationChain want = oracle.correction(c);
    for (int i = 0; i < 6; ++i) CHECK(got.k1[i] == 0.0);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
            CHECK(got.k2_at(i, j) == doctest::Approx(want.k2_at(i, j)).epsilon(1e-10));

    // full rhs = drift + eps * correction, via one evolution step consistency:
    // both closures agree on product states, where the third cumulant vanishes
    DensityField rho(dom);
    for (int i = 0; i < 6; ++i) rho.values[i] = 0.4 + 0.05 * i;
    const CorrelationChain prod_c = product_state(rho, Closure::zero_third_cumulant);
    const CorrelationChain prod_m = product_state(rho, Closure::mean_field);
    const CorrelationChain dc = apply_vlasov(prod_c, p);
    const CorrelationChain dm = apply_vlasov(prod_m, p);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
            CHECK(dc.k2_at(i, j) == doctest::Approx(dm.k2_at(i, j)).epsilon(1e-12));

    // ... and disagree away from product states
    const CorrelationChain wc = wiggly_chain(dom, Closure::zero_third_cumulant, 7);
    CorrelationChain wm = wc;
    wm.closure = Closure::mean_field;
    double gap = 0.0;
    const CorrelationChain vc = apply_vlasov(wc, p);
    const CorrelationChain vm = apply_vlasov(wm, p);
    for (std::size_t i = 0; i < vc.k2.size(); ++i) gap = std::max(gap, std::abs(vc.k2[i] - vm.k2[i]));
    CHECK(gap > 1e-4);
}

TEST_CASE("uncorrelated data stays uncorrelated under the drift") {
    TorusDomain dom(1, 8.0, 32);
    const ModelParams p = chain_params(0.7, 1.2, 0.5, 0.8, 0.4);
    DensityField rho0(dom);
    for (int i = 0; i < 32; ++i)
        rho0.values[i] = 1.0 + 0.3 * std::cos(2.0 * 3.14159265358979323846 * i / 32.0);

    ChainEvolveOptions opts;
    opts.dt = 1e-3;
    opts.store_every = 50;
    const ChainTrajectory traj = evolve_chain(product_state(rho0), p, 0.0, 0.2, opts);

    IntegrateOptions io;
    io.dt = 1e-3;
    io.store_every = 50;
    const Trajectory kin = integrate(rho0, p, 0.2, io);
    REQUIRE(traj.times.size() == kin.times.size());

    for (std::size_t s = 0; s < traj.times.size(); ++s) {
        CHECK(traj.times[s] == doctest::Approx(kin.times[s]).epsilon(1e-12));
        CHECK(traj.chains[s].product_residual() < 1e-10);
        double gap = 0.0;
        for (int i = 0; i < 32; ++i)
            gap = std::max(gap, std::abs(traj.chains[s].k1[i] - kin.fields[s].values[i]));
        CHECK(gap < 1e-9);
    }
    CHECK(traj.max_asymmetry < 1e-12);

    // with the correction switched on the pair function decorrelates
    const ChainTrajectory corr = evolve_chain(product_state(rho0), p, 0.5, 0.2, opts);
    CHECK(corr.chains.back().product_residual() > 1e-4);
    CHECK(corr.max_asymmetry < 1e-12);  // correction preserves symmetry too
}

TEST_CASE("existence horizon bookkeeping") {
    const double rt2pi = std::sqrt(2.0 * 3.14159265358979323846);
    ModelParams p;
    p.mortality = 0.3;
    p.birth = KernelSpec::gaussian(1, 2.0 / (0.5 * rt2pi), 0.5);        // mass 2, prop. factor 2
    p.competition = KernelSpec::gaussian(1, 1.0 / (0.5 * rt2pi), 0.5);  // mass 1
    TorusDomain dom(1, 12.0, 48);

    const TimeHorizon h = time_horizon(0.5, 1.5, p, dom);
    CHECK(h.t_max == doctest::Approx(1.0 / (2.0 + std::exp(-0.5))).epsilon(1e-12));
    REQUIRE(h.domination_theta.has_value());
    CHECK(*h.domination_theta == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(*h.domination_margin == doctest::Approx(2.0 * std::exp(1.5)).epsilon(1e-9));

    // dispersal reaching beyond the competition support: no finite ratio
    ModelParams balls;
    balls.mortality = 0.3;
    balls.birth = KernelSpec::ball(1, 1.0, 1.0);
    balls.competition = KernelSpec::ball(1, 2.0, 0.5);
    CHECK(!time_horizon(0.0, 1.0, balls, dom).domination_theta.has_value());

    CHECK_THROWS_AS(time_horizon(1.0, 1.0, p, dom), std::invalid_argument);
}

TEST_CASE("correction strength scales linearly at small epsilon") {
    TorusDomain dom(1, 6.0, 24);
    const ModelParams p = chain_params(0.4, 0.6, 0.45, 0.6, 0.35);
    DensityField rho0(dom);
    for (int i = 0; i < 24; ++i)
        rho0.values[i] = 0.7 + 0.1 * std::cos(2.0 * 3.14159265358979323846 * i / 24.0);

    ChainEvolveOptions opts;
    opts.dt = 5e-3;
    opts.store_every = 10;
    const EpsilonConvergenceReport rep =
        epsilon_sweep(product_state(rho0), p, {0.4, 0.1}, 0.5, 0.0, 1.0, opts);
    REQUIRE(rep.distances.size() == 2);
    CHECK(rep.distances[1] < rep.distances[0]);
    CHECK(rep.distances[1] > 0.0);
    CHECK(rep.fitted_slope > 0.6);
    CHECK(rep.fitted_slope < 1.4);
    CHECK(rep.kappa == doctest::Approx(1.0));
    const double want_rate = std::pow(2.0 / (2.718281828459045 * 1.0), 2) *
                             (kernel_stats(p.competition).sup_norm +
                              kernel_stats(p.birth).sup_norm * std::exp(1.0));
    CHECK(rep.rate_constant == doctest::Approx(want_rate).epsilon(1e-12));

    CHECK_THROWS_AS(epsilon_sweep(product_state(rho0), p, {}, 0.5, 0.0, 1.0, opts),
                    std::invalid_argument);
    CHECK_THROWS_AS(epsilon_sweep(product_state(rho0), p, {1.5}, 0.5, 0.0, 1.0, opts),
                    std::invalid_argument);
}

}  // TEST_SUITE
