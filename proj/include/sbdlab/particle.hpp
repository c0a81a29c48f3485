#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "sbdlab/field.hpp"
#include "sbdlab/model.hpp"
#include "sbdlab/rng.hpp"

namespace sbdlab {

/// A finite configuration of particles on the torus.  Only the first
/// `domain.dim()` coordinates of each entry are meaningful.
struct ParticleConfiguration {
    TorusDomain domain;
    std::vector<std::array<double, 2>> positions;

    explicit ParticleConfiguration(const TorusDomain& dom) : domain(dom) {}
};

/// Poisson initial state: independent count in every grid cell with mean
/// rho * cell volume, positions uniform within the cell.
ParticleConfiguration init_poisson(const TorusDomain& dom, const DensityField& rho0, RngStream& rng);
ParticleConfiguration init_poisson(const TorusDomain& dom, double rho0, RngStream& rng);
ParticleConfiguration init_poisson(const TorusDomain& dom, double rho0, std::uint64_t seed);

/// Exact jump-chain record: population after every event.  Consecutive
/// populations differ by exactly one and times are strictly increasing.
struct EventTrace {
    std::uint64_t seed = 0;
    std::vector<double> times;            // times[0] = 0
    std::vector<std::uint32_t> populations;
    bool blew_up = false;   // population cap reached; run stopped early
    bool absorbed = false;  // total event rate hit zero (empty configuration)
};

/// Per-particle death rates plus the uniform per-particle birth rate.
struct EventRates {
    std::vector<double> death;       // m + (pair competition), configuration order
    double total_death = 0.0;
    double birth_per_particle = 0.0; // truncated dispersal mass on the torus
    double total_birth = 0.0;
};

EventRates event_rates(const ParticleConfiguration& cfg, const ModelParams& p);

/// Draws offspring displacement radii from the periodised dispersal profile.
/// Ball and gaussian profiles invert a 4096-segment cumulative table; tabulated
/// profiles use rejection against a constant envelope of the exact
/// interpolated density.
class RadialSampler {
public:
    RadialSampler() = default;
    RadialSampler(const KernelSpec& kernel, double torus_edge);

    double truncated_mass() const { return total_mass_; }
    double cutoff() const { return r_cut_; }
    double sample(RngStream& rng) const;
    /// Cumulative distribution of the sampled radius (for distribution tests).
    double cdf(double r) const;

private:
    bool rejection_ = false;
    double r_cut_ = 0.0;
    double total_mass_ = 0.0;
    double envelope_ = 0.0;  // rejection bound on the radial density
    KernelSpec kernel_ = KernelSpec::zero(1);
    std::vector<double> radii_;       // inverse-table nodes
    std::vector<double> cumulative_;  // radial mass up to radii_[i]
};

/// Event-driven (Gillespie) simulator with a cell list whose cells are at
/// least one competition cutoff wide, so pair rates only need the 3^d
/// neighbouring cells.
///
/// In rescaled mode the pair competition carries the factor epsilon while the
/// dispersal is untouched; callers are expected to start from density rho0 /
/// epsilon so that epsilon * (observed density) stays comparable across
/// epsilon.
class Simulation {
public:
    Simulation(const ParticleConfiguration& init, const ModelParams& p, std::uint64_t seed);

    double time() const { return time_; }
    std::size_t population() const { return population_; }
    double total_birth_rate() const { return birth_per_particle_ * static_cast<double>(population_); }
    double total_death_rate() const { return death_total_; }
    double birth_rate_per_particle() const { return birth_per_particle_; }

    /// Death rates in the order of current_configuration().
    std::vector<double> death_rates() const;
    /// Same, recomputed from scratch; audits incremental bookkeeping drift.
    std::vector<double> death_rates_fresh() const;

    ParticleConfiguration current_configuration() const;

    /// One event.  Returns false (and marks the trace absorbed) when the total
    /// rate is zero; the state can then never change again.
    bool step();

    /// Advances to `t`: applies every event happening before it.  Returns false
    /// if the process absorbed or blew up on the way.
    bool advance_to(double t);

    void set_population_cap(std::size_t cap) { population_cap_ = cap; }
    bool blew_up() const { return trace_.blew_up; }
    void keep_trace(bool on) { record_trace_ = on; }
    const EventTrace& trace() const { return trace_; }

    /// Periodic rebuild cadence for the incremental rate sums (events).
    void set_rate_rebuild_interval(std::uint64_t every) { rebuild_every_ = every ? every : 1; }

private:
    struct Cell {
        std::vector<std::array<double, 2>> pos;
        std::vector<double> death;
        std::vector<std::uint32_t> flat;  // back-reference into flat_
        double sum = 0.0;
    };
    struct Handle {
        std::uint32_t cell;
        std::uint32_t slot;
    };

    std::size_t cell_of(const std::array<double, 2>& x) const;
    template <typename Fn>
    void for_neighbor_cells(std::size_t cell, Fn&& fn) const;
    double insert(const std::array<double, 2>& x);  // returns the particle's death rate
    void remove(std::size_t cell, std::size_t slot);
    void execute_event(double total, double birth_total);
    void rebuild_rate_sums();
    void record_event();

    TorusDomain domain_;
    ModelParams params_;
    RngStream rng_;
    RadialSampler offspring_;
    double competition_cut_ = 0.0;
    double competition_scale_ = 1.0;
    int ncell_ = 1;               // cells per axis
    std::vector<Cell> cells_;
    std::vector<Handle> flat_;    // uniform particle addressing for births
    std::size_t population_ = 0;
    double death_total_ = 0.0;
    double birth_per_particle_ = 0.0;
    double time_ = 0.0;
    std::uint64_t events_ = 0;
    std::uint64_t rebuild_every_ = 4096;
    std::size_t population_cap_ = 1000000;
    bool record_trace_ = true;
    EventTrace trace_;
};

/// Radial pair-correlation estimate and cell-count density estimate at one
/// observation time, averaged over an ensemble.
struct CorrelationEstimate {
    double time = 0.0;
    std::size_t runs = 0;                   // runs contributing (not blown up)
    std::vector<std::uint32_t> run_ids;     // indices of contributing runs
    std::vector<std::uint32_t> populations; // per contributing run
    double mean_density = 0.0;              // mean population / volume
    double density_stderr = 0.0;
    DensityField k1_field;                  // per grid cell count / (runs * cell volume)
    std::vector<double> r_centers;
    std::vector<double> k2_hat;             // ordered pair density / (volume * shell)
    std::vector<double> k2_stderr;

    explicit CorrelationEstimate(const TorusDomain& dom) : k1_field(dom) {}
};

struct EnsembleOptions {
    double t_end = 0.0;
    std::vector<double> snapshot_times;  // strictly increasing, <= t_end
    int runs = 1;
    std::uint64_t seed = 0;
    std::size_t population_cap = 1000000;
    int threads = 1;
    double pair_r_max = 0.0;  // 0: skip the pair histogram
    int pair_bins = 0;
    bool keep_traces = false;
};

struct EnsembleResult {
    std::vector<CorrelationEstimate> snapshots;
    std::vector<std::uint64_t> blown_up_runs;
    std::vector<EventTrace> traces;  // only when keep_traces
};

/// Independent runs (substream = run index), merged in run order so the
/// result does not depend on the thread count.
EnsembleResult run_ensemble(const TorusDomain& dom, const DensityField& rho0, const ModelParams& p,
                            const EnsembleOptions& opts);

}  // namespace sbdlab
