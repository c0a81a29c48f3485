#include "sbdlab/particle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

namespace sbdlab {

namespace {
constexpr double kPi = 3.14159265358979323846;

double radial_density(const KernelSpec& k, double r) {
    return (k.dim == 1 ? 2.0 : 2.0 * kPi * r) * k.value(r);
}
}  // namespace

ParticleConfiguration init_poisson(const TorusDomain& dom, const DensityField& rho0, RngStream& rng) {
    require_same_domain(dom, rho0.domain, "init_poisson");
    ParticleConfiguration cfg(dom);
    const double h = dom.spacing();
    const double cv = dom.cell_volume();
    const int M = dom.points_per_axis();
    for (int i = 0; i < M; ++i) {
        const int jmax = dom.dim() == 1 ? 1 : M;
        for (int j = 0; j < jmax; ++j) {
            const double rho = rho0.values[dom.flat_index(i, j)];
            if (rho < 0.0)
                throw std::invalid_argument("init_poisson: negative initial density");
            const long n = rng.poisson(rho * cv);
            for (long c = 0; c < n; ++c) {
                std::array<double, 2> x{0.0, 0.0};
                x[0] = (i + rng.uniform()) * h;
                if (dom.dim() == 2) x[1] = (j + rng.uniform()) * h;
                cfg.positions.push_back(x);
            }
        }
    }
    return cfg;
}

ParticleConfiguration init_poisson(const TorusDomain& dom, double rho0, RngStream& rng) {
    return init_poisson(dom, DensityField::constant(dom, rho0), rng);
}

ParticleConfiguration init_poisson(const TorusDomain& dom, double rho0, std::uint64_t seed) {
    RngStream rng(seed, 0);
    return init_poisson(dom, rho0, rng);
}

EventRates event_rates(const ParticleConfiguration& cfg, const ModelParams& p) {
    p.validate();
    if (p.dim() != cfg.domain.dim())
        throw std::invalid_argument("event_rates: kernel and configuration dimensions differ");
    EventRates r;
    const std::size_t n = cfg.positions.size();
    const double scale = p.effective_competition_scale();
    r.death.assign(n, p.mortality);
    // brute-force pair sum: this is the reference the cell-list engine is
    // audited against, so it deliberately avoids sharing code with it
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = cfg.domain.distance(cfg.positions[i], cfg.positions[j]);
            const double w = scale * p.competition.value(d);
            if (w != 0.0) {
                r.death[i] += w;
                r.death[j] += w;
            }
        }
    for (double v : r.death) r.total_death += v;
    r.birth_per_particle = RadialSampler(p.birth, cfg.domain.edge()).truncated_mass();
    r.total_birth = r.birth_per_particle * static_cast<double>(n);
    return r;
}

RadialSampler::RadialSampler(const KernelSpec& kernel, double torus_edge) : kernel_(kernel) {
    r_cut_ = std::min(kernel.support_radius(), 0.5 * torus_edge);
    if (kernel.is_zero() || r_cut_ <= 0.0) {
        r_cut_ = 0.0;
        return;
    }
    if (kernel.shape == KernelShape::tabulated) {
        rejection_ = true;
        total_mass_ = radial_mass(kernel, r_cut_);
        const double sup = kernel_stats(kernel).sup_norm;
        envelope_ = (kernel.dim == 1 ? 2.0 : 2.0 * kPi * r_cut_) * sup;
        return;
    }
    const int n = 4096;
    radii_.resize(n + 1);
    cumulative_.resize(n + 1);
    const double dr = r_cut_ / n;
    cumulative_[0] = 0.0;
    radii_[0] = 0.0;
    double prev = radial_density(kernel, 0.0);
    for (int i = 1; i <= n; ++i) {
        const double r = i * dr;
        const double cur = radial_density(kernel, r);
        radii_[static_cast<std::size_t>(i)] = r;
        cumulative_[static_cast<std::size_t>(i)] =
            cumulative_[static_cast<std::size_t>(i - 1)] + 0.5 * dr * (prev + cur);
        prev = cur;
    }
    total_mass_ = cumulative_.back();
}

double RadialSampler::sample(RngStream& rng) const {
    if (total_mass_ <= 0.0)
        throw std::logic_error("RadialSampler: sampling from a zero dispersal kernel");
    if (rejection_) {
        for (;;) {
            const double r = rng.uniform() * r_cut_;
            if (rng.uniform() * envelope_ <= radial_density(kernel_, r)) return r;
        }
    }
    const double target = rng.uniform() * total_mass_;
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
    std::size_t hi = static_cast<std::size_t>(it - cumulative_.begin());
    if (hi == 0) return radii_.front();
    if (hi >= cumulative_.size()) hi = cumulative_.size() - 1;
    const std::size_t lo = hi - 1;
    const double span = cumulative_[hi] - cumulative_[lo];
    if (span <= 0.0) return radii_[lo];
    return radii_[lo] + (target - cumulative_[lo]) / span * (radii_[hi] - radii_[lo]);
}

double RadialSampler::cdf(double r) const {
    if (total_mass_ <= 0.0) return 0.0;
    if (r <= 0.0) return 0.0;
    if (r >= r_cut_) return 1.0;
    if (rejection_) return radial_mass(kernel_, r) / total_mass_;
    const double dr = radii_[1] - radii_[0];
    const std::size_t i = std::min(radii_.size() - 2, static_cast<std::size_t>(r / dr));
    // trapezoid over the partial cell, matching the table construction
    const double c = cumulative_[i] +
                     0.5 * (r - radii_[i]) * (radial_density(kernel_, radii_[i]) + radial_density(kernel_, r));
    return c / total_mass_;
}

Simulation::Simulation(const ParticleConfiguration& init, const ModelParams& p, std::uint64_t seed)
    : domain_(init.domain), params_(p), rng_(seed, 1), offspring_(p.birth, init.domain.edge()) {
    p.validate();
    if (p.dim() != domain_.dim())
        throw std::invalid_argument("Simulation: kernel and domain dimensions differ");
    for (const KernelSpec* k : {&p.birth, &p.competition})
        if (!k->is_zero() && domain_.edge() < 2.0 * k->support_radius())
            throw PeriodizationOverlapError(
                "Simulation: torus edge " + std::to_string(domain_.edge()) +
                " is smaller than twice the kernel support " + std::to_string(k->support_radius()));

    competition_scale_ = p.effective_competition_scale();
    competition_cut_ = params_.competition.is_zero()
                           ? 0.0
                           : std::min(params_.competition.support_radius(), 0.5 * domain_.edge());
    if (competition_cut_ > 0.0) {
        ncell_ = std::max(1, static_cast<int>(std::floor(domain_.edge() / competition_cut_)));
    } else {
        ncell_ = 32;
    }
    ncell_ = std::min(ncell_, domain_.dim() == 1 ? 1024 : 256);
    cells_.assign(domain_.dim() == 1 ? static_cast<std::size_t>(ncell_)
                                     : static_cast<std::size_t>(ncell_) * ncell_,
                  Cell{});
    birth_per_particle_ = offspring_.truncated_mass();

    flat_.reserve(init.positions.size());
    for (const auto& x : init.positions) {
        std::array<double, 2> w{domain_.wrap(x[0]), domain_.dim() == 2 ? domain_.wrap(x[1]) : 0.0};
        insert(w);
    }
    trace_.seed = seed;
    trace_.times.push_back(0.0);
    trace_.populations.push_back(static_cast<std::uint32_t>(population_));
}

std::size_t Simulation::cell_of(const std::array<double, 2>& x) const {
    const double width = domain_.edge() / ncell_;
    const int cx = std::min(ncell_ - 1, static_cast<int>(x[0] / width));
    if (domain_.dim() == 1) return static_cast<std::size_t>(cx);
    const int cy = std::min(ncell_ - 1, static_cast<int>(x[1] / width));
    return static_cast<std::size_t>(cx) * ncell_ + cy;
}

template <typename Fn>
void Simulation::for_neighbor_cells(std::size_t cell, Fn&& fn) const {
    if (ncell_ <= 3) {  // neighbourhoods would alias; just visit every cell once
        for (std::size_t c = 0; c < cells_.size(); ++c) fn(c);
        return;
    }
    if (domain_.dim() == 1) {
        const int c = static_cast<int>(cell);
        for (int dx = -1; dx <= 1; ++dx) fn(static_cast<std::size_t>((c + dx + ncell_) % ncell_));
    } else {
        const int cx = static_cast<int>(cell) / ncell_;
        const int cy = static_cast<int>(cell) % ncell_;
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                fn(static_cast<std::size_t>((cx + dx + ncell_) % ncell_) * ncell_ +
                   static_cast<std::size_t>((cy + dy + ncell_) % ncell_));
    }
}

double Simulation::insert(const std::array<double, 2>& x) {
    const std::size_t cell = cell_of(x);
    double own = params_.mortality;
    if (competition_cut_ > 0.0 && competition_scale_ > 0.0) {
        for_neighbor_cells(cell, [&](std::size_t nc) {
            Cell& c = cells_[nc];
            double cell_add = 0.0;
            for (std::size_t s = 0; s < c.pos.size(); ++s) {
                const double r = domain_.distance(x, c.pos[s]);
                if (r > competition_cut_) continue;
                const double w = competition_scale_ * params_.competition.value(r);
                if (w == 0.0) continue;
                own += w;
                c.death[s] += w;
                cell_add += w;
            }
            c.sum += cell_add;
            death_total_ += cell_add;
        });
    }
    Cell& home = cells_[cell];
    home.pos.push_back(x);
    home.death.push_back(own);
    home.flat.push_back(static_cast<std::uint32_t>(flat_.size()));
    home.sum += own;
    death_total_ += own;
    flat_.push_back(Handle{static_cast<std::uint32_t>(cell),
                           static_cast<std::uint32_t>(home.pos.size() - 1)});
    ++population_;
    return own;
}

void Simulation::remove(std::size_t cell, std::size_t slot) {
    Cell& home = cells_[cell];
    const std::array<double, 2> x = home.pos[slot];
    const double own = home.death[slot];
    if (competition_cut_ > 0.0 && competition_scale_ > 0.0) {
        for_neighbor_cells(cell, [&](std::size_t nc) {
            Cell& c = cells_[nc];
            double cell_sub = 0.0;
            for (std::size_t s = 0; s < c.pos.size(); ++s) {
                if (nc == cell && s == slot) continue;
                const double r = domain_.distance(x, c.pos[s]);
                if (r > competition_cut_) continue;
                const double w = competition_scale_ * params_.competition.value(r);
                if (w == 0.0) continue;
                c.death[s] -= w;
                cell_sub += w;
            }
            c.sum -= cell_sub;
            death_total_ -= cell_sub;
        });
    }
    home.sum -= own;
    death_total_ -= own;

    const std::uint32_t freed_flat = home.flat[slot];
    const std::size_t last = home.pos.size() - 1;
    if (slot != last) {
        home.pos[slot] = home.pos[last];
        home.death[slot] = home.death[last];
        home.flat[slot] = home.flat[last];
        flat_[home.flat[slot]].slot = static_cast<std::uint32_t>(slot);
    }
    home.pos.pop_back();
    home.death.pop_back();
    home.flat.pop_back();

    const std::size_t last_flat = flat_.size() - 1;
    if (freed_flat != last_flat) {
        flat_[freed_flat] = flat_[last_flat];
        cells_[flat_[freed_flat].cell].flat[flat_[freed_flat].slot] = freed_flat;
    }
    flat_.pop_back();
    --population_;
    if (population_ == 0) {
        death_total_ = 0.0;
        for (Cell& c : cells_) c.sum = 0.0;
    }
}

void Simulation::rebuild_rate_sums() {
    // Refresh every per-particle rate from scratch; incremental updates only
    // accumulate rounding, so a periodic rebuild keeps long runs honest.
    death_total_ = 0.0;
    for (std::size_t cell = 0; cell < cells_.size(); ++cell) {
        Cell& home = cells_[cell];
        home.sum = 0.0;
        for (std::size_t s = 0; s < home.pos.size(); ++s) {
            double own = params_.mortality;
            if (competition_cut_ > 0.0 && competition_scale_ > 0.0) {
                for_neighbor_cells(cell, [&](std::size_t nc) {
                    const Cell& c = cells_[nc];
                    for (std::size_t t = 0; t < c.pos.size(); ++t) {
                        if (nc == cell && t == s) continue;
                        const double r = domain_.distance(home.pos[s], c.pos[t]);
                        if (r > competition_cut_) continue;
                        own += competition_scale_ * params_.competition.value(r);
                    }
                });
            }
            home.death[s] = own;
            home.sum += own;
        }
        death_total_ += home.sum;
    }
}

std::vector<double> Simulation::death_rates() const {
    std::vector<double> out;
    out.reserve(population_);
    for (const Cell& c : cells_)
        for (double d : c.death) out.push_back(d);
    return out;
}

std::vector<double> Simulation::death_rates_fresh() const {
    std::vector<double> out;
    out.reserve(population_);
    for (std::size_t cell = 0; cell < cells_.size(); ++cell) {
        const Cell& home = cells_[cell];
        for (std::size_t s = 0; s < home.pos.size(); ++s) {
            double own = params_.mortality;
            if (competition_cut_ > 0.0 && competition_scale_ > 0.0) {
                for_neighbor_cells(cell, [&](std::size_t nc) {
                    const Cell& c = cells_[nc];
                    for (std::size_t t = 0; t < c.pos.size(); ++t) {
                        if (nc == cell && t == s) continue;
                        const double r = domain_.distance(home.pos[s], c.pos[t]);
                        if (r > competition_cut_) continue;
                        own += competition_scale_ * params_.competition.value(r);
                    }
                });
            }
            out.push_back(own);
        }
    }
    return out;
}

ParticleConfiguration Simulation::current_configuration() const {
    ParticleConfiguration cfg(domain_);
    cfg.positions.reserve(population_);
    for (const Cell& c : cells_)
        for (const auto& x : c.pos) cfg.positions.push_back(x);
    return cfg;
}

void Simulation::record_event() {
    if (!record_trace_) return;
    trace_.times.push_back(time_);
    trace_.populations.push_back(static_cast<std::uint32_t>(population_));
}

void Simulation::execute_event(double total, double birth_total) {
    const double u = rng_.uniform() * total;
    if (u < birth_total) {
        // every particle disperses at the same rate, so the parent is uniform
        const Handle parent = flat_[rng_.uniform_index(population_)];
        const std::array<double, 2> px = cells_[parent.cell].pos[parent.slot];
        const double radius = offspring_.sample(rng_);
        std::array<double, 2> child{0.0, 0.0};
        if (domain_.dim() == 1) {
            const double sign = rng_.uniform() < 0.5 ? -1.0 : 1.0;
            child[0] = domain_.wrap(px[0] + sign * radius);
        } else {
            const double angle = 2.0 * kPi * rng_.uniform();
            child[0] = domain_.wrap(px[0] + radius * std::cos(angle));
            child[1] = domain_.wrap(px[1] + radius * std::sin(angle));
        }
        insert(child);
    } else {
        // victim chosen proportionally to its death rate: cell sums first,
        // then a slot scan inside the chosen cell; the running remainder can
        // round past the end, in which case the last candidate stands in
        double target = u - birth_total;
        std::size_t chosen = cells_.size();
        for (std::size_t c = 0; c < cells_.size(); ++c) {
            if (cells_[c].pos.empty()) continue;
            if (target < cells_[c].sum) {
                chosen = c;
                break;
            }
            target -= cells_[c].sum;
            chosen = c;
        }
        Cell& cell = cells_[chosen];
        std::size_t victim = cell.pos.size() - 1;
        for (std::size_t s = 0; s < cell.pos.size(); ++s) {
            if (target < cell.death[s]) {
                victim = s;
                break;
            }
            target -= cell.death[s];
        }
        remove(chosen, victim);
    }
    ++events_;
    if (events_ % rebuild_every_ == 0) rebuild_rate_sums();
    record_event();
    if (population_ >= population_cap_) trace_.blew_up = true;
}

bool Simulation::step() {
    if (trace_.blew_up || trace_.absorbed) return false;
    const double birth_total = total_birth_rate();
    const double total = death_total_ + birth_total;
    if (!(total > 0.0)) {
        trace_.absorbed = true;
        return false;
    }
    double next_time = time_ + rng_.exponential(total);
    if (!(next_time > time_)) next_time = std::nextafter(time_, std::numeric_limits<double>::infinity());
    time_ = next_time;
    execute_event(total, birth_total);
    return true;
}

bool Simulation::advance_to(double t) {
    if (t < time_)
        throw std::invalid_argument("Simulation::advance_to: target time is in the past");
    while (true) {
        if (trace_.blew_up) return false;
        const double birth_total = total_birth_rate();
        const double total = death_total_ + birth_total;
        if (!(total > 0.0)) {
            trace_.absorbed = true;
            time_ = t;
            return false;
        }
        const double dt = rng_.exponential(total);
        if (time_ + dt > t) {
            // no event before t; the exponential clock is memoryless, so the
            // draw can be discarded and restarted from t
            time_ = t;
            return true;
        }
        double next_time = time_ + dt;
        if (!(next_time > time_)) next_time = std::nextafter(time_, std::numeric_limits<double>::infinity());
        time_ = next_time;
        execute_event(total, birth_total);
    }
}

namespace {

struct RunData {
    bool started = false;
    std::size_t snapshots_reached = 0;
    bool blown = false;
    std::vector<std::uint32_t> populations;
    std::vector<std::vector<std::uint32_t>> grid_counts;
    std::vector<std::vector<double>> pair_values;  // per-snapshot k2_hat per bin
    EventTrace trace;
};

void observe(const Simulation& sim, const TorusDomain& dom, const EnsembleOptions& opts, RunData& run) {
    const ParticleConfiguration cfg = sim.current_configuration();
    run.populations.push_back(static_cast<std::uint32_t>(cfg.positions.size()));

    std::vector<std::uint32_t> counts(dom.size(), 0);
    const double h = dom.spacing();
    const int M = dom.points_per_axis();
    for (const auto& x : cfg.positions) {
        const int i = std::min(M - 1, static_cast<int>(x[0] / h));
        const int j = dom.dim() == 2 ? std::min(M - 1, static_cast<int>(x[1] / h)) : 0;
        ++counts[dom.flat_index(i, j)];
    }
    run.grid_counts.push_back(std::move(counts));

    if (opts.pair_bins > 0 && opts.pair_r_max > 0.0) {
        std::vector<double> bins(static_cast<std::size_t>(opts.pair_bins), 0.0);
        const double dr = opts.pair_r_max / opts.pair_bins;
        for (std::size_t i = 0; i < cfg.positions.size(); ++i)
            for (std::size_t j = i + 1; j < cfg.positions.size(); ++j) {
                const double r = dom.distance(cfg.positions[i], cfg.positions[j]);
                if (r < opts.pair_r_max) bins[static_cast<std::size_t>(r / dr)] += 2.0;  // ordered pairs
            }
        const double volume = dom.volume();
        for (int b = 0; b < opts.pair_bins; ++b) {
            const double r0 = b * dr, r1 = (b + 1) * dr;
            const double shell = dom.dim() == 1 ? 2.0 * dr : kPi * (r1 * r1 - r0 * r0);
            bins[static_cast<std::size_t>(b)] /= volume * shell;
        }
        run.pair_values.push_back(std::move(bins));
    }
}

}  // namespace

EnsembleResult run_ensemble(const TorusDomain& dom, const DensityField& rho0, const ModelParams& p,
                            const EnsembleOptions& opts) {
    if (opts.runs < 1)
        throw std::invalid_argument("run_ensemble: need at least one run");
    std::vector<double> snaps = opts.snapshot_times;
    if (snaps.empty()) snaps.push_back(opts.t_end);
    for (std::size_t i = 0; i < snaps.size(); ++i) {
        if (snaps[i] < 0.0 || snaps[i] > opts.t_end)
            throw std::invalid_argument("run_ensemble: snapshot times must lie in [0, t_end]");
        if (i > 0 && !(snaps[i] > snaps[i - 1]))
            throw std::invalid_argument("run_ensemble: snapshot times must be strictly increasing");
    }

    std::vector<RunData> runs(static_cast<std::size_t>(opts.runs));
    std::atomic<int> next{0};
    std::exception_ptr failure = nullptr;
    std::mutex failure_lock;

    auto worker = [&]() {
        for (;;) {
            const int r = next.fetch_add(1);
            if (r >= opts.runs) return;
            try {
                RunData& run = runs[static_cast<std::size_t>(r)];
                run.started = true;
                RngStream init_rng(opts.seed, 2 * static_cast<std::uint64_t>(r));
                ParticleConfiguration cfg = init_poisson(dom, rho0, init_rng);
                Simulation sim(cfg, p, opts.seed ^ (0x5851F42D4C957F2DULL * (static_cast<std::uint64_t>(r) + 1)));
                sim.set_population_cap(opts.population_cap);
                sim.keep_trace(opts.keep_traces);
                for (double t : snaps) {
                    // an absorbed run keeps observing its frozen (usually
                    // empty) state; only blow-up invalidates later snapshots
                    sim.advance_to(t);
                    if (sim.blew_up()) {
                        run.blown = true;
                        break;
                    }
                    observe(sim, dom, opts, run);
                    ++run.snapshots_reached;
                }
                if (!run.blown && opts.t_end > snaps.back()) {
                    sim.advance_to(opts.t_end);
                    if (sim.blew_up()) run.blown = true;
                }
                if (opts.keep_traces) run.trace = sim.trace();
              } catch (...) {
                std::lock_guard<std::mutex> g(failure_lock);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };

    const int n_threads = std::max(1, std::min(opts.threads, opts.runs));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    EnsembleResult result;
    for (std::size_t s = 0; s < snaps.size(); ++s) {
        CorrelationEstimate est(dom);
        est.time = snaps[s];
        std::vector<double> count_sum(dom.size(), 0.0);
        std::vector<double> pair_mean, pair_m2;
        if (opts.pair_bins > 0) {
            pair_mean.assign(static_cast<std::size_t>(opts.pair_bins), 0.0);
            pair_m2.assign(static_cast<std::size_t>(opts.pair_bins), 0.0);
        }
        for (std::size_t r = 0; r < runs.size(); ++r) {
            const RunData& run = runs[r];
            if (run.snapshots_reached <= s) continue;
            est.run_ids.push_back(static_cast<std::uint32_t>(r));
            est.populations.push_back(run.populations[s]);
            for (std::size_t i = 0; i < count_sum.size(); ++i) count_sum[i] += run.grid_counts[s][i];
            if (opts.pair_bins > 0) {
                // streaming mean/variance per bin, runs visited in run order
                const double n = static_cast<double>(est.populations.size());
                for (int b = 0; b < opts.pair_bins; ++b) {
                    const double v = run.pair_values[s][static_cast<std::size_t>(b)];
                    const double d = v - pair_mean[static_cast<std::size_t>(b)];
                    pair_mean[static_cast<std::size_t>(b)] += d / n;
                    pair_m2[static_cast<std::size_t>(b)] += d * (v - pair_mean[static_cast<std::size_t>(b)]);
                }
            }
        }
        est.runs = est.populations.size();
        if (est.runs > 0) {
            double pop_mean = 0.0;
            for (std::uint32_t n : est.populations) pop_mean += n;
            pop_mean /= static_cast<double>(est.runs);
            est.mean_density = pop_mean / dom.volume();
            if (est.runs > 1) {
                double var = 0.0;
                for (std::uint32_t n : est.populations) {
                    const double d = n - pop_mean;
                    var += d * d;
                }
                var /= static_cast<double>(est.runs - 1);
                est.density_stderr = std::sqrt(var / static_cast<double>(est.runs)) / dom.volume();
            }
            for (std::size_t i = 0; i < count_sum.size(); ++i)
                est.k1_field.values[i] = count_sum[i] / (static_cast<double>(est.runs) * dom.cell_volume());
        }
        if (opts.pair_bins > 0) {
            const double dr = opts.pair_r_max / opts.pair_bins;
            for (int b = 0; b < opts.pair_bins; ++b) {
                est.r_centers.push_back((b + 0.5) * dr);
                est.k2_hat.push_back(pair_mean[static_cast<std::size_t>(b)]);
                const double n = static_cast<double>(est.runs);
                est.k2_stderr.push_back(
                    est.runs > 1 ? std::sqrt(pair_m2[static_cast<std::size_t>(b)] / (n - 1.0) / n) : 0.0);
            }
        }
        result.snapshots.push_back(std::move(est));
    }
    for (std::size_t r = 0; r < runs.size(); ++r) {
        if (runs[r].blown) result.blown_up_runs.push_back(r);
        if (opts.keep_traces) result.traces.push_back(std::move(runs[r].trace));
    }
    return result;
}

}  // namespace sbdlab
