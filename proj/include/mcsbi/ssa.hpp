#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

#include "mcsbi/errors.hpp"
#include "mcsbi/gaussian.hpp"
#include "mcsbi/model.hpp"
#include "mcsbi/regions.hpp"
#include "mcsbi/rng.hpp"

namespace mcsbi {

/// One exact CTMC sample path: states are piecewise constant between jumps.
struct Trajectory {
    std::vector<double> times;   // strictly increasing, starts at 0
    std::vector<StateVec> states; // one per time
};

enum class UntilOutcome { Satisfied, Falsified, Undetermined };

struct MonitorResult {
    UntilOutcome outcome = UntilOutcome::Undetermined;
    double time = 0.0; // determination time for satisfied/falsified
};

/// Statistical estimate of the first-passage CDF with its confidence band.
struct EmpiricalCdf {
    std::vector<double> times;
    std::vector<double> satisfied_fraction;  // until property first satisfied by t
    std::vector<double> determined_fraction; // absorbed (either way) by t
    double halfwidth = 0.0;                  // max over the grid, normal approximation
    double level = 0.99;
    long sample_count = 0;

    // sample moments of the still-undetermined trajectories per grid point
    std::vector<std::vector<double>> conditional_mean; // [grid][species]
    std::vector<std::vector<double>> conditional_var;  // [grid][species]
    std::vector<long> undetermined_count;
};

namespace detail {

struct CompiledReaction {
    CompiledPolynomial propensity;
    std::vector<std::pair<int, std::int64_t>> changes; // sparse (species, delta)
};

struct CompiledNetwork {
    std::vector<CompiledReaction> reactions;
    StateVec initial;
    std::size_t species_count = 0;

    explicit CompiledNetwork(const ReactionNetwork& net)
        : initial(net.initial_state()), species_count(net.species_count()) {
        for (const auto& r : net.reactions) {
            CompiledReaction cr;
            cr.propensity = CompiledPolynomial(r.propensity);
            for (std::size_t s = 0; s < net.species_count(); ++s)
                if (r.change_vector[s] != 0)
                    cr.changes.emplace_back(static_cast<int>(s), r.change_vector[s]);
            reactions.push_back(std::move(cr));
        }
    }
};

inline double total_propensity(const ReactionNetwork& net, const CompiledNetwork& compiled,
                               const StateVec& x, std::vector<double>& props,
                               std::vector<double>& xd) {
    for (std::size_t s = 0; s < x.size(); ++s) xd[s] = static_cast<double>(x[s]);
    double total = 0.0;
    for (std::size_t r = 0; r < compiled.reactions.size(); ++r) {
        double a = compiled.reactions[r].propensity.evaluate(xd.data());
        if (a < 0.0) propensity_eval(net, r, x); // raises the violation with context
        props[r] = a;
        total += a;
    }
    return total;
}

} // namespace detail

/// Gillespie direct method: exponential waiting times from the total
/// propensity, reaction chosen proportionally. Reproducible per seed.
inline Trajectory simulate(const ReactionNetwork& network, double t_end, std::uint64_t seed) {
    if (!(t_end > 0.0)) throw ModelError("simulation horizon must be > 0");
    detail::CompiledNetwork compiled(network);
    Xoshiro256 rng = Xoshiro256::keyed(seed, 0);

    Trajectory traj;
    StateVec x = compiled.initial;
    double t = 0.0;
    traj.times.push_back(0.0);
    traj.states.push_back(x);

    std::vector<double> props(network.reactions.size());
    std::vector<double> xd(network.species_count());
    for (;;) {
        double total = detail::total_propensity(network, compiled, x, props, xd);
        if (total <= 0.0) break;
        t += rng.next_exponential(total);
        if (t > t_end) break;
        double pick = rng.next_double() * total;
        std::size_t r = 0;
        for (; r + 1 < props.size(); ++r) {
            if (pick < props[r]) break;
            pick -= props[r];
        }
        for (const auto& [s, d] : compiled.reactions[r].changes) x[static_cast<std::size_t>(s)] += d;
        traj.times.push_back(t);
        traj.states.push_back(x);
    }
    return traj;
}

/// Scan a stored trajectory against the exact integer semantics of the
/// regions: first entry into the target satisfies, first entry into the
/// false region falsifies, otherwise undetermined at t_end.
inline MonitorResult monitor_until(const Trajectory& trajectory, const RegionSet& regions,
                                   double t_end) {
    for (std::size_t i = 0; i < trajectory.states.size(); ++i) {
        double t = trajectory.times[i];
        if (t > t_end) break;
        const StateVec& x = trajectory.states[i];
        if (region_indicator(regions, RegionSet::Component::Target, x))
            return {UntilOutcome::Satisfied, t};
        if (region_indicator(regions, RegionSet::Component::False, x))
            return {UntilOutcome::Falsified, t};
    }
    return {UntilOutcome::Undetermined, t_end};
}

namespace detail {

/// Streaming simulation + monitor; optionally records per-grid-point state
/// sums for the still-undetermined conditional. Avoids materializing large
/// trajectories.
struct GridAccumulator {
    const std::vector<double>* grid = nullptr;
    std::vector<long> count;
    std::vector<std::vector<double>> sum;
    std::vector<std::vector<double>> sumsq;

    void init(const std::vector<double>& g, std::size_t n_species) {
        grid = &g;
        count.assign(g.size(), 0);
        sum.assign(g.size(), std::vector<double>(n_species, 0.0));
        sumsq.assign(g.size(), std::vector<double>(n_species, 0.0));
    }

    void merge(const GridAccumulator& other) {
        for (std::size_t i = 0; i < count.size(); ++i) {
            count[i] += other.count[i];
            for (std::size_t s = 0; s < sum[i].size(); ++s) {
                sum[i][s] += other.sum[i][s];
                sumsq[i][s] += other.sumsq[i][s];
            }
        }
    }
};

inline MonitorResult simulate_monitored(const ReactionNetwork& network,
                                        const CompiledNetwork& compiled, const RegionSet& regions,
                                        double t_end, Xoshiro256& rng, GridAccumulator* acc) {
    StateVec x = compiled.initial;
    std::vector<double> props(compiled.reactions.size());
    std::vector<double> xd(compiled.species_count);
    double t = 0.0;
    std::size_t next_grid = 0;

    auto classify = [&](double at) -> MonitorResult {
        if (region_indicator(regions, RegionSet::Component::Target, x))
            return {UntilOutcome::Satisfied, at};
        if (region_indicator(regions, RegionSet::Component::False, x))
            return {UntilOutcome::Falsified, at};
        return {UntilOutcome::Undetermined, at};
    };

    MonitorResult status = classify(0.0);
    if (status.outcome != UntilOutcome::Undetermined) return status;

    auto record_until = [&](double horizon) {
        if (!acc) return;
        const auto& grid = *acc->grid;
        while (next_grid < grid.size() && grid[next_grid] < horizon) {
            acc->count[next_grid] += 1;
            for (std::size_t s = 0; s < xd.size(); ++s) {
                double v = static_cast<double>(x[s]);
                acc->sum[next_grid][s] += v;
                acc->sumsq[next_grid][s] += v * v;
            }
            ++next_grid;
        }
    };

    for (;;) {
        double total = total_propensity(network, compiled, x, props, xd);
        double t_next = total > 0.0 ? t + rng.next_exponential(total)
                                    : std::numeric_limits<double>::infinity();
        if (t_next > t_end) {
            record_until(std::nextafter(t_end, kInf)); // include the final grid point
            return {UntilOutcome::Undetermined, t_end};
        }
        record_until(t_next);
        double pick = rng.next_double() * total;
        std::size_t r = 0;
        for (; r + 1 < props.size(); ++r) {
            if (pick < props[r]) break;
            pick -= props[r];
        }
        for (const auto& [s, dlt] : compiled.reactions[r].changes)
            x[static_cast<std::size_t>(s)] += dlt;
        t = t_next;
        status = classify(t);
        if (status.outcome != UntilOutcome::Undetermined) return status;
    }
}

} // namespace detail

/// Monte Carlo estimate of the first-passage CDFs on a time grid.
/// Trajectories are sampled with per-index keyed generators, so the result
/// is independent of the thread schedule.
inline EmpiricalCdf estimate_cdf(const ReactionNetwork& network, const RegionSet& regions,
                                 const std::vector<double>& grid, long n_samples, double level,
                                 std::uint64_t seed, int n_threads = 0) {
    if (n_samples < 2) throw ModelError("estimate_cdf requires at least 2 samples");
    if (n_threads <= 0)
        n_threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    const double t_end = grid.empty() ? 0.0 : grid.back();
    detail::CompiledNetwork compiled(network);

    struct Worker {
        std::vector<MonitorResult> results;
        detail::GridAccumulator acc;
    };
    std::vector<Worker> workers(static_cast<std::size_t>(n_threads));
    std::vector<std::thread> threads;
    std::exception_ptr failure = nullptr;
    std::mutex failure_mutex;

    auto run_range = [&](int widx, long begin, long end) {
        try {
            Worker& w = workers[static_cast<std::size_t>(widx)];
            w.acc.init(grid, network.species_count());
            w.results.reserve(static_cast<std::size_t>(end - begin));
            for (long i = begin; i < end; ++i) {
                Xoshiro256 rng = Xoshiro256::keyed(seed, static_cast<std::uint64_t>(i));
                w.results.push_back(detail::simulate_monitored(network, compiled, regions, t_end,
                                                               rng, &w.acc));
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    };

    long chunk = (n_samples + n_threads - 1) / n_threads;
    for (int w = 0; w < n_threads; ++w) {
        long begin = w * chunk;
        long end = std::min<long>(n_samples, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back(run_range, w, begin, end);
    }
    for (auto& th : threads) th.join();
    if (failure) std::rethrow_exception(failure);

    std::vector<double> satisfied_times;
    std::vector<double> determined_times;
    for (const auto& w : workers)
        for (const auto& r : w.results) {
            if (r.outcome == UntilOutcome::Satisfied) satisfied_times.push_back(r.time);
            if (r.outcome != UntilOutcome::Undetermined) determined_times.push_back(r.time);
        }
    std::sort(satisfied_times.begin(), satisfied_times.end());
    std::sort(determined_times.begin(), determined_times.end());

    EmpiricalCdf out;
    out.times = grid;
    out.level = level;
    out.sample_count = n_samples;
    out.satisfied_fraction.resize(grid.size());
    out.determined_fraction.resize(grid.size());
    const double n = static_cast<double>(n_samples);
    double worst_var = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        auto sat = std::upper_bound(satisfied_times.begin(), satisfied_times.end(), grid[i]);
        auto det = std::upper_bound(determined_times.begin(), determined_times.end(), grid[i]);
        double ps = static_cast<double>(sat - satisfied_times.begin()) / n;
        double pd = static_cast<double>(det - determined_times.begin()) / n;
        out.satisfied_fraction[i] = ps;
        out.determined_fraction[i] = pd;
        worst_var = std::max({worst_var, ps * (1.0 - ps), pd * (1.0 - pd)});
    }
    double z = norm_quantile(0.5 * (1.0 + level));
    out.halfwidth = z * std::sqrt(worst_var / n);

    detail::GridAccumulator total;
    total.init(grid, network.species_count());
    for (const auto& w : workers) total.merge(w.acc);
    out.conditional_mean.resize(grid.size());
    out.conditional_var.resize(grid.size());
    out.undetermined_count.assign(grid.size(), 0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        out.undetermined_count[i] = total.count[i];
        out.conditional_mean[i].assign(network.species_count(), 0.0);
        out.conditional_var[i].assign(network.species_count(), 0.0);
        if (total.count[i] > 0) {
            double c = static_cast<double>(total.count[i]);
            for (std::size_t s = 0; s < network.species_count(); ++s) {
                double mean = total.sum[i][s] / c;
                out.conditional_mean[i][s] = mean;
                double var = total.sumsq[i][s] / c - mean * mean;
                out.conditional_var[i][s] = std::max(var, 0.0) * (c > 1 ? c / (c - 1.0) : 1.0);
            }
        }
    }
    return out;
}

} // namespace mcsbi
