#pragma once

#include <cmath>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcsbi/errors.hpp"
#include "mcsbi/model.hpp"
#include "mcsbi/regions.hpp"

namespace mcsbi {

/// Enumerated truncated state space with its sparse generator, the exact
/// master-equation counterpart of the moment-closure machinery. Dynamic
/// states exclude the absorbing regions; absorbed mass is tracked in
/// separate accumulators for the target and false sets.
struct CmeOracle {
    std::vector<StateVec> states; // dynamic (non-absorbing) states, BFS order
    std::map<StateVec, int> index;
    std::vector<std::vector<std::pair<int, double>>> transitions; // i -> (j, rate)
    std::vector<double> target_rate; // absorption rate into the target set
    std::vector<double> false_rate;  // absorption rate into the false set
    std::vector<double> leak_rate;   // outflow past the truncation bound
    std::vector<double> out_rate;    // total outflow per state

    long state_count = 0;      // enumerated states (absorbing boundary excluded)
    long transition_count = 0; // (state, enabled reaction) pairs + deadlock self-loops
    bool initial_in_target = false;
    bool initial_in_false = false;
};

struct CmeOptions {
    std::vector<std::int64_t> state_bound; // per-species cap; empty = unbounded
    std::size_t max_states = 100000;
    double poisson_tail = 1e-13;
};

/// Breadth-first enumeration from the initial state. With a region set the
/// absorbing states (target or false) are not expanded and not stored; the
/// rates into them are accounted per predecessor. The transition count
/// includes one self-loop per deadlock state, the convention used by
/// standard probabilistic model checkers when fixing deadlocks.
inline CmeOracle enumerate_states(const ReactionNetwork& network, const RegionSet* regions,
                                  const CmeOptions& opt = {}) {
    const std::size_t n = network.species_count();
    if (!opt.state_bound.empty() && opt.state_bound.size() != n)
        throw ModelError("state bound dimension does not match the species count");

    auto in_bounds = [&](const StateVec& x) {
        for (std::size_t s = 0; s < n; ++s) {
            if (x[s] < 0) return false;
            if (!opt.state_bound.empty() && x[s] > opt.state_bound[s]) return false;
        }
        return true;
    };
    auto absorbing = [&](const StateVec& x) {
        if (!regions) return false;
        return region_indicator(*regions, RegionSet::Component::Target, x) != 0 ||
               region_indicator(*regions, RegionSet::Component::False, x) != 0;
    };

    CmeOracle oracle;
    StateVec x0 = network.initial_state();
    if (!in_bounds(x0)) throw ModelError("initial state lies outside the state bound");
    if (regions) {
        oracle.initial_in_target =
            region_indicator(*regions, RegionSet::Component::Target, x0) != 0;
        oracle.initial_in_false = region_indicator(*regions, RegionSet::Component::False, x0) != 0;
        if (oracle.initial_in_target || oracle.initial_in_false) return oracle;
    }

    oracle.index[x0] = 0;
    oracle.states.push_back(x0);
    std::deque<std::size_t> queue{0};

    auto state_index = [&](const StateVec& y) -> int {
        auto [it, inserted] = oracle.index.emplace(y, static_cast<int>(oracle.states.size()));
        if (inserted) {
            if (oracle.states.size() >= opt.max_states)
                throw StateSpaceOverflow("reachable state space exceeds the cap of " +
                                         std::to_string(opt.max_states) +
                                         " states; tighten the state bound");
            oracle.states.push_back(y);
            queue.push_back(oracle.states.size() - 1);
        }
        return it->second;
    };

    while (!queue.empty()) {
        std::size_t i = queue.front();
        queue.pop_front();
        StateVec x = oracle.states[i]; // copy: states vector reallocates
        if (oracle.transitions.size() <= i) {
            oracle.transitions.resize(oracle.states.size());
            oracle.target_rate.resize(oracle.states.size(), 0.0);
            oracle.false_rate.resize(oracle.states.size(), 0.0);
            oracle.leak_rate.resize(oracle.states.size(), 0.0);
            oracle.out_rate.resize(oracle.states.size(), 0.0);
        }
        int enabled = 0;
        for (std::size_t r = 0; r < network.reactions.size(); ++r) {
            double rate = propensity_eval(network, r, x);
            if (rate <= 0.0) continue;
            ++enabled;
            StateVec y = x;
            for (std::size_t s = 0; s < n; ++s) y[s] += network.reactions[r].change_vector[s];
            oracle.out_rate[i] += rate;
            if (!in_bounds(y)) {
                oracle.leak_rate[i] += rate;
            } else if (regions &&
                       region_indicator(*regions, RegionSet::Component::Target, y) != 0) {
                oracle.target_rate[i] += rate;
            } else if (regions && region_indicator(*regions, RegionSet::Component::False, y) != 0) {
                oracle.false_rate[i] += rate;
            } else {
                oracle.transitions[i].emplace_back(state_index(y), rate);
            }
        }
        oracle.transition_count += enabled > 0 ? enabled : 1; // deadlock self-loop
    }
    // the queue can outpace the resize above
    oracle.transitions.resize(oracle.states.size());
    oracle.target_rate.resize(oracle.states.size(), 0.0);
    oracle.false_rate.resize(oracle.states.size(), 0.0);
    oracle.leak_rate.resize(oracle.states.size(), 0.0);
    oracle.out_rate.resize(oracle.states.size(), 0.0);
    oracle.state_count = static_cast<long>(oracle.states.size());
    return oracle;
}

/// Exact transient result on a grid.
struct ExactCdfResult {
    std::vector<double> times;
    std::vector<double> cdf;           // mass absorbed into the target set
    std::vector<double> absorb_cdf;    // target + false mass
    std::vector<double> undetermined;  // remaining dynamic mass
    std::vector<double> leak;          // mass lost past the truncation bound
    std::vector<Eigen::VectorXd> conditional_mean; // over the dynamic states
    std::vector<Eigen::VectorXd> conditional_var;
    std::string warning; // set when leakage exceeds 1e-9
};

namespace detail {

/// Poisson weights for uniformisation, with tails truncated below
/// `tail_mass`. Stable for rates up to ~1e4 via the log-gamma form.
inline void poisson_weights(double lambda, double tail_mass, long& k_min,
                            std::vector<double>& weights) {
    if (lambda <= 0.0) {
        k_min = 0;
        weights = {1.0};
        return;
    }
    double sd = std::sqrt(lambda);
    k_min = std::max<long>(0, static_cast<long>(std::floor(lambda - 10.0 * sd - 15.0)));
    long k_max = static_cast<long>(std::ceil(lambda + 10.0 * sd + 25.0));
    weights.clear();
    double total = 0.0;
    for (long k = k_min; k <= k_max; ++k) {
        double logw = static_cast<double>(k) * std::log(lambda) - lambda -
                      std::lgamma(static_cast<double>(k) + 1.0);
        double w = std::exp(logw);
        weights.push_back(w);
        total += w;
        if (k > lambda && w < tail_mass * 1e-3) break;
    }
    (void)total; // truncated mass stays below tail_mass by construction
}

struct UniformisedStepper {
    const CmeOracle* oracle;
    double rate = 0.0; // uniformisation constant Lambda
    double tail = 1e-13;

    explicit UniformisedStepper(const CmeOracle& o, double tail_mass) : oracle(&o), tail(tail_mass) {
        for (double r : o.out_rate) rate = std::max(rate, r);
    }

    /// One application of the uniformised DTMC kernel; absorbed mass is
    /// accumulated into the scalar channels.
    void apply(const std::vector<double>& v, std::vector<double>& out, double& target,
               double& false_mass, double& leak) const {
        const auto& o = *oracle;
        out.assign(v.size(), 0.0);
        for (std::size_t i = 0; i < v.size(); ++i) {
            double mass = v[i];
            if (mass == 0.0) continue;
            out[i] += mass * (1.0 - o.out_rate[i] / rate);
            for (const auto& [j, r] : o.transitions[i])
                out[static_cast<std::size_t>(j)] += mass * (r / rate);
            target += mass * (o.target_rate[i] / rate);
            false_mass += mass * (o.false_rate[i] / rate);
            leak += mass * (o.leak_rate[i] / rate);
        }
    }

    /// Advance the distribution by dt, adding newly absorbed mass into the
    /// channel accumulators.
    void step(std::vector<double>& p, double dt, double& target, double& false_mass,
              double& leak) const {
        if (rate <= 0.0 || dt <= 0.0) return;
        long k_min = 0;
        std::vector<double> w;
        poisson_weights(rate * dt, tail, k_min, w);

        std::vector<double> v = p;
        std::vector<double> next(v.size());
        std::vector<double> acc(p.size(), 0.0);
        // absorbed mass must be weighted by when it leaves, not by the final
        // power: track channel flows per power step
        double tgt_run = 0.0, false_run = 0.0, leak_run = 0.0;
        double tgt_out = 0.0, false_out = 0.0, leak_out = 0.0;
        long k_hi = k_min + static_cast<long>(w.size()) - 1;
        double w_tail = 1.0; // sum of weights for powers >= current k
        long k = 0;
        for (; k <= k_hi; ++k) {
            double wk = (k >= k_min) ? w[static_cast<std::size_t>(k - k_min)] : 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) acc[i] += wk * v[i];
            tgt_out += wk * tgt_run;
            false_out += wk * false_run;
            leak_out += wk * leak_run;
            w_tail -= wk;
            if (k == k_hi) break;
            apply(v, next, tgt_run, false_run, leak_run);
            v.swap(next);
        }
        // powers beyond the truncation: treat as fully relaxed at the last
        // computed state (their total weight is below the tail threshold)
        for (std::size_t i = 0; i < v.size(); ++i) acc[i] += std::max(w_tail, 0.0) * v[i];
        tgt_out += std::max(w_tail, 0.0) * tgt_run;
        false_out += std::max(w_tail, 0.0) * false_run;
        leak_out += std::max(w_tail, 0.0) * leak_run;

        p.swap(acc);
        target += tgt_out;
        false_mass += false_out;
        leak += leak_out;
    }
};

} // namespace detail

/// Exact CDF of the until property by integrating the truncated master
/// equation with target and false regions absorbing. Masses entering the
/// two absorbing sets are accumulated separately; only the target counts
/// toward the CDF.
inline ExactCdfResult exact_cme_cdf(const ReactionNetwork& network, const RegionSet& regions,
                                    const std::vector<double>& grid, const CmeOptions& opt = {}) {
    CmeOracle oracle = enumerate_states(network, &regions, opt);
    const std::size_t n = network.species_count();

    ExactCdfResult out;
    out.times = grid;

    if (oracle.states.empty()) {
        // initial state already absorbed
        double t0 = oracle.initial_in_target ? 1.0 : 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            out.cdf.push_back(t0);
            out.absorb_cdf.push_back(1.0);
            out.undetermined.push_back(0.0);
            out.leak.push_back(0.0);
            out.conditional_mean.emplace_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)));
            out.conditional_var.emplace_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)));
        }
        return out;
    }

    detail::UniformisedStepper stepper(oracle, opt.poisson_tail);
    std::vector<double> p(oracle.states.size(), 0.0);
    p[0] = 1.0;
    double target = 0.0, false_mass = 0.0, leak = 0.0;
    double t = 0.0;

    auto snapshot = [&]() {
        double undetermined = 0.0;
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        Eigen::VectorXd second = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < p.size(); ++i) {
            undetermined += p[i];
            for (std::size_t s = 0; s < n; ++s) {
                double v = static_cast<double>(oracle.states[i][s]);
                mean[static_cast<Eigen::Index>(s)] += p[i] * v;
                second[static_cast<Eigen::Index>(s)] += p[i] * v * v;
            }
        }
        out.cdf.push_back(target);
        out.absorb_cdf.push_back(target + false_mass);
        out.undetermined.push_back(undetermined);
        out.leak.push_back(leak);
        if (undetermined > 1e-300) {
            mean /= undetermined;
            second /= undetermined;
        }
        out.conditional_mean.push_back(mean);
        out.conditional_var.push_back((second - mean.cwiseProduct(mean)).cwiseMax(0.0));
    };

    for (std::size_t g = 0; g < grid.size(); ++g) {
        double dt = grid[g] - t;
        if (dt < 0.0) throw ModelError("grid times must be non-decreasing");
        if (dt > 0.0) stepper.step(p, dt, target, false_mass, leak);
        t = grid[g];
        snapshot();
    }
    if (leak > 1e-9)
        out.warning = "truncation-boundary leakage " + std::to_string(leak) +
                      " exceeds 1e-9; enlarge the state bound";
    return out;
}

/// Exact transient mean and covariance diagonal on a grid, without any
/// absorbing condition (used to validate the moment closure).
inline std::vector<std::pair<Eigen::VectorXd, Eigen::MatrixXd>> cme_transient_moments(
    const ReactionNetwork& network, const std::vector<double>& grid, const CmeOptions& opt = {}) {
    CmeOracle oracle = enumerate_states(network, nullptr, opt);
    detail::UniformisedStepper stepper(oracle, opt.poisson_tail);
    const std::size_t n = network.species_count();

    std::vector<double> p(oracle.states.size(), 0.0);
    p[0] = 1.0;
    double t = 0.0, a = 0.0, b = 0.0, leak = 0.0;

    std::vector<std::pair<Eigen::VectorXd, Eigen::MatrixXd>> out;
    for (double tg : grid) {
        if (tg > t) stepper.step(p, tg - t, a, b, leak);
        t = tg;
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        Eigen::MatrixXd second = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                       static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < p.size(); ++i) {
            Eigen::VectorXd x(static_cast<Eigen::Index>(n));
            for (std::size_t s = 0; s < n; ++s)
                x[static_cast<Eigen::Index>(s)] = static_cast<double>(oracle.states[i][s]);
            mean += p[i] * x;
            second += p[i] * x * x.transpose();
        }
        out.emplace_back(mean, second - mean * mean.transpose());
    }
    return out;
}

} // namespace mcsbi
