#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcsbi/adf.hpp"
#include "mcsbi/errors.hpp"
#include "mcsbi/gaussian.hpp"
#include "mcsbi/integrate.hpp"
#include "mcsbi/model.hpp"
#include "mcsbi/moments.hpp"
#include "mcsbi/property.hpp"
#include "mcsbi/regions.hpp"

namespace mcsbi {

/// Uniform time grid t_i = i * t_end / N for i = 0..N.
struct Grid {
    double t_end = 0.0;
    int n_steps = 0;

    Grid() = default;
    Grid(double end, int steps) : t_end(end), n_steps(steps) {
        if (!(end > 0.0) || steps < 1) throw ModelError("grid needs t_end > 0 and n_steps >= 1");
    }

    double spacing() const { return t_end / n_steps; }

    std::vector<double> points() const {
        std::vector<double> out(static_cast<std::size_t>(n_steps) + 1);
        for (int i = 0; i <= n_steps; ++i)
            out[static_cast<std::size_t>(i)] = t_end * static_cast<double>(i) / n_steps;
        return out;
    }
};

struct EngineConfig {
    double rtol = 1e-6;
    double atol = 1e-8;
    GaussianConfig gaussian;           // mvn_tol, hess_fd_step_scale, psd_floor, ...
    double evidence_floor = 1e-12;     // below this the run is flagged absorbed
    double init_cov_eps = 1e-6;        // eps * I prior covariance for the point start
    std::size_t dnf_clause_limit = 64;
};

/// Output of one checking run: the per-step satisfaction increments pi_i,
/// their running sum (the CDF of the first satisfaction time), the CDF of
/// absorption into target-or-false, and the filtering trace.
struct FptResult {
    std::vector<double> times;
    std::vector<double> pi;           // probability first satisfied at t_i
    std::vector<double> cdf;          // cumulative sum of pi
    std::vector<double> absorb_cdf;   // 1 - prod evidence (determined either way)
    std::vector<double> evidence;     // p(C_ti | C_<ti)
    std::vector<double> undetermined; // running product p(C_<ti), before step i
    std::vector<MomentState> moments; // the prior (pre-update) trace
    bool absorbed = false;            // evidence hit the floor and the run froze

    /// For a rewritten globally property: satisfaction trace 1 - cdf(t).
    /// Empty unless the checked formula was a globally.
    std::vector<double> globally_satisfaction;
};

/// Sequential Bayesian filter for an until property:
/// per step, the satisfaction increment is the undetermined mass times the
/// target probability of the prior; the prior is then conditioned on having
/// stayed undetermined (ADF) and propagated by the closed moment ODEs.
inline FptResult check_until(const ReactionNetwork& network, const PathFormula& formula,
                             const Grid& grid, const EngineConfig& config = {}) {
    PathFormula until = rewrite_to_until(formula);
    RegionSet regions = compile_regions(until, network, config.dnf_clause_limit);
    MomentField field = moment_field(network);

    const Eigen::Index n = static_cast<Eigen::Index>(network.species_count());
    const std::vector<double> times = grid.points();
    const std::size_t n_points = times.size();

    IntegrateOptions iopt;
    iopt.rtol = config.rtol;
    iopt.atol = config.atol;
    iopt.psd_floor = config.gaussian.psd_floor;

    FptResult out;
    out.times = times;
    out.pi.assign(n_points, 0.0);
    out.cdf.assign(n_points, 0.0);
    out.absorb_cdf.assign(n_points, 0.0);
    out.evidence.assign(n_points, 0.0);
    out.undetermined.assign(n_points, 0.0);
    out.moments.reserve(n_points);

    MomentState prior;
    prior.time = 0.0;
    StateVec x0 = network.initial_state();
    prior.mu.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) prior.mu[i] = static_cast<double>(x0[static_cast<std::size_t>(i)]);
    prior.sigma = config.init_cov_eps * Eigen::MatrixXd::Identity(n, n);

    double undetermined = 1.0; // p(C_{<t_i})
    double cdf = 0.0;
    bool frozen = false;

    for (std::size_t i = 0; i < n_points; ++i) {
        out.undetermined[i] = undetermined;
        out.moments.push_back(prior);
        if (frozen) {
            out.cdf[i] = cdf;
            out.absorb_cdf[i] = out.absorb_cdf[i - 1];
            continue;
        }

        GaussianDist dist{prior.mu, prior.sigma};
        double target_mass = region_prob(dist, regions.target, config.gaussian);
        out.pi[i] = undetermined * target_mass;
        cdf = std::min(cdf + out.pi[i], 1.0);
        out.cdf[i] = cdf;

        double evidence = region_prob(dist, regions.undetermined, config.gaussian);
        out.evidence[i] = evidence;
        if (evidence <= config.evidence_floor) {
            // nothing left undetermined: freeze the remaining steps
            undetermined *= evidence;
            out.absorb_cdf[i] = 1.0 - undetermined;
            out.absorbed = true;
            frozen = true;
            continue;
        }

        if (i + 1 < n_points) {
            AdfResult adf = adf_update(dist, regions.undetermined, config.gaussian);
            undetermined *= evidence;
            out.absorb_cdf[i] = 1.0 - undetermined;

            MomentState posterior;
            posterior.mu = adf.posterior.mu;
            posterior.sigma = adf.posterior.sigma;
            posterior.time = times[i];
            try {
                prior = integrate(field, posterior, times[i + 1], iopt);
            } catch (const StiffnessError& e) {
                throw StiffnessError(std::string(e.what()) + " (filter step " + std::to_string(i) + ")",
                                     e.time());
            }
        } else {
            undetermined *= evidence;
            out.absorb_cdf[i] = 1.0 - undetermined;
        }
    }
    return out;
}

/// Check any supported path formula. Eventually runs the identical until
/// code path; globally runs the negated reachability problem and reports
/// the satisfaction trace 1 - cdf in `globally_satisfaction`.
inline FptResult check_path_formula(const ReactionNetwork& network, const PathFormula& formula,
                                    const Grid& grid, const EngineConfig& config = {}) {
    PathFormula until = rewrite_to_until(formula);
    FptResult out = check_until(network, until, grid, config);
    if (until.negated_reachability) {
        out.globally_satisfaction.resize(out.cdf.size());
        for (std::size_t i = 0; i < out.cdf.size(); ++i)
            out.globally_satisfaction[i] = 1.0 - out.cdf[i];
    }
    return out;
}

} // namespace mcsbi
