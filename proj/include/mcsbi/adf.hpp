#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "mcsbi/errors.hpp"
#include "mcsbi/gaussian.hpp"
#include "mcsbi/regions.hpp"

namespace mcsbi {

/// Evidence and moment-matched Gaussian posterior of one conditioning step.
struct AdfResult {
    double evidence = 0.0;
    GaussianDist posterior;
};

namespace detail {

/// Box probability after removing degenerate directions, with a stream key
/// derived from geometry and covariance only (means excluded, so finite
/// differences in the mean share the quasi-random points).
inline double reduced_prob(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                           const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                           const GaussianConfig& cfg, double tol) {
    auto split = split_degenerate(mean, cov, lower, upper, cfg);
    if (split.step_factor == 0.0) return 0.0;
    split.active.tol = tol;
    split.active.qmc_key = box_qmc_key(split.active, cfg);
    return box_prob(split.active);
}

/// Normal density with scalar variance.
inline double density1(double x, double mean, double var) {
    double sd = std::sqrt(var);
    return norm_pdf((x - mean) / sd) / sd;
}

/// Bivariate normal density with a general 2x2 covariance; 0 for a
/// numerically singular pair (the mass is a step along that direction, so
/// the smooth derivative contribution vanishes).
inline double density2(double x1, double x2, double m1, double m2, const Eigen::Matrix2d& s,
                       const GaussianConfig& cfg) {
    double det = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
    if (det <= cfg.degen_eps * std::max(1.0, s(0, 0) * s(1, 1))) return 0.0;
    double d1 = x1 - m1, d2 = x2 - m2;
    double q = (s(1, 1) * d1 * d1 - 2.0 * s(0, 1) * d1 * d2 + s(0, 0) * d2 * d2) / det;
    return std::exp(-0.5 * q) / (2.0 * M_PI * std::sqrt(det));
}

/// Sub-box with rows `drop` removed and the Gaussian conditioned on the
/// dropped coordinates taking the values `fixed`.
inline double conditional_box_prob(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                   const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                   const std::vector<Eigen::Index>& drop,
                                   const std::vector<double>& fixed, const GaussianConfig& cfg,
                                   double tol) {
    const Eigen::Index m = mean.size();
    const Eigen::Index nd = static_cast<Eigen::Index>(drop.size());
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < m; ++i)
        if (std::find(drop.begin(), drop.end(), i) == drop.end()) keep.push_back(i);
    const Eigen::Index nk = static_cast<Eigen::Index>(keep.size());
    if (nk == 0) return 1.0;

    Eigen::MatrixXd s_dd(nd, nd), s_kd(nk, nd);
    Eigen::VectorXd delta(nd);
    for (Eigen::Index i = 0; i < nd; ++i) {
        delta[i] = fixed[static_cast<std::size_t>(i)] - mean[drop[static_cast<std::size_t>(i)]];
        for (Eigen::Index j = 0; j < nd; ++j)
            s_dd(i, j) = cov(drop[static_cast<std::size_t>(i)], drop[static_cast<std::size_t>(j)]);
        for (Eigen::Index r = 0; r < nk; ++r)
            s_kd(r, i) = cov(keep[static_cast<std::size_t>(r)], drop[static_cast<std::size_t>(i)]);
    }
    Eigen::MatrixXd gain = s_kd * s_dd.inverse();
    Eigen::VectorXd mean_c(nk), lower_c(nk), upper_c(nk);
    Eigen::MatrixXd cov_c(nk, nk);
    for (Eigen::Index r = 0; r < nk; ++r) {
        mean_c[r] = mean[keep[static_cast<std::size_t>(r)]] + gain.row(r).dot(delta);
        lower_c[r] = lower[keep[static_cast<std::size_t>(r)]];
        upper_c[r] = upper[keep[static_cast<std::size_t>(r)]];
        for (Eigen::Index c = 0; c < nk; ++c)
            cov_c(r, c) = cov(keep[static_cast<std::size_t>(r)], keep[static_cast<std::size_t>(c)]) -
                          gain.row(r).dot(s_kd.row(c));
    }
    return reduced_prob(mean_c, cov_c, lower_c, upper_c, cfg, tol);
}

/// Gradient of the box mass with respect to the transformed means. Each
/// finite bound contributes (marginal density at the bound) x (conditional
/// mass of the remaining box), negative at upper bounds, positive at lower.
inline Eigen::VectorXd box_grad_mean(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                     const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                     const GaussianConfig& cfg, double tol) {
    const Eigen::Index m = mean.size();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m);
    // A zero step factor means the mass vanishes identically around this mean.
    for (Eigen::Index k = 0; k < m; ++k)
        if (cov(k, k) < cfg.degen_eps && (mean[k] < lower[k] || mean[k] > upper[k])) return g;
    for (Eigen::Index k = 0; k < m; ++k) {
        if (cov(k, k) < cfg.degen_eps) continue;
        if (upper[k] != kInf)
            g[k] -= density1(upper[k], mean[k], cov(k, k)) *
                    conditional_box_prob(mean, cov, lower, upper, {k}, {upper[k]}, cfg, tol);
        if (lower[k] != -kInf)
            g[k] += density1(lower[k], mean[k], cov(k, k)) *
                    conditional_box_prob(mean, cov, lower, upper, {k}, {lower[k]}, cfg, tol);
    }
    return g;
}

/// Hessian of the box mass with respect to the transformed means. Mixed
/// entries combine the bivariate density at each finite bound corner with
/// the doubly-conditioned box mass; diagonal entries difference the
/// analytic gradient, for which no closed form exists.
inline Eigen::MatrixXd box_hess_mean(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                     const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                     const GaussianConfig& cfg, double tol) {
    const Eigen::Index m = mean.size();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index k = 0; k < m; ++k)
        if (cov(k, k) < cfg.degen_eps && (mean[k] < lower[k] || mean[k] > upper[k])) return h;

    for (Eigen::Index k = 0; k < m; ++k) {
        if (cov(k, k) < cfg.degen_eps) continue;
        for (Eigen::Index l = k + 1; l < m; ++l) {
            if (cov(l, l) < cfg.degen_eps) continue;
            Eigen::Matrix2d s2;
            s2 << cov(k, k), cov(k, l), cov(l, k), cov(l, l);
            double acc = 0.0;
            for (int ck = 0; ck < 2; ++ck) {
                double vk = ck == 0 ? upper[k] : lower[k];
                double sk = ck == 0 ? 1.0 : -1.0;
                if (vk == kInf || vk == -kInf) continue;
                for (int cl = 0; cl < 2; ++cl) {
                    double vl = cl == 0 ? upper[l] : lower[l];
                    double sl = cl == 0 ? 1.0 : -1.0;
                    if (vl == kInf || vl == -kInf) continue;
                    double dens = density2(vk, vl, mean[k], mean[l], s2, cfg);
                    if (dens == 0.0) continue;
                    acc += sk * sl * dens *
                           conditional_box_prob(mean, cov, lower, upper, {k, l}, {vk, vl}, cfg, tol);
                }
            }
            h(k, l) = h(l, k) = acc;
        }
    }
    for (Eigen::Index k = 0; k < m; ++k) {
        if (cov(k, k) < cfg.degen_eps) continue;
        double step = cfg.hess_fd_step_scale * (1.0 + std::abs(mean[k]));
        Eigen::VectorXd mp = mean, mm = mean;
        mp[k] += step;
        mm[k] -= step;
        double gp = box_grad_mean(mp, cov, lower, upper, cfg, tol)[k];
        double gm = box_grad_mean(mm, cov, lower, upper, cfg, tol)[k];
        h(k, k) = (gp - gm) / (2.0 * step);
    }
    return h;
}

struct BoxGeometry {
    BoxForm box;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

inline BoxGeometry transform_to_box(const GaussianDist& dist, const Polytope& polytope,
                                    const GaussianConfig& cfg) {
    BoxGeometry g;
    g.box = build_box_form(polytope, dist.dim());
    if (g.box.count() > cfg.max_dim)
        throw NumericError("polytope has " + std::to_string(g.box.count()) +
                           " distinct constraint directions; limit is " +
                           std::to_string(cfg.max_dim));
    g.mean = g.box.directions * dist.mu;
    g.cov = g.box.directions * dist.sigma * g.box.directions.transpose();
    return g;
}

} // namespace detail

/// Gradient of the polytope's Gaussian mass with respect to the state-space
/// mean, assembled in the transformed box space and mapped back through the
/// direction matrix.
inline Eigen::VectorXd cdf_grad_mu(const GaussianDist& dist, const Polytope& polytope,
                                   const GaussianConfig& cfg = {}) {
    auto geo = detail::transform_to_box(dist, polytope, cfg);
    if (geo.box.infeasible || geo.box.count() == 0) return Eigen::VectorXd::Zero(dist.dim());
    Eigen::VectorXd g = detail::box_grad_mean(geo.mean, geo.cov, geo.box.lower, geo.box.upper,
                                              cfg, cfg.mvn_tol);
    return geo.box.directions.transpose() * g;
}

/// Hessian of the polytope's Gaussian mass with respect to the state-space
/// mean (symmetric by construction).
inline Eigen::MatrixXd cdf_hess_mu(const GaussianDist& dist, const Polytope& polytope,
                                   const GaussianConfig& cfg = {}) {
    auto geo = detail::transform_to_box(dist, polytope, cfg);
    if (geo.box.infeasible || geo.box.count() == 0)
        return Eigen::MatrixXd::Zero(dist.dim(), dist.dim());
    Eigen::MatrixXd h = detail::box_hess_mean(geo.mean, geo.cov, geo.box.lower, geo.box.upper,
                                              cfg, cfg.mvn_tol);
    Eigen::MatrixXd out = geo.box.directions.transpose() * h * geo.box.directions;
    return 0.5 * (out + out.transpose());
}

/// One assumed-density-filtering step: condition the Gaussian prior on the
/// region and project back to a Gaussian by moment matching,
///   mu~    = mu + Sigma d_mu log Z
///   Sigma~ = Sigma + Sigma d2_mu log Z Sigma
/// with Z the signed mass of the region. The caller is responsible for
/// checking Z against its evidence floor first.
inline AdfResult adf_update(const GaussianDist& prior, const SignedRegion& region,
                            const GaussianConfig& cfg = {}) {
    const Eigen::Index n = prior.dim();
    double z = 0.0;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(n, n);
    for (const auto& [coeff, polytope] : region.parts) {
        z += coeff * polytope_prob(prior, polytope, cfg);
        grad += coeff * cdf_grad_mu(prior, polytope, cfg);
        hess += coeff * cdf_hess_mu(prior, polytope, cfg);
    }
    double excess = std::max(-z, z - 1.0);
    if (excess > 1e-6)
        throw NumericError("ADF evidence " + std::to_string(z) + " exceeds [0,1] by more than 1e-6");
    z = std::clamp(z, 0.0, 1.0);
    if (z <= 0.0)
        throw NumericError("ADF update on a region with vanishing evidence");

    Eigen::VectorXd dlog = grad / z;
    Eigen::MatrixXd d2log = hess / z - dlog * dlog.transpose();

    AdfResult out;
    out.evidence = z;
    out.posterior.mu = prior.mu + prior.sigma * dlog;
    Eigen::MatrixXd sigma = prior.sigma + prior.sigma * d2log * prior.sigma;
    out.posterior.sigma = psd_repair(sigma, cfg.psd_floor);
    if (!out.posterior.mu.allFinite() || !out.posterior.sigma.allFinite())
        throw NumericError("ADF update produced non-finite moments");
    return out;
}

} // namespace mcsbi
