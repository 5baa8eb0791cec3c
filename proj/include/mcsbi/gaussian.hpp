#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <vector>

#include <Eigen/Dense>

#include "mcsbi/errors.hpp"
#include "mcsbi/regions.hpp"
#include "mcsbi/rng.hpp"

namespace mcsbi {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Standard normal density / distribution function / quantile.
inline double norm_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double norm_cdf(double x) {
    if (x == kInf) return 1.0;
    if (x == -kInf) return 0.0;
    return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

/// Inverse standard normal CDF: Acklam's rational approximation polished
/// with one Halley step, good to ~1e-15 over (0, 1).
inline double norm_quantile(double p) {
    if (p <= 0.0) return -kInf;
    if (p >= 1.0) return kInf;
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement against the erfc-based CDF.
    double e = norm_cdf(x) - p;
    double u = e / std::max(norm_pdf(x), 1e-300);
    x = x - u / (1.0 + 0.5 * x * u);
    return x;
}

/// Gauss-Legendre nodes and weights on [-1, 1], cached per order.
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;

    static const GaussLegendre& order(int n) {
        static std::map<int, GaussLegendre> cache;
        static std::mutex mutex;
        std::lock_guard<std::mutex> lock(mutex);
        auto it = cache.find(n);
        if (it != cache.end()) return it->second;
        GaussLegendre gl;
        gl.nodes.resize(n);
        gl.weights.resize(n);
        for (int i = 0; i < (n + 1) / 2; ++i) {
            double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            double pp = 0.0;
            for (int iter = 0; iter < 100; ++iter) {
                double p0 = 1.0, p1 = 0.0;
                for (int j = 0; j < n; ++j) {
                    double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
                }
                pp = n * (x * p0 - p1) / (x * x - 1.0);
                double dx = p0 / pp;
                x -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            gl.nodes[i] = -x;
            gl.nodes[n - 1 - i] = x;
            gl.weights[i] = gl.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
        }
        return cache.emplace(n, std::move(gl)).first->second;
    }
};

/// Standard bivariate normal CDF P(X <= h, Y <= k) with correlation rho,
/// by Gauss-Legendre quadrature of phi(x) Phi((k - rho x)/sqrt(1-rho^2)).
/// Segments are split around the conditional transition for |rho| near 1.
inline double bvn_cdf(double h, double k, double rho) {
    if (h == -kInf || k == -kInf) return 0.0;
    if (h == kInf) return norm_cdf(k);
    if (k == kInf) return norm_cdf(h);
    if (rho >= 1.0) return norm_cdf(std::min(h, k));
    if (rho <= -1.0) return std::max(0.0, norm_cdf(h) + norm_cdf(k) - 1.0);
    if (rho == 0.0) return norm_cdf(h) * norm_cdf(k);

    const double s = std::sqrt((1.0 - rho) * (1.0 + rho));
    const double lo = -9.0;
    if (h <= lo) return norm_cdf(h) * norm_cdf((k - rho * h) / s); // below 1e-18 anyway

    std::vector<double> breaks{lo, h};
    if (std::abs(rho) > 0.5) {
        double xstar = k / rho; // conditional mean crosses the bound here
        double w = 7.0 * s / std::abs(rho);
        for (double b : {xstar - w, xstar + w})
            if (b > lo && b < h) breaks.push_back(b);
    }
    std::sort(breaks.begin(), breaks.end());

    const auto& gl = GaussLegendre::order(64);
    double total = 0.0;
    for (std::size_t seg = 0; seg + 1 < breaks.size(); ++seg) {
        double a = breaks[seg], b = breaks[seg + 1];
        double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        if (half <= 0.0) continue;
        double acc = 0.0;
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
            double x = mid + half * gl.nodes[i];
            acc += gl.weights[i] * norm_pdf(x) * norm_cdf((k - rho * x) / s);
        }
        total += half * acc;
    }
    return std::clamp(total, 0.0, 1.0);
}

/// Gaussian state distribution.
struct GaussianDist {
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;

    Eigen::Index dim() const { return mu.size(); }
};

/// Numerical configuration for the Gaussian measure / ADF layer.
struct GaussianConfig {
    double mvn_tol = 1e-6;           // target absolute error of box probabilities
    double hess_fd_step_scale = 1e-4; // step factor for the diagonal Hessian differences
    double psd_floor = 1e-10;        // eigenvalue floor factor in psd_repair
    double degen_eps = 1e-12;        // variance below this is treated as deterministic
    std::uint64_t qmc_seed = 0x5bd1e995u; // base key of the quasi-random streams
    int max_dim = 8;                 // cap on distinct constraint directions
};

/// Clip eigenvalues from below at psd_floor * max(trace, 1), with the trace
/// taken over the positive part of the spectrum so that repairing a
/// repaired matrix is a no-op. Idempotent.
inline Eigen::MatrixXd psd_repair(const Eigen::MatrixXd& m, double psd_floor = 1e-10) {
    Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed in psd_repair");
    const double positive_trace = es.eigenvalues().cwiseMax(0.0).sum();
    const double floor = psd_floor * std::max(positive_trace, 1.0);
    Eigen::VectorXd ev = es.eigenvalues();
    bool dirty = false;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev[i] < floor) {
            ev[i] = floor;
            dirty = true;
        }
    if (!dirty) return sym;
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// A polytope reduced to box form: distinct constraint directions D with
/// two-sided limits, so y = D x must lie in [lower, upper] componentwise.
/// Rows are sorted by direction, which makes probabilities and derivatives
/// invariant under permutations of the original constraint rows.
struct BoxForm {
    Eigen::MatrixXd directions; // rows are unit-normalized directions
    Eigen::VectorXd lower;      // -inf where one-sided
    Eigen::VectorXd upper;
    bool infeasible = false;    // contradictory bounds on one direction

    Eigen::Index count() const { return directions.rows(); }
};

inline BoxForm build_box_form(const Polytope& polytope, Eigen::Index dim) {
    std::map<std::vector<double>, std::pair<double, double>> bounds; // dir -> (lo, hi)
    BoxForm out;
    for (const auto& row : polytope.rows) {
        if (row.a.size() != dim) throw NumericError("constraint dimension mismatch");
        double scale = row.a.cwiseAbs().maxCoeff();
        if (scale == 0.0) {
            if (row.b < 0.0) out.infeasible = true; // 0 <= b < 0: empty
            continue;
        }
        Eigen::VectorXd u = row.a / scale;
        double beta = row.b / scale;
        bool flipped = false;
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            if (u[i] == 0.0) continue;
            flipped = u[i] < 0.0;
            break;
        }
        if (flipped) {
            u = -u;
            // u.x >= -beta
        }
        std::vector<double> key(u.data(), u.data() + u.size());
        auto [it, inserted] = bounds.try_emplace(key, -kInf, kInf);
        if (flipped)
            it->second.first = std::max(it->second.first, -beta);
        else
            it->second.second = std::min(it->second.second, beta);
    }
    const Eigen::Index m = static_cast<Eigen::Index>(bounds.size());
    out.directions.resize(m, dim);
    out.lower.resize(m);
    out.upper.resize(m);
    Eigen::Index r = 0;
    for (const auto& [key, lohi] : bounds) {
        for (Eigen::Index i = 0; i < dim; ++i) out.directions(r, i) = key[static_cast<std::size_t>(i)];
        out.lower[r] = lohi.first;
        out.upper[r] = lohi.second;
        if (!(lohi.first <= lohi.second)) out.infeasible = true;
        ++r;
    }
    return out;
}

namespace detail {

/// Box probability problem in the transformed space: y ~ N(mean, cov) with
/// componentwise limits. Degenerate directions have already been folded in.
struct BoxProblem {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    std::uint64_t qmc_key = 0;
    double tol = 1e-7;
};

inline double interval_cdf(double lo, double hi, double mean, double var) {
    double sd = std::sqrt(var);
    return std::clamp(norm_cdf((hi - mean) / sd) - norm_cdf((lo - mean) / sd), 0.0, 1.0);
}

/// QMC evaluation of a >= 3 dimensional box probability: separation of
/// variables over a modified Cholesky factor, scrambled Richtmyer points,
/// error estimated across random shifts. A rank-deficient covariance is
/// handled by folding each dependent row into interval bounds on the last
/// integration variable it references, which keeps the integrand smooth
/// (and the estimate exact) instead of inserting 0/1 steps.
inline std::pair<double, double> box_prob_qmc(const BoxProblem& p) {
    const Eigen::Index m = p.cov.rows();
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m, m);
    std::vector<bool> nondegenerate(static_cast<std::size_t>(m), false);
    const double dmax = std::max(p.cov.diagonal().maxCoeff(), 1e-300);
    for (Eigen::Index k = 0; k < m; ++k) {
        double d = p.cov(k, k) - L.row(k).head(k).squaredNorm();
        if (d < -1e-6 * dmax) throw NumericError("covariance is not positive semi-definite");
        if (d > 1e-13 * dmax) {
            L(k, k) = std::sqrt(d);
            nondegenerate[static_cast<std::size_t>(k)] = true;
            for (Eigen::Index i = k + 1; i < m; ++i)
                L(i, k) = (p.cov(i, k) - L.row(i).head(k).dot(L.row(k).head(k))) / L(k, k);
        }
    }

    const double fold_eps = 1e-9 * std::sqrt(dmax);
    std::vector<std::vector<Eigen::Index>> folded(static_cast<std::size_t>(m));
    double constant_factor = 1.0;
    std::vector<Eigen::Index> order; // nondegenerate rows, in sequence
    for (Eigen::Index k = 0; k < m; ++k) {
        if (nondegenerate[static_cast<std::size_t>(k)]) {
            order.push_back(k);
            continue;
        }
        Eigen::Index jmax = -1;
        for (Eigen::Index j = k - 1; j >= 0; --j)
            if (std::abs(L(k, j)) > fold_eps) {
                jmax = j;
                break;
            }
        if (jmax < 0) {
            // constant row: effectively zero variance, step at the mean
            if (p.lower[k] - p.mean[k] > 0.0 || p.upper[k] - p.mean[k] < 0.0) constant_factor = 0.0;
        } else {
            folded[static_cast<std::size_t>(jmax)].push_back(k);
        }
    }
    if (constant_factor == 0.0 || order.empty()) return {constant_factor, 0.0};

    std::vector<int> draw_coord(static_cast<std::size_t>(m), -1);
    int nv = 0;
    for (std::size_t oi = 0; oi + 1 < order.size(); ++oi) {
        Eigen::Index j = order[oi];
        bool referenced = false;
        for (Eigen::Index k = j + 1; k < m && !referenced; ++k)
            if (std::abs(L(k, j)) > 0.0 || !folded[static_cast<std::size_t>(j)].empty())
                referenced = true;
        if (referenced) draw_coord[static_cast<std::size_t>(j)] = nv++;
    }

    Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
    auto integrand = [&](const double* u) {
        double f = 1.0;
        for (Eigen::Index j : order) {
            double shift = L.row(j).head(j).dot(y.head(j));
            double a = (p.lower[j] == -kInf) ? -kInf : (p.lower[j] - p.mean[j] - shift) / L(j, j);
            double b = (p.upper[j] == kInf) ? kInf : (p.upper[j] - p.mean[j] - shift) / L(j, j);
            for (Eigen::Index k : folded[static_cast<std::size_t>(j)]) {
                double rshift = L.row(k).head(j).dot(y.head(j));
                double rlo = p.lower[k] - p.mean[k] - rshift;
                double rhi = p.upper[k] - p.mean[k] - rshift;
                double c = L(k, j);
                double lo_j, hi_j;
                if (c > 0.0) {
                    lo_j = (rlo == -kInf) ? -kInf : rlo / c;
                    hi_j = (rhi == kInf) ? kInf : rhi / c;
                } else {
                    lo_j = (rhi == kInf) ? -kInf : rhi / c;
                    hi_j = (rlo == -kInf) ? kInf : rlo / c;
                }
                a = std::max(a, lo_j);
                b = std::min(b, hi_j);
            }
            double dj = a == -kInf ? 0.0 : norm_cdf(a);
            double ej = b == kInf ? 1.0 : norm_cdf(b);
            double fj = std::max(ej - dj, 0.0);
            f *= fj;
            int coord = draw_coord[static_cast<std::size_t>(j)];
            if (coord >= 0) {
                double quant = fj <= 0.0 ? dj : dj + u[coord] * fj;
                quant = std::clamp(quant, 1e-16, 1.0 - 1e-16);
                y[j] = norm_quantile(quant);
            }
        }
        return f;
    };

    if (nv == 0) {
        double v = integrand(nullptr);
        return {v, 0.0};
    }

    // Kronecker generators from the R_d sequence: powers of the root of
    // x^(nv+1) = x + 1, a well-distributed badly-approximable vector.
    std::vector<double> q(static_cast<std::size_t>(nv));
    {
        double gamma = 1.3;
        for (int iter = 0; iter < 64; ++iter)
            gamma = std::pow(1.0 + gamma, 1.0 / (nv + 1));
        double g = 1.0;
        for (int j = 0; j < nv; ++j) {
            g /= gamma;
            q[static_cast<std::size_t>(j)] = g;
        }
    }

    constexpr int n_shifts = 12;
    std::array<double, n_shifts> sums{};
    std::vector<std::vector<double>> shifts(n_shifts, std::vector<double>(static_cast<std::size_t>(nv)));
    {
        std::uint64_t s = p.qmc_key;
        for (auto& shift : shifts)
            for (auto& v : shift) v = (splitmix64(s) >> 11) * 0x1.0p-53;
    }

    std::vector<double> u(static_cast<std::size_t>(nv));
    long n_done = 0;
    double value = 0.0, err = kInf;
    long batch = 512;
    const long n_max = 1L << 19;
    while (n_done < n_max) {
        for (long i = n_done + 1; i <= n_done + batch; ++i) {
            for (int sh = 0; sh < n_shifts; ++sh) {
                for (int j = 0; j < nv; ++j) {
                    double v = i * q[static_cast<std::size_t>(j)] + shifts[static_cast<std::size_t>(sh)][static_cast<std::size_t>(j)];
                    v -= std::floor(v);
                    u[static_cast<std::size_t>(j)] = std::abs(2.0 * v - 1.0); // baker transform
                }
                sums[static_cast<std::size_t>(sh)] += integrand(u.data());
            }
        }
        n_done += batch;
        double mean = 0.0;
        for (double s : sums) mean += s;
        mean /= static_cast<double>(n_shifts) * static_cast<double>(n_done);
        double varsum = 0.0;
        for (double s : sums) {
            double d = s / static_cast<double>(n_done) - mean;
            varsum += d * d;
        }
        value = mean;
        err = 3.0 * std::sqrt(varsum / (n_shifts * (n_shifts - 1.0)));
        if (err <= p.tol) break;
        batch = n_done; // double the sample count each round
    }
    return {value, err};
}

/// Box probability for any dimension; deterministic closed forms below
/// dimension three, QMC above.
inline double box_prob(const BoxProblem& p) {
    const Eigen::Index m = p.cov.rows();
    if (m == 0) return 1.0;
    if (m == 1) return interval_cdf(p.lower[0], p.upper[0], p.mean[0], p.cov(0, 0));
    if (m == 2) {
        double s1 = std::sqrt(p.cov(0, 0)), s2 = std::sqrt(p.cov(1, 1));
        double rho = std::clamp(p.cov(0, 1) / (s1 * s2), -1.0, 1.0);
        auto z1 = [&](double v) { return v == -kInf ? -kInf : v == kInf ? kInf : (v - p.mean[0]) / s1; };
        auto z2 = [&](double v) { return v == -kInf ? -kInf : v == kInf ? kInf : (v - p.mean[1]) / s2; };
        double total = bvn_cdf(z1(p.upper[0]), z2(p.upper[1]), rho)
                     - bvn_cdf(z1(p.lower[0]), z2(p.upper[1]), rho)
                     - bvn_cdf(z1(p.upper[0]), z2(p.lower[1]), rho)
                     + bvn_cdf(z1(p.lower[0]), z2(p.lower[1]), rho);
        return std::clamp(total, 0.0, 1.0);
    }
    return std::clamp(box_prob_qmc(p).first, 0.0, 1.0);
}

/// Split a transformed problem into deterministic step factors (degenerate
/// marginal variance) and an active sub-problem.
struct SplitBox {
    double step_factor = 1.0; // 0 or 1
    BoxProblem active;
    std::vector<Eigen::Index> active_index; // active row -> original row
};

inline SplitBox split_degenerate(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                 const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                 const GaussianConfig& cfg) {
    SplitBox out;
    const Eigen::Index m = mean.size();
    for (Eigen::Index k = 0; k < m; ++k) {
        if (cov(k, k) < cfg.degen_eps) {
            if (mean[k] < lower[k] || mean[k] > upper[k]) out.step_factor = 0.0;
        } else {
            out.active_index.push_back(k);
        }
    }
    const Eigen::Index a = static_cast<Eigen::Index>(out.active_index.size());
    out.active.mean.resize(a);
    out.active.lower.resize(a);
    out.active.upper.resize(a);
    out.active.cov.resize(a, a);
    for (Eigen::Index i = 0; i < a; ++i) {
        out.active.mean[i] = mean[out.active_index[static_cast<std::size_t>(i)]];
        out.active.lower[i] = lower[out.active_index[static_cast<std::size_t>(i)]];
        out.active.upper[i] = upper[out.active_index[static_cast<std::size_t>(i)]];
        for (Eigen::Index j = 0; j < a; ++j)
            out.active.cov(i, j) = cov(out.active_index[static_cast<std::size_t>(i)],
                                       out.active_index[static_cast<std::size_t>(j)]);
    }
    return out;
}

/// Stream key: canonical box geometry and covariance, but not the mean, so
/// finite differences in the mean reuse the same point set.
inline std::uint64_t box_qmc_key(const BoxProblem& p, const GaussianConfig& cfg) {
    std::uint64_t h = cfg.qmc_seed;
    h = hash_mix(h, static_cast<std::uint64_t>(p.cov.rows()));
    for (Eigen::Index i = 0; i < p.cov.rows(); ++i) {
        h = hash_mix(h, p.lower[i]);
        h = hash_mix(h, p.upper[i]);
        for (Eigen::Index j = 0; j <= i; ++j) h = hash_mix(h, p.cov(i, j));
    }
    return h;
}

} // namespace detail

/// P(x <= upper componentwise) for x ~ dist, to absolute tolerance tol.
/// Dimension 1 uses the error function, dimension 2 deterministic
/// quadrature, higher dimensions deterministic-seeded quasi-Monte Carlo.
inline double mvn_cdf(const Eigen::VectorXd& upper, const GaussianDist& dist,
                      const GaussianConfig& cfg = {}) {
    if (upper.size() != dist.dim()) throw NumericError("mvn_cdf dimension mismatch");
    if (dist.dim() > cfg.max_dim)
        throw NumericError("mvn_cdf dimension " + std::to_string(dist.dim()) +
                           " exceeds the supported limit of " + std::to_string(cfg.max_dim));
    Eigen::VectorXd lower = Eigen::VectorXd::Constant(dist.dim(), -kInf);
    auto split = detail::split_degenerate(dist.mu, dist.sigma, lower, upper, cfg);
    if (split.step_factor == 0.0) return 0.0;
    split.active.tol = cfg.mvn_tol;
    split.active.qmc_key = detail::box_qmc_key(split.active, cfg);
    return detail::box_prob(split.active);
}

/// Probability mass of one polytope under a Gaussian.
inline double polytope_prob(const GaussianDist& dist, const Polytope& polytope,
                            const GaussianConfig& cfg = {}) {
    BoxForm box = build_box_form(polytope, dist.dim());
    if (box.infeasible) return 0.0;
    if (box.count() > cfg.max_dim)
        throw NumericError("polytope has " + std::to_string(box.count()) +
                           " distinct constraint directions; limit is " +
                           std::to_string(cfg.max_dim));
    Eigen::VectorXd mean = box.directions * dist.mu;
    Eigen::MatrixXd cov = box.directions * dist.sigma * box.directions.transpose();
    auto split = detail::split_degenerate(mean, cov, box.lower, box.upper, cfg);
    if (split.step_factor == 0.0) return 0.0;
    split.active.tol = cfg.mvn_tol;
    split.active.qmc_key = detail::box_qmc_key(split.active, cfg);
    return detail::box_prob(split.active);
}

/// Signed Gaussian measure of a compiled region. The signed sum of polytope
/// masses must land in [0,1] up to numerical tolerance; a clamp assertion of
/// 1e-6 guards against accuracy loss.
inline double region_prob(const GaussianDist& dist, const SignedRegion& region,
                          const GaussianConfig& cfg = {}) {
    double sum = 0.0;
    for (const auto& [coeff, polytope] : region.parts)
        sum += coeff * polytope_prob(dist, polytope, cfg);
    double excess = std::max(-sum, sum - 1.0);
    if (excess > 1e-6)
        throw NumericError("signed region mass " + std::to_string(sum) +
                           " exceeds [0,1] by more than 1e-6; tighten mvn_tol");
    return std::clamp(sum, 0.0, 1.0);
}

} // namespace mcsbi
