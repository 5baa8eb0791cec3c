#pragma once

#include <algorithm>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcsbi/errors.hpp"
#include "mcsbi/model.hpp"
#include "mcsbi/polynomial.hpp"

namespace mcsbi {

/// Raw moment E[x^alpha], written as the sorted list of species indices with
/// repetition: [i] is E[X_i], [i,i,j] is E[X_i^2 X_j].
using MomentIndex = std::vector<int>;

/// Linear combination of raw moments; the empty index is the constant 1.
using MomentCombination = std::map<MomentIndex, double>;

/// The exact (unclosed) moment dynamics d E[x^m]/dt for all |m| <= 2,
/// derived from the master equation:
///   d E[x^m]/dt = sum_r E[ a_r(x) ((x + v_r)^m - x^m) ].
struct RawMomentEquations {
    std::size_t species_count = 0;
    std::map<MomentIndex, MomentCombination> equations; // target |m| in {1,2}
};

namespace detail {

inline MomentIndex exponents_to_index(const ExponentVec& exps) {
    MomentIndex idx;
    for (const auto& [var, pow] : exps)
        for (int i = 0; i < pow; ++i) idx.push_back(var);
    return idx;
}

/// Expectation of a species polynomial as a linear combination of raw moments.
inline void accumulate_expectation(MomentCombination& out, const Polynomial& p, double scale) {
    for (const auto& [exps, c] : p.terms()) {
        MomentIndex idx = exponents_to_index(exps);
        out[idx] += scale * c;
        if (out[idx] == 0.0) out.erase(idx);
    }
}

} // namespace detail

inline RawMomentEquations raw_moment_equations(const ReactionNetwork& network) {
    const int n = static_cast<int>(network.species_count());
    RawMomentEquations out;
    out.species_count = static_cast<std::size_t>(n);

    std::vector<MomentIndex> targets;
    for (int s = 0; s < n; ++s) targets.push_back({s});
    for (int s = 0; s < n; ++s)
        for (int u = s; u < n; ++u) targets.push_back({s, u});

    for (const auto& m : targets) {
        MomentCombination rhs;
        for (const auto& reaction : network.reactions) {
            // (x + v)^m - x^m, expanded exactly
            Polynomial shifted(1.0);
            Polynomial plain(1.0);
            for (int s : m) {
                shifted = shifted * (Polynomial::variable(s) +
                                     Polynomial(static_cast<double>(reaction.change_vector[static_cast<std::size_t>(s)])));
                plain = plain * Polynomial::variable(s);
            }
            Polynomial jump = reaction.propensity * (shifted - plain);
            detail::accumulate_expectation(rhs, jump, 1.0);
        }
        out.equations[m] = std::move(rhs);
    }
    return out;
}

/// Closed ODE field for (mu, Sigma): polynomial right-hand sides over the
/// moment symbols, produced by setting all cumulants above order two to zero.
/// Variable indexing of the polynomials: 0..n-1 are mu components, n + t(i,j)
/// the upper-triangle covariance entries.
class MomentField {
public:
    MomentField() = default;

    int species_count() const { return n_; }
    int packed_size() const { return n_ + n_ * (n_ + 1) / 2; }

    int tri_index(int i, int j) const {
        if (i > j) std::swap(i, j);
        return i * n_ - i * (i - 1) / 2 + (j - i);
    }
    int sigma_var(int i, int j) const { return n_ + tri_index(i, j); }

    const Polynomial& dmu(int s) const { return dmu_[static_cast<std::size_t>(s)]; }
    const Polynomial& dsigma(int i, int j) const {
        return dsigma_[static_cast<std::size_t>(tri_index(i, j))];
    }

    /// Evaluate the field at a packed point [mu; vech(Sigma)].
    void evaluate(const Eigen::VectorXd& packed, Eigen::VectorXd& out) const {
        out.resize(packed.size());
        const double* x = packed.data();
        for (int s = 0; s < n_; ++s) out[s] = compiled_mu_[static_cast<std::size_t>(s)].evaluate(x);
        for (int t = 0; t < n_ * (n_ + 1) / 2; ++t)
            out[n_ + t] = compiled_sigma_[static_cast<std::size_t>(t)].evaluate(x);
    }

    std::string to_string(const ReactionNetwork& network) const {
        auto var_name = [&](int v) -> std::string {
            if (v < n_) return "mu_" + network.species[static_cast<std::size_t>(v)].name;
            int t = v - n_;
            for (int i = 0; i < n_; ++i)
                for (int j = i; j < n_; ++j)
                    if (tri_index(i, j) == t)
                        return "cov_" + network.species[static_cast<std::size_t>(i)].name + "_" +
                               network.species[static_cast<std::size_t>(j)].name;
            return "?";
        };
        std::ostringstream os;
        for (int s = 0; s < n_; ++s)
            os << "d mu_" << network.species[static_cast<std::size_t>(s)].name
               << "/dt = " << dmu_[static_cast<std::size_t>(s)].to_string(var_name) << "\n";
        for (int i = 0; i < n_; ++i)
            for (int j = i; j < n_; ++j)
                os << "d cov_" << network.species[static_cast<std::size_t>(i)].name << "_"
                   << network.species[static_cast<std::size_t>(j)].name << "/dt = "
                   << dsigma_[static_cast<std::size_t>(tri_index(i, j))].to_string(var_name) << "\n";
        return os.str();
    }

    friend MomentField normal_closure(const RawMomentEquations& raw);

private:
    int n_ = 0;
    std::vector<Polynomial> dmu_;
    std::vector<Polynomial> dsigma_;
    std::vector<CompiledPolynomial> compiled_mu_;
    std::vector<CompiledPolynomial> compiled_sigma_;
};

namespace detail {

/// Raw Gaussian moment E[x^alpha] as a polynomial in (mu, Sigma) symbols.
/// Exact identities up to order two; the order-three Isserlis expansion is
/// where the zero-third-cumulant closure enters.
inline Polynomial gaussian_raw_moment(const MomentIndex& alpha, const MomentField& field) {
    const auto mu = [&](int i) { return Polynomial::variable(i); };
    const auto sig = [&](int i, int j) { return Polynomial::variable(field.sigma_var(i, j)); };
    switch (alpha.size()) {
        case 0: return Polynomial(1.0);
        case 1: return mu(alpha[0]);
        case 2: return mu(alpha[0]) * mu(alpha[1]) + sig(alpha[0], alpha[1]);
        case 3: {
            int i = alpha[0], j = alpha[1], k = alpha[2];
            return mu(i) * mu(j) * mu(k) + mu(i) * sig(j, k) + mu(j) * sig(i, k) +
                   mu(k) * sig(i, j);
        }
        default:
            throw NotSupportedError(
                "normal closure supports propensities of degree at most 2 "
                "(raw moment of order " + std::to_string(alpha.size()) + " appeared)");
    }
}

} // namespace detail

inline MomentField normal_closure(const RawMomentEquations& raw);

/// Public surface of the Isserlis reduction, exposed for the closure tests.
inline Polynomial gaussian_raw_moment(const MomentIndex& alpha_in, int species_count) {
    RawMomentEquations raw;
    raw.species_count = static_cast<std::size_t>(species_count);
    MomentField field = normal_closure(raw); // empty field carries the indexing
    MomentIndex alpha = alpha_in;
    std::sort(alpha.begin(), alpha.end());
    return detail::gaussian_raw_moment(alpha, field);
}

inline MomentField normal_closure(const RawMomentEquations& raw) {
    MomentField field;
    field.n_ = static_cast<int>(raw.species_count);
    const int n = field.n_;
    field.dmu_.resize(static_cast<std::size_t>(n));
    field.dsigma_.resize(static_cast<std::size_t>(n * (n + 1) / 2));

    auto closed = [&](const MomentIndex& target) {
        Polynomial out;
        auto it = raw.equations.find(target);
        if (it == raw.equations.end()) return out;
        for (const auto& [alpha, coeff] : it->second)
            out += coeff * detail::gaussian_raw_moment(alpha, field);
        return out;
    };

    for (int s = 0; s < n; ++s) field.dmu_[static_cast<std::size_t>(s)] = closed({s});

    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            // dSigma_ij = dE[x_i x_j] - mu_i dmu_j - mu_j dmu_i
            Polynomial d = closed({i, j});
            d -= Polynomial::variable(i) * field.dmu_[static_cast<std::size_t>(j)];
            d -= Polynomial::variable(j) * field.dmu_[static_cast<std::size_t>(i)];
            field.dsigma_[static_cast<std::size_t>(field.tri_index(i, j))] = std::move(d);
        }

    field.compiled_mu_.reserve(field.dmu_.size());
    for (const auto& p : field.dmu_) field.compiled_mu_.emplace_back(p);
    field.compiled_sigma_.reserve(field.dsigma_.size());
    for (const auto& p : field.dsigma_) field.compiled_sigma_.emplace_back(p);
    return field;
}

/// Convenience: derive and close in one step.
inline MomentField moment_field(const ReactionNetwork& network) {
    return normal_closure(raw_moment_equations(network));
}

} // namespace mcsbi
