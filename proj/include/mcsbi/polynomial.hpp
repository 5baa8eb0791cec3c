#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mcsbi/errors.hpp"

namespace mcsbi {

/// Exponent map of a monomial: sorted (variable index, power > 0) pairs.
using ExponentVec = std::vector<std::pair<int, int>>;

/// One term of a polynomial. Variables are identified by integer index; what
/// the index means (species, moment symbol, ...) is up to the caller.
struct Monomial {
    double coefficient = 0.0;
    ExponentVec exponents; // canonical: sorted by variable, powers >= 1

    int degree() const {
        int d = 0;
        for (const auto& [var, pow] : exponents) d += pow;
        return d;
    }
};

/// Sparse multivariate polynomial with real coefficients.
///
/// Terms are kept in a canonical sorted form; zero-coefficient terms are
/// dropped on normalization, so structural equality is semantic equality
/// (up to floating-point representation of the coefficients).
class Polynomial {
public:
    Polynomial() = default;

    /*implicit*/ Polynomial(double constant) {
        if (constant != 0.0) terms_[{}] = constant;
    }

    static Polynomial variable(int index, int power = 1) {
        Polynomial p;
        if (power < 0) throw NotSupportedError("negative exponent in polynomial");
        if (power == 0) return Polynomial(1.0);
        p.terms_[{{index, power}}] = 1.0;
        return p;
    }

    static Polynomial monomial(double coeff, ExponentVec exps) {
        Polynomial p;
        std::sort(exps.begin(), exps.end());
        ExponentVec canon;
        for (auto& [var, pow] : exps) {
            if (pow == 0) continue;
            if (!canon.empty() && canon.back().first == var)
                canon.back().second += pow;
            else
                canon.emplace_back(var, pow);
        }
        if (coeff != 0.0) p.terms_[std::move(canon)] = coeff;
        return p;
    }

    bool is_zero() const { return terms_.empty(); }

    int degree() const {
        int d = 0;
        for (const auto& [exps, c] : terms_) {
            int t = 0;
            for (const auto& [var, pow] : exps) t += pow;
            d = std::max(d, t);
        }
        return d;
    }

    std::size_t term_count() const { return terms_.size(); }

    const std::map<ExponentVec, double>& terms() const { return terms_; }

    /// Coefficient of an exact exponent vector (canonical form), 0 if absent.
    double coefficient(const ExponentVec& exps) const {
        auto it = terms_.find(exps);
        return it == terms_.end() ? 0.0 : it->second;
    }

    Polynomial& operator+=(const Polynomial& other) {
        for (const auto& [exps, c] : other.terms_) add_term(exps, c);
        return *this;
    }

    Polynomial& operator-=(const Polynomial& other) {
        for (const auto& [exps, c] : other.terms_) add_term(exps, -c);
        return *this;
    }

    Polynomial& operator*=(double s) {
        if (s == 0.0) {
            terms_.clear();
            return *this;
        }
        for (auto& [exps, c] : terms_) c *= s;
        return *this;
    }

    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
    friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
    friend Polynomial operator*(double s, Polynomial a) { return a *= s; }

    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        Polynomial out;
        for (const auto& [ea, ca] : a.terms_)
            for (const auto& [eb, cb] : b.terms_)
                out.add_term(merge_exponents(ea, eb), ca * cb);
        return out;
    }

    Polynomial pow(int n) const {
        if (n < 0) throw NotSupportedError("negative exponent in polynomial");
        Polynomial out(1.0);
        for (int i = 0; i < n; ++i) out = out * (*this);
        return out;
    }

    bool operator==(const Polynomial& other) const { return terms_ == other.terms_; }

    /// Evaluate at a point given by any indexable container of doubles.
    template <typename Point>
    double evaluate(const Point& x) const {
        double sum = 0.0;
        for (const auto& [exps, c] : terms_) {
            double t = c;
            for (const auto& [var, pow] : exps)
                for (int i = 0; i < pow; ++i) t *= x[var];
            sum += t;
        }
        return sum;
    }

    /// Substitute a variable by a polynomial.
    Polynomial substitute(int var, const Polynomial& value) const {
        Polynomial out;
        for (const auto& [exps, c] : terms_) {
            Polynomial term(c);
            for (const auto& [v, pow] : exps) {
                if (v == var)
                    term = term * value.pow(pow);
                else
                    term = term * Polynomial::variable(v, pow);
            }
            out += term;
        }
        return out;
    }

    /// Render with a caller-supplied variable namer, terms in canonical order.
    std::string to_string(const std::function<std::string(int)>& var_name) const {
        if (terms_.empty()) return "0";
        std::ostringstream os;
        bool first = true;
        for (const auto& [exps, c] : terms_) {
            double coeff = c;
            if (!first) {
                os << (coeff < 0 ? " - " : " + ");
                coeff = std::abs(coeff);
            }
            first = false;
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", coeff);
            os << buf;
            for (const auto& [var, pow] : exps) {
                os << "*" << var_name(var);
                if (pow > 1) os << "^" << pow;
            }
        }
        return os.str();
    }

private:
    void add_term(const ExponentVec& exps, double c) {
        auto it = terms_.find(exps);
        if (it == terms_.end()) {
            if (c != 0.0) terms_[exps] = c;
        } else {
            it->second += c;
            if (it->second == 0.0) terms_.erase(it);
        }
    }

    static ExponentVec merge_exponents(const ExponentVec& a, const ExponentVec& b) {
        ExponentVec out;
        out.reserve(a.size() + b.size());
        std::size_t i = 0, j = 0;
        while (i < a.size() && j < b.size()) {
            if (a[i].first < b[j].first)
                out.push_back(a[i++]);
            else if (b[j].first < a[i].first)
                out.push_back(b[j++]);
            else {
                out.emplace_back(a[i].first, a[i].second + b[j].second);
                ++i;
                ++j;
            }
        }
        while (i < a.size()) out.push_back(a[i++]);
        while (j < b.size()) out.push_back(b[j++]);
        return out;
    }

    std::map<ExponentVec, double> terms_;
};

/// Flattened polynomial for hot-loop evaluation (SSA propensities, ODE right
/// hand sides). Each term is a coefficient and a run of variable indices,
/// one per power.
class CompiledPolynomial {
public:
    CompiledPolynomial() = default;

    explicit CompiledPolynomial(const Polynomial& p) {
        offsets_.clear();
        for (const auto& [exps, c] : p.terms()) {
            coeffs_.push_back(c);
            offsets_.push_back(static_cast<std::uint32_t>(factors_.size()));
            for (const auto& [var, pow] : exps)
                for (int i = 0; i < pow; ++i) factors_.push_back(static_cast<std::uint32_t>(var));
        }
        offsets_.push_back(static_cast<std::uint32_t>(factors_.size()));
    }

    template <typename Point>
    double evaluate(const Point& x) const {
        double sum = 0.0;
        for (std::size_t t = 0; t < coeffs_.size(); ++t) {
            double v = coeffs_[t];
            for (std::uint32_t f = offsets_[t]; f < offsets_[t + 1]; ++f) v *= x[factors_[f]];
            sum += v;
        }
        return sum;
    }

private:
    std::vector<double> coeffs_;
    std::vector<std::uint32_t> offsets_{0};
    std::vector<std::uint32_t> factors_;
};

} // namespace mcsbi
