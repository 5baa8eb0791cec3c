#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcsbi/errors.hpp"
#include "mcsbi/model.hpp"

namespace mcsbi {

enum class Comparator { Less, LessEq, Greater, GreaterEq, Equal };

inline std::string to_string(Comparator c) {
    switch (c) {
        case Comparator::Less: return "<";
        case Comparator::LessEq: return "<=";
        case Comparator::Greater: return ">";
        case Comparator::GreaterEq: return ">=";
        case Comparator::Equal: return "=";
    }
    return "?";
}

/// Linear inequality over the population variables: coefficients . x  cmp  bound.
struct AtomicProp {
    Eigen::VectorXd coefficients;
    Comparator comparator = Comparator::Less;
    double bound = 0.0;

    /// Exact integer-state semantics (no continuity correction).
    bool holds(const StateVec& state) const {
        double lhs = 0.0;
        for (Eigen::Index i = 0; i < coefficients.size(); ++i)
            lhs += coefficients[i] * static_cast<double>(state[static_cast<std::size_t>(i)]);
        switch (comparator) {
            case Comparator::Less: return lhs < bound;
            case Comparator::LessEq: return lhs <= bound;
            case Comparator::Greater: return lhs > bound;
            case Comparator::GreaterEq: return lhs >= bound;
            case Comparator::Equal: return lhs == bound;
        }
        return false;
    }

    void check() const {
        if (!std::isfinite(bound)) throw ModelError("atomic proposition bound is not finite");
        bool nonzero = false;
        for (Eigen::Index i = 0; i < coefficients.size(); ++i) {
            if (!std::isfinite(coefficients[i])) throw ModelError("atomic proposition coefficient not finite");
            if (coefficients[i] != 0.0) nonzero = true;
        }
        if (!nonzero) throw ModelError("atomic proposition has no nonzero coefficient");
    }
};

/// Boolean combination of atomic propositions (tt, atoms, !, &, |).
class StateFormula {
public:
    enum class Kind { True, Atom, Not, And, Or };

    static StateFormula tt() { return StateFormula(Kind::True); }

    static StateFormula atom(AtomicProp p) {
        p.check();
        StateFormula f(Kind::Atom);
        f.atom_ = std::make_shared<AtomicProp>(std::move(p));
        return f;
    }

    static StateFormula negation(StateFormula f) {
        StateFormula out(Kind::Not);
        out.children_.push_back(std::make_shared<StateFormula>(std::move(f)));
        return out;
    }

    static StateFormula conjunction(StateFormula a, StateFormula b) {
        StateFormula out(Kind::And);
        out.children_.push_back(std::make_shared<StateFormula>(std::move(a)));
        out.children_.push_back(std::make_shared<StateFormula>(std::move(b)));
        return out;
    }

    static StateFormula disjunction(StateFormula a, StateFormula b) {
        StateFormula out(Kind::Or);
        out.children_.push_back(std::make_shared<StateFormula>(std::move(a)));
        out.children_.push_back(std::make_shared<StateFormula>(std::move(b)));
        return out;
    }

    Kind kind() const { return kind_; }
    const AtomicProp& atom_prop() const { return *atom_; }
    const StateFormula& child(std::size_t i) const { return *children_[i]; }
    std::size_t child_count() const { return children_.size(); }

    bool is_true() const { return kind_ == Kind::True; }

    /// Exact integer-state evaluation.
    bool holds(const StateVec& state) const {
        switch (kind_) {
            case Kind::True: return true;
            case Kind::Atom: return atom_->holds(state);
            case Kind::Not: return !children_[0]->holds(state);
            case Kind::And: return children_[0]->holds(state) && children_[1]->holds(state);
            case Kind::Or: return children_[0]->holds(state) || children_[1]->holds(state);
        }
        return false;
    }

private:
    explicit StateFormula(Kind k) : kind_(k) {}
    Kind kind_;
    std::shared_ptr<AtomicProp> atom_;
    std::vector<std::shared_ptr<StateFormula>> children_;
};

enum class PathKind { Until, Eventually, Globally };

/// Time-bounded path formula with lower bound fixed at zero.
struct PathFormula {
    PathKind kind = PathKind::Until;
    StateFormula left = StateFormula::tt();  // tt for eventually/globally
    StateFormula right = StateFormula::tt();
    double horizon = 0.0;

    /// Set when a globally formula was rewritten: the checker computes the
    /// CDF of reaching the negated right formula, and satisfaction of the
    /// original property is 1 - cdf.
    bool negated_reachability = false;

    void check() const {
        if (!(horizon > 0.0)) throw ModelError("path formula horizon must be > 0");
    }
};

/// Rewrite eventually/globally to the until form used by the checker.
/// F phi  ->  tt U phi.  G phi  ->  tt U !phi, flagged negated-reachability.
/// Idempotent: until forms pass through unchanged.
inline PathFormula rewrite_to_until(const PathFormula& f) {
    f.check();
    PathFormula out = f;
    switch (f.kind) {
        case PathKind::Until:
            break;
        case PathKind::Eventually:
            out.kind = PathKind::Until;
            out.left = StateFormula::tt();
            break;
        case PathKind::Globally:
            out.kind = PathKind::Until;
            out.left = StateFormula::tt();
            out.right = StateFormula::negation(f.right);
            out.negated_reachability = true;
            break;
    }
    return out;
}

} // namespace mcsbi
