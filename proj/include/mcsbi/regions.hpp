#pragma once

#include <algorithm>
#include <map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mcsbi/errors.hpp"
#include "mcsbi/property.hpp"

namespace mcsbi {

/// Half-space a . x <= b over the continuous state space.
struct HalfSpace {
    Eigen::VectorXd a;
    double b = 0.0;

    bool contains(const Eigen::VectorXd& x) const { return a.dot(x) <= b; }

    friend bool operator<(const HalfSpace& lhs, const HalfSpace& rhs) {
        if (lhs.a.size() != rhs.a.size()) return lhs.a.size() < rhs.a.size();
        for (Eigen::Index i = 0; i < lhs.a.size(); ++i)
            if (lhs.a[i] != rhs.a[i]) return lhs.a[i] < rhs.a[i];
        return lhs.b < rhs.b;
    }
    friend bool operator==(const HalfSpace& lhs, const HalfSpace& rhs) {
        return !(lhs < rhs) && !(rhs < lhs);
    }
};

/// Intersection of half-spaces, kept in sorted deduplicated form. The whole
/// space is written as the single trivial row 0.x <= 1.
struct Polytope {
    std::vector<HalfSpace> rows;

    static Polytope whole_space(Eigen::Index dim) {
        Polytope p;
        p.rows.push_back({Eigen::VectorXd::Zero(dim), 1.0});
        return p;
    }

    void canonicalize() {
        if (rows.empty()) return;
        const Eigen::Index dim = rows.front().a.size();
        // Rows 0.x <= b with b >= 0 are vacuous; drop them unless nothing
        // else remains (the whole-space marker keeps exactly one).
        std::erase_if(rows, [](const HalfSpace& r) {
            return r.b >= 0.0 && r.a.isZero(0.0);
        });
        std::sort(rows.begin(), rows.end());
        rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
        if (rows.empty()) rows.push_back({Eigen::VectorXd::Zero(dim), 1.0});
    }

    bool contains(const Eigen::VectorXd& x) const {
        for (const auto& r : rows)
            if (!r.contains(x)) return false;
        return true;
    }

    friend Polytope intersect(const Polytope& p, const Polytope& q) {
        Polytope out = p;
        out.rows.insert(out.rows.end(), q.rows.begin(), q.rows.end());
        out.canonicalize();
        return out;
    }

    friend bool operator<(const Polytope& p, const Polytope& q) { return p.rows < q.rows; }
};

/// Integer-weighted sum of polytope indicators. The weights implement
/// inclusion-exclusion, so the pointwise value of a compiled region is
/// exactly 0 or 1 and its Gaussian measure is the matching signed sum of
/// polytope masses.
struct SignedRegion {
    std::vector<std::pair<int, Polytope>> parts;

    bool empty() const { return parts.empty(); }

    /// Signed indicator sum at a real point (0 or 1 off boundaries).
    int indicator(const Eigen::VectorXd& x) const {
        int sum = 0;
        for (const auto& [coeff, poly] : parts)
            if (poly.contains(x)) sum += coeff;
        return sum;
    }
};

namespace detail {

using Clause = std::vector<HalfSpace>;       // conjunction of corrected half-spaces
using Dnf = std::vector<Clause>;             // disjunction of clauses; empty = ff

class SignedBuilder {
public:
    void add(int coeff, Polytope p) {
        if (coeff == 0) return;
        p.canonicalize();
        weights_[std::move(p)] += coeff;
    }

    void add_region(int scale, const SignedRegion& r) {
        for (const auto& [coeff, poly] : r.parts) add(scale * coeff, poly);
    }

    /// Sum of scale * a_i * b_j over all polytope pairs (indicator product).
    void add_product(int scale, const SignedRegion& a, const SignedRegion& b) {
        for (const auto& [ca, pa] : a.parts)
            for (const auto& [cb, pb] : b.parts) add(scale * ca * cb, intersect(pa, pb));
    }

    SignedRegion build() const {
        SignedRegion out;
        for (const auto& [poly, coeff] : weights_)
            if (coeff != 0) out.parts.emplace_back(coeff, poly);
        return out;
    }

private:
    std::map<Polytope, int> weights_;
};

} // namespace detail

/// Half-integer continuity correction: integer-threshold comparisons become
/// real half-spaces offset by 0.5 so each integer's unit mass is centred.
/// The equality atom becomes the pair that brackets its value.
inline std::vector<HalfSpace> continuity_correct(const AtomicProp& atom) {
    std::vector<HalfSpace> out;
    switch (atom.comparator) {
        case Comparator::Less:
            out.push_back({atom.coefficients, atom.bound - 0.5});
            break;
        case Comparator::LessEq:
            out.push_back({atom.coefficients, atom.bound + 0.5});
            break;
        case Comparator::Greater:
            out.push_back({-atom.coefficients, -(atom.bound + 0.5)});
            break;
        case Comparator::GreaterEq:
            out.push_back({-atom.coefficients, -(atom.bound - 0.5)});
            break;
        case Comparator::Equal:
            out.push_back({atom.coefficients, atom.bound + 0.5});
            out.push_back({-atom.coefficients, -(atom.bound - 0.5)});
            break;
    }
    return out;
}

namespace detail {

inline AtomicProp negate_atom_once(const AtomicProp& atom, bool upper_branch) {
    AtomicProp out = atom;
    switch (atom.comparator) {
        case Comparator::Less: out.comparator = Comparator::GreaterEq; break;
        case Comparator::LessEq: out.comparator = Comparator::Greater; break;
        case Comparator::Greater: out.comparator = Comparator::LessEq; break;
        case Comparator::GreaterEq: out.comparator = Comparator::Less; break;
        case Comparator::Equal:
            out.comparator = upper_branch ? Comparator::Greater : Comparator::Less;
            break;
    }
    return out;
}

struct DnfBudget {
    std::size_t limit;
    void charge(std::size_t n) const {
        if (n > limit)
            throw NotSupportedError("state formula expands to more than " +
                                    std::to_string(limit) + " DNF clauses");
    }
};

inline Dnf to_dnf(const StateFormula& f, bool negated, const DnfBudget& budget) {
    using Kind = StateFormula::Kind;
    switch (f.kind()) {
        case Kind::True:
            return negated ? Dnf{} : Dnf{Clause{}};
        case Kind::Atom: {
            if (!negated) return Dnf{continuity_correct(f.atom_prop())};
            // Negation of an equality splits into two strict comparisons.
            Dnf out;
            out.push_back(continuity_correct(negate_atom_once(f.atom_prop(), false)));
            if (f.atom_prop().comparator == Comparator::Equal)
                out.push_back(continuity_correct(negate_atom_once(f.atom_prop(), true)));
            return out;
        }
        case Kind::Not:
            return to_dnf(f.child(0), !negated, budget);
        case Kind::And:
        case Kind::Or: {
            bool conjunctive = (f.kind() == Kind::And) != negated;
            Dnf lhs = to_dnf(f.child(0), negated, budget);
            Dnf rhs = to_dnf(f.child(1), negated, budget);
            if (conjunctive) {
                budget.charge(lhs.size() * rhs.size());
                Dnf out;
                out.reserve(lhs.size() * rhs.size());
                for (const auto& cl : lhs)
                    for (const auto& cr : rhs) {
                        Clause c = cl;
                        c.insert(c.end(), cr.begin(), cr.end());
                        out.push_back(std::move(c));
                    }
                return out;
            }
            budget.charge(lhs.size() + rhs.size());
            lhs.insert(lhs.end(), rhs.begin(), rhs.end());
            return lhs;
        }
    }
    return {};
}

/// Membership of a real point in the corrected semantics of a DNF.
inline bool dnf_contains(const Dnf& dnf, const Eigen::VectorXd& x) {
    for (const auto& clause : dnf) {
        bool all = true;
        for (const auto& row : clause)
            if (!row.contains(x)) {
                all = false;
                break;
            }
        if (all) return true;
    }
    return false;
}

/// Signed-polytope form of a union of clauses, built incrementally with
/// U' = U + C - C*U so the pointwise indicator stays exact.
inline SignedRegion dnf_to_signed(const Dnf& dnf, Eigen::Index dim) {
    SignedRegion acc;
    for (const auto& clause : dnf) {
        Polytope p = clause.empty() ? Polytope::whole_space(dim) : Polytope{clause};
        SignedBuilder next;
        next.add_region(1, acc);
        next.add(1, p);
        SignedRegion single;
        single.parts.emplace_back(1, p);
        next.add_product(-1, single, acc);
        acc = next.build();
    }
    return acc;
}

} // namespace detail

/// The three disjoint regions of an until property over the continuous state
/// space, plus the original formulas for exact integer-state evaluation.
struct RegionSet {
    enum class Component { Undetermined, Target, False };

    SignedRegion undetermined; // C = S_phi1 \ S_phi2
    SignedRegion target;       // S_phi2
    SignedRegion false_region; // S_{!phi1 & !phi2}

    detail::Dnf corrected_left;  // corrected-halfspace DNF of phi1
    detail::Dnf corrected_right; // corrected-halfspace DNF of phi2

    StateFormula left = StateFormula::tt();
    StateFormula right = StateFormula::tt();

    const SignedRegion& component(Component c) const {
        switch (c) {
            case Component::Undetermined: return undetermined;
            case Component::Target: return target;
            case Component::False: return false_region;
        }
        return undetermined;
    }

    /// Corrected (real-space) membership, evaluated through the boolean
    /// structure rather than the signed polytopes; the two agree off
    /// boundaries, which is what the signed-sum consistency test checks.
    bool corrected_member(Component c, const Eigen::VectorXd& x) const {
        bool in_left = detail::dnf_contains(corrected_left, x);
        bool in_right = detail::dnf_contains(corrected_right, x);
        switch (c) {
            case Component::Undetermined: return in_left && !in_right;
            case Component::Target: return in_right;
            case Component::False: return !in_left && !in_right;
        }
        return false;
    }
};

/// Exact integer semantics of a region component, used by the simulation
/// monitors and the exact master-equation oracle.
inline int region_indicator(const RegionSet& regions, RegionSet::Component c,
                            const StateVec& state) {
    bool in_left = regions.left.holds(state);
    bool in_right = regions.right.holds(state);
    switch (c) {
        case RegionSet::Component::Undetermined: return (in_left && !in_right) ? 1 : 0;
        case RegionSet::Component::Target: return in_right ? 1 : 0;
        case RegionSet::Component::False: return (!in_left && !in_right) ? 1 : 0;
    }
    return 0;
}

/// Compile an until formula into the three-region signed-polytope form.
/// With f1, f2 the corrected indicators of the two state formulas:
///   target = f2,   C = f1 - f1*f2,   false = 1 - f1 - f2 + f1*f2,
/// so the three indicators sum to 1 at every point.
inline RegionSet compile_regions(const PathFormula& formula, const ReactionNetwork& network,
                                 std::size_t dnf_clause_limit = 64) {
    if (formula.kind != PathKind::Until)
        throw ModelError("compile_regions expects an until formula; call rewrite_to_until first");
    const Eigen::Index dim = static_cast<Eigen::Index>(network.species_count());
    detail::DnfBudget budget{dnf_clause_limit};

    RegionSet out;
    out.left = formula.left;
    out.right = formula.right;
    out.corrected_left = detail::to_dnf(formula.left, false, budget);
    out.corrected_right = detail::to_dnf(formula.right, false, budget);

    SignedRegion f1 = detail::dnf_to_signed(out.corrected_left, dim);
    SignedRegion f2 = detail::dnf_to_signed(out.corrected_right, dim);

    out.target = f2;

    detail::SignedBuilder c_builder;
    c_builder.add_region(1, f1);
    c_builder.add_product(-1, f1, f2);
    out.undetermined = c_builder.build();

    detail::SignedBuilder false_builder;
    false_builder.add(1, Polytope::whole_space(dim));
    false_builder.add_region(-1, f1);
    false_builder.add_region(-1, f2);
    false_builder.add_product(1, f1, f2);
    out.false_region = false_builder.build();

    return out;
}

} // namespace mcsbi
