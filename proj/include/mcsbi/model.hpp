#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcsbi/errors.hpp"
#include "mcsbi/polynomial.hpp"

namespace mcsbi {

using StateVec = std::vector<std::int64_t>;

struct Species {
    std::string name;
    std::int64_t initial_count = 0;
};

/// One reaction channel: integer stoichiometry plus a polynomial propensity
/// over the species variables (variable index = species index).
struct Reaction {
    std::string name;
    std::vector<std::int64_t> reactants;     // per-species consumption
    std::vector<std::int64_t> products;      // per-species production
    std::vector<std::int64_t> change_vector; // products - reactants
    Polynomial propensity;

    bool operator==(const Reaction& other) const {
        return name == other.name && reactants == other.reactants &&
               products == other.products && change_vector == other.change_vector &&
               propensity == other.propensity;
    }
};

/// Population CTMC model. Immutable after parsing; safe for concurrent reads.
struct ReactionNetwork {
    std::vector<Species> species;
    std::vector<Reaction> reactions;
    std::map<std::string, double> parameters;

    std::size_t species_count() const { return species.size(); }

    int species_index(const std::string& name) const {
        for (std::size_t i = 0; i < species.size(); ++i)
            if (species[i].name == name) return static_cast<int>(i);
        return -1;
    }

    StateVec initial_state() const {
        StateVec x(species.size());
        for (std::size_t i = 0; i < species.size(); ++i) x[i] = species[i].initial_count;
        return x;
    }

    bool operator==(const ReactionNetwork& other) const {
        if (parameters != other.parameters || reactions != other.reactions) return false;
        if (species.size() != other.species.size()) return false;
        for (std::size_t i = 0; i < species.size(); ++i)
            if (species[i].name != other.species[i].name ||
                species[i].initial_count != other.species[i].initial_count)
                return false;
        return true;
    }

    /// Consistency checks mirroring the type invariants. Called by the parser
    /// and by the builtin-model constructors.
    void validate() const {
        for (std::size_t i = 0; i < species.size(); ++i) {
            if (species[i].initial_count < 0)
                throw ModelError("species '" + species[i].name + "' has negative initial count");
            for (std::size_t j = i + 1; j < species.size(); ++j)
                if (species[i].name == species[j].name)
                    throw ModelError("duplicate species name '" + species[i].name + "'");
        }
        const std::size_t n = species.size();
        for (const auto& r : reactions) {
            if (r.reactants.size() != n || r.products.size() != n || r.change_vector.size() != n)
                throw ModelError("reaction '" + r.name + "' has stoichiometry of wrong dimension");
            for (std::size_t s = 0; s < n; ++s) {
                if (r.reactants[s] < 0 || r.products[s] < 0)
                    throw ModelError("reaction '" + r.name + "' has negative stoichiometry");
                if (r.change_vector[s] != r.products[s] - r.reactants[s])
                    throw ModelError("reaction '" + r.name + "' has inconsistent change vector");
            }
            for (const auto& [exps, c] : r.propensity.terms()) {
                if (!std::isfinite(c))
                    throw ModelError("reaction '" + r.name + "' has non-finite coefficient");
                for (const auto& [var, pow] : exps)
                    if (var < 0 || var >= static_cast<int>(n))
                        throw ModelError("reaction '" + r.name + "' references unknown species index");
            }
        }
    }
};

/// Evaluate one reaction's propensity at an integer state. Throws
/// PropensityViolation when the polynomial is negative there.
inline double propensity_eval(const ReactionNetwork& network, std::size_t reaction_index,
                              const StateVec& state) {
    if (reaction_index >= network.reactions.size())
        throw ModelError("reaction index out of range");
    if (state.size() != network.species_count())
        throw ModelError("state dimension does not match species count");
    const Reaction& r = network.reactions[reaction_index];
    std::vector<double> x(state.begin(), state.end());
    double value = r.propensity.evaluate(x);
    if (value < 0.0) {
        std::ostringstream os;
        os << "propensity of reaction '" << r.name << "' is negative (" << value << ") at state (";
        for (std::size_t s = 0; s < state.size(); ++s) os << (s ? "," : "") << state[s];
        os << ")";
        throw PropensityViolation(os.str());
    }
    return value;
}

/// Mass-action propensity in the falling-factorial convention:
/// k * prod_s X_s (X_s - 1) ... (X_s - n_s + 1). Combinatorial factors n_s!
/// are left to the modeler's rate constant; for n_s <= 1 this reduces to the
/// plain product k * prod X_s^{n_s} used by the bundled models.
inline Polynomial mass_action_propensity(const std::vector<std::int64_t>& reactant_stoich,
                                         double k) {
    Polynomial p(k);
    for (std::size_t s = 0; s < reactant_stoich.size(); ++s) {
        if (reactant_stoich[s] < 0) throw ModelError("negative reactant stoichiometry");
        for (std::int64_t i = 0; i < reactant_stoich[s]; ++i) {
            Polynomial factor = Polynomial::variable(static_cast<int>(s)) -
                                Polynomial(static_cast<double>(i));
            p = p * factor;
        }
    }
    return p;
}

/// Species-by-reactions matrix of change vectors.
inline Eigen::MatrixXi stoichiometry_matrix(const ReactionNetwork& network) {
    Eigen::MatrixXi m(static_cast<Eigen::Index>(network.species_count()),
                      static_cast<Eigen::Index>(network.reactions.size()));
    for (std::size_t r = 0; r < network.reactions.size(); ++r)
        for (std::size_t s = 0; s < network.species_count(); ++s)
            m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(r)) =
                static_cast<int>(network.reactions[r].change_vector[s]);
    return m;
}

namespace detail {
inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string format_side(const ReactionNetwork& net, const std::vector<std::int64_t>& stoich) {
    std::string out;
    for (std::size_t s = 0; s < stoich.size(); ++s) {
        if (stoich[s] == 0) continue;
        if (!out.empty()) out += " + ";
        if (stoich[s] != 1) out += std::to_string(stoich[s]) + "*";
        out += net.species[s].name;
    }
    return out.empty() ? "0" : out;
}
} // namespace detail

/// Serialize a network back into the model-file format. Propensities are
/// written with numeric coefficients, so parse_model(render(net)) == net.
inline std::string render(const ReactionNetwork& network) {
    std::ostringstream os;
    for (const auto& [name, value] : network.parameters)
        os << "param " << name << " = " << detail::format_real(value) << "\n";
    for (const auto& sp : network.species)
        os << "species " << sp.name << " = " << sp.initial_count << "\n";
    for (const auto& r : network.reactions) {
        os << "reaction " << r.name << ": " << detail::format_side(network, r.reactants) << " -> "
           << detail::format_side(network, r.products) << " @ "
           << r.propensity.to_string([&](int v) { return network.species[v].name; }) << "\n";
    }
    return os.str();
}

} // namespace mcsbi
