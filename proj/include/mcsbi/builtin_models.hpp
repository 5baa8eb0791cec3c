#pragma once

#include <map>
#include <string>
#include <vector>

#include "mcsbi/errors.hpp"
#include "mcsbi/model_parser.hpp"

namespace mcsbi {

/// Bundled benchmark models. Each entry carries the model-file text (the
/// definitive copy parsed by builtin_model) plus a default property and grid
/// size used by the CLI when none are given.
struct BuiltinModel {
    std::string name;
    std::string description;
    std::string model_text;
    std::string default_property;
    int default_steps;
};

inline const std::vector<BuiltinModel>& builtin_models() {
    static const std::vector<BuiltinModel> models = {
        {"sir",
         "susceptible-infected-recovered epidemic (3 species, 2 reactions)",
         R"(# SIR epidemic model.
# Rate constants are not fixed by the benchmark; these defaults give an
# epidemic whose infected count flirts with the X_I < 30 threshold.
param k_i = 0.1
param k_r = 1.0
species X_S = 40
species X_I = 10
species X_R = 0
reaction infection: X_S + X_I -> 2*X_I @ k_i * X_S * X_I
reaction recovery: X_I -> X_R @ k_r * X_I
)",
         "P=? [ (X_I < 30) U[0,10] (X_I = 0) ]",
         200},

        {"lacz",
         "LacZ prokaryotic gene expression (12 species, 11 reactions)",
         R"(# LacZ protein synthesis in E. coli.
param k_1 = 0.17
param k_2 = 10
param k_3 = 1
param k_4 = 1
param k_5 = 0.015
param k_6 = 0.17
param k_7 = 0.45
param k_8 = 0.4
param k_9 = 0.015
param k_10 = 6.42e-5
param k_11 = 0.3
species X_PLac = 1
species X_RNAP = 35
species X_PLacRNAP = 0
species X_TrLacZ1 = 0
species X_RbsLacZ = 0
species X_TrLacZ2 = 0
species X_Ribosome = 350
species X_RbsRibosome = 0
species X_TrRbsLacZ = 0
species X_LacZ = 0
species X_dgrLacZ = 0
species X_dgrRbsLacZ = 0
reaction r1: X_PLac + X_RNAP -> X_PLacRNAP @ k_1 * X_PLac * X_RNAP
reaction r2: X_PLacRNAP -> X_PLac + X_RNAP @ k_2 * X_PLacRNAP
reaction r3: X_PLacRNAP -> X_TrLacZ1 @ k_3 * X_PLacRNAP
reaction r4: X_TrLacZ1 -> X_RbsLacZ + X_PLac + X_TrLacZ2 @ k_4 * X_TrLacZ1
reaction r5: X_TrLacZ2 -> X_RNAP @ k_5 * X_TrLacZ2
reaction r6: X_Ribosome + X_RbsLacZ -> X_RbsRibosome @ k_6 * X_Ribosome * X_RbsLacZ
reaction r7: X_RbsRibosome -> X_Ribosome + X_RbsLacZ @ k_7 * X_RbsRibosome
reaction r8: X_RbsRibosome -> X_TrRbsLacZ + X_RbsLacZ @ k_8 * X_RbsRibosome
reaction r9: X_TrRbsLacZ -> X_LacZ @ k_9 * X_TrRbsLacZ
reaction r10: X_LacZ -> X_dgrLacZ @ k_10 * X_LacZ
reaction r11: X_RbsLacZ -> X_dgrRbsLacZ @ k_11 * X_RbsLacZ
)",
         "P=? [ (X_Ribosome > 0 & X_TrRbsLacZ < 200) U[0,500] (X_LacZ > 150) ]",
         200},

        {"viral",
         "stiff intracellular viral infection (4 species, 6 reactions)",
         R"(# Viral infection kinetics: template X_T, genome X_G, structural
# protein X_S, assembled virus X_V.
param k_1 = 1
param k_2 = 0.025
param k_3 = 1000
param k_4 = 0.25
param k_5 = 1.9985
param k_6 = 7.5e-6
param c_n = 1.0
param c_a = 1.0
species X_T = 10
species X_G = 0
species X_S = 0
species X_V = 0
reaction r1: X_T -> X_G + X_T @ k_1 * X_T * c_n
reaction r2: X_G -> X_T @ k_2 * X_G * c_n
reaction r3: X_T -> X_S + X_T @ k_3 * X_T * c_n * c_a
reaction r4: X_T -> 0 @ k_4 * X_T
reaction r5: X_S -> 0 @ k_5 * X_S
reaction r6: X_G + X_S -> X_V @ k_6 * X_G * X_S
)",
         "P=? [ (X_G < 200) U[0,200] (X_V > 500) ]",
         200},

        {"genosc",
         "genetic oscillator (9 species, 16 reactions)",
         R"(# Genetic oscillator with activator/repressor gene pair.
param k_1 = 1
param k_2 = 50
param k_3 = 500
param k_4 = 50
param k_5 = 1
param k_6 = 100
param k_7 = 50
param k_8 = 0.01
param k_9 = 10
param k_10 = 50
param k_11 = 0.5
param k_12 = 5
param k_13 = 2
param k_14 = 1
param k_15 = 1
param k_16 = 0.2
species X_1 = 10
species X_2 = 1
species X_3 = 10
species X_4 = 1
species X_5 = 1
species X_6 = 1
species X_7 = 1
species X_8 = 1
species X_9 = 1
reaction r1: X_1 + X_7 -> X_2 @ k_1 * X_1 * X_7
reaction r2: X_2 -> X_1 + X_7 @ k_2 * X_2
reaction r3: X_2 -> X_2 + X_5 @ k_3 * X_2
reaction r4: X_1 -> X_1 + X_5 @ k_4 * X_1
reaction r5: X_3 + X_7 -> X_4 @ k_5 * X_3 * X_7
reaction r6: X_4 -> X_3 + X_7 @ k_6 * X_4
reaction r7: X_4 -> X_4 + X_6 @ k_7 * X_4
reaction r8: X_3 -> X_3 + X_6 @ k_8 * X_3
reaction r9: X_5 -> 0 @ k_9 * X_5
reaction r10: X_5 -> X_5 + X_7 @ k_10 * X_5
reaction r11: X_6 -> 0 @ k_11 * X_6
reaction r12: X_6 -> X_6 + X_8 @ k_12 * X_6
reaction r13: X_7 + X_8 -> X_9 @ k_13 * X_7 * X_8
reaction r14: X_9 -> X_8 @ k_14 * X_9
reaction r15: X_7 -> 0 @ k_15 * X_7
reaction r16: X_8 -> 0 @ k_16 * X_8
)",
         "P=? [ (X_7 < 19000) U[0,50] (X_9 > 24000) ]",
         2000},
    };
    return models;
}

inline const BuiltinModel* find_builtin(const std::string& name) {
    for (const auto& m : builtin_models())
        if (m.name == name) return &m;
    return nullptr;
}

/// Construct a bundled model, optionally overriding parameters (e.g. the SIR
/// rate constants or the viral c_n / c_a scale factors).
inline ReactionNetwork builtin_model(const std::string& name,
                                     const std::map<std::string, double>& overrides = {}) {
    const BuiltinModel* m = find_builtin(name);
    if (!m) throw ModelError("unknown builtin model '" + name + "' (expected sir|lacz|viral|genosc)");
    return parse_model(m->model_text, overrides);
}

} // namespace mcsbi
