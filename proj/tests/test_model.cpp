#include <catch2/catch_amalgamated.hpp>

#include "mcsbi/builtin_models.hpp"
#include "mcsbi/model.hpp"
#include "mcsbi/model_parser.hpp"

using namespace mcsbi;

static const char* kSirText = R"(
# three species, two reactions
param k_i = 0.1
param k_r = 1.0
species X_S = 40
species X_I = 10
species X_R = 0
reaction infection: X_S + X_I -> 2*X_I @ k_i * X_S * X_I
reaction recovery: X_I -> X_R @ k_r * X_I
)";

TEST_CASE("parse_model builds the SIR network") {
    ReactionNetwork net = parse_model(kSirText);
    REQUIRE(net.species_count() == 3);
    REQUIRE(net.reactions.size() == 2);
    CHECK(net.species[0].name == "X_S");
    CHECK(net.species[0].initial_count == 40);
    CHECK(net.species[1].initial_count == 10);
    CHECK(net.species[2].initial_count == 0);

    CHECK(net.reactions[0].change_vector == std::vector<std::int64_t>{-1, 1, 0});
    CHECK(net.reactions[1].change_vector == std::vector<std::int64_t>{0, -1, 1});

    // propensity k_i * X_S * X_I with the parameter folded in
    CHECK(net.reactions[0].propensity.coefficient({{0, 1}, {1, 1}}) == Catch::Approx(0.1));
    CHECK(net.parameters.at("k_r") == 1.0);
}

TEST_CASE("parse_model accepts a network without reactions") {
    ReactionNetwork net = parse_model("species X_A = 7\n");
    REQUIRE(net.species_count() == 1);
    CHECK(net.reactions.empty());
    CHECK(net.initial_state() == StateVec{7});
}

TEST_CASE("parse_model rejects undeclared species") {
    const char* text = "species X_A = 1\nreaction r: X_A -> Z @ 1.0 * X_A\n";
    REQUIRE_THROWS_MATCHES(parse_model(text), ParseError,
                           Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("Z")));
}

TEST_CASE("parse_model error cases") {
    CHECK_THROWS_AS(parse_model("species X_A = -3\n"), ParseError);
    CHECK_THROWS_AS(parse_model("species X_A = 1\nspecies X_A = 2\n"), ParseError);
    CHECK_THROWS_AS(parse_model("reaction r: 0 -> 0 @ nope\n"), ParseError);
    CHECK_THROWS_AS(parse_model("bogus X = 1\n"), ParseError);
    CHECK_THROWS_AS(parse_model("species X_A = 1\n", {{"missing", 1.0}}), ParseError);
}

TEST_CASE("parameter overrides are substituted") {
    ReactionNetwork net = parse_model(kSirText, {{"k_i", 0.5}});
    CHECK(net.parameters.at("k_i") == 0.5);
    CHECK(net.reactions[0].propensity.coefficient({{0, 1}, {1, 1}}) == Catch::Approx(0.5));
}

TEST_CASE("propensity_eval") {
    SECTION("linear decay 2.0 * X at X = 3") {
        ReactionNetwork net = parse_model("species X = 0\nreaction d: X -> 0 @ 2.0 * X\n");
        CHECK(propensity_eval(net, 0, {3}) == Catch::Approx(6.0));
    }
    SECTION("SIR infection at the initial state") {
        ReactionNetwork net = parse_model(kSirText);
        CHECK(propensity_eval(net, 0, {40, 10, 0}) == Catch::Approx(40.0));
    }
    SECTION("bilinear viral packaging reaction vanishes at X_G = 0") {
        ReactionNetwork net = builtin_model("viral");
        CHECK(propensity_eval(net, 5, {10, 0, 500, 0}) == 0.0);
    }
    SECTION("negative value raises a propensity violation") {
        ReactionNetwork net = parse_model("species X = 0\nreaction r: X -> 0 @ 1 - X\n");
        CHECK(propensity_eval(net, 0, {1}) == 0.0);
        CHECK_THROWS_AS(propensity_eval(net, 0, {5}), PropensityViolation);
    }
}

TEST_CASE("mass_action_propensity uses the falling-factorial convention") {
    SECTION("A + B -> C") {
        Polynomial p = mass_action_propensity({1, 1, 0}, 1.0);
        CHECK(p == Polynomial::variable(0) * Polynomial::variable(1));
    }
    SECTION("2A -> 0 counts ordered reactant pairs") {
        Polynomial p = mass_action_propensity({2}, 1.0);
        std::vector<double> x{4.0};
        CHECK(p.evaluate(x) == Catch::Approx(12.0)); // 4 * 3
    }
    SECTION("0 -> A is a constant") {
        Polynomial p = mass_action_propensity({0}, 5.0);
        CHECK(p == Polynomial(5.0));
    }
}

TEST_CASE("builtin models match the published tables") {
    SECTION("lacz") {
        ReactionNetwork net = builtin_model("lacz");
        CHECK(net.reactions.size() == 11);
        CHECK(net.parameters.at("k_10") == Catch::Approx(6.42e-5));
        int lacz = net.species_index("X_LacZ");
        REQUIRE(lacz >= 0);
        CHECK(net.reactions[9].propensity.coefficient({{lacz, 1}}) == Catch::Approx(6.42e-5));
    }
    SECTION("genosc") {
        ReactionNetwork net = builtin_model("genosc");
        CHECK(net.species_count() == 9);
        CHECK(net.reactions.size() == 16);
        CHECK(net.parameters.at("k_13") == 2.0);
        // initial state: X1 = X3 = 10, everything else 1
        CHECK(net.initial_state() == StateVec{10, 1, 10, 1, 1, 1, 1, 1, 1});
    }
    SECTION("viral") {
        ReactionNetwork net = builtin_model("viral");
        CHECK(net.reactions.size() == 6);
        CHECK(net.parameters.at("k_6") == Catch::Approx(7.5e-6));
        CHECK(net.initial_state() == StateVec{10, 0, 0, 0});
    }
    SECTION("sir initial state") {
        CHECK(builtin_model("sir").initial_state() == StateVec{40, 10, 0});
    }
    SECTION("unknown name") {
        CHECK_THROWS_AS(builtin_model("nope"), ModelError);
    }
}

TEST_CASE("stoichiometry_matrix") {
    SECTION("SIR columns are the change vectors") {
        Eigen::MatrixXi m = stoichiometry_matrix(parse_model(kSirText));
        REQUIRE(m.rows() == 3);
        REQUIRE(m.cols() == 2);
        CHECK(m(0, 0) == -1);
        CHECK(m(1, 0) == 1);
        CHECK(m(2, 0) == 0);
        CHECK(m(0, 1) == 0);
        CHECK(m(1, 1) == -1);
        CHECK(m(2, 1) == 1);
    }
    SECTION("network without reactions gives a 0-column matrix") {
        Eigen::MatrixXi m = stoichiometry_matrix(parse_model("species X = 1\n"));
        CHECK(m.rows() == 1);
        CHECK(m.cols() == 0);
    }
    SECTION("lacz has 11 columns with the table stoichiometry") {
        ReactionNetwork net = builtin_model("lacz");
        Eigen::MatrixXi m = stoichiometry_matrix(net);
        REQUIRE(m.cols() == 11);
        // r4: TrLacZ1 -> RbsLacZ + PLac + TrLacZ2
        CHECK(m(net.species_index("X_TrLacZ1"), 3) == -1);
        CHECK(m(net.species_index("X_RbsLacZ"), 3) == 1);
        CHECK(m(net.species_index("X_PLac"), 3) == 1);
        CHECK(m(net.species_index("X_TrLacZ2"), 3) == 1);
        // r6 consumes a ribosome, r7 releases it, r8 does not
        CHECK(m(net.species_index("X_Ribosome"), 5) == -1);
        CHECK(m(net.species_index("X_Ribosome"), 6) == 1);
        CHECK(m(net.species_index("X_Ribosome"), 7) == 0);
    }
}

TEST_CASE("SIR conserves the total population") {
    Eigen::MatrixXi m = stoichiometry_matrix(builtin_model("sir"));
    for (Eigen::Index r = 0; r < m.cols(); ++r) CHECK(m.col(r).sum() == 0);
}

TEST_CASE("render/parse round-trips every bundled model") {
    for (const auto& info : builtin_models()) {
        ReactionNetwork net = builtin_model(info.name);
        ReactionNetwork reparsed = parse_model(render(net));
        INFO("model " << info.name);
        CHECK(net == reparsed);
    }
}
