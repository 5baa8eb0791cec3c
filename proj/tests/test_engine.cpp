#include <catch2/catch_amalgamated.hpp>

#include "mcsbi/builtin_models.hpp"
#include "mcsbi/cme.hpp"
#include "mcsbi/engine.hpp"
#include "mcsbi/property_parser.hpp"

using namespace mcsbi;

namespace {

FptResult run(const ReactionNetwork& net, const std::string& prop, const Grid& grid,
              const EngineConfig& cfg = {}) {
    return check_path_formula(net, parse_property(prop, net), grid, cfg);
}

} // namespace

TEST_CASE("a tautological target is satisfied immediately") {
    ReactionNetwork net = builtin_model("sir");
    FptResult r = run(net, "P=? [ (X_I < 30) U[0,1] tt ]", Grid(1.0, 10));
    CHECK(r.pi[0] == Catch::Approx(1.0));
    for (double c : r.cdf) CHECK(c == Catch::Approx(1.0));
    CHECK(r.absorbed);
}

TEST_CASE("a conservation-blocked target stays near zero") {
    ReactionNetwork net = builtin_model("sir"); // total population 50
    FptResult r = run(net, "P=? [ (X_I < 30) U[0,10] (X_I > 100) ]", Grid(10.0, 50));
    for (double c : r.cdf) CHECK(c <= 1e-6);
}

TEST_CASE("per-step bookkeeping identity") {
    ReactionNetwork net = builtin_model("sir");
    PathFormula f = rewrite_to_until(parse_property("P=? [ (X_I < 30) U[0,10] (X_I = 0) ]", net));
    RegionSet regions = compile_regions(f, net);
    EngineConfig cfg;
    FptResult r = check_until(net, f, Grid(10.0, 50), cfg);

    for (std::size_t i = 0; i < r.times.size(); ++i) {
        if (r.undetermined[i] <= cfg.evidence_floor) break;
        GaussianDist prior{r.moments[i].mu, r.moments[i].sigma};
        double target = region_prob(prior, regions.target, cfg.gaussian);
        double undet = region_prob(prior, regions.undetermined, cfg.gaussian);
        double false_mass = region_prob(prior, regions.false_region, cfg.gaussian);
        INFO("step " << i);
        REQUIRE(r.pi[i] / r.undetermined[i] + undet + false_mass == Catch::Approx(1.0).margin(1e-6));
        REQUIRE(r.pi[i] / r.undetermined[i] == Catch::Approx(target).margin(1e-9));
        REQUIRE(r.evidence[i] == Catch::Approx(undet).margin(1e-9));
    }
}

TEST_CASE("result invariants on the SIR property") {
    ReactionNetwork net = builtin_model("sir");
    FptResult r = run(net, "P=? [ (X_I < 30) U[0,10] (X_I = 0) ]", Grid(10.0, 100));

    SECTION("cdf is monotone within [0, 1]") {
        for (std::size_t i = 0; i < r.cdf.size(); ++i) {
            REQUIRE(r.cdf[i] >= (i ? r.cdf[i - 1] : 0.0));
            REQUIRE(r.cdf[i] <= 1.0 + 1e-9);
        }
    }
    SECTION("cdf + remaining undetermined mass stays below one") {
        for (std::size_t i = 0; i + 1 < r.cdf.size(); ++i)
            REQUIRE(r.cdf[i] + r.undetermined[i + 1] <= 1.0 + 1e-6);
    }
    SECTION("absorb_cdf is the complement of the running product") {
        for (std::size_t i = 0; i + 1 < r.cdf.size(); ++i)
            REQUIRE(r.absorb_cdf[i] == Catch::Approx(1.0 - r.undetermined[i + 1]).margin(1e-9));
    }
    SECTION("the cdf is close to the exact oracle") {
        RegionSet regions =
            compile_regions(rewrite_to_until(parse_property("P=? [ (X_I < 30) U[0,10] (X_I = 0) ]", net)), net);
        ExactCdfResult exact = exact_cme_cdf(net, regions, r.times);
        double sup = 0.0;
        for (std::size_t i = 0; i < r.times.size(); ++i)
            sup = std::max(sup, std::abs(r.cdf[i] - exact.cdf[i]));
        INFO("sup-norm distance " << sup);
        CHECK(sup <= 0.05);
    }
}

TEST_CASE("eventually properties: cdf and absorption coincide") {
    ReactionNetwork net = builtin_model("sir");
    FptResult r = run(net, "P=? [ F[0,10] (X_I = 0) ]", Grid(10.0, 50));
    for (std::size_t i = 0; i + 1 < r.cdf.size(); ++i) {
        if (r.absorbed && r.undetermined[i + 1] == 0.0) break;
        REQUIRE(r.cdf[i] == Catch::Approx(1.0 - r.undetermined[i + 1]).margin(1e-9));
        REQUIRE(r.cdf[i] == Catch::Approx(r.absorb_cdf[i]).margin(1e-9));
    }
}

TEST_CASE("eventually equals its explicit until form exactly") {
    ReactionNetwork net = builtin_model("sir");
    FptResult ev = run(net, "P=? [ F[0,5] (X_I = 0) ]", Grid(5.0, 25));
    FptResult until = run(net, "P=? [ tt U[0,5] (X_I = 0) ]", Grid(5.0, 25));
    CHECK(ev.cdf == until.cdf);
    CHECK(ev.pi == until.pi);
    CHECK(ev.evidence == until.evidence);
}

TEST_CASE("globally properties report the satisfaction trace") {
    ReactionNetwork net = builtin_model("sir");

    SECTION("globally tt is certain") {
        FptResult r = run(net, "P=? [ G[0,2] tt ]", Grid(2.0, 10));
        REQUIRE(r.globally_satisfaction.size() == r.cdf.size());
        for (double p : r.globally_satisfaction) CHECK(p == Catch::Approx(1.0).margin(1e-9));
    }
    SECTION("an untouchable threshold keeps the safety probability at one") {
        FptResult r = run(net, "P=? [ G[0,2] (X_I < 1000) ]", Grid(2.0, 10));
        REQUIRE(!r.globally_satisfaction.empty());
        for (std::size_t i = 0; i < r.cdf.size(); ++i) {
            CHECK(r.globally_satisfaction[i] == Catch::Approx(1.0 - r.cdf[i]));
            CHECK(r.globally_satisfaction[i] >= 1.0 - 1e-6);
        }
    }
    SECTION("globally complements the reach probability of the negation") {
        FptResult g = run(net, "P=? [ G[0,4] (X_I < 25) ]", Grid(4.0, 40));
        FptResult reach = run(net, "P=? [ F[0,4] (X_I >= 25) ]", Grid(4.0, 40));
        REQUIRE(!g.globally_satisfaction.empty());
        for (std::size_t i = 0; i < g.cdf.size(); ++i)
            CHECK(g.globally_satisfaction[i] == Catch::Approx(1.0 - reach.cdf[i]).margin(1e-9));
    }
}

TEST_CASE("grid refinement converges on the SIR property") {
    ReactionNetwork net = builtin_model("sir");
    std::vector<double> finals;
    for (int n : {25, 50, 100, 200})
        finals.push_back(run(net, "P=? [ (X_I < 30) U[0,10] (X_I = 0) ]", Grid(10.0, n)).cdf.back());
    double prev = 1e9;
    for (std::size_t i = 0; i + 1 < finals.size(); ++i) {
        double diff = std::abs(finals[i + 1] - finals[i]);
        INFO("N step " << i << ": |delta| = " << diff);
        REQUIRE(diff < prev);
        prev = diff;
    }
}

TEST_CASE("identical runs are bitwise identical") {
    ReactionNetwork net = builtin_model("sir");
    FptResult a = run(net, "P=? [ (X_I < 30) U[0,10] (X_I = 0) ]", Grid(10.0, 30));
    FptResult b = run(net, "P=? [ (X_I < 30) U[0,10] (X_I = 0) ]", Grid(10.0, 30));
    CHECK(a.cdf == b.cdf);
    CHECK(a.pi == b.pi);
    CHECK(a.evidence == b.evidence);
}

TEST_CASE("early absorption freezes the remaining steps") {
    // pure death reaches the target fast; evidence collapses once extinct
    ReactionNetwork net = parse_model(
        "param d = 50\nspecies X = 3\nreaction death: X -> 0 @ d * X\n");
    FptResult r = run(net, "P=? [ F[0,10] (X = 0) ]", Grid(10.0, 20));
    CHECK(r.absorbed);
    CHECK(r.cdf.back() == Catch::Approx(1.0).margin(1e-3));
    // after the freeze the cdf is constant
    bool frozen_seen = false;
    for (std::size_t i = 1; i < r.cdf.size(); ++i) {
        if (r.evidence[i] == 0.0 && r.pi[i] == 0.0) frozen_seen = true;
        if (frozen_seen) REQUIRE(r.cdf[i] == r.cdf[i - 1]);
    }
    CHECK(frozen_seen);
}
