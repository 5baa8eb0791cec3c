#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mcsbi/adf.hpp"
#include "mcsbi/gaussian.hpp"
#include "oracles.hpp"

using namespace mcsbi;

namespace {

Polytope make_polytope(std::vector<std::pair<Eigen::VectorXd, double>> rows) {
    Polytope p;
    for (auto& [a, b] : rows) p.rows.push_back({std::move(a), b});
    p.canonicalize();
    return p;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

SignedRegion single(const Polytope& p) {
    SignedRegion r;
    r.parts.emplace_back(1, p);
    return r;
}

} // namespace

TEST_CASE("scalar normal functions") {
    CHECK(norm_cdf(0.0) == Catch::Approx(0.5));
    CHECK(norm_pdf(0.0) == Catch::Approx(0.3989422804014327));
    for (double p : {1e-12, 0.01, 0.3, 0.5, 0.77, 0.999, 1.0 - 1e-12})
        CHECK(norm_cdf(norm_quantile(p)) == Catch::Approx(p).epsilon(1e-12));
}

TEST_CASE("bivariate normal cdf") {
    SECTION("independent quarters") {
        CHECK(bvn_cdf(0.0, 0.0, 0.0) == Catch::Approx(0.25).margin(1e-14));
    }
    SECTION("correlated at the origin matches the arcsine formula") {
        for (double rho : {0.5, -0.5, 0.9, -0.97, 0.999}) {
            double expect = 0.25 + std::asin(rho) / (2.0 * M_PI);
            CHECK(bvn_cdf(0.0, 0.0, rho) == Catch::Approx(expect).margin(1e-10));
        }
    }
    SECTION("agrees with density quadrature across offsets and correlations") {
        for (double rho : {0.0, 0.3, -0.6, 0.85, -0.95})
            for (double b1 : {-1.5, 0.2, 2.0})
                for (double b2 : {-0.7, 1.1}) {
                    double expect = oracles::bvn_by_density_quadrature(b1, b2, rho);
                    INFO("rho=" << rho << " b1=" << b1 << " b2=" << b2);
                    CHECK(bvn_cdf(b1, b2, rho) == Catch::Approx(expect).margin(2e-9));
                }
    }
    SECTION("degenerate correlations") {
        CHECK(bvn_cdf(0.3, 0.8, 1.0) == Catch::Approx(norm_cdf(0.3)));
        CHECK(bvn_cdf(0.3, 0.8, -1.0) ==
              Catch::Approx(std::max(0.0, norm_cdf(0.3) + norm_cdf(0.8) - 1.0)));
    }
}

TEST_CASE("mvn_cdf") {
    SECTION("one dimension at the mean") {
        GaussianDist d{vec({0.0}), Eigen::MatrixXd::Identity(1, 1)};
        CHECK(mvn_cdf(vec({0.0}), d) == Catch::Approx(0.5));
    }
    SECTION("two independent dimensions") {
        GaussianDist d{vec({0.0, 0.0}), Eigen::MatrixXd::Identity(2, 2)};
        CHECK(mvn_cdf(vec({0.0, 0.0}), d) == Catch::Approx(0.25).margin(1e-12));
    }
    SECTION("two correlated dimensions") {
        Eigen::MatrixXd s(2, 2);
        s << 1.0, 0.5, 0.5, 1.0;
        GaussianDist d{vec({0.0, 0.0}), s};
        CHECK(mvn_cdf(vec({0.0, 0.0}), d) == Catch::Approx(1.0 / 3.0).margin(1e-9));
    }
    SECTION("three independent dimensions") {
        GaussianDist d{vec({0.0, 0.0, 0.0}), Eigen::MatrixXd::Identity(3, 3)};
        GaussianConfig cfg;
        cfg.mvn_tol = 1e-7;
        CHECK(mvn_cdf(vec({0.0, 0.0, 0.0}), d, cfg) == Catch::Approx(0.125).margin(5e-7));
    }
    SECTION("three dimensions with block structure reduce to products") {
        Eigen::MatrixXd s = Eigen::MatrixXd::Identity(3, 3);
        s(0, 1) = s(1, 0) = 0.6;
        GaussianDist d{vec({0.1, -0.2, 0.4}), s};
        GaussianConfig cfg;
        cfg.mvn_tol = 1e-8;
        double expect = bvn_cdf(0.5 - 0.1, 0.3 + 0.2, 0.6) * norm_cdf(1.0 - 0.4);
        CHECK(mvn_cdf(vec({0.5, 0.3, 1.0}), d, cfg) == Catch::Approx(expect).margin(5e-8));
    }
    SECTION("dimension limit") {
        GaussianDist d{Eigen::VectorXd::Zero(9), Eigen::MatrixXd::Identity(9, 9)};
        CHECK_THROWS_AS(mvn_cdf(Eigen::VectorXd::Zero(9), d), NumericError);
    }
    SECTION("non-PSD covariance is rejected") {
        Eigen::MatrixXd s(3, 3);
        s << 1, 0.9, 0.0, 0.9, 1, 0.9, 0.0, 0.9, 1; // indefinite
        GaussianDist d{vec({0.0, 0.0, 0.0}), s};
        CHECK_THROWS_AS(mvn_cdf(vec({0.0, 0.0, 0.0}), d), NumericError);
    }
}

TEST_CASE("region_prob") {
    SECTION("whole space") {
        GaussianDist d{vec({1.0, 2.0}), Eigen::MatrixXd::Identity(2, 2)};
        CHECK(region_prob(d, single(Polytope::whole_space(2))) == Catch::Approx(1.0));
    }
    SECTION("half line") {
        GaussianDist d{vec({0.0}), Eigen::MatrixXd::Identity(1, 1)};
        CHECK(region_prob(d, single(make_polytope({{vec({1.0}), 0.0}}))) == Catch::Approx(0.5));
    }
    SECTION("projected difference of species matches the 1D formula") {
        Eigen::MatrixXd s(3, 3);
        s << 4.0, 0.5, 0.2, 0.5, 3.0, -0.4, 0.2, -0.4, 2.0;
        GaussianDist d{vec({20.0, 6.0, 8.0}), s};
        // X_I - X_R <= -0.5 with (I, R) = components 1, 2
        Polytope p = make_polytope({{vec({0.0, 1.0, -1.0}), -0.5}});
        double proj_mean = d.mu[1] - d.mu[2];
        double proj_var = s(1, 1) + s(2, 2) - 2.0 * s(1, 2);
        double expect = norm_cdf((-0.5 - proj_mean) / std::sqrt(proj_var));
        double got = region_prob(d, single(p));
        CHECK(got == Catch::Approx(expect).margin(1e-12));

        auto [mc, se] = oracles::region_prob_sampling(d, single(p), 1000000, 1234);
        CHECK(std::abs(got - mc) <= 3.0 * se);
    }
    SECTION("interval on one direction stays deterministic") {
        GaussianDist d{vec({0.3}), Eigen::MatrixXd::Identity(1, 1)};
        Polytope p = make_polytope({{vec({1.0}), 0.5}, {vec({-1.0}), 0.5}});
        CHECK(region_prob(d, single(p)) ==
              Catch::Approx(norm_cdf(0.2) - norm_cdf(-0.8)).margin(1e-12));
    }
    SECTION("empty-by-contradiction polytope has zero mass") {
        GaussianDist d{vec({0.0}), Eigen::MatrixXd::Identity(1, 1)};
        Polytope p = make_polytope({{vec({1.0}), -2.0}, {vec({-1.0}), -1.0}}); // x<=-2 and x>=1
        CHECK(region_prob(d, single(p)) == 0.0);
    }
}

TEST_CASE("psd_repair") {
    SECTION("identity unchanged") {
        Eigen::MatrixXd i3 = Eigen::MatrixXd::Identity(3, 3);
        CHECK((psd_repair(i3) - i3).norm() == 0.0);
    }
    SECTION("slightly negative eigenvalue is floored") {
        Eigen::MatrixXd m = Eigen::Vector2d(1.0, -1e-12).asDiagonal();
        Eigen::MatrixXd r = psd_repair(m);
        CHECK(r(0, 0) == Catch::Approx(1.0));
        CHECK(r(1, 1) == Catch::Approx(1e-10));
    }
    SECTION("idempotent on a random PSD matrix") {
        std::mt19937_64 rng(5);
        std::normal_distribution<double> normal;
        Eigen::MatrixXd a(4, 4);
        for (Eigen::Index i = 0; i < 4; ++i)
            for (Eigen::Index j = 0; j < 4; ++j) a(i, j) = normal(rng);
        Eigen::MatrixXd psd = a * a.transpose() + Eigen::MatrixXd::Identity(4, 4);
        CHECK((psd_repair(psd) - psd).norm() < 1e-12);
        Eigen::MatrixXd once = psd_repair(psd - 1.5 * Eigen::MatrixXd::Identity(4, 4));
        Eigen::MatrixXd twice = psd_repair(once);
        CHECK((twice - once).norm() < 1e-12);
    }
}

TEST_CASE("cdf_grad_mu") {
    GaussianConfig cfg;
    cfg.mvn_tol = 1e-9;

    SECTION("half line at the mode") {
        GaussianDist d{vec({0.0}), Eigen::MatrixXd::Identity(1, 1)};
        Eigen::VectorXd g = cdf_grad_mu(d, make_polytope({{vec({1.0}), 0.0}}), cfg);
        CHECK(g[0] == Catch::Approx(-0.3989422804014327).margin(1e-12));
    }
    SECTION("whole space has zero gradient") {
        GaussianDist d{vec({0.0, 0.0}), Eigen::MatrixXd::Identity(2, 2)};
        CHECK(cdf_grad_mu(d, Polytope::whole_space(2), cfg).norm() == 0.0);
    }
    SECTION("correlated 2D case matches finite differences") {
        Eigen::MatrixXd s(2, 2);
        s << 2.0, 0.7, 0.7, 1.5;
        GaussianDist d{vec({0.3, -0.2}), s};
        Polytope p = make_polytope({{vec({1.0, 0.4}), 0.6}, {vec({-0.3, 1.0}), 0.9}});
        Eigen::VectorXd g = cdf_grad_mu(d, p, cfg);
        auto f = [&](const Eigen::VectorXd& mu) {
            return polytope_prob({mu, s}, p, cfg);
        };
        Eigen::VectorXd fd = oracles::fd_gradient(f, d.mu, 1e-5);
        CHECK((g - fd).norm() <= 1e-4 * std::max(1e-3, fd.norm()));
    }
    SECTION("two-sided direction combines both corners") {
        GaussianDist d{vec({0.0}), Eigen::MatrixXd::Identity(1, 1)};
        Polytope p = make_polytope({{vec({1.0}), 0.5}, {vec({-1.0}), 0.5}});
        // symmetric interval at the mode: derivative cancels
        CHECK(cdf_grad_mu(d, p, cfg)[0] == Catch::Approx(0.0).margin(1e-14));
        GaussianDist d2{vec({0.2}), Eigen::MatrixXd::Identity(1, 1)};
        double expect = -norm_pdf(0.3) + norm_pdf(-0.7);
        CHECK(cdf_grad_mu(d2, p, cfg)[0] == Catch::Approx(expect).margin(1e-12));
    }
}

TEST_CASE("cdf_hess_mu") {
    GaussianConfig cfg;
    cfg.mvn_tol = 1e-9;

    SECTION("half line at the mode has zero curvature") {
        GaussianDist d{vec({0.0}), Eigen::MatrixXd::Identity(1, 1)};
        Eigen::MatrixXd h = cdf_hess_mu(d, make_polytope({{vec({1.0}), 0.0}}), cfg);
        CHECK(h(0, 0) == Catch::Approx(0.0).margin(1e-8));
    }
    SECTION("independent standard quadrant has mixed entry 1/(2 pi)") {
        GaussianDist d{vec({0.0, 0.0}), Eigen::MatrixXd::Identity(2, 2)};
        Polytope p = make_polytope({{vec({1.0, 0.0}), 0.0}, {vec({0.0, 1.0}), 0.0}});
        Eigen::MatrixXd h = cdf_hess_mu(d, p, cfg);
        CHECK(h(0, 1) == Catch::Approx(1.0 / (2.0 * M_PI)).margin(1e-10));
    }
    SECTION("whole space has zero Hessian") {
        GaussianDist d{vec({0.0, 0.0}), Eigen::MatrixXd::Identity(2, 2)};
        CHECK(cdf_hess_mu(d, Polytope::whole_space(2), cfg).norm() == 0.0);
    }
    SECTION("matches differenced analytic gradients on a correlated case") {
        Eigen::MatrixXd s(2, 2);
        s << 1.2, -0.4, -0.4, 0.9;
        GaussianDist d{vec({-0.1, 0.4}), s};
        Polytope p = make_polytope({{vec({1.0, 0.0}), 0.8}, {vec({0.2, -1.0}), 0.3}});
        Eigen::MatrixXd h = cdf_hess_mu(d, p, cfg);
        auto g = [&](const Eigen::VectorXd& mu) {
            return cdf_grad_mu({mu, s}, p, cfg);
        };
        Eigen::MatrixXd fd = oracles::fd_jacobian(g, d.mu, 1e-5);
        CHECK((h - fd).norm() <= 1e-3 * std::max(1e-3, fd.norm()));
    }
}

TEST_CASE("adf_update") {
    GaussianConfig cfg;
    cfg.mvn_tol = 1e-9;

    SECTION("half-line truncation of a standard normal (closed form)") {
        GaussianDist prior{vec({0.0}), Eigen::MatrixXd::Identity(1, 1)};
        AdfResult r = adf_update(prior, single(make_polytope({{vec({1.0}), 0.0}})), cfg);
        CHECK(r.evidence == Catch::Approx(0.5).margin(1e-12));
        CHECK(r.posterior.mu[0] == Catch::Approx(-0.7978845608028654).margin(1e-6));
        CHECK(r.posterior.sigma(0, 0) == Catch::Approx(0.36338022763241866).margin(1e-6));
    }
    SECTION("whole space leaves the prior untouched") {
        Eigen::MatrixXd s(2, 2);
        s << 2.0, 0.3, 0.3, 1.0;
        GaussianDist prior{vec({1.0, -2.0}), s};
        AdfResult r = adf_update(prior, single(Polytope::whole_space(2)), cfg);
        CHECK(r.evidence == Catch::Approx(1.0));
        CHECK((r.posterior.mu - prior.mu).norm() < 1e-12);
        CHECK((r.posterior.sigma - prior.sigma).norm() < 1e-10);
    }
    SECTION("constraint on x leaves an independent y marginal untouched") {
        GaussianDist prior{vec({0.0, 0.0}), Eigen::MatrixXd::Identity(2, 2)};
        AdfResult r = adf_update(prior, single(make_polytope({{vec({1.0, 0.0}), 0.0}})), cfg);
        CHECK(r.evidence == Catch::Approx(0.5).margin(1e-9));
        CHECK(r.posterior.mu[0] == Catch::Approx(-0.7978845608).margin(1e-6));
        CHECK(r.posterior.mu[1] == Catch::Approx(0.0).margin(1e-9));
        CHECK(r.posterior.sigma(1, 1) == Catch::Approx(1.0).margin(1e-7));
        CHECK(r.posterior.sigma(0, 1) == Catch::Approx(0.0).margin(1e-7));
    }
    SECTION("posterior matches quadrature truncated moments (2D correlated)") {
        Eigen::MatrixXd s(2, 2);
        s << 1.5, 0.6, 0.6, 2.0;
        GaussianDist prior{vec({0.4, -0.3}), s};
        Eigen::VectorXd lower = vec({-1.2, -kInf});
        Eigen::VectorXd upper = vec({0.9, 0.5});
        Polytope p = make_polytope({{vec({1.0, 0.0}), 0.9},
                                    {vec({-1.0, 0.0}), 1.2},
                                    {vec({0.0, 1.0}), 0.5}});
        AdfResult r = adf_update(prior, single(p), cfg);
        auto truth = oracles::truncated_moments_quadrature(prior, lower, upper);
        CHECK(r.evidence == Catch::Approx(truth.mass).epsilon(1e-7));
        CHECK((r.posterior.mu - truth.mean).norm() <= 1e-5 * std::max(1.0, truth.mean.norm()));
        CHECK((r.posterior.sigma - truth.cov).norm() <= 1e-5 * std::max(1.0, truth.cov.norm()));
    }
    SECTION("evidence is invariant under constraint row permutations") {
        Eigen::MatrixXd s(3, 3);
        s << 1.0, 0.2, 0.1, 0.2, 1.3, -0.3, 0.1, -0.3, 0.8;
        GaussianDist prior{vec({0.1, 0.2, -0.1}), s};
        std::vector<HalfSpace> rows = {{vec({1.0, 0.0, 0.0}), 0.4},
                                       {vec({0.0, 1.0, 0.5}), 0.7},
                                       {vec({0.3, -1.0, 0.0}), 0.9}};
        std::vector<int> order{0, 1, 2};
        double first = -1.0;
        do {
            Polytope p;
            for (int i : order) p.rows.push_back(rows[static_cast<std::size_t>(i)]);
            p.canonicalize();
            AdfResult r = adf_update(prior, single(p), cfg);
            if (first < 0)
                first = r.evidence;
            else
                CHECK(r.evidence == first); // bitwise: same canonical problem
        } while (std::next_permutation(order.begin(), order.end()));
    }
    SECTION("vanishing evidence is an error (engine handles the floor)") {
        GaussianDist prior{vec({0.0}), Eigen::MatrixXd::Identity(1, 1)};
        Polytope p = make_polytope({{vec({1.0}), -2.0}, {vec({-1.0}), -1.0}});
        CHECK_THROWS_AS(adf_update(prior, single(p), cfg), NumericError);
    }
}

TEST_CASE("evidence additivity: region plus complement is one") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 25; ++trial) {
        Eigen::MatrixXd a(2, 2);
        for (Eigen::Index i = 0; i < 2; ++i)
            for (Eigen::Index j = 0; j < 2; ++j) a(i, j) = normal(rng);
        GaussianDist d{vec({normal(rng), normal(rng)}),
                       a * a.transpose() + 0.4 * Eigen::MatrixXd::Identity(2, 2)};
        Eigen::VectorXd dir = vec({normal(rng), normal(rng)});
        if (dir.norm() < 0.3) continue;
        Polytope p = make_polytope({{dir, normal(rng)}, {vec({1.0, 0.0}), 2.0}});
        SignedRegion region = single(p);
        SignedRegion complement;
        complement.parts.emplace_back(1, Polytope::whole_space(2));
        complement.parts.emplace_back(-1, p);
        double total = region_prob(d, region) + region_prob(d, complement);
        CHECK(total == Catch::Approx(1.0).margin(1e-6));
    }
}

TEST_CASE("randomized derivative checks in dimensions 1 to 3") {
    std::mt19937_64 rng(424242);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    // Box probabilities share their quasi-random stream across nearby means,
    // so finite differences stay accurate at moderate tolerances.
    GaussianConfig cfg;
    cfg.mvn_tol = 4e-6;

    int done = 0;
    while (done < 15) {
        int dim = 1 + static_cast<int>(uni(rng) * 3.0);
        if (dim > 3) dim = 3;
        Eigen::MatrixXd a(dim, dim);
        for (Eigen::Index i = 0; i < dim; ++i)
            for (Eigen::Index j = 0; j < dim; ++j) a(i, j) = normal(rng);
        Eigen::MatrixXd s = a * a.transpose() + 0.3 * Eigen::MatrixXd::Identity(dim, dim);
        Eigen::VectorXd mu(dim);
        for (Eigen::Index i = 0; i < dim; ++i) mu[i] = normal(rng);
        GaussianDist d{mu, s};

        int n_rows = 1 + static_cast<int>(uni(rng) * 3.0);
        Polytope p;
        for (int r = 0; r < std::min(n_rows, 3); ++r) {
            Eigen::VectorXd dir(dim);
            for (Eigen::Index i = 0; i < dim; ++i) dir[i] = normal(rng);
            if (dir.cwiseAbs().maxCoeff() < 0.2) dir[0] += 1.0;
            double b = dir.dot(mu) + (0.2 + uni(rng)) * std::sqrt((dir.transpose() * s * dir)(0));
            p.rows.push_back({dir, b});
        }
        p.canonicalize();
        double z = polytope_prob(d, p, cfg);
        if (z < 1e-3) continue; // well-conditioned cases only
        ++done;

        Eigen::VectorXd g = cdf_grad_mu(d, p, cfg);
        auto f = [&](const Eigen::VectorXd& m) { return polytope_prob({m, s}, p, cfg); };
        Eigen::VectorXd gfd = oracles::fd_gradient(f, mu, 1e-5);
        INFO("dim=" << dim << " rows=" << p.rows.size() << " z=" << z);
        CHECK((g - gfd).norm() <= 1e-4 * std::max(0.05, gfd.norm()));

        Eigen::MatrixXd h = cdf_hess_mu(d, p, cfg);
        auto gf = [&](const Eigen::VectorXd& m) { return cdf_grad_mu({m, s}, p, cfg); };
        Eigen::MatrixXd hfd = oracles::fd_jacobian(gf, mu, 1e-5);
        CHECK((h - hfd).norm() <= 1e-3 * std::max(0.05, hfd.norm()));
    }
}
