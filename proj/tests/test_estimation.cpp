#include <doctest.h>

#include <regimes/estimation.hpp>
#include <regimes/rng.hpp>
#include <regimes/simulate.hpp>

#include <cmath>
#include <random>

using namespace regimes;

namespace {

Parameters two_regime_truth() {
    Parameters p = Parameters::make(2, VarianceFamily::common);
    p.mu << -1.0, 1.0;
    p.beta = 0.5;
    p.sigma2[0] = 1.0;
    p.transition << 0.7, 0.3, 0.3, 0.7;
    return p;
}

Parameters random_params(int m, bool switching, Rng& rng) {
    std::uniform_real_distribution<double> u(-2.0, 2.0), s(0.5, 1.5), b(-0.7, 0.7);
    std::gamma_distribution<double> g(2.0, 1.0);
    Parameters p = Parameters::make(m, switching ? VarianceFamily::switching : VarianceFamily::common);
    for (int j = 0; j < m; ++j) p.mu[j] = u(rng);
    p.beta = b(rng);
    for (Eigen::Index j = 0; j < p.sigma2.size(); ++j) p.sigma2[j] = s(rng) * s(rng);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) p.transition(i, j) = g(rng) + (i == j ? 2.0 : 0.0);
        p.transition.row(i) /= p.transition.row(i).sum();
    }
    return p;
}

// Golden-section maximizer of a unimodal function on [a, b].
template <class F>
double golden_max(F f, double a, double b) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - r * (b - a), d = a + r * (b - a);
    for (int i = 0; i < 200; ++i) {
        if (f(c) > f(d)) b = d;
        else a = c;
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    return 0.5 * (a + b);
}

}  // namespace

TEST_CASE("penalized variance update") {
    CHECK(penalized_variance_update(8.0, 10.0, 1.0, 1.0) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
    auto objective = [](double v) { return -0.5 * (10.0 * std::log(v) + 8.0 / v) - (1.0 / v + std::log(v)); };
    CHECK(std::abs(golden_max(objective, 0.01, 10.0) - 5.0 / 6.0) < 1e-7);
    CHECK(penalized_variance_update(8.0, 10.0, 1.0, 0.0) == doctest::Approx(0.8));
}

TEST_CASE("constrained transition row") {
    Vector c(3);
    c << 10.0, 0.0, 0.0;
    Vector p = constrained_transition_row(c, 0.05);
    CHECK(p[0] == doctest::Approx(0.9));
    CHECK(p[1] == doctest::Approx(0.05));
    CHECK(p[2] == doctest::Approx(0.05));
    c << 1.0, 1.0, 2.0;
    p = constrained_transition_row(c, 0.05);
    CHECK(p[2] == doctest::Approx(0.5));
    CHECK(constrained_transition_row(Vector::Zero(4), 0.1).isApprox(Vector::Constant(4, 0.25)));

    // KKT conditions: free entries share c_j / p_j, clipped ones have c_j / eps below it.
    Rng rng = make_rng(5);
    std::exponential_distribution<double> e(1.0);
    for (int rep = 0; rep < 500; ++rep) {
        const int m = 2 + rep % 4;
        const double eps = 0.02 + 0.03 * (rep % 5);
        Vector counts(m);
        for (int j = 0; j < m; ++j) counts[j] = rep % 3 == 0 ? e(rng) * e(rng) * e(rng) : e(rng);
        const Vector q = constrained_transition_row(counts, eps);
        CHECK(std::abs(q.sum() - 1.0) < 1e-12);
        CHECK(q.minCoeff() >= eps - 1e-15);
        double lambda = -1.0;
        for (int j = 0; j < m; ++j)
            if (q[j] > eps + 1e-12) lambda = counts[j] / q[j];
        REQUIRE(lambda > 0.0);
        for (int j = 0; j < m; ++j) {
            if (q[j] > eps + 1e-12) CHECK(std::abs(counts[j] / q[j] - lambda) < 1e-9 * lambda);
            else CHECK(counts[j] / eps <= lambda * (1.0 + 1e-9));
        }
    }
}

TEST_CASE("one-regime fit") {
    SUBCASE("white noise") {
        Rng rng = make_rng(9);
        std::normal_distribution<double> z(0.0, 1.0);
        std::vector<double> y(5001);
        for (auto& v : y) v = z(rng);
        const auto f = fit_one_regime(y);
        CHECK(std::abs(f.params.beta) < 3.0 / std::sqrt(5000.0));
        CHECK(std::abs(f.params.mu[0]) < 3.0 / std::sqrt(5000.0));
        CHECK(f.loglik == doctest::Approx(loglik(y, f.params)).epsilon(1e-12));
        CHECK(f.sigma_hat == doctest::Approx(std::sqrt(f.params.sigma2[0])));
    }
    SUBCASE("exact fit is flagged") {
        std::vector<double> y{0.0};
        for (int k = 0; k < 30; ++k) y.push_back(0.5 * y.back() + 1.0);
        const auto f = fit_one_regime(y);
        CHECK(f.params.beta == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(f.params.mu[0] == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(f.degenerate);
        CHECK(f.params.sigma2[0] > 0.0);
        CHECK_FALSE(f.warnings.empty());
    }
    SUBCASE("constant series") {
        std::vector<double> y(20, 3.0);
        CHECK_THROWS_AS(fit_one_regime(y), EstimationError);
        CHECK_THROWS_AS(fit_one_regime(std::vector<double>{1.0, 2.0, 3.0}), EstimationError);
    }
}

TEST_CASE("one-regime EM step is least squares") {
    const auto truth = two_regime_truth();
    const auto y = simulate_series(truth, 300, std::nullopt, 11);
    const auto ols = fit_one_regime(y);
    Parameters start = Parameters::make(1, VarianceFamily::common);
    start.mu[0] = 3.0;
    start.beta = -0.2;
    start.sigma2[0] = 7.0;
    const Parameters next = em_step(y, start, start.xi, PenaltyContext{});
    CHECK(next.mu[0] == doctest::Approx(ols.params.mu[0]).epsilon(1e-10));
    CHECK(next.beta == doctest::Approx(ols.params.beta).epsilon(1e-10));
    CHECK(next.sigma2[0] == doctest::Approx(ols.params.sigma2[0]).epsilon(1e-10));
}

TEST_CASE("EM steps never decrease the penalized objective") {
    Rng rng = make_rng(101);
    for (int rep = 0; rep < 50; ++rep) {
        const int m = 2 + rep % 2;
        const bool switching = rep % 2 == 0;
        const Parameters truth = random_params(m, switching, rng);
        const auto y = simulate_series(truth, 201, std::nullopt, 500 + rep);
        const auto one = fit_one_regime(y);
        PenaltyContext ctx;
        ctx.sigma_hat = one.sigma_hat;
        ctx.a_n = switching ? default_penalty_weight(200) : 0.0;
        Parameters p = random_params(m, switching, rng);
        double prev = penalized_loglik(y, p, p.xi, ctx.sigma_hat, ctx.a_n);
        for (int step = 0; step < 50; ++step) {
            p = em_step(y, p, p.xi, ctx);
            const double cur = penalized_loglik(y, p, p.xi, ctx.sigma_hat, ctx.a_n);
            CHECK(cur >= prev - 1e-9);
            prev = cur;
        }
    }
}

TEST_CASE("EM step reports an empty regime") {
    Parameters p = two_regime_truth();
    const auto y = simulate_series(p, 100, std::nullopt, 3);
    p.mu[1] = 1e4;
    CHECK_THROWS_AS(em_step(y, p, p.xi, PenaltyContext{}), EmptyRegime);
}

TEST_CASE("nesting identity") {
    const auto y = simulate_series(two_regime_truth(), 400, std::nullopt, 21);
    const auto one = fit_one_regime(y);
    Parameters p = Parameters::make(2, VarianceFamily::common);
    p.mu.setConstant(one.params.mu[0]);
    p.beta = one.params.beta;
    p.sigma2[0] = one.params.sigma2[0];
    p.transition << 0.9, 0.1, 0.35, 0.65;
    CHECK(std::abs(loglik(y, p) - one.loglik) < 1e-9);

    ModelSpec spec{.regimes = 2};
    const auto starts = nested_starts(one.params, spec, one.sigma_hat);
    REQUIRE(starts.size() == 2);
    CHECK(std::abs(loglik(y, starts[0]) - one.loglik) < 1e-9);
    for (const auto& s : starts) CHECK_NOTHROW(validate(s, spec));
    spec.regimes = 3;
    CHECK_THROWS_AS(nested_starts(one.params, spec, one.sigma_hat), InvalidParameter);
}

TEST_CASE("fit") {
    const auto truth = two_regime_truth();
    const auto y = simulate_series(truth, 2001, std::nullopt, 2024);

    SUBCASE("one regime delegates to the closed form") {
        const auto f = fit(y, ModelSpec{});
        CHECK(f.loglik == fit_one_regime(y).loglik);
        CHECK(f.start_index == -1);
    }

    SUBCASE("consistency") {
        const ModelSpec spec{.regimes = 2};
        auto f = fit(y, spec);
        CHECK(f.loglik >= fit_one_regime(y).loglik);
        CHECK_NOTHROW(validate(f.params, spec, f.sigma_floor));
        CHECK(f.penalty_weight == 0.0);
        const auto se = standard_errors(y, f);
        REQUIRE(se);
        REQUIRE(se->names.size() == 8);
        CHECK(se->names[0] == "mu1");
        CHECK(se->names[2] == "beta");
        CHECK(se->names[3] == "sigma");
        CHECK(se->names[4] == "p11");
        const double est[] = {f.params.mu[0], f.params.mu[1], f.params.beta, std::sqrt(f.params.sigma2[0]),
                              f.params.transition(0, 0), f.params.transition(1, 1)};
        const double tru[] = {-1.0, 1.0, 0.5, 1.0, 0.7, 0.7};
        const int idx[] = {0, 1, 2, 3, 4, 7};
        for (int i = 0; i < 6; ++i) {
            INFO("parameter " << se->names[idx[i]]);
            CHECK(se->values[idx[i]] > 0.0);
            CHECK(std::abs(est[i] - tru[i]) < 3.0 * se->values[idx[i]]);
        }
    }

    SUBCASE("switching variance with penalty") {
        const ModelSpec spec{.regimes = 2, .family = VarianceFamily::switching};
        const auto f = fit(y, spec);
        CHECK(f.params.sigma2.size() == 2);
        CHECK(f.penalty_weight == doctest::Approx(20.0 / std::sqrt(2000.0)));
        CHECK(f.penalized_loglik <= f.loglik);
        CHECK(f.penalized_loglik ==
              doctest::Approx(f.loglik + variance_penalty(f.params, f.sigma_hat, f.penalty_weight)));
        CHECK(std::abs(f.params.mu[0] + 1.0) < 0.3);
        CHECK(std::abs(f.params.mu[1] - 1.0) < 0.3);
    }

    SUBCASE("too short") {
        std::vector<double> shortish(y.begin(), y.begin() + 25);
        CHECK_THROWS_AS(fit(shortish, ModelSpec{.regimes = 3}), EstimationError);
    }
}

TEST_CASE("fit is independent of the worker count") {
    const auto y = simulate_series(two_regime_truth(), 301, std::nullopt, 77);
    FitConfig c1;
    c1.threads = 1;
    FitConfig c4 = c1;
    c4.threads = 4;
    for (auto family : {VarianceFamily::common, VarianceFamily::switching}) {
        const ModelSpec spec{.regimes = 2, .family = family};
        const auto a = fit(y, spec, c1), b = fit(y, spec, c4);
        CHECK(a.loglik == b.loglik);
        CHECK(a.start_index == b.start_index);
        CHECK(a.params.mu == b.params.mu);
        CHECK(a.params.transition == b.params.transition);
        CHECK(a.params.sigma2 == b.params.sigma2);
    }
}

TEST_CASE("standard errors") {
    SUBCASE("AR(1) information") {
        Parameters p = Parameters::make(1, VarianceFamily::common);
        p.beta = 0.5;
        const std::size_t n = 20000;
        const auto y = simulate_series(p, n + 1, std::nullopt, 8);
        const auto f = fit_one_regime(y);
        const auto se = standard_errors(y, f);
        REQUIRE(se);
        REQUIRE(se->names.size() == 3);
        CHECK(se->values[1] == doctest::Approx(std::sqrt((1.0 - 0.25) / n)).epsilon(0.05));
        CHECK(se->values[2] == doctest::Approx(1.0 / std::sqrt(2.0 * n)).epsilon(0.05));
    }
    SUBCASE("doubling n") {
        const ModelSpec spec{.regimes = 2};
        const auto y1 = simulate_series(two_regime_truth(), 1501, std::nullopt, 31);
        const auto y2 = simulate_series(two_regime_truth(), 3001, std::nullopt, 32);
        const auto s1 = standard_errors(y1, fit(y1, spec));
        const auto s2 = standard_errors(y2, fit(y2, spec));
        REQUIRE(s1);
        REQUIRE(s2);
        CHECK(s1->values[2] / s2->values[2] == doctest::Approx(std::sqrt(2.0)).epsilon(0.15));
    }
}

TEST_CASE("configuration checks") {
    FitConfig c;
    c.n_starts = 0;
    CHECK_THROWS_AS(c.check(), InvalidParameter);
    c = FitConfig{};
    c.em_tol = 0.0;
    CHECK_THROWS_AS(c.check(), InvalidParameter);
}
