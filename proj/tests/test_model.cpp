#include <doctest.h>

#include <regimes/error.hpp>
#include <regimes/model.hpp>
#include <regimes/rng.hpp>

#include <random>

using namespace regimes;

namespace {

Matrix random_stochastic(int m, double eps, Rng& rng) {
    std::gamma_distribution<double> g(1.0, 1.0);
    Matrix P(m, m);
    for (int i = 0; i < m; ++i) {
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += (P(i, j) = g(rng));
        P.row(i) = (eps + (1.0 - m * eps) * P.row(i).array() / s).matrix();
    }
    return P;
}

}  // namespace

TEST_CASE("model spec checks its invariants") {
    ModelSpec s;
    CHECK_NOTHROW(s.check());
    s.eps = 0.5;
    CHECK_THROWS_AS(s.check(), InvalidParameter);
    s.eps = 0.0;
    CHECK_THROWS_AS(s.check(), InvalidParameter);
    s = {};
    s.regimes = 0;
    CHECK_THROWS_AS(s.check(), InvalidParameter);
    s = {};
    s.lag_order = 2;
    CHECK_THROWS_AS(s.check(), InvalidParameter);
}

TEST_CASE("parameter dimension") {
    ModelSpec s;
    s.regimes = 1;
    CHECK(s.parameter_dim() == 3);
    s.regimes = 2;
    CHECK(s.parameter_dim() == 6);
    s.family = VarianceFamily::switching;
    CHECK(s.parameter_dim() == 7);
    s.regimes = 3;
    CHECK(s.parameter_dim() == 13);
}

TEST_CASE("stationary distribution examples") {
    Matrix P(2, 2);
    P << 0.7, 0.3, 0.3, 0.7;
    Vector pi = stationary_distribution(P);
    CHECK(pi[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(pi[1] == doctest::Approx(0.5).epsilon(1e-14));

    P << 0.9, 0.1, 0.2, 0.8;
    pi = stationary_distribution(P);
    CHECK(std::abs(pi[0] - 2.0 / 3.0) < 1e-14);
    CHECK(std::abs(pi[1] - 1.0 / 3.0) < 1e-14);

    P << 0.25, 0.75, 0.75, 0.25;
    pi = stationary_distribution(P);
    CHECK(std::abs(pi[0] - 0.5) < 1e-14);
}

TEST_CASE("stationary distribution solves pi P = pi on random chains") {
    Rng rng = make_rng(11);
    for (int rep = 0; rep < 200; ++rep) {
        const int m = 2 + rep % 4;
        const Matrix P = random_stochastic(m, 0.02, rng);
        const Vector pi = stationary_distribution(P);
        // independent oracle: power iteration
        Vector q = Vector::Constant(m, 1.0 / m);
        for (int it = 0; it < 5000; ++it) q = (q.transpose() * P).transpose();
        CHECK((pi.transpose() * P - pi.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(std::abs(pi.sum() - 1.0) <= 1e-12);
        CHECK((pi - q).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(pi.minCoeff() > 0.0);
    }
}

TEST_CASE("stationary distribution rejects non-stochastic rows") {
    Matrix P(2, 2);
    P << 0.7, 0.3, 0.3, 0.71;
    CHECK_THROWS_AS(stationary_distribution(P), InvalidParameter);
    P << 0.7, 0.3, 0.3, 0.7 + 1e-11;
    CHECK_THROWS_AS(stationary_distribution(P), InvalidParameter);
}

TEST_CASE("rho and alpha from transition probabilities") {
    auto ra = rho_alpha_from_transition(0.7, 0.7);
    CHECK(ra.rho == doctest::Approx(0.4));
    CHECK(ra.alpha == doctest::Approx(0.5));
    ra = rho_alpha_from_transition(0.5, 0.5);
    CHECK(std::abs(ra.rho) < 1e-15);
    CHECK(ra.alpha == doctest::Approx(0.5));
    const auto t = transition_from_rho_alpha(0.4, 0.5);
    CHECK(t.p11 == doctest::Approx(0.7));
    CHECK(t.p22 == doctest::Approx(0.7));
}

TEST_CASE("rho/alpha round trip on a grid") {
    const double eps = 0.05;
    for (int i = 0; i <= 30; ++i) {
        for (int j = 0; j <= 30; ++j) {
            const double p11 = eps + (1 - 2 * eps) * i / 30.0;
            const double p22 = eps + (1 - 2 * eps) * j / 30.0;
            const auto ra = rho_alpha_from_transition(p11, p22);
            const auto back = transition_from_rho_alpha(ra.rho, ra.alpha, eps);
            CHECK(std::abs(back.p11 - p11) <= 1e-14);
            CHECK(std::abs(back.p22 - p22) <= 1e-14);
            CHECK(ra.rho >= -1 + 2 * eps - 1e-14);
            CHECK(ra.rho <= 1 - 2 * eps + 1e-14);
            CHECK(ra.alpha >= eps - 1e-14);
            CHECK(ra.alpha <= 1 - eps + 1e-14);
        }
    }
}

TEST_CASE("inverse transition map rejects points outside the box") {
    CHECK_THROWS_AS(transition_from_rho_alpha(0.95, 0.5, 0.05), ConstraintViolation);
    CHECK_THROWS_AS(transition_from_rho_alpha(-0.95, 0.5, 0.05), ConstraintViolation);
}

TEST_CASE("location split") {
    auto s = reparam_split(3.0, 3.0, 0.3);
    CHECK(s.nu == doctest::Approx(3.0));
    CHECK(s.lambda == 0.0);
    s = reparam_split(1.0, -1.0, 0.5);
    CHECK(s.nu == doctest::Approx(0.0));
    CHECK(s.lambda == doctest::Approx(2.0));

    Rng rng = make_rng(5);
    std::uniform_real_distribution<double> u(-5, 5), a(0.01, 0.99);
    for (int rep = 0; rep < 1000; ++rep) {
        const double t1 = u(rng), t2 = u(rng), al = a(rng);
        const auto [b1, b2] = reparam_split_inverse(reparam_split(t1, t2, al), al);
        CHECK(std::abs(b1 - t1) <= 1e-14 * (1 + std::abs(t1)) * 4);
        CHECK(std::abs(b2 - t2) <= 1e-14 * (1 + std::abs(t2)) * 4);
    }
}

TEST_CASE("hetero reparameterization") {
    CHECK(hetero_c1(0.5) == doctest::Approx(-0.5));
    CHECK(hetero_c2(0.5) == doctest::Approx(0.5));
    for (double al : {0.05, 0.3, 0.5, 0.9}) {
        CHECK(hetero_c1(al) == doctest::Approx(hetero_c2(al) - 1.0));
        CHECK(b_alpha(al) < 0.0);
    }
    const auto p = reparam_hetero_inverse({0.2, 0.0, 1.7, 0.0}, 0.3);
    CHECK(p.sigma1sq == doctest::Approx(1.7));
    CHECK(p.sigma2sq == doctest::Approx(1.7));
    CHECK(p.zeta1 == doctest::Approx(p.zeta2));

    Rng rng = make_rng(9);
    std::uniform_real_distribution<double> u(-2, 2), v(0.2, 3), a(0.05, 0.95);
    for (int rep = 0; rep < 1000; ++rep) {
        const HeteroPoint x{u(rng), u(rng), v(rng), v(rng)};
        const double al = a(rng);
        const auto back = reparam_hetero_inverse(reparam_hetero(x, al), al);
        CHECK(std::abs(back.zeta1 - x.zeta1) <= 1e-12);
        CHECK(std::abs(back.zeta2 - x.zeta2) <= 1e-12);
        CHECK(std::abs(back.sigma1sq - x.sigma1sq) <= 1e-12);
        CHECK(std::abs(back.sigma2sq - x.sigma2sq) <= 1e-12);
    }
    CHECK_THROWS_AS(reparam_hetero_inverse({0.0, 0.0, -1.0, 0.0}, 0.5), ConstraintViolation);
}

TEST_CASE("homo reparameterization") {
    auto x = reparam_homo_inverse({0.0, 0.0, 2.0}, 0.4);
    CHECK(x.sigmasq == doctest::Approx(2.0));
    x = reparam_homo_inverse({0.0, 2.0, 3.0}, 0.5);
    CHECK(x.sigmasq == doctest::Approx(2.0));
    Rng rng = make_rng(13);
    std::uniform_real_distribution<double> u(-2, 2), v(0.2, 3), a(0.05, 0.95);
    for (int rep = 0; rep < 1000; ++rep) {
        const HomoPoint p{u(rng), u(rng), v(rng)};
        const double al = a(rng);
        const auto back = reparam_homo_inverse(reparam_homo(p, al), al);
        CHECK(std::abs(back.theta1 - p.theta1) <= 1e-12);
        CHECK(std::abs(back.theta2 - p.theta2) <= 1e-12);
        CHECK(std::abs(back.sigmasq - p.sigmasq) <= 1e-12);
    }
    CHECK_THROWS_AS(reparam_homo_inverse({0.0, 4.0, 1.0}, 0.5), ConstraintViolation);
}

TEST_CASE("validate swaps labels into ascending order") {
    ModelSpec spec;
    spec.regimes = 2;
    spec.family = VarianceFamily::switching;
    Parameters p = Parameters::make(2, VarianceFamily::switching);
    p.mu << 1.0, -1.0;
    p.sigma2 << 2.0, 0.5;
    p.transition << 0.8, 0.2, 0.4, 0.6;
    p.xi << 0.3, 0.7;
    const Parameters c = validate(p, spec);
    CHECK(c.mu[0] == -1.0);
    CHECK(c.mu[1] == 1.0);
    CHECK(c.sigma2[0] == 0.5);
    CHECK(c.sigma2[1] == 2.0);
    CHECK(c.transition(0, 0) == 0.6);
    CHECK(c.transition(0, 1) == 0.4);
    CHECK(c.transition(1, 0) == 0.2);
    CHECK(c.transition(1, 1) == 0.8);
    CHECK(c.xi[0] == 0.7);

    const Parameters again = validate(c, spec);
    CHECK(again.mu == c.mu);
    CHECK(again.transition == c.transition);
    CHECK(again.sigma2 == c.sigma2);
}

TEST_CASE("validate breaks mu ties by variance") {
    ModelSpec spec;
    spec.regimes = 2;
    spec.family = VarianceFamily::switching;
    Parameters p = Parameters::make(2, VarianceFamily::switching);
    p.mu << 0.5, 0.5;
    p.sigma2 << 3.0, 1.0;
    const Parameters c = validate(p, spec);
    CHECK(c.sigma2[0] == 1.0);
    CHECK(c.sigma2[1] == 3.0);
}

TEST_CASE("validate lists each violation") {
    ModelSpec spec;
    spec.regimes = 2;
    Parameters p = Parameters::make(2, VarianceFamily::common);
    p.transition << 0.01, 0.99, 0.5, 0.5;
    try {
        validate(p, spec);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        REQUIRE(e.violations().size() == 1);
        CHECK(e.violations()[0].find("transition entry below eps") != std::string::npos);
    }

    p.transition << 0.5, 0.5, 0.5, 0.5;
    p.mu[1] = std::numeric_limits<double>::quiet_NaN();
    p.sigma2[0] = 1e-6;
    try {
        validate(p, spec, 0.1);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(e.violations().size() == 2);
    }
}

TEST_CASE("validate leaves canonical input unchanged") {
    ModelSpec spec;
    spec.regimes = 3;
    Parameters p = Parameters::make(3, VarianceFamily::common);
    p.mu << -1.0, 0.0, 2.0;
    p.transition << 0.8, 0.1, 0.1, 0.2, 0.6, 0.2, 0.1, 0.3, 0.6;
    const Parameters c = validate(p, spec);
    CHECK(c.mu == p.mu);
    CHECK(c.transition == p.transition);
    CHECK(c.sigma2 == p.sigma2);
    CHECK(c.xi == p.xi);
}
