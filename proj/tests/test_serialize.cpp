#include <doctest.h>

#include <regimes/serialize.hpp>

#include <cmath>

using namespace regimes;

namespace {

Parameters sample_params() {
    Parameters p = Parameters::make(2, VarianceFamily::switching);
    p.mu << -0.4, 1.1;
    p.beta = 0.3;
    p.sigma2 << 0.5, 2.0;
    p.transition << 0.85, 0.15, 0.25, 0.75;
    return p;
}

}  // namespace

TEST_CASE("parameters round trip") {
    const Parameters p = sample_params();
    const Json j = to_json(p);
    CHECK(j["regimes"] == 2);
    CHECK(j["P"].size() == 2);
    CHECK(j["sigma"].size() == 2);
    const Parameters q = parameters_from_json(Json::parse(j.dump()));
    CHECK(q.mu == p.mu);
    CHECK(q.beta == p.beta);
    CHECK(q.sigma2 == p.sigma2);
    CHECK(q.transition == p.transition);
    CHECK(q.xi == p.xi);

    Json missing = j;
    missing.erase("beta");
    CHECK_THROWS_AS(parameters_from_json(missing), InvalidParameter);
    Json ragged = j;
    ragged["P"][1] = Json::array({0.5});
    CHECK_THROWS_AS(parameters_from_json(ragged), InvalidParameter);
}

TEST_CASE("spec round trip") {
    const ModelSpec s{.regimes = 3, .family = VarianceFamily::switching, .eps = 0.02, .eps_sigma_factor = 0.05};
    const ModelSpec t = spec_from_json(to_json(s));
    CHECK(t.regimes == 3);
    CHECK(t.family == VarianceFamily::switching);
    CHECK(t.eps == 0.02);
    CHECK(t.eps_sigma_factor == 0.05);
    CHECK_THROWS_AS(spec_from_json(Json{{"variance", "mixed"}}), InvalidParameter);
}

TEST_CASE("fit round trip") {
    FitResult f;
    f.spec = ModelSpec{.regimes = 2, .family = VarianceFamily::switching};
    f.params = sample_params();
    f.loglik = -123.456;
    f.penalized_loglik = -124.0;
    f.sigma_hat = 1.25;
    f.sigma_floor = 0.0125;
    f.converged = true;
    const FitResult g = fit_from_json(Json::parse(to_json(f).dump()));
    CHECK(g.loglik == f.loglik);
    CHECK(g.sigma_hat == f.sigma_hat);
    CHECK(g.spec.regimes == 2);
    CHECK(g.params.transition == f.params.transition);
    CHECK(to_json(f)["se"].is_null());

    f.loglik = std::nan("");
    CHECK(to_json(f)["loglik"].is_null());
    CHECK_THROWS_AS(fit_from_json(Json::object()), InvalidParameter);
}

TEST_CASE("design documents") {
    const Json j = Json::parse(R"({
        "name": "size",
        "dgp": {"P": [[1.0]], "mu": [0.0], "beta": 0.5, "sigma": [1.0]},
        "test": {"variance": "common"},
        "n": 120, "reps": 7, "B": 19, "levels": [0.05], "seed": 11, "n_starts": 5
    })");
    const McDesign d = design_from_json(j);
    CHECK(d.name == "size");
    CHECK(d.n == 120);
    CHECK(d.reps == 7);
    CHECK(d.B == 19);
    CHECK(d.levels == std::vector<double>{0.05});
    CHECK(d.seed == 11);
    CHECK(d.fit.n_starts == 5);
    CHECK(d.test_spec.regimes == 1);
    const McDesign e = design_from_json(to_json(d));
    CHECK(e.n == d.n);
    CHECK(e.dgp.beta == 0.5);
    CHECK_THROWS_AS(design_from_json(Json{{"n", 5}}), InvalidParameter);

    McReport r;
    r.design = d;
    r.rejection_pct[0.05] = 14.2857;
    r.wall_seconds = 3.0;
    const std::string csv = mc_report_csv(r);
    CHECK(csv.find("design,n,reps,B,level,rejection_pct,failed_reps,wall_seconds") == 0);
    CHECK(csv.find("size,120,7,19,0.05,14.29,0,3.0") != std::string::npos);
    CHECK_FALSE(to_json(r).contains("wall_seconds"));
    CHECK(level_key(0.1) == "0.1");
}
