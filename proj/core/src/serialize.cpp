#include "regimes/serialize.hpp"

#include "regimes/error.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace regimes {

namespace {

Json vec(const Vector& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Json rows(const Matrix& m) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec(m.row(i).transpose()));
    return a;
}

Json num(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json levels(const std::map<double, double>& m) {
    Json o = Json::object();
    for (const auto& [level, v] : m) o[level_key(level)] = num(v);
    return o;
}

Vector to_vector(const Json& j, const char* what) {
    if (!j.is_array()) throw InvalidParameter(std::string(what) + " must be an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw InvalidParameter(std::string(what) + " must contain numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    return j[key].get<T>();
}

}  // namespace

std::string level_key(double level) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", level);
    return buf;
}

Json to_json(const ModelSpec& spec) {
    return {{"regimes", spec.regimes},
            {"variance", std::string(to_string(spec.family))},
            {"lag_order", spec.lag_order},
            {"eps", spec.eps},
            {"eps_sigma_factor", spec.eps_sigma_factor}};
}

Json to_json(const Parameters& p) {
    return {{"regimes", p.regimes()}, {"P", rows(p.transition)}, {"mu", vec(p.mu)},
            {"beta", p.beta},         {"sigma", vec(p.sigma2)},  {"xi", vec(p.xi)}};
}

Json to_json(const FitResult& f) {
    Json j = {{"spec", to_json(f.spec)},
              {"params", to_json(f.params)},
              {"loglik", num(f.loglik)},
              {"penalized_loglik", num(f.penalized_loglik)},
              {"converged", f.converged},
              {"n_iterations", f.n_iterations},
              {"start_index", f.start_index},
              {"failed_starts", f.failed_starts},
              {"polished", f.polished},
              {"degenerate", f.degenerate},
              {"sigma_hat", f.sigma_hat},
              {"sigma_floor", f.sigma_floor},
              {"penalty_weight", f.penalty_weight}};
    if (f.se) {
        Json se = Json::object();
        for (std::size_t i = 0; i < f.se->names.size(); ++i)
            se[f.se->names[i]] = num(f.se->values[static_cast<Eigen::Index>(i)]);
        j["se"] = se;
    } else {
        j["se"] = nullptr;
    }
    j["warnings"] = f.warnings;
    return j;
}

Json to_json(const TestResult& t, bool include_fits) {
    Json j = {{"null_regimes", t.null_regimes},
              {"lr", t.lr},
              {"lr_raw", t.lr_raw},
              {"p_value", t.p_value},
              {"B", t.B},
              {"B_effective", t.effective_B()},
              {"failed_replicates", t.failed_replicates},
              {"retried_replicates", t.retried_replicates},
              {"seed", t.seed},
              {"critical_values", levels(t.critical_values)},
              {"boot_stats", t.boot_stats}};
    if (include_fits) {
        j["null_fit"] = to_json(t.null_fit);
        j["alt_fit"] = to_json(t.alt_fit);
    }
    j["warnings"] = t.warnings;
    return j;
}

Json to_json(const SelectionReport& r) {
    Json rowsj = Json::array();
    for (const auto& row : r.rows) {
        rowsj.push_back({{"regimes", row.regimes},
                         {"loglik", row.loglik},
                         {"aic", row.aic},
                         {"bic", row.bic},
                         {"lr", row.lr ? Json(*row.lr) : Json(nullptr)},
                         {"p_value", row.p_value ? Json(*row.p_value) : Json(nullptr)}});
    }
    Json fits = Json::array();
    for (const auto& f : r.fits) fits.push_back(to_json(f));
    Json tests = Json::array();
    for (const auto& t : r.tests) tests.push_back(to_json(t, false));
    return {{"rows", rowsj},
            {"selected_lrt", r.selected_lrt},
            {"selected_aic", r.selected_aic},
            {"selected_bic", r.selected_bic},
            {"alpha", r.alpha},
            {"B", r.B},
            {"n_obs", r.n_obs},
            {"seed", r.seed},
            {"fits", fits},
            {"tests", tests},
            {"warnings", r.warnings}};
}

Json to_json(const AsymptoticNull& a, bool include_draws) {
    Json kernels = Json::array();
    for (std::size_t i = 0; i < a.rho_grid.size(); ++i) kernels.push_back(rows(a.I_lambda_dot_eta(i)));
    Json cross = Json::array();
    for (const auto& m : a.I_lambda_eta) cross.push_back(rows(m));
    Json j = {{"family", std::string(to_string(a.family))},
              {"rho_grid", a.rho_grid},
              {"q_lambda", a.q},
              {"I_eta", rows(a.I_eta)},
              {"I_lambda_eta", cross},
              {"I_lambda_dot_eta", kernels},
              {"min_eigenvalue", a.min_eigenvalue},
              {"b_alpha", a.b_alpha ? Json(*a.b_alpha) : Json(nullptr)},
              {"R", a.R},
              {"seed", a.seed},
              {"critical_values", levels(a.critical_values)}};
    if (include_draws) j["draws"] = a.draws;
    return j;
}

Json to_json(const McDesign& d) {
    Json lv = Json::array();
    for (double l : d.levels) lv.push_back(l);
    return {{"name", d.name},
            {"dgp", to_json(d.dgp)},
            {"test", to_json(d.test_spec)},
            {"null_regimes", d.null_regimes},
            {"n", d.n},
            {"reps", d.reps},
            {"B", d.B},
            {"levels", lv},
            {"seed", d.seed},
            {"n_starts", d.fit.n_starts},
            {"scale_note", d.scale_note}};
}

Json to_json(const McReport& r) {
    Json lr = Json::array(), p = Json::array();
    for (double v : r.lr) lr.push_back(num(v));
    for (double v : r.p_value) p.push_back(num(v));
    return {{"design", to_json(r.design)},
            {"rejection_pct", levels(r.rejection_pct)},
            {"failed_reps", r.failed_reps},
            {"lr", lr},
            {"p_value", p},
            {"bootstrap_failures", r.bootstrap_failures}};
}

ModelSpec spec_from_json(const Json& j) {
    if (!j.is_object()) throw InvalidParameter("spec must be an object");
    ModelSpec s;
    try {
        s.regimes = get_or(j, "regimes", 1);
        s.family = parse_variance_family(get_or<std::string>(j, "variance", "common"));
        s.lag_order = get_or(j, "lag_order", 1);
        s.eps = get_or(j, "eps", s.eps);
        s.eps_sigma_factor = get_or(j, "eps_sigma_factor", s.eps_sigma_factor);
    } catch (const Json::exception& e) {
        throw InvalidParameter(std::string("malformed spec: ") + e.what());
    }
    s.check();
    return s;
}

Parameters parameters_from_json(const Json& j) {
    if (!j.is_object()) throw InvalidParameter("parameters must be an object");
    for (const char* key : {"P", "mu", "beta", "sigma"})
        if (!j.contains(key)) throw InvalidParameter(std::string("parameters missing \"") + key + "\"");
    Parameters p;
    p.mu = to_vector(j["mu"], "mu");
    const auto m = p.mu.size();
    if (!j["beta"].is_number()) throw InvalidParameter("beta must be a number");
    p.beta = j["beta"].get<double>();
    p.sigma2 = to_vector(j["sigma"], "sigma");
    const Json& P = j["P"];
    if (!P.is_array() || static_cast<Eigen::Index>(P.size()) != m)
        throw InvalidParameter("P must have one row per regime");
    p.transition.resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Vector row = to_vector(P[static_cast<std::size_t>(i)], "P row");
        if (row.size() != m) throw InvalidParameter("P must be square");
        p.transition.row(i) = row.transpose();
    }
    p.xi = j.contains("xi") ? to_vector(j["xi"], "xi") : Vector::Constant(m, 1.0 / static_cast<double>(m));
    check_shapes(p);
    return p;
}

FitResult fit_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("params")) throw InvalidParameter("fit document needs \"params\"");
    FitResult f;
    f.params = parameters_from_json(j["params"]);
    if (j.contains("spec")) {
        f.spec = spec_from_json(j["spec"]);
    } else {
        f.spec.regimes = f.params.regimes();
        f.spec.family = f.params.common_variance() ? VarianceFamily::common : VarianceFamily::switching;
    }
    if (f.spec.regimes != f.params.regimes()) throw InvalidParameter("spec and parameters disagree on M");
    try {
        f.loglik = get_or(j, "loglik", 0.0);
        f.penalized_loglik = get_or(j, "penalized_loglik", f.loglik);
        f.converged = get_or(j, "converged", false);
        f.sigma_hat = get_or(j, "sigma_hat", 0.0);
        f.sigma_floor = get_or(j, "sigma_floor", 0.0);
        f.penalty_weight = get_or(j, "penalty_weight", 0.0);
    } catch (const Json::exception& e) {
        throw InvalidParameter(std::string("malformed fit document: ") + e.what());
    }
    return f;
}

McDesign design_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("dgp")) throw InvalidParameter("design needs a \"dgp\" object");
    McDesign d;
    try {
        d.name = get_or<std::string>(j, "name", d.name);
        d.dgp = parameters_from_json(j["dgp"]);
        if (j.contains("test")) d.test_spec = spec_from_json(j["test"]);
        d.null_regimes = get_or(j, "null_regimes", d.null_regimes);
        d.n = get_or<std::size_t>(j, "n", d.n);
        d.reps = get_or(j, "reps", d.reps);
        d.B = get_or(j, "B", d.B);
        if (j.contains("levels")) d.levels = j["levels"].get<std::vector<double>>();
        d.seed = get_or<std::uint64_t>(j, "seed", d.seed);
        d.fit.n_starts = get_or(j, "n_starts", d.fit.n_starts);
        d.scale_note = get_or<std::string>(j, "scale_note", d.scale_note);
    } catch (const Json::exception& e) {
        throw InvalidParameter(std::string("malformed design: ") + e.what());
    }
    d.test_spec.regimes = d.null_regimes;
    d.check();
    return d;
}

std::string mc_report_csv(const McReport& r) {
    std::ostringstream os;
    os << "design,n,reps,B,level,rejection_pct,failed_reps,wall_seconds\n";
    for (const auto& [level, pct] : r.rejection_pct) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s,%zu,%d,%d,%s,%.2f,%d,%.1f\n", r.design.name.c_str(), r.design.n,
                      r.design.reps, r.design.B, level_key(level).c_str(), pct, r.failed_reps, r.wall_seconds);
        os << buf;
    }
    return os.str();
}

}  // namespace regimes
