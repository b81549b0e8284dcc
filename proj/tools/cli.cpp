#include "cli.hpp"

#include "dataset.hpp"

#include <regimes/asymptotics.hpp>
#include <regimes/error.hpp>
#include <regimes/estimation.hpp>
#include <regimes/likelihood.hpp>
#include <regimes/serialize.hpp>
#include <regimes/simulate.hpp>
#include <regimes/testing.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#ifndef REGIMES_VERSION
#define REGIMES_VERSION "0.0.0"
#endif

namespace regimes::cli {

namespace {

struct DataOptions {
    std::string path;
    std::string column;
    std::string transform = "none";
};

struct ModelOptions {
    std::string variance = "common";
    double eps = 0.05;
    double sigma_factor = 0.01;
    int starts = 20;
    bool no_polish = false;
    bool no_penalty = false;
};

struct Common {
    std::uint64_t seed = kDefaultSeed;
    unsigned threads = 1;
    std::string out;
};

void add_data(CLI::App* app, DataOptions& d) {
    app->add_option("--data", d.path, "CSV file with a header row")->required();
    app->add_option("--column", d.column, "numeric column (default: first numeric column)");
    app->add_option("--transform", d.transform, "none | log_diff_pct")->check(CLI::IsMember({"none", "log_diff_pct"}));
}

void add_model(CLI::App* app, ModelOptions& m) {
    app->add_option("--variance", m.variance, "common | switching")->check(CLI::IsMember({"common", "switching"}));
    app->add_option("--eps", m.eps, "lower bound on transition probabilities");
    app->add_option("--sigma-factor", m.sigma_factor, "sigma floor as a multiple of the one-regime sigma");
    app->add_option("--starts", m.starts, "random EM starts");
    app->add_flag("--no-polish", m.no_polish, "skip the quasi-Newton polish");
    app->add_flag("--no-penalty", m.no_penalty, "drop the variance penalty");
}

void add_common(CLI::App* app, Common& c, bool with_out = true) {
    app->add_option("--seed", c.seed, "root seed");
    app->add_option("--threads", c.threads, "worker threads (0 = all cores)");
    if (with_out) app->add_option("--out", c.out, "write the JSON document here");
}

ModelSpec make_spec(const ModelOptions& m, int regimes) {
    ModelSpec s;
    s.regimes = regimes;
    s.family = parse_variance_family(m.variance);
    s.eps = m.eps;
    s.eps_sigma_factor = m.sigma_factor;
    try {
        s.check();
    } catch (const InvalidParameter& e) {
        throw InputError(e.what());
    }
    return s;
}

FitConfig make_config(const ModelOptions& m, const Common& c) {
    FitConfig f;
    f.n_starts = m.starts;
    f.polish = !m.no_polish;
    f.penalty_on = !m.no_penalty;
    f.seed = c.seed;
    f.threads = c.threads;
    try {
        f.check();
    } catch (const InvalidParameter& e) {
        throw InputError(e.what());
    }
    return f;
}

std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

Json provenance(const std::string& command, const DataSet* data, std::uint64_t seed, Json config) {
    Json p = {{"tool", "regimes"}, {"version", REGIMES_VERSION}, {"command", command}};
    if (data) {
        p["input"] = {{"path", data->source_path},
                      {"digest", "fnv1a64:" + hex64(data->digest)},
                      {"column", data->column},
                      {"transform", to_string(data->transform)},
                      {"length", data->values.size()}};
    }
    p["seed"] = seed;
    p["config"] = std::move(config);
    return p;
}

Json model_config(const ModelOptions& m) {
    return {{"variance", m.variance}, {"eps", m.eps},          {"sigma_factor", m.sigma_factor},
            {"starts", m.starts},     {"polish", !m.no_polish}, {"penalty", !m.no_penalty}};
}

Json document(const std::string& command, Json prov, Json result) {
    return {{"schema_version", kSchemaVersion}, {"command", command}, {"provenance", std::move(prov)},
            {"result", std::move(result)}};
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write '" + path + "'");
    f << text;
    if (!f) throw InputError("failed writing '" + path + "'");
}

void emit(const Common& c, const Json& doc) {
    if (!c.out.empty()) write_text(c.out, doc.dump(2) + "\n");
}

Json load_json(const std::string& path) {
    try {
        return Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw InputError("'" + path + "' is not valid JSON: " + e.what());
    }
}

FitResult load_fit(const std::string& path) {
    const Json j = load_json(path);
    try {
        return fit_from_json(j.contains("result") ? j["result"] : j);
    } catch (const InvalidParameter& e) {
        throw InputError("'" + path + "': " + e.what());
    }
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

void print_fit(std::ostream& out, const FitResult& f) {
    out << "regimes " << f.params.regimes() << ", variance " << to_string(f.spec.family) << "\n";
    out << std::left << std::setw(10) << "param" << std::right << std::setw(12) << "coeff." << std::setw(12)
        << "s.e." << "\n";
    auto row = [&](const std::string& name, double value) {
        std::string se;
        if (f.se) {
            for (std::size_t i = 0; i < f.se->names.size(); ++i)
                if (f.se->names[i] == name) se = fmt(f.se->values[static_cast<Eigen::Index>(i)]);
        }
        out << std::left << std::setw(10) << name << std::right << std::setw(12) << fmt(value) << std::setw(12) << se
            << "\n";
    };
    const auto& p = f.params;
    const int m = p.regimes();
    for (int j = 0; j < m; ++j) row("mu" + std::to_string(j + 1), p.mu[j]);
    row("beta", p.beta);
    if (p.common_variance()) {
        row("sigma", std::sqrt(p.sigma2[0]));
    } else {
        for (int j = 0; j < m; ++j) row("sigma" + std::to_string(j + 1), std::sqrt(p.sigma2[j]));
    }
    if (m > 1)
        for (int i = 0; i < m; ++i) row("p" + std::to_string(i + 1) + std::to_string(i + 1), p.transition(i, i));
    out << "log-likelihood " << fmt(f.loglik) << "\n";
    for (const auto& w : f.warnings) out << "warning: " << w << "\n";
}

DataSet load(const DataOptions& d) { return load_dataset(d.path, d.column, parse_transform(d.transform)); }

int cmd_fit(const DataOptions& d, const ModelOptions& m, const Common& c, int regimes, bool no_se,
            std::ostream& out) {
    const DataSet data = load(d);
    const ModelSpec spec = make_spec(m, regimes);
    FitResult f = fit(data.values, spec, make_config(m, c));
    if (!no_se) f.se = standard_errors(data.values, f, &f.warnings);
    print_fit(out, f);
    Json cfg = model_config(m);
    cfg["regimes"] = regimes;
    emit(c, document("fit", provenance("fit", &data, c.seed, cfg), to_json(f)));
    return kExitOk;
}

int cmd_test(const DataOptions& d, const ModelOptions& m, const Common& c, int m0, int B,
             const std::string& fit_path, std::ostream& out) {
    const DataSet data = load(d);
    const FitConfig cfg = make_config(m, c);
    ModelSpec spec = make_spec(m, m0);
    LrtResult lrt;
    if (!fit_path.empty()) {
        FitResult null_fit = load_fit(fit_path);
        if (null_fit.params.regimes() != m0)
            throw InputError("fit in '" + fit_path + "' has " + std::to_string(null_fit.params.regimes()) +
                             " regimes, expected " + std::to_string(m0));
        spec.family = null_fit.spec.family;
        lrt = lrt_statistic(data.values, null_fit, spec, cfg);
    } else {
        lrt = lrt_statistic(data.values, m0, spec, cfg);
    }
    if (B < 1) throw InputError("--bootstrap must be >= 1");
    const TestResult t = bootstrap_test(data.values, lrt, spec, B, cfg);
    out << "LR(" << m0 << " vs " << m0 + 1 << ") = " << fmt(t.lr, 3) << ", bootstrap p-value = " << fmt(t.p_value, 3)
        << " (B = " << t.B << ", effective " << t.effective_B() << ", seed " << t.seed << "): "
        << (t.p_value < 0.05 ? "reject" : "do not reject") << " H0: M = " << m0 << " at the 5% level\n";
    for (const auto& w : t.warnings) out << "warning: " << w << "\n";
    Json conf = model_config(m);
    conf["null_regimes"] = m0;
    conf["B"] = B;
    if (!fit_path.empty()) conf["null_fit"] = fit_path;
    emit(c, document("test", provenance("test", &data, c.seed, conf), to_json(t)));
    return kExitOk;
}

int cmd_select(const DataOptions& d, const ModelOptions& m, const Common& c, int m_max, double alpha, int B,
               std::size_t n_obs, std::ostream& out) {
    const DataSet data = load(d);
    if (m_max < 2) throw InputError("--max-regimes must be >= 2");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("--alpha must lie in (0, 1)");
    if (B < 1) throw InputError("--bootstrap must be >= 1");
    const SelectionReport r = select_regimes(data.values, m_max, make_spec(m, 1), B, alpha, make_config(m, c), n_obs);
    out << render_selection_table(r);
    for (const auto& w : r.warnings) out << "warning: " << w << "\n";
    Json conf = model_config(m);
    conf["max_regimes"] = m_max;
    conf["alpha"] = alpha;
    conf["B"] = B;
    conf["n_obs"] = r.n_obs;
    emit(c, document("select", provenance("select", &data, c.seed, conf), to_json(r)));
    return kExitOk;
}

int cmd_simulate(const std::string& design_path, const Common& c, bool seed_given, int reps, int B, bool full_scale,
                 const std::string& csv_path, std::ostream& out) {
    McDesign design;
    try {
        Json j = load_json(design_path);
        if (seed_given || !j.contains("seed")) j["seed"] = c.seed;
        design = design_from_json(j);
    } catch (const InvalidParameter& e) {
        throw InputError("'" + design_path + "': " + e.what());
    }
    if (full_scale) {
        design.reps = 3000;
        design.B = 199;
        design.scale_note = "full scale";
    }
    if (reps > 0) design.reps = reps;
    if (B > 0) design.B = B;
    if (design.scale_note.empty())
        design.scale_note = "desk scale; series start after a 200-step burn-in from the stationary regime distribution";
    design.threads = c.threads;
    const McReport r = run_size_power(design);
    const std::string csv = mc_report_csv(r);
    out << csv;
    if (!csv_path.empty()) write_text(csv_path, csv);
    Json conf = {{"design", design_path}, {"reps", design.reps}, {"B", design.B}};
    emit(c, document("simulate", provenance("simulate", nullptr, design.seed, conf), to_json(r)));
    return kExitOk;
}

int cmd_smooth(const DataOptions& d, const std::string& fit_path, const std::string& out_path, std::ostream& out) {
    const DataSet data = load(d);
    const FitResult f = load_fit(fit_path);
    const SmoothResult s = smooth(data.values, f.params, f.params.xi);
    std::ostringstream csv;
    csv << "time";
    const int m = f.params.regimes();
    for (int j = 0; j < m; ++j) csv << ",regime_" << j + 1;
    csv << "\n" << std::setprecision(17);
    for (Eigen::Index k = 0; k < s.smoothed.rows(); ++k) {
        const auto idx = static_cast<std::size_t>(k + 1);
        if (data.timestamps.empty()) csv << idx;
        else csv << data.timestamps[idx];
        for (int j = 0; j < m; ++j) csv << "," << s.smoothed(k, j);
        csv << "\n";
    }
    write_text(out_path, csv.str());
    out << "wrote " << s.smoothed.rows() << " rows of smoothed regime probabilities to " << out_path << "\n";
    return kExitOk;
}

int cmd_asymptotics(const DataOptions& d, const Common& c, const std::string& family, int grid, int draws,
                    double eps, std::ostream& out) {
    const DataSet data = load(d);
    ScoreFamily fam;
    try {
        fam = parse_score_family(family);
    } catch (const InvalidParameter& e) {
        throw InputError(e.what());
    }
    if (grid < 1) throw InputError("--rho-grid must be >= 1");
    if (draws < 1000) throw InputError("--draws must be >= 1000");
    std::vector<double> rho;
    try {
        rho = default_rho_grid(eps, grid);
    } catch (const InvalidParameter& e) {
        throw InputError(e.what());
    }
    const FitResult f1 = fit_one_regime(data.values);
    const ScoreSet scores = build_scores(data.values, f1, fam, rho);
    const AsymptoticNull a = simulate_asymptotic_null(info_kernels(scores), draws, c.seed, c.threads);
    out << "asymptotic null (" << to_string(fam) << ", " << rho.size() << " rho points, R = " << draws << ")\n";
    for (const auto& [level, v] : a.critical_values) out << "  " << level_key(level) << ": " << fmt(v, 3) << "\n";
    Json conf = {{"family", std::string(to_string(fam))}, {"rho_grid", grid}, {"draws", draws}, {"eps", eps}};
    emit(c, document("asymptotics", provenance("asymptotics", &data, c.seed, conf), to_json(a)));
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Markov switching autoregressions: estimation, regime-number tests, simulation"};
    app.name("regimes");
    app.set_version_flag("--version", std::string(REGIMES_VERSION));
    app.require_subcommand(1);

    DataOptions data;
    ModelOptions model;
    Common common;
    int regimes = 1, m0 = 1, B = 199, m_max = 4, grid = 41, draws = 10000, reps = 0;
    double alpha = 0.05, eps = 0.05;
    std::size_t n_obs = 0;
    bool no_se = false, full_scale = false;
    std::string fit_path, design_path, csv_path, smooth_out, family = "homo_normal";

    auto* fit_cmd = app.add_subcommand("fit", "estimate an M-regime model");
    add_data(fit_cmd, data);
    add_model(fit_cmd, model);
    add_common(fit_cmd, common);
    fit_cmd->add_option("--regimes", regimes, "number of regimes M")->check(CLI::Range(1, 10));
    fit_cmd->add_flag("--no-se", no_se, "skip standard errors");

    auto* test_cmd = app.add_subcommand("test", "bootstrap LR test of M0 against M0 + 1 regimes");
    add_data(test_cmd, data);
    add_model(test_cmd, model);
    add_common(test_cmd, common);
    test_cmd->add_option("--null-regimes", m0, "M0")->check(CLI::Range(1, 9));
    test_cmd->add_option("--bootstrap", B, "bootstrap draws B");
    test_cmd->add_option("--fit", fit_path, "use this M0-regime fit (JSON from `fit`) as the null estimate");

    auto* select_cmd = app.add_subcommand("select", "sequential selection of the number of regimes");
    add_data(select_cmd, data);
    add_model(select_cmd, model);
    add_common(select_cmd, common);
    select_cmd->add_option("--max-regimes", m_max, "largest M considered")->check(CLI::Range(2, 10));
    select_cmd->add_option("--alpha", alpha, "test level");
    select_cmd->add_option("--bootstrap", B, "bootstrap draws B");
    select_cmd->add_option("--n-obs", n_obs, "sample size in BIC (default: series length)");

    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo size/power of the bootstrap test");
    sim_cmd->add_option("--design", design_path, "design JSON")->required();
    add_common(sim_cmd, common);
    sim_cmd->add_option("--csv", csv_path, "write the CSV summary here");
    sim_cmd->add_option("--reps", reps, "override the replication count");
    sim_cmd->add_option("--bootstrap", B, "override B");
    sim_cmd->add_flag("--full-scale", full_scale, "3000 replications with B = 199");

    auto* smooth_cmd = app.add_subcommand("smooth", "smoothed regime probabilities as CSV");
    add_data(smooth_cmd, data);
    smooth_cmd->add_option("--fit", fit_path, "fit JSON")->required();
    smooth_cmd->add_option("--out", smooth_out, "CSV output path")->required();

    auto* asym_cmd = app.add_subcommand("asymptotics", "simulate the limiting null distribution for M0 = 1");
    add_data(asym_cmd, data);
    add_common(asym_cmd, common);
    asym_cmd->add_option("--family", family, "homo_normal | hetero_normal | nonnormal");
    asym_cmd->add_option("--rho-grid", grid, "number of rho grid points");
    asym_cmd->add_option("--draws", draws, "simulated draws R");
    asym_cmd->add_option("--eps", eps, "transition floor defining the rho range");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << REGIMES_VERSION << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    }

    const bool sim_b_override = sim_cmd->count("--bootstrap") > 0;
    try {
        if (*fit_cmd) return cmd_fit(data, model, common, regimes, no_se, out);
        if (*test_cmd) return cmd_test(data, model, common, m0, B, fit_path, out);
        if (*select_cmd) return cmd_select(data, model, common, m_max, alpha, B, n_obs, out);
        if (*sim_cmd) return cmd_simulate(design_path, common, sim_cmd->count("--seed") > 0, reps, sim_b_override ? B : 0, full_scale, csv_path, out);
        if (*smooth_cmd) return cmd_smooth(data, fit_path, smooth_out, out);
        if (*asym_cmd) return cmd_asymptotics(data, common, family, grid, draws, eps, out);
    } catch (const InputError& e) {
        err << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const Error& e) {
        err << "computation error: " << e.what() << "\n";
        return kExitCompute;
    }
    return kExitInput;
}

}  // namespace regimes::cli
