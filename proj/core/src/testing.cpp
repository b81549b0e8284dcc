#include "regimes/testing.hpp"

#include "regimes/error.hpp"
#include "regimes/parallel.hpp"
#include "regimes/rng.hpp"
#include "regimes/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace regimes {

namespace {

ModelSpec with_regimes(ModelSpec spec, int m) {
    spec.regimes = m;
    return spec;
}

FitResult fit_alternative(Series data, const FitResult& null_fit, const ModelSpec& alt_spec,
                          const FitConfig& config) {
    FitConfig cfg = config;
    for (auto& p : nested_starts(null_fit.params, alt_spec, null_fit.sigma_hat))
        cfg.extra_starts.push_back(std::move(p));
    return fit(data, alt_spec, cfg);
}

LrtResult lrt_from_null(Series data, FitResult null_fit, const ModelSpec& spec, const FitConfig& config) {
    LrtResult out;
    const ModelSpec alt_spec = with_regimes(spec, null_fit.spec.regimes + 1);
    out.alt_fit = fit_alternative(data, null_fit, alt_spec, config);
    out.lr_raw = 2.0 * (out.alt_fit.loglik - null_fit.loglik);
    if (out.lr_raw < -1e-4) {
        FitConfig more = config;
        more.n_starts *= 2;
        FitResult again = fit_alternative(data, null_fit, alt_spec, more);
        out.escalated = true;
        if (again.loglik > out.alt_fit.loglik) out.alt_fit = std::move(again);
        out.lr_raw = 2.0 * (out.alt_fit.loglik - null_fit.loglik);
    }
    out.lr = std::max(out.lr_raw, 0.0);
    if (out.lr_raw < -1e-6) {
        std::ostringstream os;
        os << "negative LR " << out.lr_raw << " clipped to 0";
        out.warnings.push_back(os.str());
    }
    out.null_fit = std::move(null_fit);
    return out;
}

}  // namespace

LrtResult lrt_statistic(Series data, int m0, const ModelSpec& spec, const FitConfig& config) {
    if (m0 < 1) throw InvalidParameter("M0 must be >= 1");
    return lrt_from_null(data, fit(data, with_regimes(spec, m0), config), spec, config);
}

LrtResult lrt_statistic(Series data, const FitResult& null_fit, const ModelSpec& spec, const FitConfig& config) {
    return lrt_from_null(data, null_fit, spec, config);
}

double bootstrap_p_value(double lr, const std::vector<double>& boot_stats) {
    if (boot_stats.empty()) return 1.0;
    const auto above = std::count_if(boot_stats.begin(), boot_stats.end(), [&](double s) { return s > lr; });
    return static_cast<double>(above) / static_cast<double>(boot_stats.size());
}

double bootstrap_critical_value(std::vector<double> boot_stats, double level) {
    if (boot_stats.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(boot_stats.begin(), boot_stats.end());
    const double b = static_cast<double>(boot_stats.size());
    auto rank = static_cast<std::size_t>(std::ceil((1.0 - level) * b - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, boot_stats.size());
    return boot_stats[rank - 1];
}

TestResult bootstrap_test(Series data, int m0, const ModelSpec& spec, int B, const FitConfig& config) {
    return bootstrap_test(data, lrt_statistic(data, m0, spec, config), spec, B, config);
}

TestResult bootstrap_test(Series data, const LrtResult& observed, const ModelSpec& spec, int B,
                          const FitConfig& config) {
    if (B < 1) throw InvalidParameter("B must be >= 1");
    const int m0 = observed.null_fit.spec.regimes;
    TestResult out;
    out.null_regimes = m0;
    out.lr = observed.lr;
    out.lr_raw = observed.lr_raw;
    out.B = B;
    out.seed = config.seed;
    out.null_fit = observed.null_fit;
    out.alt_fit = observed.alt_fit;
    out.warnings = observed.warnings;

    const Parameters& null_params = observed.null_fit.params;
    const std::size_t n = data.size();
    const double y0 = data[0];
    FitConfig inner = config;
    inner.threads = 1;
    inner.extra_starts.clear();

    std::vector<double> stats(static_cast<std::size_t>(B), std::numeric_limits<double>::quiet_NaN());
    std::vector<int> attempts(static_cast<std::size_t>(B), 0);
    parallel_for(static_cast<std::size_t>(B), config.threads, [&](std::size_t b) {
        for (int attempt = 0; attempt <= kBootstrapRetries; ++attempt) {
            const std::uint64_t s = attempt == 0 ? derive_seed(config.seed, {b})
                                                 : derive_seed(config.seed, {b, static_cast<std::uint64_t>(attempt)});
            attempts[b] = attempt;
            try {
                const auto y = simulate_series(null_params, n, y0, s);
                FitConfig cfg = inner;
                cfg.seed = derive_seed(s, {0});
                stats[b] = lrt_statistic(y, m0, spec, cfg).lr;
                return;
            } catch (const Error&) {
                // next attempt
            }
        }
    });

    for (std::size_t b = 0; b < stats.size(); ++b) {
        if (attempts[b] > 0) ++out.retried_replicates;
        if (std::isnan(stats[b])) ++out.failed_replicates;
        else out.boot_stats.push_back(stats[b]);
    }
    if (out.failed_replicates > 0) {
        std::ostringstream os;
        os << out.failed_replicates << " of " << B << " bootstrap draws failed and were excluded";
        out.warnings.push_back(os.str());
    }
    if (out.boot_stats.empty()) throw EstimationError("every bootstrap draw failed");
    out.p_value = bootstrap_p_value(out.lr, out.boot_stats);
    for (double level : {0.10, 0.05, 0.01})
        out.critical_values[level] = bootstrap_critical_value(out.boot_stats, level);
    return out;
}

InformationCriteria information_criteria(double loglik, int k, std::size_t n_obs) {
    if (n_obs <= 1) throw InvalidParameter("n_obs must be > 1");
    return {-2.0 * loglik + 2.0 * k, -2.0 * loglik + k * std::log(static_cast<double>(n_obs)), k};
}

InformationCriteria information_criteria(double loglik, int regimes, const ModelSpec& spec, std::size_t n_obs) {
    const int k = with_regimes(spec, regimes).parameter_dim() + (regimes - 1);
    return information_criteria(loglik, k, n_obs);
}

SelectionReport select_regimes(Series data, int m_max, const ModelSpec& spec, int B, double alpha,
                               const FitConfig& config, std::size_t n_obs) {
    if (m_max < 2) throw InvalidParameter("m_max must be >= 2");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidParameter("alpha must lie in (0, 1)");
    SelectionReport rep;
    rep.alpha = alpha;
    rep.B = B;
    rep.seed = config.seed;
    rep.n_obs = n_obs == 0 ? data.size() : n_obs;

    std::vector<LrtResult> lrts;
    rep.fits.push_back(fit(data, with_regimes(spec, 1), config));
    for (int m0 = 1; m0 < m_max; ++m0) {
        lrts.push_back(lrt_from_null(data, rep.fits.back(), spec, config));
        rep.fits.push_back(lrts.back().alt_fit);
        for (const auto& w : lrts.back().warnings) rep.warnings.push_back(w);
    }

    for (int m = 1; m <= m_max; ++m) {
        const FitResult& f = rep.fits[m - 1];
        const auto ic = information_criteria(f.loglik, m, spec, rep.n_obs);
        SelectionRow row;
        row.regimes = m;
        row.loglik = f.loglik;
        row.aic = ic.aic;
        row.bic = ic.bic;
        if (m < m_max) row.lr = lrts[m - 1].lr;
        rep.rows.push_back(row);
    }

    rep.selected_lrt = m_max;
    for (int m0 = 1; m0 < m_max; ++m0) {
        FitConfig cfg = config;
        cfg.seed = derive_seed(config.seed, {static_cast<std::uint64_t>(m0)});
        rep.tests.push_back(bootstrap_test(data, lrts[m0 - 1], spec, B, cfg));
        rep.rows[m0 - 1].p_value = rep.tests.back().p_value;
        if (rep.tests.back().p_value >= alpha) {
            rep.selected_lrt = m0;
            break;
        }
    }
    auto argmin = [&](auto key) {
        int best = 1;
        for (const auto& r : rep.rows)
            if (key(r) < key(rep.rows[best - 1])) best = r.regimes;
        return best;
    };
    rep.selected_aic = argmin([](const SelectionRow& r) { return r.aic; });
    rep.selected_bic = argmin([](const SelectionRow& r) { return r.bic; });
    return rep;
}

std::string render_selection_table(const SelectionReport& report) {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%3s %12s %10s %10s %10s %8s\n", "M", "log-like.", "AIC", "BIC", "LR", "p-val.");
    os << buf;
    for (const auto& r : report.rows) {
        char lr[32] = "", p[32] = "";
        if (r.lr) std::snprintf(lr, sizeof lr, "%.2f", *r.lr);
        if (r.p_value) std::snprintf(p, sizeof p, "%.3f", *r.p_value);
        std::snprintf(buf, sizeof buf, "%3d %12.2f %10.2f %10.2f %10s %8s\n", r.regimes, r.loglik, r.aic, r.bic, lr, p);
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "selected: LRT %d (alpha %.3g, B %d), AIC %d, BIC %d\n", report.selected_lrt,
                  report.alpha, report.B, report.selected_aic, report.selected_bic);
    os << buf;
    return os.str();
}

}  // namespace regimes
