#pragma once

// Likelihood-ratio test for the number of regimes with parametric bootstrap
// critical values, information criteria and sequential selection.

#include "regimes/estimation.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace regimes {

struct LrtResult {
    double lr = 0.0;      ///< clipped at 0
    double lr_raw = 0.0;  ///< 2 (l_{M0+1} - l_{M0}) before clipping
    FitResult null_fit;
    FitResult alt_fit;
    bool escalated = false;
    std::vector<std::string> warnings;
};

/// Fits M0 and M0 + 1 regimes (the larger model also starts from splits of the
/// smaller one) and returns twice the difference of unpenalized log-likelihoods.
/// A raw value below -1e-4 triggers one refit of the larger model with twice the starts.
LrtResult lrt_statistic(Series data, int m0, const ModelSpec& spec, const FitConfig& config = {});
/// Same with a given null fit (its regime count is M0).
LrtResult lrt_statistic(Series data, const FitResult& null_fit, const ModelSpec& spec,
                        const FitConfig& config = {});

struct TestResult {
    int null_regimes = 1;
    double lr = 0.0;
    double lr_raw = 0.0;
    std::vector<double> boot_stats;  ///< successful draws in replicate order
    double p_value = 1.0;
    std::map<double, double> critical_values;  ///< level -> bootstrap critical value
    int B = 0;                  ///< requested draws
    int failed_replicates = 0;  ///< draws excluded after all retries
    int retried_replicates = 0;
    std::uint64_t seed = 0;
    FitResult null_fit;
    FitResult alt_fit;
    std::vector<std::string> warnings;

    int effective_B() const { return static_cast<int>(boot_stats.size()); }
};

inline constexpr int kBootstrapRetries = 3;

/// Share of draws strictly greater than lr; 1 when there are no draws.
double bootstrap_p_value(double lr, const std::vector<double>& boot_stats);

/// The ceil((1 - level) B)-th smallest draw.
double bootstrap_critical_value(std::vector<double> boot_stats, double level);

/// Parametric bootstrap of LR_{M0}. Draw b simulates from the fitted null with the
/// observed first value as conditioning lag, on RNG stream (config.seed, b).
/// config.threads sets the number of workers over draws.
TestResult bootstrap_test(Series data, int m0, const ModelSpec& spec, int B, const FitConfig& config = {});
TestResult bootstrap_test(Series data, const LrtResult& observed, const ModelSpec& spec, int B,
                          const FitConfig& config = {});

struct InformationCriteria {
    double aic;
    double bic;
    int k;  ///< model parameters plus M - 1 initial-distribution probabilities
};

InformationCriteria information_criteria(double loglik, int regimes, const ModelSpec& spec, std::size_t n_obs);
/// Same with an explicit parameter count.
InformationCriteria information_criteria(double loglik, int k, std::size_t n_obs);

struct SelectionRow {
    int regimes = 1;
    double loglik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    std::optional<double> lr;       ///< LR of M against M + 1
    std::optional<double> p_value;  ///< only for tested rows
};

struct SelectionReport {
    std::vector<SelectionRow> rows;
    int selected_lrt = 1;
    int selected_aic = 1;
    int selected_bic = 1;
    double alpha = 0.05;
    int B = 0;
    std::size_t n_obs = 0;
    std::uint64_t seed = 0;
    std::vector<FitResult> fits;
    std::vector<TestResult> tests;
    std::vector<std::string> warnings;
};

/// Sequential tests of M0 = 1, 2, ... against M0 + 1, stopping at the first p-value
/// >= alpha; selected_lrt = m_max when every test rejects. AIC and BIC are reported
/// for all M <= m_max. n_obs = 0 uses the data length.
SelectionReport select_regimes(Series data, int m_max, const ModelSpec& spec, int B, double alpha,
                               const FitConfig& config = {}, std::size_t n_obs = 0);

/// Aligned table with columns M, log-like., AIC, BIC, LR, p-val.
std::string render_selection_table(const SelectionReport& report);

}  // namespace regimes
