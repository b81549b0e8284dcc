#pragma once

// Penalized maximum likelihood for Markov switching AR(1) models: closed-form
// one-regime fit, EM with exact constrained M-steps, multi-start screening and a
// quasi-Newton polish on an unconstrained transform.

#include "regimes/error.hpp"
#include "regimes/likelihood.hpp"
#include "regimes/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace regimes {

inline constexpr std::uint64_t kDefaultSeed = 20180128;

struct FitConfig {
    int n_starts = 20;
    double em_tol = 1e-8;  ///< relative change in the penalized objective
    int em_max_iter = 500;
    bool polish = true;
    std::uint64_t seed = kDefaultSeed;
    bool penalty_on = true;  ///< variance penalty, switching-variance models only
    /// Every start first runs this many EM steps; only the best `n_refine`
    /// continue to convergence.
    int screen_iter = 20;
    int n_refine = 3;
    unsigned threads = 1;
    /// Additional deterministic starting points (e.g. nested from a smaller model).
    std::vector<Parameters> extra_starts;

    void check() const;
};

struct StandardErrors {
    std::vector<std::string> names;  ///< mu1.., beta, sigma[1..] (standard deviations), p11, p12, ...
    Vector values;
};

struct FitResult {
    ModelSpec spec;
    Parameters params;
    double loglik = 0.0;            ///< unpenalized
    double penalized_loglik = 0.0;  ///< objective actually maximized
    bool converged = false;
    int n_iterations = 0;
    int start_index = -1;  ///< -1 for the closed-form one-regime fit
    int failed_starts = 0;
    bool polished = false;
    bool degenerate = false;  ///< a variance sits on its floor
    double sigma_hat = 0.0;   ///< one-regime reference standard deviation
    double sigma_floor = 0.0;
    double penalty_weight = 0.0;
    std::optional<StandardErrors> se;
    std::vector<std::string> warnings;
};

/// Exact least-squares / ML fit of y_k = mu + beta y_{k-1} + e_k. Throws
/// EstimationError for a degenerate regressor. A zero residual variance is
/// clipped to a tiny floor and flagged through `degenerate`.
FitResult fit_one_regime(Series data);

struct PenaltyContext {
    double sigma_hat = 1.0;
    double a_n = 0.0;          ///< 0 disables the variance penalty
    double sigma_floor = 0.0;  ///< lower bound on each standard deviation
    double eps = 0.0;          ///< lower bound on each transition probability
};

/// Raised by em_step when a regime receives (almost) no posterior weight.
class EmptyRegime : public EstimationError {
public:
    explicit EmptyRegime(int regime);
    int regime() const noexcept { return regime_; }

private:
    int regime_;
};

/// One EM (ECM for switching variances) update. The transition and variance
/// updates maximize their M-step objectives subject to the floors in `ctx`.
Parameters em_step(Series data, const Parameters& params, const Vector& xi, const PenaltyContext& ctx);

/// Maximizer over v of -(W log v + S / v) / 2 - a_n (sigma_hat^2 / v + log v), i.e.
/// (S + 2 a_n sigma_hat^2) / (W + 2 a_n), for weighted residual sum of squares S and weight W.
double penalized_variance_update(double weighted_ssr, double weight, double sigma_hat, double a_n);

/// Row-wise maximizer of sum_j counts_j log p_j subject to p_j >= eps, sum p = 1.
Vector constrained_transition_row(const Eigen::Ref<const Vector>& counts, double eps);

/// Best penalized fit over all starts; canonicalized. Throws EstimationError if
/// every start fails.
FitResult fit(Series data, const ModelSpec& spec, const FitConfig& config = {});

/// Standard errors from the numerical Hessian of the unpenalized log-likelihood
/// on a logit/log transform, mapped back by the delta method. Returns nullopt
/// (and appends a warning) when the Hessian is not negative definite.
std::optional<StandardErrors> standard_errors(Series data, const FitResult& fit,
                                              std::vector<std::string>* warnings = nullptr);

/// Starting points for an (M+1)-regime fit obtained by splitting each regime of
/// an M-regime fit. The first split of regime j reproduces the M-regime
/// likelihood when M = 1.
std::vector<Parameters> nested_starts(const Parameters& smaller, const ModelSpec& larger_spec,
                                      double sigma_hat);

}  // namespace regimes
