#pragma once

// Conditional likelihood of a Markov switching AR(1) model.
//
// A series y_0, ..., y_n of length n + 1 is scored conditional on y_0 and on
// X_0 ~ xi: the log-likelihood has n terms, one per y_1..y_n.

#include "regimes/model.hpp"

#include <span>
#include <vector>

namespace regimes {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Series = std::span<const double>;

struct FilterResult {
    double loglik = 0.0;
    RowMatrix filtered;    ///< n x M, P(X_k = j | y_1..y_k)
    RowMatrix predictive;  ///< n x M, P(X_k = j | y_1..y_{k-1})
    Vector per_obs_loglik; ///< length n, log p(y_k | past)
};

struct SmoothResult {
    RowMatrix smoothed;  ///< n x M, P(X_k = j | y_1..y_n)
    /// n blocks of M x M (row-major), block k-1 holds P(X_{k-1} = i, X_k = j | y_1..y_n)
    /// for k = 1..n. Block 0 pairs the latent X_0 with X_1.
    std::vector<double> pair_smoothed;
    int regimes = 0;

    double pair(Eigen::Index k, int i, int j) const {
        return pair_smoothed[static_cast<std::size_t>((k * regimes + i) * regimes + j)];
    }
};

/// Normal density of y_k in regime j given the lagged value. Throws InvalidParameter
/// for a non-positive variance.
double regime_density(double y, double y_lag, const Parameters& params, int j);

/// Forward (Hamilton) recursion. Throws EvaluationError if every regime density
/// vanishes at some step, or InvalidParameter on malformed input.
FilterResult filter(Series data, const Parameters& params);
FilterResult filter(Series data, const Parameters& params, const Vector& xi);

/// Log-likelihood only; same recursion as filter() without storing the paths.
double loglik(Series data, const Parameters& params);
double loglik(Series data, const Parameters& params, const Vector& xi);

/// Direct sum over all M^n regime paths. Refuses (TooLarge) when M^n > 1e6.
double brute_force_loglik(Series data, const Parameters& params);
double brute_force_loglik(Series data, const Parameters& params, const Vector& xi);

/// Backward pass over a filter result.
SmoothResult smooth(Series data, const Parameters& params);
SmoothResult smooth(Series data, const Parameters& params, const Vector& xi);
SmoothResult smooth(const FilterResult& fr, const Parameters& params, const Vector& xi);

/// -a_n * sum_j (sigma_hat^2 / sigma_j^2 + log(sigma_j^2 / sigma_hat^2) - 1), always <= 0.
double variance_penalty(const Parameters& params, double sigma_hat, double a_n);

/// Filter log-likelihood plus variance_penalty().
double penalized_loglik(Series data, const Parameters& params, const Vector& xi,
                        double sigma_hat, double a_n);

/// Default penalty weight a_n = 20 / sqrt(n) for n scored observations.
double default_penalty_weight(std::size_t n_scored);

struct InitialDistributionGap {
    double gap;    ///< max_x0 |l(theta, delta_x0) - l(theta, uniform xi)|
    double rho;    ///< 1 - min_ij p_ij / max_ij p_ij
    double bound;  ///< 2 / (1 - rho)^2
};

/// Sensitivity of the log-likelihood to the initial regime, with the ergodicity bound.
InitialDistributionGap initial_distribution_bound_check(Series data, const Parameters& params);

}  // namespace regimes
