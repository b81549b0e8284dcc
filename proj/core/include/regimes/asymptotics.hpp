#pragma once

// Generalized scores, information kernels and cone-constrained quadratic
// maximization for simulating the limiting null distribution of LR_n when the
// null model has one regime.

#include "regimes/estimation.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace regimes {

enum class ScoreFamily {
    nonnormal,      ///< generic density in theta = mu; here a normal with known variance
    hetero_normal,  ///< normal with regime-specific variances
    homo_normal,    ///< normal with a common variance
};

std::string_view to_string(ScoreFamily f);
ScoreFamily parse_score_family(std::string_view s);

/// Ratios of derivatives of the normal density to the density at residual e,
/// variance s2; d_mu_k is d^k f / d mu^k divided by f.
struct NormalRatios {
    double d_mu1, d_mu2, d_mu3, d_mu4;
    double d_s2;     ///< d f / d sigma^2
    double d_s2s2;   ///< d^2 f / (d sigma^2)^2
    double d_mu_s2;  ///< d^2 f / d mu d sigma^2
};

NormalRatios normal_ratios(double residual, double s2);

/// Per-observation ratios at the one-regime fit; column k refers to y_{k+1}.
struct DerivativeRatios {
    Vector d_mu1, d_mu2, d_mu3, d_mu4, d_s2, d_s2s2, d_mu_s2;
    Vector d_beta;  ///< y_{k-1} * d_mu1
};

DerivativeRatios normal_derivative_ratios(Series data, const FitResult& fit1,
                                          std::vector<std::string>* warnings = nullptr);

/// zeta_k = sum_{t<k} rho^{k-t-1} 2 u_t u_k, so zeta_1 = 0.
Vector zeta_series(const Vector& u, double rho);

/// `points` equispaced values on [-1 + 2 eps, 1 - 2 eps], with 0 inserted if absent.
std::vector<double> default_rho_grid(double eps, int points = 41);

struct ScoreSet {
    ScoreFamily family = ScoreFamily::homo_normal;
    std::vector<double> rho_grid;
    std::vector<std::string> eta_names;
    std::vector<std::string> lambda_names;
    Matrix s_eta;                   ///< n x d_eta
    std::vector<Matrix> s_lambda;   ///< per rho, n x q_lambda
    std::vector<Vector> zeta;       ///< per rho
};

ScoreSet build_scores(Series data, const FitResult& fit1, ScoreFamily family, const std::vector<double>& rho_grid);

struct AsymptoticNull {
    ScoreFamily family = ScoreFamily::homo_normal;
    std::vector<double> rho_grid;
    int q = 0;                          ///< q_lambda
    Matrix I_eta;
    std::vector<Matrix> I_lambda_eta;   ///< per rho, q x d_eta
    /// Joint covariance of (G_rho1, ..., G_rhoG), a (G q) x (G q) matrix whose
    /// (a, b) block is the projected kernel I_{lambda.eta}(rho_a, rho_b).
    Matrix kernel;
    std::vector<double> min_eigenvalue; ///< per rho, of the full (eta, lambda) information
    std::optional<double> b_alpha;
    std::vector<double> draws;
    std::map<double, double> critical_values;
    int R = 0;
    std::uint64_t seed = 0;

    Matrix I_lambda_dot_eta(std::size_t a) const { return kernel.block(a * q, a * q, q, q); }
    Matrix I_lambda_dot_eta(std::size_t a, std::size_t b) const { return kernel.block(a * q, b * q, q, q); }
};

/// Sample-average information kernels. Throws EstimationError naming the
/// collinear columns when I_eta is singular.
AsymptoticNull info_kernels(const ScoreSet& scores);

/// Residual scores s_lambda - I_lambda_eta I_eta^{-1} s_eta for grid point a (n x q).
Matrix residual_scores(const ScoreSet& scores, const AsymptoticNull& kernels, std::size_t a);

enum class ConeKind {
    v_cone,          ///< {t >= 0}, q = 1
    lambda1_hetero,  ///< t_3 <= 0, other coordinates free
    lambda2_hetero,  ///< t = r^2 (rho cos^2 phi, cos phi sin phi, sin^2 phi)
    lambda1_homo,    ///< t_3 <= 0, other coordinates free
    lambda2_homo,    ///< t = r^2 (rho, 0, 0)
};

struct Cone {
    ConeKind kind;
    double rho = 0.0;
};

struct ConeProjection {
    Vector t;        ///< minimizer of (t - Z)' I (t - Z) over the cone
    double r_min;
    double value;    ///< t' I t, the contribution to the limiting LR
};

/// Throws InvalidParameter if I is not positive semidefinite or sizes disagree.
ConeProjection cone_project(const Vector& Z, const Matrix& I, const Cone& cone);

/// Limit statistic for one joint draw g = (G_rho1, ..., G_rhoG).
double asymptotic_statistic(const AsymptoticNull& kernels, const Vector& g);

/// R draws of the limit statistic; deterministic given seed regardless of threads.
/// Critical values at levels 0.10, 0.05, 0.01.
AsymptoticNull simulate_asymptotic_null(AsymptoticNull kernels, int R, std::uint64_t seed, unsigned threads = 1);

}  // namespace regimes
