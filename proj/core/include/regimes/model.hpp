#pragma once

// Parameter containers and transition-matrix algebra for Markov switching
// AR(1) models  y_k = mu_{X_k} + beta * y_{k-1} + e_k,  e_k ~ N(0, sigma2_{X_k}).

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>

namespace regimes {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class VarianceFamily {
    common,     ///< one variance shared by all regimes
    switching,  ///< one variance per regime
};

std::string_view to_string(VarianceFamily f);
VarianceFamily parse_variance_family(std::string_view s);

struct ModelSpec {
    int regimes = 1;
    VarianceFamily family = VarianceFamily::common;
    int lag_order = 1;
    /// Floor on every transition probability, in (0, 1/2).
    double eps = 0.05;
    /// sigma_j >= eps_sigma_factor * sigma_hat, sigma_hat from the one-regime fit.
    double eps_sigma_factor = 0.01;

    /// Throws InvalidParameter on M < 1, eps outside (0, 1/2), lag order other than 1,
    /// or a negative sigma factor.
    void check() const;
    /// Number of free parameters in the model (transition rows contribute M-1 each).
    int parameter_dim() const;
};

struct Parameters {
    Matrix transition;  ///< M x M, row-stochastic, entry (i, j) = P(X_k = j | X_{k-1} = i)
    Vector mu;          ///< regime intercepts
    double beta = 0.0;  ///< AR(1) coefficient shared across regimes
    Vector sigma2;      ///< variances, length 1 (common) or M (switching)
    Vector xi;          ///< initial distribution of X_0

    int regimes() const { return static_cast<int>(mu.size()); }
    bool common_variance() const { return sigma2.size() == 1; }
    double variance(int j) const { return common_variance() ? sigma2[0] : sigma2[j]; }

    /// Uniform xi, shapes consistent with `regimes`.
    static Parameters make(int regimes, VarianceFamily family);
};

/// Throws InvalidParameter unless the shapes of `p` are internally consistent.
void check_shapes(const Parameters& p);

/// Unique invariant distribution pi of a row-stochastic matrix (pi P = pi).
Vector stationary_distribution(const Matrix& P);

struct RhoAlpha {
    double rho;    ///< p11 + p22 - 1
    double alpha;  ///< (1 - p22) / (2 - p11 - p22), stationary P(X = 1)
};

struct TwoStateTransition {
    double p11;
    double p22;
};

RhoAlpha rho_alpha_from_transition(double p11, double p22);
/// Inverse map; throws ConstraintViolation if the result leaves [eps, 1 - eps].
TwoStateTransition transition_from_rho_alpha(double rho, double alpha, double eps = 0.0);

// Location split: lambda = theta1 - theta2, nu = alpha theta1 + (1 - alpha) theta2.
struct SplitParam {
    double nu;
    double lambda;
};
SplitParam reparam_split(double theta1, double theta2, double alpha);
std::pair<double, double> reparam_split_inverse(const SplitParam& s, double alpha);

/// Split of (location, variance) pairs for two regimes with regime-specific variances.
struct HeteroParam {
    double nu_zeta;
    double lambda_zeta;
    double nu_sigma;
    double lambda_sigma;
};
struct HeteroPoint {
    double zeta1, zeta2, sigma1sq, sigma2sq;
};
double hetero_c1(double alpha);  ///< -(1 + alpha) / 3
double hetero_c2(double alpha);  ///< (2 - alpha) / 3
/// -(2/3)(alpha^2 - alpha + 1), strictly negative.
double b_alpha(double alpha);
HeteroParam reparam_hetero(const HeteroPoint& x, double alpha);
/// Throws ConstraintViolation when a reconstructed variance is not positive.
HeteroPoint reparam_hetero_inverse(const HeteroParam& r, double alpha);

/// Split with a common variance: sigma^2 = nu_sigma - alpha (1 - alpha) lambda^2.
struct HomoParam {
    double nu_theta;
    double lambda;
    double nu_sigma;
};
struct HomoPoint {
    double theta1, theta2, sigmasq;
};
HomoParam reparam_homo(const HomoPoint& x, double alpha);
HomoPoint reparam_homo_inverse(const HomoParam& r, double alpha);

/// Permutes regimes so that mu is ascending (ties broken by ascending variance);
/// transition rows/cols, variances and xi follow the same permutation.
Parameters canonicalize(const Parameters& p);

/// Checks every constraint and returns the canonical form. `sigma_floor` is a
/// lower bound on each standard deviation (0 disables the check). Throws
/// ValidationError listing each violation.
Parameters validate(const Parameters& p, const ModelSpec& spec, double sigma_floor = 0.0);

/// Largest |row sum - 1| over the rows of P.
double max_row_defect(const Matrix& P);

}  // namespace regimes
