#include "regimes/model.hpp"

#include "regimes/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace regimes {

namespace {

constexpr double kRowTolerance = 1e-12;

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

ValidationError::ValidationError(std::vector<std::string> violations)
    : ConstraintViolation([&] {
          std::ostringstream os;
          os << "parameter validation failed:";
          for (const auto& v : violations) os << "\n  - " << v;
          return os.str();
      }()),
      violations_(std::move(violations)) {}

std::string_view to_string(VarianceFamily f) {
    return f == VarianceFamily::common ? "common" : "switching";
}

VarianceFamily parse_variance_family(std::string_view s) {
    if (s == "common") return VarianceFamily::common;
    if (s == "switching") return VarianceFamily::switching;
    throw InvalidParameter("unknown variance family '" + std::string(s) +
                           "' (expected common or switching)");
}

void ModelSpec::check() const {
    if (regimes < 1) throw InvalidParameter("regime count must be >= 1");
    if (!(eps > 0.0 && eps < 0.5)) throw InvalidParameter("eps must lie in (0, 1/2)");
    if (regimes * eps > 1.0) throw InvalidParameter("eps too large for the regime count");
    if (lag_order != 1) throw InvalidParameter("only lag order 1 is supported");
    if (!(eps_sigma_factor >= 0.0)) throw InvalidParameter("eps_sigma_factor must be >= 0");
}

int ModelSpec::parameter_dim() const {
    const int m = regimes;
    const int variances = (family == VarianceFamily::switching && m > 1) ? m : 1;
    return m + 1 + variances + m * (m - 1);
}

Parameters Parameters::make(int regimes, VarianceFamily family) {
    Parameters p;
    p.transition = Matrix::Constant(regimes, regimes, 1.0 / regimes);
    p.mu = Vector::Zero(regimes);
    p.sigma2 = Vector::Ones(family == VarianceFamily::switching ? regimes : 1);
    p.xi = Vector::Constant(regimes, 1.0 / regimes);
    return p;
}

void check_shapes(const Parameters& p) {
    const auto m = p.mu.size();
    if (m < 1) throw InvalidParameter("mu must have at least one entry");
    if (p.transition.rows() != m || p.transition.cols() != m)
        throw InvalidParameter("transition matrix must be M x M");
    if (p.sigma2.size() != 1 && p.sigma2.size() != m)
        throw InvalidParameter("sigma must have length 1 or M");
    if (p.xi.size() != m) throw InvalidParameter("xi must have length M");
}

double max_row_defect(const Matrix& P) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < P.rows(); ++i)
        worst = std::max(worst, std::abs(P.row(i).sum() - 1.0));
    return worst;
}

Vector stationary_distribution(const Matrix& P) {
    const auto m = P.rows();
    if (m == 0 || P.cols() != m) throw InvalidParameter("transition matrix must be square");
    if (!all_finite(P)) throw InvalidParameter("transition matrix has non-finite entries");
    if ((P.array() < 0.0).any()) throw InvalidParameter("transition matrix has negative entries");
    for (Eigen::Index i = 0; i < m; ++i) {
        if (std::abs(P.row(i).sum() - 1.0) > kRowTolerance) {
            std::ostringstream os;
            os << "transition row " << i + 1 << " sums to " << P.row(i).sum() << ", not 1";
            throw InvalidParameter(os.str());
        }
    }
    // pi' (P - I) = 0 with one equation replaced by sum(pi) = 1.
    Matrix A = P.transpose() - Matrix::Identity(m, m);
    A.row(m - 1).setOnes();
    Vector b = Vector::Zero(m);
    b[m - 1] = 1.0;
    Vector pi = A.fullPivLu().solve(b);
    // One refinement step keeps the residual at machine precision.
    pi += A.fullPivLu().solve(b - A * pi);
    return pi;
}

RhoAlpha rho_alpha_from_transition(double p11, double p22) {
    const double denom = 2.0 - p11 - p22;
    if (!(denom > 0.0)) throw InvalidParameter("p11 + p22 must be < 2");
    return {p11 + p22 - 1.0, (1.0 - p22) / denom};
}

TwoStateTransition transition_from_rho_alpha(double rho, double alpha, double eps) {
    // 1 - p22 = alpha (1 - rho), 1 - p11 = (1 - alpha)(1 - rho)
    const double p11 = 1.0 - (1.0 - alpha) * (1.0 - rho);
    const double p22 = 1.0 - alpha * (1.0 - rho);
    const double lo = eps, hi = 1.0 - eps;
    const double slack = 1e-14;
    if (p11 < lo - slack || p11 > hi + slack || p22 < lo - slack || p22 > hi + slack) {
        std::ostringstream os;
        os << "(rho, alpha) = (" << rho << ", " << alpha << ") maps to (p11, p22) = (" << p11
           << ", " << p22 << ") outside [" << lo << ", " << hi << "]";
        throw ConstraintViolation(os.str());
    }
    return {p11, p22};
}

SplitParam reparam_split(double theta1, double theta2, double alpha) {
    return {alpha * theta1 + (1.0 - alpha) * theta2, theta1 - theta2};
}

std::pair<double, double> reparam_split_inverse(const SplitParam& s, double alpha) {
    return {s.nu + (1.0 - alpha) * s.lambda, s.nu - alpha * s.lambda};
}

double hetero_c1(double alpha) { return -(1.0 + alpha) / 3.0; }
double hetero_c2(double alpha) { return (2.0 - alpha) / 3.0; }
double b_alpha(double alpha) { return -(2.0 / 3.0) * (alpha * alpha - alpha + 1.0); }

HeteroParam reparam_hetero(const HeteroPoint& x, double alpha) {
    const auto [nu_z, lam_z] = reparam_split(x.zeta1, x.zeta2, alpha);
    const double c1 = hetero_c1(alpha), c2 = hetero_c2(alpha);
    const double l2 = lam_z * lam_z;
    // sigma1^2 - sigma2^2 = 2 lambda_sigma + ((1 - alpha) C1 + alpha C2) lambda_mu^2
    const double mix = (1.0 - alpha) * c1 + alpha * c2;
    const double lam_s = 0.5 * ((x.sigma1sq - x.sigma2sq) - mix * l2);
    const double nu_s = x.sigma1sq - (1.0 - alpha) * (2.0 * lam_s + c1 * l2);
    return {nu_z, lam_z, nu_s, lam_s};
}

HeteroPoint reparam_hetero_inverse(const HeteroParam& r, double alpha) {
    const auto [z1, z2] = reparam_split_inverse({r.nu_zeta, r.lambda_zeta}, alpha);
    const double l2 = r.lambda_zeta * r.lambda_zeta;
    const double s1 = r.nu_sigma + (1.0 - alpha) * (2.0 * r.lambda_sigma + hetero_c1(alpha) * l2);
    const double s2 = r.nu_sigma - alpha * (2.0 * r.lambda_sigma + hetero_c2(alpha) * l2);
    if (!(s1 > 0.0) || !(s2 > 0.0))
        throw ConstraintViolation("reparameterized point implies a non-positive variance");
    return HeteroPoint{z1, z2, s1, s2};
}

HomoParam reparam_homo(const HomoPoint& x, double alpha) {
    const auto [nu, lam] = reparam_split(x.theta1, x.theta2, alpha);
    return {nu, lam, x.sigmasq + alpha * (1.0 - alpha) * lam * lam};
}

HomoPoint reparam_homo_inverse(const HomoParam& r, double alpha) {
    const auto [t1, t2] = reparam_split_inverse({r.nu_theta, r.lambda}, alpha);
    const double s = r.nu_sigma - alpha * (1.0 - alpha) * r.lambda * r.lambda;
    if (!(s > 0.0)) throw ConstraintViolation("reparameterized point implies a non-positive variance");
    return HomoPoint{t1, t2, s};
}

Parameters canonicalize(const Parameters& p) {
    check_shapes(p);
    const int m = p.regimes();
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (p.mu[a] != p.mu[b]) return p.mu[a] < p.mu[b];
        return p.variance(a) < p.variance(b);
    });
    if (std::is_sorted(order.begin(), order.end())) return p;

    Parameters q = p;
    for (int i = 0; i < m; ++i) {
        q.mu[i] = p.mu[order[i]];
        q.xi[i] = p.xi[order[i]];
        if (!p.common_variance()) q.sigma2[i] = p.sigma2[order[i]];
        for (int j = 0; j < m; ++j) q.transition(i, j) = p.transition(order[i], order[j]);
    }
    return q;
}

Parameters validate(const Parameters& p, const ModelSpec& spec, double sigma_floor) {
    spec.check();
    check_shapes(p);
    std::vector<std::string> problems;
    const int m = p.regimes();
    auto fmt = [](auto&&... parts) {
        std::ostringstream os;
        (os << ... << parts);
        return os.str();
    };

    if (m != spec.regimes) problems.push_back(fmt("expected ", spec.regimes, " regimes, got ", m));
    const bool want_switching = spec.family == VarianceFamily::switching && spec.regimes > 1;
    if (want_switching && p.common_variance() && m > 1)
        problems.push_back("switching-variance model needs one variance per regime");
    if (!want_switching && !p.common_variance())
        problems.push_back("common-variance model needs exactly one variance");

    if (!p.mu.allFinite()) problems.push_back("mu has non-finite entries");
    if (!std::isfinite(p.beta)) problems.push_back("beta is not finite");
    if (!p.sigma2.allFinite()) problems.push_back("sigma has non-finite entries");
    if (!p.transition.allFinite()) problems.push_back("transition matrix has non-finite entries");
    if (!p.xi.allFinite()) problems.push_back("xi has non-finite entries");

    if (m > 1) {
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                if (p.transition(i, j) < spec.eps - 1e-12)
                    problems.push_back(fmt("transition entry below eps: p", i + 1, j + 1, " = ",
                                           p.transition(i, j), " < ", spec.eps));
            }
            const double s = p.transition.row(i).sum();
            if (std::abs(s - 1.0) > 1e-10)
                problems.push_back(fmt("transition row ", i + 1, " sums to ", s));
        }
    }
    for (Eigen::Index j = 0; j < p.sigma2.size(); ++j) {
        if (!(p.sigma2[j] > 0.0))
            problems.push_back(fmt("variance ", j + 1, " is not positive"));
        else if (sigma_floor > 0.0 && std::sqrt(p.sigma2[j]) < sigma_floor * (1.0 - 1e-12))
            problems.push_back(fmt("sigma ", j + 1, " = ", std::sqrt(p.sigma2[j]),
                                   " below floor ", sigma_floor));
    }
    if ((p.xi.array() < 0.0).any()) problems.push_back("xi has negative entries");
    if (std::abs(p.xi.sum() - 1.0) > 1e-10) problems.push_back("xi does not sum to 1");

    if (!problems.empty()) throw ValidationError(std::move(problems));
    return canonicalize(p);
}

}  // namespace regimes
