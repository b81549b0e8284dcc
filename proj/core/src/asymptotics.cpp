#include "regimes/asymptotics.hpp"

#include "regimes/error.hpp"
#include "regimes/parallel.hpp"
#include "regimes/rng.hpp"
#include "regimes/testing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace regimes {

namespace {

constexpr std::size_t kChunk = 1000;
constexpr int kPhiGrid = 128;

// A_k = sum_{t<k} rho^{k-t} x_t
Vector discounted_past(const Vector& x, double rho) {
    Vector a = Vector::Zero(x.size());
    for (Eigen::Index k = 1; k < x.size(); ++k) a[k] = rho * (a[k - 1] + x[k - 1]);
    return a;
}

void require_psd(const Matrix& I) {
    if (I.rows() != I.cols()) throw InvalidParameter("information matrix must be square");
    if (!I.allFinite()) throw InvalidParameter("information matrix has non-finite entries");
    if ((I - I.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + I.cwiseAbs().maxCoeff()))
        throw InvalidParameter("information matrix must be symmetric");
    const Eigen::SelfAdjointEigenSolver<Matrix> es(I, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -1e-10 * scale)
        throw InvalidParameter("information matrix is not positive semidefinite");
}

double quad(const Vector& a, const Matrix& I) { return a.dot(I * a); }

bool negligible(const Matrix& I) { return I.cwiseAbs().maxCoeff() <= 1e-300; }

// min (t - Z)' I (t - Z) subject to t_j <= 0 for j in `nonpositive`, by enumerating active sets.
ConeProjection sign_cone(const Vector& Z, const Matrix& I, const std::vector<int>& nonpositive) {
    const int q = static_cast<int>(Z.size());
    const int c = static_cast<int>(nonpositive.size());
    ConeProjection best{Vector::Zero(q), std::numeric_limits<double>::infinity(), 0.0};
    for (unsigned mask = 0; mask < (1u << c); ++mask) {
        std::vector<int> fixed, free;
        for (int i = 0; i < c; ++i)
            if (mask & (1u << i)) fixed.push_back(nonpositive[i]);
        for (int j = 0; j < q; ++j)
            if (std::find(fixed.begin(), fixed.end(), j) == fixed.end()) free.push_back(j);
        Vector t = Z;
        for (int j : fixed) t[j] = 0.0;
        if (!fixed.empty() && !free.empty()) {
            Matrix Iff(free.size(), free.size());
            Matrix Ifa(free.size(), fixed.size());
            Vector za(fixed.size());
            for (std::size_t a = 0; a < free.size(); ++a) {
                for (std::size_t b = 0; b < free.size(); ++b) Iff(a, b) = I(free[a], free[b]);
                for (std::size_t b = 0; b < fixed.size(); ++b) Ifa(a, b) = I(free[a], fixed[b]);
            }
            for (std::size_t b = 0; b < fixed.size(); ++b) za[b] = Z[fixed[b]];
            const Vector shift = Iff.ldlt().solve(Ifa * za);
            for (std::size_t a = 0; a < free.size(); ++a) t[free[a]] = Z[free[a]] + shift[a];
        }
        bool feasible = true;
        for (int j : nonpositive)
            if (t[j] > 1e-14 * (1.0 + std::abs(Z[j]))) feasible = false;
        if (!feasible) continue;
        const double r = quad(t - Z, I);
        if (r < best.r_min) best = {t, r, quad(t, I)};
    }
    return best;
}

// Best nonnegative multiple of direction d: value (d'G)_+^2 / d'Id with G = I Z.
ConeProjection ray(const Vector& Z, const Matrix& I, const Vector& d) {
    const Vector G = I * Z;
    const double dId = quad(d, I);
    const double zIz = Z.dot(G);
    if (!(dId > 1e-300)) return {Vector::Zero(Z.size()), zIz, 0.0};
    const double s = std::max(d.dot(G), 0.0) / dId;
    const double value = s * s * dId;
    return {s * d, zIz - value, value};
}

Vector hetero_direction(double rho, double phi) {
    const double c = std::cos(phi), s = std::sin(phi);
    return Vector{{rho * c * c, c * s, s * s}};
}

double hetero_ray_value(const Vector& G, const Matrix& I, double rho, double phi) {
    const Vector d = hetero_direction(rho, phi);
    const double dId = quad(d, I);
    if (!(dId > 1e-300)) return 0.0;
    const double dg = std::max(d.dot(G), 0.0);
    return dg * dg / dId;
}

// Maximizes the ray value over phi in [0, pi): dense grid plus golden-section refinement.
double best_phi(const Vector& G, const Matrix& I, double rho) {
    const double h = std::numbers::pi / kPhiGrid;
    std::vector<double> vals(kPhiGrid);
    for (int i = 0; i < kPhiGrid; ++i) vals[i] = hetero_ray_value(G, I, rho, i * h);
    std::vector<int> idx(kPhiGrid);
    for (int i = 0; i < kPhiGrid; ++i) idx[i] = i;
    std::partial_sort(idx.begin(), idx.begin() + 3, idx.end(), [&](int a, int b) { return vals[a] > vals[b]; });
    double best = idx[0] * h, best_val = vals[idx[0]];
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int k = 0; k < 3; ++k) {
        if (vals[idx[k]] <= 0.0) break;
        double a = (idx[k] - 1) * h, b = (idx[k] + 1) * h;
        double x1 = b - g * (b - a), x2 = a + g * (b - a);
        double f1 = hetero_ray_value(G, I, rho, x1), f2 = hetero_ray_value(G, I, rho, x2);
        for (int it = 0; it < 60 && b - a > 1e-12; ++it) {
            if (f1 < f2) {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = hetero_ray_value(G, I, rho, x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = hetero_ray_value(G, I, rho, x1);
            }
        }
        const double x = 0.5 * (a + b);
        const double v = hetero_ray_value(G, I, rho, x);
        if (v > best_val) {
            best_val = v;
            best = x;
        }
    }
    return best;
}

std::size_t zero_index(const std::vector<double>& grid) {
    for (std::size_t a = 0; a < grid.size(); ++a)
        if (std::abs(grid[a]) < 1e-14) return a;
    throw InvalidParameter("rho grid must contain 0");
}

double lambda1_value(const Vector& G, const Matrix& I) {
    if (negligible(I)) return 0.0;
    const Eigen::LDLT<Matrix> ldlt(I);
    const Vector Z = ldlt.solve(G);
    return sign_cone(Z, I, {2}).value;
}

std::string collinear_columns(const Matrix& S, const std::vector<std::string>& names) {
    Eigen::ColPivHouseholderQR<Matrix> qr(S);
    qr.setThreshold(1e-10);
    const auto rank = qr.rank();
    std::ostringstream os;
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index i = rank; i < S.cols(); ++i) {
        if (i > rank) os << ", ";
        os << names[static_cast<std::size_t>(perm[i])];
    }
    return os.str();
}

}  // namespace

std::string_view to_string(ScoreFamily f) {
    switch (f) {
        case ScoreFamily::nonnormal: return "nonnormal";
        case ScoreFamily::hetero_normal: return "hetero_normal";
        case ScoreFamily::homo_normal: return "homo_normal";
    }
    return "unknown";
}

ScoreFamily parse_score_family(std::string_view s) {
    if (s == "nonnormal") return ScoreFamily::nonnormal;
    if (s == "hetero_normal" || s == "hetero" || s == "switching") return ScoreFamily::hetero_normal;
    if (s == "homo_normal" || s == "homo" || s == "common") return ScoreFamily::homo_normal;
    throw InvalidParameter("unknown score family: " + std::string(s));
}

NormalRatios normal_ratios(double residual, double s2) {
    if (!(s2 > 0.0)) throw InvalidParameter("variance must be positive");
    const double sd = std::sqrt(s2);
    const double z = residual / sd;
    const double z2 = z * z;
    NormalRatios r;
    r.d_mu1 = z / sd;
    r.d_mu2 = (z2 - 1.0) / s2;
    r.d_mu3 = (z2 * z - 3.0 * z) / (s2 * sd);
    r.d_mu4 = (z2 * z2 - 6.0 * z2 + 3.0) / (s2 * s2);
    r.d_s2 = 0.5 * r.d_mu2;
    r.d_s2s2 = 0.25 * r.d_mu4;
    r.d_mu_s2 = 0.5 * r.d_mu3;
    return r;
}

DerivativeRatios normal_derivative_ratios(Series data, const FitResult& fit1, std::vector<std::string>* warnings) {
    if (fit1.params.regimes() != 1) throw InvalidParameter("derivative ratios need a one-regime fit");
    if (data.size() < 2) throw InvalidParameter("series too short");
    if (fit1.degenerate && warnings) warnings->push_back("one-regime variance sits on its floor");
    const auto n = static_cast<Eigen::Index>(data.size() - 1);
    const double mu = fit1.params.mu[0], beta = fit1.params.beta, s2 = fit1.params.variance(0);
    DerivativeRatios d;
    for (Vector* v : {&d.d_mu1, &d.d_mu2, &d.d_mu3, &d.d_mu4, &d.d_s2, &d.d_s2s2, &d.d_mu_s2, &d.d_beta})
        v->resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double lag = data[k];
        const NormalRatios r = normal_ratios(data[k + 1] - mu - beta * lag, s2);
        d.d_mu1[k] = r.d_mu1;
        d.d_mu2[k] = r.d_mu2;
        d.d_mu3[k] = r.d_mu3;
        d.d_mu4[k] = r.d_mu4;
        d.d_s2[k] = r.d_s2;
        d.d_s2s2[k] = r.d_s2s2;
        d.d_mu_s2[k] = r.d_mu_s2;
        d.d_beta[k] = lag * r.d_mu1;
    }
    return d;
}

Vector zeta_series(const Vector& u, double rho) {
    if (!(std::abs(rho) < 1.0)) throw InvalidParameter("|rho| must be < 1");
    Vector z = Vector::Zero(u.size());
    double a = 0.0;
    for (Eigen::Index k = 1; k < u.size(); ++k) {
        a = rho * a + u[k - 1];
        z[k] = 2.0 * a * u[k];
    }
    return z;
}

std::vector<double> default_rho_grid(double eps, int points) {
    if (!(eps > 0.0 && eps < 0.5)) throw InvalidParameter("eps must lie in (0, 1/2)");
    if (points < 1) throw InvalidParameter("grid needs at least one point");
    const double lo = -1.0 + 2.0 * eps, hi = 1.0 - 2.0 * eps;
    std::vector<double> g;
    for (int i = 0; i < points; ++i) {
        const double v = points == 1 ? 0.0 : lo + (hi - lo) * i / (points - 1);
        g.push_back(std::abs(v) < 1e-12 ? 0.0 : v);
    }
    if (std::none_of(g.begin(), g.end(), [](double v) { return v == 0.0; })) {
        g.push_back(0.0);
        std::sort(g.begin(), g.end());
    }
    return g;
}

ScoreSet build_scores(Series data, const FitResult& fit1, ScoreFamily family, const std::vector<double>& rho_grid) {
    if (rho_grid.empty()) throw InvalidParameter("rho grid is empty");
    for (double r : rho_grid)
        if (!(std::abs(r) < 1.0)) throw InvalidParameter("rho grid values must satisfy |rho| < 1");
    const DerivativeRatios d = normal_derivative_ratios(data, fit1);
    const auto n = d.d_mu1.size();
    ScoreSet s;
    s.family = family;
    s.rho_grid = rho_grid;
    const Vector& u = d.d_mu1;
    const Vector& v = d.d_s2;

    switch (family) {
        case ScoreFamily::nonnormal:
            s.eta_names = {"beta", "mu"};
            s.s_eta.resize(n, 2);
            s.s_eta << d.d_beta, u;
            s.lambda_names = {"v(lambda)"};
            break;
        case ScoreFamily::hetero_normal:
            s.eta_names = {"beta", "mu", "sigma2"};
            s.s_eta.resize(n, 3);
            s.s_eta << d.d_beta, u, v;
            s.lambda_names = {"rho*lambda_mu^2", "lambda_mu*lambda_sigma", "lambda_sigma^2"};
            break;
        case ScoreFamily::homo_normal:
            s.eta_names = {"beta", "sigma2", "mu"};
            s.s_eta.resize(n, 3);
            s.s_eta << d.d_beta, v, u;
            s.lambda_names = {"rho*lambda_mu^2", "lambda_mu^3", "lambda_mu^4"};
            break;
    }

    for (double rho : rho_grid) {
        Vector zeta = zeta_series(u, rho);
        Matrix sl;
        switch (family) {
            case ScoreFamily::nonnormal:
                sl = (0.5 * d.d_mu2 + 0.5 * rho * zeta).eval();
                break;
            case ScoreFamily::hetero_normal: {
                const Vector au = discounted_past(u, rho), av = discounted_past(v, rho);
                sl.resize(n, 3);
                sl.col(0) = 0.5 * zeta;
                sl.col(1) = 2.0 * (d.d_mu_s2 + au.cwiseProduct(v) + av.cwiseProduct(u));
                sl.col(2) = 2.0 * (d.d_s2s2 + 2.0 * av.cwiseProduct(v));
                break;
            }
            case ScoreFamily::homo_normal:
                sl.resize(n, 3);
                sl.col(0) = 0.5 * zeta;
                sl.col(1) = d.d_mu3 / 6.0;
                sl.col(2) = d.d_mu4 / 24.0;
                break;
        }
        s.s_lambda.push_back(std::move(sl));
        s.zeta.push_back(std::move(zeta));
    }
    return s;
}

AsymptoticNull info_kernels(const ScoreSet& scores) {
    const auto n = scores.s_eta.rows();
    const auto de = scores.s_eta.cols();
    if (scores.s_lambda.empty()) throw InvalidParameter("score set has no rho grid");
    const auto q = scores.s_lambda.front().cols();
    if (n < 10 * (de + q)) throw InvalidParameter("too few observations for the information kernels");
    const double inv_n = 1.0 / static_cast<double>(n);

    AsymptoticNull out;
    out.family = scores.family;
    out.rho_grid = scores.rho_grid;
    out.q = static_cast<int>(q);
    out.I_eta = scores.s_eta.transpose() * scores.s_eta * inv_n;
    const Eigen::SelfAdjointEigenSolver<Matrix> es(out.I_eta, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 1e-10 * std::max(1.0, es.eigenvalues().maxCoeff()))
        throw EstimationError("I_eta is singular; collinear score columns: " +
                              collinear_columns(scores.s_eta, scores.eta_names));
    const Eigen::LLT<Matrix> llt(out.I_eta);

    const auto G = scores.s_lambda.size();
    Matrix resid(n, static_cast<Eigen::Index>(G) * q);
    for (std::size_t a = 0; a < G; ++a) {
        const Matrix& sl = scores.s_lambda[a];
        Matrix ile = sl.transpose() * scores.s_eta * inv_n;
        const Matrix coef = llt.solve(ile.transpose());  // d_eta x q
        resid.middleCols(static_cast<Eigen::Index>(a) * q, q) = sl - scores.s_eta * coef;
        out.I_lambda_eta.push_back(std::move(ile));

        Matrix full(n, de + q);
        full << scores.s_eta, sl;
        const Eigen::SelfAdjointEigenSolver<Matrix> fe(full.transpose() * full * inv_n, Eigen::EigenvaluesOnly);
        out.min_eigenvalue.push_back(fe.eigenvalues().minCoeff());
    }
    out.kernel = resid.transpose() * resid * inv_n;
    out.kernel = 0.5 * (out.kernel + out.kernel.transpose()).eval();
    if (scores.family == ScoreFamily::hetero_normal) out.b_alpha = b_alpha(0.5);
    return out;
}

Matrix residual_scores(const ScoreSet& scores, const AsymptoticNull& kernels, std::size_t a) {
    const Eigen::LLT<Matrix> llt(kernels.I_eta);
    const Matrix coef = llt.solve(kernels.I_lambda_eta.at(a).transpose());
    return scores.s_lambda.at(a) - scores.s_eta * coef;
}

ConeProjection cone_project(const Vector& Z, const Matrix& I, const Cone& cone) {
    if (I.rows() != Z.size()) throw InvalidParameter("cone_project: dimension mismatch");
    require_psd(I);
    switch (cone.kind) {
        case ConeKind::v_cone: {
            if (Z.size() != 1) throw InvalidParameter("v_cone is implemented for q = 1");
            Vector t{{std::max(Z[0], 0.0)}};
            return {t, quad(t - Z, I), quad(t, I)};
        }
        case ConeKind::lambda1_hetero:
        case ConeKind::lambda1_homo:
            if (Z.size() != 3) throw InvalidParameter("cone needs q = 3");
            return sign_cone(Z, I, {2});
        case ConeKind::lambda2_hetero: {
            if (Z.size() != 3) throw InvalidParameter("cone needs q = 3");
            const double phi = best_phi(I * Z, I, cone.rho);
            return ray(Z, I, hetero_direction(cone.rho, phi));
        }
        case ConeKind::lambda2_homo:
            if (Z.size() != 3) throw InvalidParameter("cone needs q = 3");
            return ray(Z, I, Vector{{cone.rho, 0.0, 0.0}});
    }
    throw InvalidParameter("unknown cone");
}

double asymptotic_statistic(const AsymptoticNull& k, const Vector& g) {
    const auto G = k.rho_grid.size();
    const int q = k.q;
    double best = 0.0;
    if (k.family == ScoreFamily::nonnormal) {
        for (std::size_t a = 0; a < G; ++a) {
            const double I = k.kernel(a * q, a * q);
            const double x = std::max(g[a * q], 0.0);
            if (I > 1e-300) best = std::max(best, x * x / I);
        }
        return best;
    }
    const std::size_t z = zero_index(k.rho_grid);
    best = lambda1_value(g.segment(z * q, q), k.I_lambda_dot_eta(z));
    for (std::size_t a = 0; a < G; ++a) {
        const Matrix I = k.I_lambda_dot_eta(a);
        const Vector ga = g.segment(a * q, q);
        const double rho = k.rho_grid[a];
        double v = 0.0;
        if (k.family == ScoreFamily::hetero_normal) {
            v = hetero_ray_value(ga, I, rho, best_phi(ga, I, rho));
        } else {
            const Vector d{{rho, 0.0, 0.0}};
            const double dId = quad(d, I);
            const double dg = std::max(d.dot(ga), 0.0);
            if (dId > 1e-300) v = dg * dg / dId;
        }
        best = std::max(best, v);
    }
    return best;
}

AsymptoticNull simulate_asymptotic_null(AsymptoticNull kernels, int R, std::uint64_t seed, unsigned threads) {
    if (R < 1000) throw InvalidParameter("R must be >= 1000");
    const auto dim = kernels.kernel.rows();
    if (dim != static_cast<Eigen::Index>(kernels.rho_grid.size()) * kernels.q)
        throw InvalidParameter("kernel size does not match the rho grid");

    Eigen::LLT<Matrix> llt(kernels.kernel);
    if (llt.info() != Eigen::Success) {
        const double scale = std::max(1.0, kernels.kernel.diagonal().cwiseAbs().maxCoeff());
        llt.compute(kernels.kernel + 1e-10 * scale * Matrix::Identity(dim, dim));
        if (llt.info() != Eigen::Success) throw EstimationError("kernel covariance factorization failed");
    }
    const Matrix L = llt.matrixL();

    kernels.R = R;
    kernels.seed = seed;
    kernels.draws.assign(static_cast<std::size_t>(R), 0.0);
    const std::size_t chunks = (static_cast<std::size_t>(R) + kChunk - 1) / kChunk;
    parallel_for(chunks, threads, [&](std::size_t c) {
        Rng rng = make_rng(seed, {c});
        std::normal_distribution<double> normal(0.0, 1.0);
        Vector w(dim);
        const std::size_t end = std::min<std::size_t>((c + 1) * kChunk, static_cast<std::size_t>(R));
        for (std::size_t r = c * kChunk; r < end; ++r) {
            for (Eigen::Index i = 0; i < dim; ++i) w[i] = normal(rng);
            kernels.draws[r] = asymptotic_statistic(kernels, L * w);
        }
    });
    kernels.critical_values.clear();
    for (double level : {0.10, 0.05, 0.01})
        kernels.critical_values[level] = bootstrap_critical_value(kernels.draws, level);
    return kernels;
}

}  // namespace regimes
