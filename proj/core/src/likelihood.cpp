#include "regimes/likelihood.hpp"

#include "regimes/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace regimes {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

void check_inputs(Series data, const Parameters& params, const Vector& xi) {
    check_shapes(params);
    if (data.size() < 2) throw InvalidParameter("series needs at least 2 observations");
    if (xi.size() != params.regimes()) throw InvalidParameter("xi must have length M");
    for (Eigen::Index j = 0; j < params.sigma2.size(); ++j)
        if (!(params.sigma2[j] > 0.0)) throw InvalidParameter("variances must be positive");
}

// Per-regime log normalizers and inverse variances.
struct DensityTable {
    std::vector<double> log_norm;
    std::vector<double> half_inv_var;

    explicit DensityTable(const Parameters& p) {
        const int m = p.regimes();
        log_norm.resize(m);
        half_inv_var.resize(m);
        for (int j = 0; j < m; ++j) {
            const double v = p.variance(j);
            log_norm[j] = -kLogSqrt2Pi - 0.5 * std::log(v);
            half_inv_var[j] = 0.5 / v;
        }
    }
};

// One step of the recursion: given the predictive weights in `pred`, turn them
// into filtered weights in place and return log p(y_k | past).
inline double update(double* pred, const double* logd, int m, long k) {
    double c = logd[0];
    for (int j = 1; j < m; ++j) c = std::max(c, logd[j]);
    double s = 0.0;
    for (int j = 0; j < m; ++j) {
        pred[j] *= std::exp(logd[j] - c);
        s += pred[j];
    }
    if (!(s > 0.0) || !std::isfinite(s) || !std::isfinite(c)) {
        std::ostringstream os;
        os << "predictive density vanishes or is not finite at observation " << k;
        throw EvaluationError(os.str(), k);
    }
    const double inv = 1.0 / s;
    for (int j = 0; j < m; ++j) pred[j] *= inv;
    return c + std::log(s);
}

inline void predict(const double* filt, const Matrix& P, double* out, int m) {
    for (int j = 0; j < m; ++j) {
        double acc = 0.0;
        for (int i = 0; i < m; ++i) acc += filt[i] * P(i, j);
        out[j] = acc;
    }
}

}  // namespace

double regime_density(double y, double y_lag, const Parameters& params, int j) {
    if (j < 0 || j >= params.regimes()) throw InvalidParameter("regime index out of range");
    const double v = params.variance(j);
    if (!(v > 0.0)) throw InvalidParameter("regime variance must be positive");
    const double r = y - params.mu[j] - params.beta * y_lag;
    return std::exp(-0.5 * r * r / v) / std::sqrt(2.0 * std::numbers::pi * v);
}

FilterResult filter(Series data, const Parameters& params) { return filter(data, params, params.xi); }

FilterResult filter(Series data, const Parameters& params, const Vector& xi) {
    check_inputs(data, params, xi);
    const int m = params.regimes();
    const auto n = static_cast<Eigen::Index>(data.size() - 1);
    const DensityTable table(params);

    FilterResult out;
    out.filtered.resize(n, m);
    out.predictive.resize(n, m);
    out.per_obs_loglik.resize(n);

    std::vector<double> logd(m);
    std::vector<double> prev(xi.data(), xi.data() + m);
    for (Eigen::Index k = 0; k < n; ++k) {
        double* pred = out.predictive.row(k).data();
        predict(prev.data(), params.transition, pred, m);
        double* filt = out.filtered.row(k).data();
        std::copy(pred, pred + m, filt);
        const double y = data[k + 1], lag = data[k];
        for (int j = 0; j < m; ++j) {
            const double r = y - params.mu[j] - params.beta * lag;
            logd[j] = table.log_norm[j] - table.half_inv_var[j] * r * r;
        }
        out.per_obs_loglik[k] = update(filt, logd.data(), m, static_cast<long>(k + 1));
        std::copy(filt, filt + m, prev.begin());
    }
    double total = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) total += out.per_obs_loglik[k];
    out.loglik = total;
    return out;
}

double loglik(Series data, const Parameters& params) { return loglik(data, params, params.xi); }

double loglik(Series data, const Parameters& params, const Vector& xi) {
    check_inputs(data, params, xi);
    const int m = params.regimes();
    const std::size_t n = data.size() - 1;
    const DensityTable table(params);
    std::vector<double> prev(xi.data(), xi.data() + m), pred(m), logd(m);
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        predict(prev.data(), params.transition, pred.data(), m);
        const double y = data[k + 1], lag = data[k];
        for (int j = 0; j < m; ++j) {
            const double r = y - params.mu[j] - params.beta * lag;
            logd[j] = table.log_norm[j] - table.half_inv_var[j] * r * r;
        }
        total += update(pred.data(), logd.data(), m, static_cast<long>(k + 1));
        std::swap(prev, pred);
    }
    return total;
}

double brute_force_loglik(Series data, const Parameters& params) {
    return brute_force_loglik(data, params, params.xi);
}

double brute_force_loglik(Series data, const Parameters& params, const Vector& xi) {
    check_inputs(data, params, xi);
    const int m = params.regimes();
    const std::size_t n = data.size() - 1;
    double paths = 1.0;
    for (std::size_t k = 0; k < n; ++k) paths *= m;
    if (paths > 1e6) throw TooLarge("brute-force enumeration limited to M^n <= 1e6 paths");

    // dens[k][j] = f(y_{k+1} | y_k; regime j)
    std::vector<std::vector<double>> dens(n, std::vector<double>(m));
    for (std::size_t k = 0; k < n; ++k)
        for (int j = 0; j < m; ++j) dens[k][j] = regime_density(data[k + 1], data[k], params, j);

    // Odometer over (x_0, x_1, ..., x_n).
    std::vector<int> path(n + 1, 0);
    double total = 0.0;
    for (;;) {
        double w = xi[path[0]];
        for (std::size_t k = 1; k <= n; ++k)
            w *= params.transition(path[k - 1], path[k]) * dens[k - 1][path[k]];
        total += w;
        std::size_t pos = 0;
        while (pos <= n && ++path[pos] == m) path[pos++] = 0;
        if (pos > n) break;
    }
    return std::log(total);
}

SmoothResult smooth(Series data, const Parameters& params) { return smooth(data, params, params.xi); }

SmoothResult smooth(Series data, const Parameters& params, const Vector& xi) {
    return smooth(filter(data, params, xi), params, xi);
}

SmoothResult smooth(const FilterResult& fr, const Parameters& params, const Vector& xi) {
    const int m = params.regimes();
    const auto n = fr.filtered.rows();
    SmoothResult out;
    out.regimes = m;
    out.smoothed.resize(n, m);
    out.pair_smoothed.assign(static_cast<std::size_t>(n * m * m), 0.0);
    if (n == 0) return out;

    const Matrix& P = params.transition;
    std::vector<double> ratio(m);
    out.smoothed.row(n - 1) = fr.filtered.row(n - 1);
    auto fill_pair = [&](Eigen::Index k, const double* prior) {
        // block k pairs (X_{k}, X_{k+1}) in 1-based time, prior = P(X_k | y_1..y_k)
        for (int j = 0; j < m; ++j) {
            const double pr = fr.predictive(k, j);
            ratio[j] = pr > 0.0 ? out.smoothed(k, j) / pr : 0.0;
        }
        double* block = out.pair_smoothed.data() + k * m * m;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) block[i * m + j] = prior[i] * P(i, j) * ratio[j];
    };
    for (Eigen::Index k = n - 1; k >= 1; --k) {
        fill_pair(k, fr.filtered.row(k - 1).data());
        const double* block = out.pair_smoothed.data() + k * m * m;
        for (int i = 0; i < m; ++i) {
            double acc = 0.0;
            for (int j = 0; j < m; ++j) acc += block[i * m + j];
            out.smoothed(k - 1, i) = acc;
        }
    }
    fill_pair(0, xi.data());
    return out;
}

double variance_penalty(const Parameters& params, double sigma_hat, double a_n) {
    if (!(sigma_hat > 0.0)) throw InvalidParameter("sigma_hat must be positive");
    if (!(a_n >= 0.0)) throw InvalidParameter("penalty weight must be >= 0");
    if (a_n == 0.0) return 0.0;
    const double ref = sigma_hat * sigma_hat;
    double acc = 0.0;
    for (Eigen::Index j = 0; j < params.sigma2.size(); ++j) {
        const double ratio = params.sigma2[j] / ref;
        acc += 1.0 / ratio + std::log(ratio) - 1.0;
    }
    return -a_n * acc;
}

double penalized_loglik(Series data, const Parameters& params, const Vector& xi, double sigma_hat,
                        double a_n) {
    return loglik(data, params, xi) + variance_penalty(params, sigma_hat, a_n);
}

double default_penalty_weight(std::size_t n_scored) {
    return 20.0 / std::sqrt(static_cast<double>(n_scored));
}

InitialDistributionGap initial_distribution_bound_check(Series data, const Parameters& params) {
    const int m = params.regimes();
    if (m < 2) throw InvalidParameter("initial-distribution check needs M >= 2");
    const Vector uniform = Vector::Constant(m, 1.0 / m);
    const double base = loglik(data, params, uniform);
    double gap = 0.0;
    for (int x0 = 0; x0 < m; ++x0) {
        Vector delta = Vector::Zero(m);
        delta[x0] = 1.0;
        gap = std::max(gap, std::abs(loglik(data, params, delta) - base));
    }
    const double lo = params.transition.minCoeff(), hi = params.transition.maxCoeff();
    const double rho = 1.0 - lo / hi;
    return {gap, rho, 2.0 / ((1.0 - rho) * (1.0 - rho))};
}

}  // namespace regimes
