#include "regimes/estimation.hpp"

#include "regimes/error.hpp"
#include "regimes/optim.hpp"
#include "regimes/parallel.hpp"
#include "regimes/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace regimes {

namespace {

constexpr double kEmptyRegimeWeight = 1e-8;

Vector uniform_xi(int m) { return Vector::Constant(m, 1.0 / m); }

double mean_square(Series data) {
    double acc = 0.0;
    for (double v : data) acc += v * v;
    return acc / static_cast<double>(data.size());
}

// Weighted least squares for (mu_1..mu_M, beta) with weights w_kj * inv_var_j.
void solve_location(Series data, const RowMatrix& w, const std::vector<double>& inv_var,
                    Parameters& out) {
    const int m = static_cast<int>(w.cols());
    const auto n = w.rows();
    Matrix A = Matrix::Zero(m + 1, m + 1);
    Vector b = Vector::Zero(m + 1);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double y = data[k + 1], x = data[k];
        for (int j = 0; j < m; ++j) {
            const double wk = w(k, j) * inv_var[j];
            A(j, j) += wk;
            A(j, m) += wk * x;
            A(m, m) += wk * x * x;
            b[j] += wk * y;
            b[m] += wk * x * y;
        }
    }
    for (int j = 0; j < m; ++j) A(m, j) = A(j, m);
    const Eigen::LDLT<Matrix> ldlt(A);
    Vector sol = ldlt.solve(b);
    if (ldlt.info() != Eigen::Success || !sol.allFinite())
        throw EstimationError("singular weighted least-squares system in M-step");
    out.mu = sol.head(m);
    out.beta = sol[m];
}

Parameters m_step(Series data, const Parameters& cur, const SmoothResult& sr, const PenaltyContext& ctx) {
    const int m = cur.regimes();
    const auto n = sr.smoothed.rows();
    const RowMatrix& w = sr.smoothed;

    Vector weight = Vector::Zero(m);
    for (Eigen::Index k = 0; k < n; ++k)
        for (int j = 0; j < m; ++j) weight[j] += w(k, j);
    for (int j = 0; j < m; ++j)
        if (weight[j] < kEmptyRegimeWeight) throw EmptyRegime(j);

    Parameters next = cur;

    // Transition rows from expected transition counts (X_0 -> X_1 included).
    if (m > 1) {
        Matrix counts = Matrix::Zero(m, m);
        for (Eigen::Index k = 0; k < n; ++k)
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) counts(i, j) += sr.pair(k, i, j);
        for (int i = 0; i < m; ++i) {
            if (counts.row(i).sum() <= 0.0) continue;
            next.transition.row(i) = constrained_transition_row(counts.row(i).transpose(), ctx.eps).transpose();
        }
    }

    std::vector<double> inv_var(m);
    for (int j = 0; j < m; ++j) inv_var[j] = 1.0 / cur.variance(j);
    solve_location(data, w, inv_var, next);

    const double floor2 = ctx.sigma_floor * ctx.sigma_floor;
    Vector ssr = Vector::Zero(m);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double y = data[k + 1], x = data[k];
        for (int j = 0; j < m; ++j) {
            const double r = y - next.mu[j] - next.beta * x;
            ssr[j] += w(k, j) * r * r;
        }
    }
    if (cur.common_variance()) {
        const double v = penalized_variance_update(ssr.sum(), static_cast<double>(n), ctx.sigma_hat, ctx.a_n);
        next.sigma2[0] = std::max(v, floor2);
    } else {
        for (int j = 0; j < m; ++j)
            next.sigma2[j] = std::max(penalized_variance_update(ssr[j], weight[j], ctx.sigma_hat, ctx.a_n), floor2);
    }
    for (Eigen::Index j = 0; j < next.sigma2.size(); ++j)
        if (!(next.sigma2[j] > 0.0)) throw EstimationError("M-step produced a zero variance");
    return next;
}

Parameters em_step_impl(Series data, const Parameters& params, const Vector& xi,
                        const PenaltyContext& ctx, double* loglik_in) {
    const FilterResult fr = filter(data, params, xi);
    if (loglik_in) *loglik_in = fr.loglik;
    const SmoothResult sr = smooth(fr, params, xi);
    return m_step(data, params, sr, ctx);
}

// ---- multi-start machinery ----------------------------------------------

struct StartState {
    Parameters params;
    double value = -std::numeric_limits<double>::infinity();  // penalized objective at params
    double previous = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    bool converged = false;
    bool failed = false;
    std::string error;
};

void run_em(Series data, const Vector& xi, const PenaltyContext& ctx, const FitConfig& cfg,
            int max_total_iter, StartState& st) {
    if (st.failed || st.converged) return;
    try {
        while (st.iterations < max_total_iter) {
            double ll = 0.0;
            Parameters next = em_step_impl(data, st.params, xi, ctx, &ll);
            const double value = ll + variance_penalty(st.params, ctx.sigma_hat, ctx.a_n);
            st.value = value;
            if (std::isfinite(st.previous) &&
                std::abs(value - st.previous) <= cfg.em_tol * std::abs(st.previous)) {
                st.converged = true;
                return;
            }
            st.previous = value;
            st.params = std::move(next);
            ++st.iterations;
        }
        st.value = penalized_loglik(data, st.params, xi, ctx.sigma_hat, ctx.a_n);
    } catch (const Error& e) {
        st.failed = true;
        st.error = e.what();
        st.value = -std::numeric_limits<double>::infinity();
    }
}

double quantile_sorted(const std::vector<double>& sorted, double level) {
    const double pos = level * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

// Even starts sit at the one-regime beta and spread mu over residual quantiles.
// Odd starts shrink beta and place mu at level quantiles scaled by (1 - beta):
// persistent regime shifts inflate the one-regime beta, and EM rarely walks
// out of that basin on its own.
Parameters random_start(const FitResult& one, const ModelSpec& spec, const std::vector<double>& sorted_resid,
                        const std::vector<double>& sorted_levels, int index, std::uint64_t seed) {
    const int m = spec.regimes;
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(index)});
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.5, 1.5);
    std::gamma_distribution<double> gamma(1.0, 1.0);

    const double sh = one.sigma_hat;
    Parameters p = Parameters::make(m, spec.family);
    const bool level_start = index % 2 == 1;
    p.beta = level_start ? one.params.beta * std::uniform_real_distribution<double>(0.25, 0.75)(rng) : one.params.beta;
    for (int j = 0; j < m; ++j) {
        const double level = (j + 0.5) / m;
        const double centre = level_start ? (1.0 - p.beta) * quantile_sorted(sorted_levels, level)
                                          : one.params.mu[0] + quantile_sorted(sorted_resid, level);
        p.mu[j] = centre + 0.5 * sh * normal(rng);
    }
    for (Eigen::Index j = 0; j < p.sigma2.size(); ++j) {
        const double s = sh * unif(rng);
        p.sigma2[j] = s * s;
    }
    static constexpr double kRhoGrid[] = {-0.5, 0.0, 0.5};
    const double rho = kRhoGrid[index % 3];
    for (int i = 0; i < m; ++i) {
        Vector dir(m);
        for (int j = 0; j < m; ++j) dir[j] = gamma(rng);
        dir /= dir.sum();
        Vector row(m);
        for (int j = 0; j < m; ++j) row[j] = (1.0 - rho) / m + (i == j ? rho : 0.0);
        row = (0.7 * row + 0.3 * dir).cwiseMax(0.0);
        p.transition.row(i) = constrained_transition_row(row, spec.eps).transpose();
    }
    return p;
}

// ---- polish transform -----------------------------------------------------

struct Transform {
    int m;
    int nvar;
    double eps;
    double floor2;
    double scale2;

    int dim() const { return m + 1 + nvar + m * (m - 1); }

    Vector encode(const Parameters& p) const {
        Vector z(dim());
        int at = 0;
        for (int j = 0; j < m; ++j) z[at++] = p.mu[j];
        z[at++] = p.beta;
        for (int j = 0; j < nvar; ++j)
            z[at++] = std::log(std::max(p.sigma2[j] - floor2, 1e-12 * scale2));
        const double tiny = 1e-12;
        for (int i = 0; i < m; ++i) {
            const double last = std::max(p.transition(i, m - 1) - eps, tiny);
            for (int j = 0; j < m - 1; ++j)
                z[at++] = std::log(std::max(p.transition(i, j) - eps, tiny) / last);
        }
        return z;
    }

    Parameters decode(const Vector& z, const Vector& xi) const {
        Parameters p;
        p.mu.resize(m);
        p.sigma2.resize(nvar);
        p.transition.resize(m, m);
        p.xi = xi;
        int at = 0;
        for (int j = 0; j < m; ++j) p.mu[j] = z[at++];
        p.beta = z[at++];
        for (int j = 0; j < nvar; ++j) p.sigma2[j] = floor2 + std::exp(z[at++]);
        const double free = 1.0 - m * eps;
        for (int i = 0; i < m; ++i) {
            double mx = 0.0;
            for (int j = 0; j < m - 1; ++j) mx = std::max(mx, z[at + j]);
            double denom = std::exp(-mx);
            for (int j = 0; j < m - 1; ++j) denom += std::exp(z[at + j] - mx);
            for (int j = 0; j < m - 1; ++j) p.transition(i, j) = eps + free * std::exp(z[at + j] - mx) / denom;
            p.transition(i, m - 1) = eps + free * std::exp(-mx) / denom;
            at += m - 1;
        }
        return p;
    }
};

bool on_floor(const Parameters& p, double floor2) {
    if (floor2 <= 0.0) return false;
    for (Eigen::Index j = 0; j < p.sigma2.size(); ++j)
        if (p.sigma2[j] <= floor2 * (1.0 + 1e-9)) return true;
    return false;
}

}  // namespace

EmptyRegime::EmptyRegime(int regime)
    : EstimationError("regime " + std::to_string(regime + 1) + " received no posterior weight"),
      regime_(regime) {}

void FitConfig::check() const {
    if (n_starts < 1) throw InvalidParameter("n_starts must be >= 1");
    if (!(em_tol > 0.0)) throw InvalidParameter("em_tol must be > 0");
    if (em_max_iter < 1) throw InvalidParameter("em_max_iter must be >= 1");
    if (screen_iter < 0) throw InvalidParameter("screen_iter must be >= 0");
    if (n_refine < 1) throw InvalidParameter("n_refine must be >= 1");
}

double penalized_variance_update(double weighted_ssr, double weight, double sigma_hat, double a_n) {
    return (weighted_ssr + 2.0 * a_n * sigma_hat * sigma_hat) / (weight + 2.0 * a_n);
}

Vector constrained_transition_row(const Eigen::Ref<const Vector>& counts, double eps) {
    const auto m = counts.size();
    const double total = counts.sum();
    if (!(total > 0.0)) return Vector::Constant(m, 1.0 / static_cast<double>(m));
    if (eps <= 0.0) return counts / total;
    // p_j = max(eps, c_j / lambda); the clipped set is always the smallest counts.
    std::vector<bool> clipped(m, false);
    for (;;) {
        double free_mass = 1.0, free_counts = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            if (clipped[j]) free_mass -= eps;
            else free_counts += counts[j];
        }
        bool changed = false;
        Vector p(m);
        for (Eigen::Index j = 0; j < m; ++j) {
            if (clipped[j]) {
                p[j] = eps;
                continue;
            }
            p[j] = free_counts > 0.0 ? counts[j] * free_mass / free_counts : free_mass;
            if (p[j] < eps) {
                clipped[j] = true;
                changed = true;
            }
        }
        if (!changed) return p;
    }
}

FitResult fit_one_regime(Series data) {
    if (data.size() < 4) throw EstimationError("one-regime fit needs at least 3 scored observations");
    const std::size_t n = data.size() - 1;
    double sx = 0.0, sy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        sx += data[k];
        sy += data[k + 1];
    }
    const double xbar = sx / n, ybar = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double dx = data[k] - xbar;
        sxx += dx * dx;
        sxy += dx * (data[k + 1] - ybar);
    }
    if (!(sxx > 1e-14 * static_cast<double>(n) * (1.0 + xbar * xbar)))
        throw EstimationError("degenerate regressor: lagged series is constant");
    const double beta = sxy / sxx;
    const double mu = ybar - beta * xbar;
    double ssr = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double r = data[k + 1] - mu - beta * data[k];
        ssr += r * r;
    }
    double var = ssr / static_cast<double>(n);

    FitResult out;
    out.spec.regimes = 1;
    out.params = Parameters::make(1, VarianceFamily::common);
    out.params.mu[0] = mu;
    out.params.beta = beta;
    const double min_var = 1e-12 * (1.0 + mean_square(data));
    if (!(var > min_var)) {
        var = min_var;
        out.degenerate = true;
        out.warnings.push_back("residual variance is zero; clipped to floor");
    }
    out.params.sigma2[0] = var;
    out.loglik = -0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi * var) - 0.5 * ssr / var;
    out.penalized_loglik = out.loglik;
    out.converged = true;
    out.sigma_hat = std::sqrt(var);
    return out;
}

Parameters em_step(Series data, const Parameters& params, const Vector& xi, const PenaltyContext& ctx) {
    return em_step_impl(data, params, xi, ctx, nullptr);
}

std::vector<Parameters> nested_starts(const Parameters& smaller, const ModelSpec& larger_spec,
                                      double sigma_hat) {
    const int m = smaller.regimes();
    const int m1 = m + 1;
    if (larger_spec.regimes != m1) throw InvalidParameter("nested start must add exactly one regime");
    const bool switching = larger_spec.family == VarianceFamily::switching;
    std::vector<Parameters> out;
    for (int j = 0; j < m; ++j) {
        for (double shift : {0.0, 0.5}) {
            Parameters p = Parameters::make(m1, larger_spec.family);
            p.beta = smaller.beta;
            // new regime m is a copy of regime j
            auto src = [&](int r) { return r == m ? j : r; };
            for (int r = 0; r < m1; ++r) {
                p.mu[r] = smaller.mu[src(r)];
                if (switching) p.sigma2[r] = smaller.variance(src(r));
            }
            if (!switching) p.sigma2[0] = smaller.variance(0);
            const double sd = sigma_hat > 0.0 ? sigma_hat : std::sqrt(smaller.variance(j));
            p.mu[j] -= shift * sd;
            p.mu[m] += shift * sd;
            for (int r = 0; r < m1; ++r) {
                Vector row(m1);
                for (int c = 0; c < m; ++c) row[c] = smaller.transition(src(r), c);
                row[m] = 0.5 * row[j];
                row[j] *= 0.5;
                p.transition.row(r) = constrained_transition_row(row, larger_spec.eps).transpose();
            }
            out.push_back(std::move(p));
        }
    }
    return out;
}

FitResult fit(Series data, const ModelSpec& spec, const FitConfig& config) {
    spec.check();
    config.check();
    FitResult one = fit_one_regime(data);
    one.spec = spec;
    if (spec.regimes == 1) {
        if (spec.family == VarianceFamily::switching) one.spec.family = VarianceFamily::switching;
        return one;
    }

    const int m = spec.regimes;
    const std::size_t n = data.size() - 1;
    if (n < static_cast<std::size_t>(10 * m))
        throw EstimationError("series too short for the requested number of regimes");

    PenaltyContext ctx;
    ctx.sigma_hat = one.sigma_hat;
    ctx.sigma_floor = spec.eps_sigma_factor * one.sigma_hat;
    ctx.eps = spec.eps;
    ctx.a_n = (config.penalty_on && spec.family == VarianceFamily::switching) ? default_penalty_weight(n) : 0.0;
    const Vector xi = uniform_xi(m);

    std::vector<double> resid(n);
    for (std::size_t k = 0; k < n; ++k)
        resid[k] = data[k + 1] - one.params.mu[0] - one.params.beta * data[k];
    std::sort(resid.begin(), resid.end());
    std::vector<double> levels(data.begin() + 1, data.end());
    std::sort(levels.begin(), levels.end());

    const int n_random = config.n_starts;
    const int n_total = n_random + static_cast<int>(config.extra_starts.size());
    std::vector<StartState> states(n_total);
    for (int s = 0; s < n_total; ++s) {
        if (s < n_random) {
            states[s].params = random_start(one, spec, resid, levels, s, config.seed);
        } else {
            Parameters p = config.extra_starts[s - n_random];
            p.xi = xi;
            states[s].params = std::move(p);
        }
        states[s].params.xi = xi;
    }

    const int screen = std::min(config.screen_iter, config.em_max_iter);
    parallel_for(n_total, config.threads, [&](std::size_t s) {
        try {
            validate(states[s].params, spec, 0.0);
        } catch (const Error& e) {
            states[s].failed = true;
            states[s].error = e.what();
            return;
        }
        run_em(data, xi, ctx, config, screen, states[s]);
    });

    std::vector<int> order(n_total);
    std::iota(order.begin(), order.end(), 0);
    auto better = [&](int a, int b) {
        if (states[a].value != states[b].value) return states[a].value > states[b].value;
        return a < b;
    };
    std::sort(order.begin(), order.end(), better);
    const int refine = std::min(config.n_refine, n_total);
    parallel_for(refine, config.threads, [&](std::size_t r) {
        run_em(data, xi, ctx, config, config.em_max_iter, states[order[r]]);
    });

    int best = -1;
    int failed = 0;
    for (int s = 0; s < n_total; ++s) {
        if (states[s].failed) {
            ++failed;
            continue;
        }
        if (best < 0 || better(s, best)) best = s;
    }
    if (best < 0) {
        std::ostringstream os;
        os << "all " << n_total << " starts failed";
        for (int s = 0; s < std::min(n_total, 5); ++s) os << "\n  start " << s << ": " << states[s].error;
        throw EstimationError(os.str());
    }

    StartState& win = states[best];
    FitResult out;
    out.spec = spec;
    out.sigma_hat = one.sigma_hat;
    out.sigma_floor = ctx.sigma_floor;
    out.penalty_weight = ctx.a_n;
    out.start_index = best;
    out.n_iterations = win.iterations;
    out.converged = win.converged;
    out.failed_starts = failed;

    Parameters params = win.params;
    double value = win.value;
    if (config.polish) {
        const Transform tr{m, static_cast<int>(params.sigma2.size()), spec.eps,
                           ctx.sigma_floor * ctx.sigma_floor, one.sigma_hat * one.sigma_hat};
        auto objective = [&](const Vector& z) {
            const Parameters p = tr.decode(z, xi);
            return -(loglik(data, p, xi) + variance_penalty(p, ctx.sigma_hat, ctx.a_n));
        };
        optim::BfgsOptions opt;
        opt.max_iter = 100;
        opt.grad_tol = 1e-5;
        const auto res = optim::minimize_bfgs(objective, tr.encode(params), opt);
        if (std::isfinite(res.value) && -res.value > value + 1e-10) {
            params = tr.decode(res.x, xi);
            value = -res.value;
            out.polished = true;
        }
    }

    out.params = canonicalize(params);
    out.loglik = loglik(data, out.params, xi);
    out.penalized_loglik = out.loglik + variance_penalty(out.params, ctx.sigma_hat, ctx.a_n);
    out.degenerate = on_floor(out.params, ctx.sigma_floor * ctx.sigma_floor);
    if (out.degenerate) out.warnings.push_back("a regime variance sits on its lower bound");
    if (!out.converged && !out.polished) out.warnings.push_back("EM reached the iteration limit");
    return out;
}

std::optional<StandardErrors> standard_errors(Series data, const FitResult& fr,
                                              std::vector<std::string>* warnings) {
    const Parameters& p = fr.params;
    const int m = p.regimes();
    const int nvar = static_cast<int>(p.sigma2.size());
    const Vector xi = p.xi;
    const int d = m + 1 + nvar + m * (m - 1);

    // z = (mu, beta, log sigma2, multinomial logits of p_i1..p_i,M-1 against p_iM)
    Vector z(d);
    int at = 0;
    for (int j = 0; j < m; ++j) z[at++] = p.mu[j];
    z[at++] = p.beta;
    for (int j = 0; j < nvar; ++j) z[at++] = std::log(p.sigma2[j]);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m - 1; ++j) z[at++] = std::log(p.transition(i, j) / p.transition(i, m - 1));

    auto decode = [&](const Vector& v) {
        Parameters q = p;
        int k = 0;
        for (int j = 0; j < m; ++j) q.mu[j] = v[k++];
        q.beta = v[k++];
        for (int j = 0; j < nvar; ++j) q.sigma2[j] = std::exp(v[k++]);
        for (int i = 0; i < m; ++i) {
            double denom = 1.0;
            for (int j = 0; j < m - 1; ++j) denom += std::exp(v[k + j]);
            for (int j = 0; j < m - 1; ++j) q.transition(i, j) = std::exp(v[k + j]) / denom;
            q.transition(i, m - 1) = 1.0 / denom;
            k += m - 1;
        }
        return q;
    };
    auto f = [&](const Vector& v) { return loglik(data, decode(v), xi); };

    Matrix H;
    try {
        H = optim::numeric_hessian(f, z, 1e-5);
    } catch (const Error& e) {
        if (warnings) warnings->push_back(std::string("standard errors unavailable: ") + e.what());
        return std::nullopt;
    }
    const Matrix info = -H;
    const Eigen::LLT<Matrix> llt(info);
    if (llt.info() != Eigen::Success || !info.allFinite()) {
        if (warnings) warnings->push_back("Hessian is not negative definite; standard errors omitted");
        return std::nullopt;
    }
    const Matrix cov_z = llt.solve(Matrix::Identity(d, d));

    // Jacobian of the reported parameters (mu, beta, sigma, every p_ij) in z.
    const int outputs = m + 1 + nvar + (m > 1 ? m * m : 0);
    Matrix J = Matrix::Zero(outputs, d);
    StandardErrors se;
    int r = 0;
    for (int j = 0; j < m; ++j, ++r) {
        J(r, r) = 1.0;
        se.names.push_back("mu" + std::to_string(j + 1));
    }
    J(r, r) = 1.0;
    se.names.push_back("beta");
    ++r;
    for (int j = 0; j < nvar; ++j, ++r) {
        J(r, r) = 0.5 * std::sqrt(p.sigma2[j]);
        se.names.push_back(nvar == 1 ? "sigma" : "sigma" + std::to_string(j + 1));
    }
    for (int i = 0; i < m && m > 1; ++i) {
        const int base = m + 1 + nvar + i * (m - 1);
        for (int j = 0; j < m; ++j, ++r) {
            for (int l = 0; l < m - 1; ++l)
                J(r, base + l) = p.transition(i, j) * ((j == l ? 1.0 : 0.0) - p.transition(i, l));
            se.names.push_back("p" + std::to_string(i + 1) + std::to_string(j + 1));
        }
    }
    const Matrix cov = J * cov_z * J.transpose();
    se.values = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    return se;
}

}  // namespace regimes
