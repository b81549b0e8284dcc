#include "regimes/simulate.hpp"

#include "regimes/error.hpp"
#include "regimes/parallel.hpp"
#include "regimes/rng.hpp"
#include "regimes/testing.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace regimes {

namespace {

int draw_index(const Eigen::Ref<const Vector>& prob, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double r = u(rng);
    double acc = 0.0;
    const auto m = prob.size();
    for (Eigen::Index j = 0; j + 1 < m; ++j) {
        acc += prob[j];
        if (r < acc) return static_cast<int>(j);
    }
    return static_cast<int>(m - 1);
}

void check_stochastic(const Matrix& P, const Vector& dist) {
    if (P.rows() != P.cols() || P.rows() < 1) throw InvalidParameter("transition matrix must be square");
    if (dist.size() != P.rows()) throw InvalidParameter("initial distribution has the wrong length");
    if ((P.array() < 0.0).any() || !P.allFinite()) throw InvalidParameter("transition matrix has invalid entries");
    if (max_row_defect(P) > 1e-9) throw InvalidParameter("transition rows must sum to 1");
    if ((dist.array() < 0.0).any() || std::abs(dist.sum() - 1.0) > 1e-9)
        throw InvalidParameter("initial distribution must be a probability vector");
}

}  // namespace

std::vector<int> simulate_chain(const Matrix& P, std::size_t n, const Vector& x0_dist, std::uint64_t seed) {
    check_stochastic(P, x0_dist);
    Rng rng = make_rng(seed);
    int x = draw_index(x0_dist, rng);
    std::vector<int> path(n);
    for (auto& s : path) {
        x = draw_index(P.row(x).transpose(), rng);
        s = x;
    }
    return path;
}

std::vector<double> simulate_series(const Parameters& params, std::size_t n, std::optional<double> y0,
                                    std::uint64_t seed) {
    check_shapes(params);
    const int m = params.regimes();
    for (int j = 0; j < m; ++j)
        if (!(params.variance(j) >= 0.0)) throw InvalidParameter("variance must be non-negative");
    Rng rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> out(n);
    if (n == 0) return out;

    auto step = [&](int& x, double& y) {
        x = draw_index(params.transition.row(x).transpose(), rng);
        y = params.mu[x] + params.beta * y + std::sqrt(params.variance(x)) * normal(rng);
    };

    int x = 0;
    double y = 0.0;
    if (y0) {
        check_stochastic(params.transition, params.xi);
        x = draw_index(params.xi, rng);
        y = *y0;
    } else {
        if (!(std::abs(params.beta) < 1.0)) throw InvalidParameter("burn-in needs |beta| < 1");
        const Vector pi = stationary_distribution(params.transition);
        x = draw_index(pi, rng);
        y = pi.dot(params.mu) / (1.0 - params.beta);
        for (int b = 0; b < kBurnIn; ++b) step(x, y);
    }
    out[0] = y;
    for (std::size_t k = 1; k < n; ++k) {
        step(x, y);
        out[k] = y;
    }
    return out;
}

void McDesign::check() const {
    if (reps < 1) throw InvalidParameter("reps must be >= 1");
    if (B < 1) throw InvalidParameter("B must be >= 1");
    if (n < 10) throw InvalidParameter("n must be >= 10");
    if (null_regimes < 1) throw InvalidParameter("null_regimes must be >= 1");
    for (double l : levels)
        if (!(l > 0.0 && l < 1.0)) throw InvalidParameter("levels must lie in (0, 1)");
    check_shapes(dgp);
    test_spec.check();
    fit.check();
}

McReport run_size_power(const McDesign& design) {
    design.check();
    const auto start = std::chrono::steady_clock::now();
    McReport report;
    report.design = design;
    const auto reps = static_cast<std::size_t>(design.reps);
    report.lr.assign(reps, std::numeric_limits<double>::quiet_NaN());
    report.p_value.assign(reps, std::numeric_limits<double>::quiet_NaN());
    report.bootstrap_failures.assign(reps, 0);

    FitConfig inner = design.fit;
    inner.threads = 1;
    parallel_for(reps, design.threads, [&](std::size_t r) {
        const std::uint64_t rep_seed = derive_seed(design.seed, {r});
        try {
            const auto y = simulate_series(design.dgp, design.n + 1, std::nullopt, rep_seed);
            FitConfig cfg = inner;
            cfg.seed = rep_seed;
            const TestResult t = bootstrap_test(y, design.null_regimes, design.test_spec, design.B, cfg);
            report.lr[r] = t.lr;
            report.p_value[r] = t.p_value;
            report.bootstrap_failures[r] = t.failed_replicates;
        } catch (const Error&) {
            // recorded as NaN and counted below
        }
    });

    int ok = 0;
    for (std::size_t r = 0; r < reps; ++r) {
        if (std::isnan(report.p_value[r])) ++report.failed_reps;
        else ++ok;
    }
    for (double level : design.levels) {
        int rejected = 0;
        for (double p : report.p_value)
            if (!std::isnan(p) && p < level) ++rejected;
        report.rejection_pct[level] = ok > 0 ? 100.0 * rejected / ok : std::numeric_limits<double>::quiet_NaN();
    }
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace regimes
