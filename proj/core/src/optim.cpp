#include "regimes/optim.hpp"

#include <cmath>
#include <limits>

namespace regimes::optim {

namespace {

double safe_eval(const Objective& f, const Vector& x) {
    try {
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    } catch (const std::exception&) {
        return std::numeric_limits<double>::infinity();
    }
}

}  // namespace

Vector numeric_gradient(const Objective& f, const Vector& x, double step, int* evaluations) {
    Vector g(x.size());
    Vector probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = step * (1.0 + std::abs(x[i]));
        probe[i] = x[i] + h;
        const double up = safe_eval(f, probe);
        probe[i] = x[i] - h;
        const double down = safe_eval(f, probe);
        probe[i] = x[i];
        g[i] = (up - down) / (2.0 * h);
    }
    if (evaluations) *evaluations += static_cast<int>(2 * x.size());
    return g;
}

Matrix numeric_hessian(const Objective& f, const Vector& x, double step) {
    const auto d = x.size();
    Matrix H(d, d);
    Vector h(d);
    for (Eigen::Index i = 0; i < d; ++i) h[i] = step * (1.0 + std::abs(x[i]));
    const double f0 = f(x);
    Vector p = x;
    for (Eigen::Index i = 0; i < d; ++i) {
        p[i] = x[i] + h[i];
        const double fp = f(p);
        p[i] = x[i] - h[i];
        const double fm = f(p);
        p[i] = x[i];
        H(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for (Eigen::Index j = 0; j < i; ++j) {
            auto at = [&](double si, double sj) {
                p[i] = x[i] + si * h[i];
                p[j] = x[j] + sj * h[j];
                const double v = f(p);
                p[i] = x[i];
                p[j] = x[j];
                return v;
            };
            const double v = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * h[i] * h[j]);
            H(i, j) = H(j, i) = v;
        }
    }
    return H;
}

BfgsResult minimize_bfgs(const Objective& f, Vector x0, const BfgsOptions& options) {
    BfgsResult res;
    const auto d = x0.size();
    res.x = std::move(x0);
    res.value = safe_eval(f, res.x);
    res.evaluations = 1;
    if (!std::isfinite(res.value)) return res;

    Matrix Hinv = Matrix::Identity(d, d);
    Vector g = numeric_gradient(f, res.x, options.fd_step, &res.evaluations);
    for (int it = 0; it < options.max_iter; ++it) {
        res.iterations = it + 1;
        if (g.cwiseAbs().maxCoeff() < options.grad_tol) {
            res.converged = true;
            break;
        }
        Vector dir = -Hinv * g;
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            Hinv.setIdentity();
            dir = -g;
            slope = -g.squaredNorm();
        }
        double t = 1.0;
        Vector trial;
        double fv = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            trial = res.x + t * dir;
            fv = safe_eval(f, trial);
            ++res.evaluations;
            if (fv <= res.value + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;
        const double improvement = res.value - fv;
        Vector g_new = numeric_gradient(f, trial, options.fd_step, &res.evaluations);
        const Vector s = trial - res.x;
        const Vector y = g_new - g;
        res.x = std::move(trial);
        res.value = fv;
        g = std::move(g_new);
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Matrix I = Matrix::Identity(d, d);
            Hinv = (I - rho * s * y.transpose()) * Hinv * (I - rho * y * s.transpose()) +
                   rho * s * s.transpose();
        }
        if (improvement < options.value_tol * (1.0 + std::abs(res.value))) {
            res.converged = true;
            break;
        }
    }
    return res;
}

}  // namespace regimes::optim
