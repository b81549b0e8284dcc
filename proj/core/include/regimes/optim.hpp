#pragma once

#include "regimes/model.hpp"

#include <functional>

namespace regimes::optim {

using Objective = std::function<double(const Vector&)>;

struct BfgsOptions {
    int max_iter = 200;
    double grad_tol = 1e-6;    ///< stop when max |g_i| falls below this
    double value_tol = 1e-12;  ///< stop when a step improves f by less than this (relative)
    double fd_step = 1e-6;     ///< relative central-difference step
};

struct BfgsResult {
    Vector x;
    double value = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

/// Central-difference gradient with step h_i = step * (1 + |x_i|).
Vector numeric_gradient(const Objective& f, const Vector& x, double step, int* evaluations = nullptr);

/// Central-difference Hessian with step h_i = step * (1 + |x_i|), symmetrized.
Matrix numeric_hessian(const Objective& f, const Vector& x, double step);

/// Unconstrained BFGS with a backtracking Armijo line search on numerical gradients.
/// Non-finite objective values are treated as +infinity.
BfgsResult minimize_bfgs(const Objective& f, Vector x0, const BfgsOptions& options = {});

}  // namespace regimes::optim
