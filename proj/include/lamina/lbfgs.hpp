#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace lamina {

struct LbfgsOptions {
    int memory = 10;
    int max_iterations = 200;
    double gradient_tolerance = 1e-6;   // on the infinity norm of the gradient
    double relative_decrease_tolerance = 1e-12;
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    int max_line_search_steps = 40;
};

enum class LbfgsStatus { GradientConverged, SmallDecrease, MaxIterations, LineSearchFailed };

struct LbfgsResult {
    LbfgsStatus status = LbfgsStatus::MaxIterations;
    int iterations = 0;
    int evaluations = 0;
    double value = 0.0;
    double gradient_norm = 0.0;            // infinity norm at the returned point
    std::vector<double> accepted_values;   // objective after each accepted step, starting with the initial value
};

/// Objective callback: returns f(x) and writes the gradient. It may throw to signal a
/// point outside the domain (e.g. a degenerate mesh); the line search then backtracks.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

/// Limited-memory BFGS with a strong-Wolfe line search (bracketing + zoom with cubic
/// interpolation). x is updated in place to the best point found.
LbfgsResult minimize_lbfgs(const Objective& objective, Eigen::VectorXd& x, const LbfgsOptions& options);

}  // namespace lamina
