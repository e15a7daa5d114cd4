#pragma once

#include "sbo/optim/problem.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>

namespace sbo::optim {

struct InnerOptions {
    int max_iter = 50;
    GradientOptions gradient;
    double feas_tol = 1e-7;
    double xtol = 1e-10;
    double ftol = 1e-12;
    /// Infinity-norm cap on a single SQP step, in weight units.
    double max_step = 1.0;
    /// Upper bound on multipliers in the elastic QP, relative to max |df|; a
    /// linearization that cannot be satisfied is relaxed at this price.
    double elastic_penalty = 1e6;
    int max_line_search = 12;
    /// Stop as soon as a feasible iterate has metric at or below this.
    std::optional<double> target_metric;
};

enum class InnerStop { MaxIterations, SmallStep, SmallChange, LineSearch, NoDescent, Target };
const char* to_string(InnerStop s) noexcept;

struct InnerResult {
    std::vector<double> w;
    Evaluation eval;
    int iterations = 0;
    bool feasible = false;
    bool converged = false;
    InnerStop stop = InnerStop::MaxIterations;
};

/// SQP with a damped BFGS Hessian over coordinates [first, first + count) of
/// w_init. Other coordinates are passed through unchanged. Returns the best
/// iterate seen: feasible with lowest f, otherwise the least infeasible.
/// Throws on a non-finite evaluation at the starting point.
InnerResult inner_solve(const DesignProblem& problem, std::span<const double> w_init, std::size_t first,
                        std::size_t count, const InnerOptions& opts, EvaluationLog& log);

/// min 0.5 x^T M x + b^T x subject to lo <= x <= hi, M symmetric positive
/// semidefinite. Projected Newton on the free variables.
Eigen::VectorXd solve_box_qp(const Eigen::MatrixXd& m, const Eigen::VectorXd& b, const Eigen::VectorXd& lo,
                             const Eigen::VectorXd& hi, int max_iter = 500);

} // namespace sbo::optim
