#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace sbo::optim {

/// One analysis run: objective, constraint values (feasible iff g_i <= 0) and
/// an optional application metric used for convergence (e.g. profile error %).
struct Evaluation {
    double f = std::numeric_limits<double>::infinity();
    std::vector<double> g;
    double metric = std::numeric_limits<double>::quiet_NaN();

    double max_violation() const noexcept;
    bool finite() const noexcept;
};

/// Sensitivities with respect to every weight passed to the problem.
struct Sensitivity {
    std::vector<double> df;
    std::vector<std::vector<double>> dg;
};

struct WeightBox {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
};

/// min f(w) s.t. g_i(w) <= 0. Callables must be pure and reentrant: the
/// finite-difference gradient may call them from several threads.
struct DesignProblem {
    std::size_t n_constraints = 0;
    std::function<Evaluation(std::span<const double> w)> evaluate;
    /// Optional; fills `out` with full-length sensitivities.
    std::function<Evaluation(std::span<const double> w, Sensitivity& out)> evaluate_with_gradient;
    std::optional<WeightBox> bounds;

    bool has_gradient() const noexcept { return static_cast<bool>(evaluate_with_gradient); }
};

/// Builds a problem from a separate objective and constraint list. Each call
/// to evaluate runs all of them once.
DesignProblem make_problem(std::function<double(std::span<const double>)> objective,
                           std::vector<std::function<double(std::span<const double>)>> constraints = {});

/// Counts analysis runs. Merge-safe across threads.
struct EvaluationLog {
    std::atomic<std::int64_t> evaluations{0};
    std::atomic<std::int64_t> gradient_evaluations{0};
};

/// Runs problem.evaluate and bumps the log.
Evaluation evaluate_logged(const DesignProblem& problem, std::span<const double> w, EvaluationLog& log);

struct GradientOptions {
    double fd_step = 1e-6;
    int threads = 1;
};

/// Forward differences over coordinates [first, first + count) of w with step
/// h_j = fd_step * max(1, |w_j|); one evaluation per coordinate. A non-finite
/// perturbed result is retried once with h_j / 10 before raising.
/// Returned sensitivities have length `count`.
Sensitivity numerical_gradient(const DesignProblem& problem, std::span<const double> w, const Evaluation& base,
                               std::size_t first, std::size_t count, const GradientOptions& opts,
                               EvaluationLog& log);

} // namespace sbo::optim
