#include "sbo/optim/problem.hpp"

#include "sbo/error.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

namespace sbo::optim {

double Evaluation::max_violation() const noexcept {
    double v = 0.0;
    for (double gi : g) {
        v = std::max(v, gi);
    }
    return v;
}

bool Evaluation::finite() const noexcept {
    return std::isfinite(f) && std::all_of(g.begin(), g.end(), [](double x) { return std::isfinite(x); });
}

DesignProblem make_problem(std::function<double(std::span<const double>)> objective,
                           std::vector<std::function<double(std::span<const double>)>> constraints) {
    DesignProblem p;
    p.n_constraints = constraints.size();
    p.evaluate = [objective = std::move(objective), constraints = std::move(constraints)](std::span<const double> w) {
        Evaluation e;
        e.f = objective(w);
        e.g.reserve(constraints.size());
        for (const auto& c : constraints) {
            e.g.push_back(c(w));
        }
        return e;
    };
    return p;
}

Evaluation evaluate_logged(const DesignProblem& problem, std::span<const double> w, EvaluationLog& log) {
    log.evaluations.fetch_add(1, std::memory_order_relaxed);
    Evaluation e = problem.evaluate(w);
    require(e.g.size() == problem.n_constraints, ErrorKind::Dimension, "problem returned wrong constraint count");
    return e;
}

Sensitivity numerical_gradient(const DesignProblem& problem, std::span<const double> w, const Evaluation& base,
                               std::size_t first, std::size_t count, const GradientOptions& opts,
                               EvaluationLog& log) {
    require(first + count <= w.size(), ErrorKind::Dimension, "gradient window exceeds weight vector");
    require(opts.fd_step > 0.0, ErrorKind::Config, "fd_step must be positive");
    const std::size_t m = problem.n_constraints;
    Sensitivity s;
    s.df.assign(count, 0.0);
    s.dg.assign(m, std::vector<double>(count, 0.0));

    auto column = [&](std::size_t j) {
        std::vector<double> x(w.begin(), w.end());
        const double xj = x[first + j];
        double h = opts.fd_step * std::max(1.0, std::abs(xj));
        for (int attempt = 0; attempt < 2; ++attempt) {
            x[first + j] = xj + h;
            const Evaluation e = evaluate_logged(problem, x, log);
            if (e.finite()) {
                const double step = x[first + j] - xj;
                s.df[j] = (e.f - base.f) / step;
                for (std::size_t i = 0; i < m; ++i) {
                    s.dg[i][j] = (e.g[i] - base.g[i]) / step;
                }
                return;
            }
            h /= 10.0;
        }
        fail(ErrorKind::Solver, "non-finite objective under finite-difference perturbation");
    };

    const int threads = std::max(1, std::min<int>(opts.threads, static_cast<int>(count)));
    if (threads == 1) {
        for (std::size_t j = 0; j < count; ++j) {
            column(j);
        }
        return s;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t j = static_cast<std::size_t>(t); j < count; j += static_cast<std::size_t>(threads)) {
                    column(j);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return s;
}

} // namespace sbo::optim
