#include "sbo/optim/inner.hpp"

#include "sbo/error.hpp"

#include <algorithm>
#include <cmath>

namespace sbo::optim {

namespace {

Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

double qp_value(const Eigen::MatrixXd& m, const Eigen::VectorXd& b, const Eigen::VectorXd& x) {
    return 0.5 * x.dot(m * x) + b.dot(x);
}

struct Point {
    std::vector<double> w;
    Evaluation eval;
    Eigen::VectorXd df;
    Eigen::MatrixXd dg; // m x count
};

// Feasible beats infeasible; among feasible lower f; among infeasible lower violation.
bool better(const Evaluation& a, const Evaluation& b, double feas_tol) {
    const double va = a.max_violation(), vb = b.max_violation();
    const bool fa = va <= feas_tol, fb = vb <= feas_tol;
    if (fa != fb) {
        return fa;
    }
    return fa ? a.f < b.f : va < vb;
}

double positive_sum(const std::vector<double>& g) {
    double s = 0.0;
    for (double x : g) {
        s += std::max(0.0, x);
    }
    return s;
}

class Sqp {
public:
    Sqp(const DesignProblem& p, std::size_t first, std::size_t count, const InnerOptions& o, EvaluationLog& log)
        : p_(p), first_(first), n_(count), m_(p.n_constraints), o_(o), log_(log) {}

    Evaluation evaluate(const std::vector<double>& w) { return evaluate_logged(p_, w, log_); }

    void differentiate(Point& pt) {
        Sensitivity s;
        if (p_.has_gradient()) {
            log_.evaluations.fetch_add(1, std::memory_order_relaxed);
            log_.gradient_evaluations.fetch_add(1, std::memory_order_relaxed);
            Sensitivity full;
            pt.eval = p_.evaluate_with_gradient(pt.w, full);
            require(full.df.size() == pt.w.size() && full.dg.size() == m_, ErrorKind::Dimension,
                    "analytic gradient has wrong shape");
            s.df.assign(full.df.begin() + static_cast<std::ptrdiff_t>(first_),
                        full.df.begin() + static_cast<std::ptrdiff_t>(first_ + n_));
            for (const auto& row : full.dg) {
                s.dg.emplace_back(row.begin() + static_cast<std::ptrdiff_t>(first_),
                                  row.begin() + static_cast<std::ptrdiff_t>(first_ + n_));
            }
        } else {
            s = numerical_gradient(p_, pt.w, pt.eval, first_, n_, o_.gradient, log_);
        }
        pt.df = Eigen::Map<const Eigen::VectorXd>(s.df.data(), static_cast<Eigen::Index>(n_));
        pt.dg.resize(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(n_));
        for (std::size_t i = 0; i < m_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) {
                pt.dg(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s.dg[i][j];
            }
        }
    }

    InnerResult run(std::span<const double> w_init) {
        const auto n = static_cast<Eigen::Index>(n_);
        const auto m = static_cast<Eigen::Index>(m_);
        Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
        Eigen::VectorXd hi = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
        if (p_.bounds) {
            lo.setConstant(p_.bounds->lower);
            hi.setConstant(p_.bounds->upper);
        }

        Point cur;
        cur.w.assign(w_init.begin(), w_init.end());
        for (std::size_t j = 0; j < n_; ++j) {
            cur.w[first_ + j] = std::clamp(cur.w[first_ + j], lo(static_cast<Eigen::Index>(j)), hi(static_cast<Eigen::Index>(j)));
        }
        cur.eval = evaluate(cur.w);
        if (!cur.eval.finite()) {
            fail(ErrorKind::Solver, "non-finite objective at the starting point");
        }
        InnerResult best{cur.w, cur.eval, 0, false, false};
        if (reached_target(best.eval)) {
            best.converged = true;
            best.stop = InnerStop::Target;
            best.feasible = true;
            return best;
        }
        differentiate(cur);
        Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
        bool scaled = false;
        double mu = 0.0;
        int it = 0;
        for (; it < o_.max_iter; ++it) {
            Eigen::VectorXd x(n);
            for (Eigen::Index j = 0; j < n; ++j) {
                x(j) = cur.w[first_ + static_cast<std::size_t>(j)];
            }
            // Linearized constraints: problem rows, then finite box rows.
            std::vector<Eigen::VectorXd> rows;
            std::vector<double> rhs;
            for (Eigen::Index i = 0; i < m; ++i) {
                rows.emplace_back(cur.dg.row(i).transpose());
                rhs.push_back(cur.eval.g[static_cast<std::size_t>(i)]);
            }
            for (Eigen::Index j = 0; j < n; ++j) {
                if (std::isfinite(hi(j))) {
                    rows.emplace_back(Eigen::VectorXd::Unit(n, j));
                    rhs.push_back(x(j) - hi(j));
                }
                if (std::isfinite(lo(j))) {
                    rows.emplace_back(-Eigen::VectorXd::Unit(n, j));
                    rhs.push_back(lo(j) - x(j));
                }
            }
            const auto r = static_cast<Eigen::Index>(rows.size());
            Eigen::LLT<Eigen::MatrixXd> llt(h);
            if (llt.info() != Eigen::Success) {
                h.setIdentity();
                llt.compute(h);
            }
            const Eigen::VectorXd hinv_g = llt.solve(cur.df);
            Eigen::VectorXd lambda = Eigen::VectorXd::Zero(r);
            Eigen::VectorXd d = -hinv_g;
            if (r > 0) {
                Eigen::MatrixXd a(r, n);
                Eigen::VectorXd c(r);
                for (Eigen::Index i = 0; i < r; ++i) {
                    a.row(i) = rows[static_cast<std::size_t>(i)].transpose();
                    c(i) = rhs[static_cast<std::size_t>(i)];
                }
                const Eigen::MatrixXd hinv_at = llt.solve(a.transpose());
                const Eigen::MatrixXd mm = a * hinv_at;
                const Eigen::VectorXd b = a * hinv_g - c;
                const double rho = o_.elastic_penalty * std::max(1.0, cur.df.cwiseAbs().maxCoeff());
                lambda = solve_box_qp(0.5 * (mm + mm.transpose()), b, Eigen::VectorXd::Zero(r),
                                      Eigen::VectorXd::Constant(r, rho));
                d = -(hinv_g + hinv_at * lambda);
            }
            const double dmax = d.cwiseAbs().maxCoeff();
            if (dmax > o_.max_step) {
                d *= o_.max_step / dmax;
            }
            const Eigen::VectorXd lam_g = lambda.head(m);
            if (m > 0) {
                mu = std::max(mu, 1.5 * lam_g.cwiseAbs().maxCoeff() + 1e-12);
            }

            const double viol0 = positive_sum(cur.eval.g);
            double lin_viol = 0.0;
            for (Eigen::Index i = 0; i < m; ++i) {
                lin_viol += std::max(0.0, cur.eval.g[static_cast<std::size_t>(i)] + cur.dg.row(i).dot(d));
            }
            const double merit0 = cur.eval.f + mu * viol0;
            const double slope = cur.df.dot(d) - mu * viol0 + mu * lin_viol;
            if (d.cwiseAbs().maxCoeff() <= o_.xtol * (1.0 + x.cwiseAbs().maxCoeff())) {
                best.converged = true;
                best.stop = InnerStop::SmallStep;
                break;
            }
            if (!(slope < 0.0)) {
                // Stale curvature model; restart from the identity once per stall.
                if (!h.isIdentity()) {
                    h.setIdentity();
                    scaled = false;
                    continue;
                }
                best.stop = InnerStop::NoDescent;
                break;
            }

            Point next;
            double alpha = 1.0;
            bool accepted = false;
            for (int ls = 0; ls < o_.max_line_search; ++ls, alpha *= 0.5) {
                next.w = cur.w;
                for (Eigen::Index j = 0; j < n; ++j) {
                    next.w[first_ + static_cast<std::size_t>(j)] = std::clamp(x(j) + alpha * d(j), lo(j), hi(j));
                }
                next.eval = evaluate(next.w);
                if (!next.eval.finite()) {
                    continue;
                }
                const double merit = next.eval.f + mu * positive_sum(next.eval.g);
                if (merit <= merit0 + 1e-4 * alpha * slope) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted) {
                best.stop = InnerStop::LineSearch;
                break;
            }
            if (better(next.eval, best.eval, o_.feas_tol)) {
                best.w = next.w;
                best.eval = next.eval;
            }
            if (reached_target(best.eval)) {
                best.converged = true;
                best.stop = InnerStop::Target;
                ++it;
                break;
            }
            differentiate(next);

            Eigen::VectorXd xn(n);
            for (Eigen::Index j = 0; j < n; ++j) {
                xn(j) = next.w[first_ + static_cast<std::size_t>(j)];
            }
            const Eigen::VectorXd s = xn - x;
            Eigen::VectorXd y = next.df - cur.df;
            if (m > 0) {
                y += (next.dg - cur.dg).transpose() * lam_g;
            }
            const double merit1 = next.eval.f + mu * positive_sum(next.eval.g);
            update_bfgs(h, s, y, scaled);
            cur = std::move(next);
            if (s.cwiseAbs().maxCoeff() <= o_.xtol * (1.0 + xn.cwiseAbs().maxCoeff()) ||
                std::abs(merit1 - merit0) <= o_.ftol * (1.0 + std::abs(merit0))) {
                best.converged = true;
                best.stop = s.cwiseAbs().maxCoeff() <= o_.xtol * (1.0 + xn.cwiseAbs().maxCoeff()) ? InnerStop::SmallStep
                                                                                                 : InnerStop::SmallChange;
                ++it;
                break;
            }
        }
        best.iterations = it;
        best.feasible = best.eval.max_violation() <= o_.feas_tol;
        return best;
    }

private:
    bool reached_target(const Evaluation& e) const {
        return o_.target_metric && e.max_violation() <= o_.feas_tol && std::isfinite(e.metric) &&
               e.metric <= *o_.target_metric;
    }

    // Powell-damped BFGS; the first update rescales the identity.
    static void update_bfgs(Eigen::MatrixXd& h, const Eigen::VectorXd& s, Eigen::VectorXd y, bool& scaled) {
        const double ss = s.squaredNorm();
        if (ss == 0.0) {
            return;
        }
        if (!scaled) {
            const double sy = s.dot(y);
            if (sy > 0.0) {
                h = Eigen::MatrixXd::Identity(h.rows(), h.cols()) * (y.squaredNorm() / sy);
            }
            scaled = true;
        }
        const Eigen::VectorXd hs = h * s;
        const double shs = s.dot(hs);
        if (!(shs > 0.0)) {
            return;
        }
        double sy = s.dot(y);
        if (sy < 0.2 * shs) {
            const double theta = 0.8 * shs / (shs - sy);
            y = theta * y + (1.0 - theta) * hs;
            sy = s.dot(y);
        }
        if (!(sy > 0.0)) {
            return;
        }
        h += y * y.transpose() / sy - hs * hs.transpose() / shs;
        h = 0.5 * (h + h.transpose());
    }

    const DesignProblem& p_;
    std::size_t first_;
    std::size_t n_;
    std::size_t m_;
    InnerOptions o_;
    EvaluationLog& log_;
};

} // namespace

const char* to_string(InnerStop s) noexcept {
    switch (s) {
    case InnerStop::MaxIterations: return "max_iterations";
    case InnerStop::SmallStep: return "small_step";
    case InnerStop::SmallChange: return "small_change";
    case InnerStop::LineSearch: return "line_search";
    case InnerStop::NoDescent: return "no_descent";
    case InnerStop::Target: return "target";
    }
    return "unknown";
}

Eigen::VectorXd solve_box_qp(const Eigen::MatrixXd& m, const Eigen::VectorXd& b, const Eigen::VectorXd& lo,
                             const Eigen::VectorXd& hi, int max_iter) {
    const Eigen::Index n = b.size();
    require(m.rows() == n && m.cols() == n && lo.size() == n && hi.size() == n, ErrorKind::Dimension,
            "box QP: dimension mismatch");
    Eigen::VectorXd x = project(Eigen::VectorXd::Zero(n), lo, hi);
    const double scale = 1.0 + b.cwiseAbs().maxCoeff() + m.diagonal().cwiseAbs().maxCoeff();
    const double tol = 1e-13 * scale;
    const double reg = 1e-12 * (1.0 + m.diagonal().cwiseAbs().maxCoeff());
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd grad = m * x + b;
        if ((x - project(x - grad, lo, hi)).cwiseAbs().maxCoeff() <= tol) {
            break;
        }
        std::vector<Eigen::Index> free;
        for (Eigen::Index i = 0; i < n; ++i) {
            const bool at_lo = x(i) <= lo(i) && grad(i) > 0.0;
            const bool at_hi = x(i) >= hi(i) && grad(i) < 0.0;
            if (!at_lo && !at_hi) {
                free.push_back(i);
            }
        }
        Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
        if (!free.empty()) {
            const auto nf = static_cast<Eigen::Index>(free.size());
            Eigen::MatrixXd mf(nf, nf);
            Eigen::VectorXd gf(nf);
            for (Eigen::Index a = 0; a < nf; ++a) {
                gf(a) = grad(free[static_cast<std::size_t>(a)]);
                for (Eigen::Index c = 0; c < nf; ++c) {
                    mf(a, c) = m(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(c)]);
                }
            }
            mf.diagonal().array() += reg;
            const Eigen::VectorXd pf = -mf.ldlt().solve(gf);
            for (Eigen::Index a = 0; a < nf; ++a) {
                p(free[static_cast<std::size_t>(a)]) = pf(a);
            }
        }
        if (!(p.dot(grad) < 0.0) || !p.allFinite()) {
            p = -grad;
        }
        const double q0 = qp_value(m, b, x);
        double alpha = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
            const Eigen::VectorXd xn = project(x + alpha * p, lo, hi);
            if (qp_value(m, b, xn) <= q0 + 1e-4 * grad.dot(xn - x)) {
                moved = (xn - x).cwiseAbs().maxCoeff() > 0.0;
                x = xn;
                break;
            }
        }
        if (!moved) {
            break;
        }
    }
    return x;
}

InnerResult inner_solve(const DesignProblem& problem, std::span<const double> w_init, std::size_t first,
                        std::size_t count, const InnerOptions& opts, EvaluationLog& log) {
    require(problem.evaluate != nullptr, ErrorKind::Config, "design problem has no objective");
    require(count > 0 && first + count <= w_init.size(), ErrorKind::Dimension, "inner window exceeds weights");
    return Sqp(problem, first, count, opts, log).run(w_init);
}

} // namespace sbo::optim
