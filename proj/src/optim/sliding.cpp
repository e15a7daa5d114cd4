#include "sbo/optim/sliding.hpp"

#include "sbo/error.hpp"

#include <chrono>
#include <cmath>
#include <random>

namespace sbo::optim {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

} // namespace

LaplacianBasisProvider::LaplacianBasisProvider(spectral::LaplacianMatrix laplacian, spectral::EigensolverOptions opts)
    : solver_(std::move(laplacian), opts), basis_(solver_.n_elements()) {}

LaplacianBasisProvider::LaplacianBasisProvider(spectral::LaplacianMatrix laplacian, spectral::SpectralBasis initial,
                                               spectral::EigensolverOptions opts)
    : solver_(std::move(laplacian), opts), basis_(std::move(initial)) {
    require(basis_.n_elements() == solver_.n_elements(), ErrorKind::Dimension, "cached basis has wrong length");
}

void LaplacianBasisProvider::ensure(std::size_t k) {
    require(k <= capacity(), ErrorKind::SpectralFailure, "requested more basis columns than elements");
    if (k > basis_.size()) {
        solver_.extend(basis_, k - basis_.size());
    }
}

std::vector<double> LaplacianBasisProvider::synthesize(std::span<const double> w) const {
    return basis_.synthesize_prefix(w);
}

std::vector<double> LaplacianBasisProvider::reduce(std::span<const double> dF, std::size_t count) const {
    return basis_.reduce_gradient_prefix(dF, count);
}

void IdentityBasisProvider::ensure(std::size_t k) {
    require(k <= n_, ErrorKind::SpectralFailure, "requested more basis columns than elements");
}

std::vector<double> IdentityBasisProvider::synthesize(std::span<const double> w) const {
    require(w.size() <= n_, ErrorKind::Dimension, "too many weights for identity basis");
    std::vector<double> f(n_, 0.0);
    std::copy(w.begin(), w.end(), f.begin());
    return f;
}

std::vector<double> IdentityBasisProvider::reduce(std::span<const double> dF, std::size_t count) const {
    require(dF.size() == n_ && count <= n_, ErrorKind::Dimension, "identity basis: gradient length mismatch");
    return {dF.begin(), dF.begin() + static_cast<std::ptrdiff_t>(count)};
}

std::size_t SlidingConfig::slide() const {
    return n_s ? *n_s : static_cast<std::size_t>(std::ceil(0.75 * static_cast<double>(n_opt)));
}

void SlidingConfig::validate() const {
    require(n_opt >= 2, ErrorKind::Config, "n_opt must be at least 2");
    const std::size_t s = slide();
    require(s > 0 && s < n_opt, ErrorKind::Config, "need 0 < n_s < n_opt");
    require(s_max >= 1, ErrorKind::Config, "s_max must be >= 1");
    require(!epsilon || *epsilon > 0.0, ErrorKind::Config, "epsilon must be positive");
    require(fd_step > 0.0, ErrorKind::Config, "fd_step must be positive");
    require(init_scale >= 0.0, ErrorKind::Config, "init_scale must be non-negative");
    require(inner_max_iter >= 1, ErrorKind::Config, "inner_max_iter must be >= 1");
    require(threads >= 1, ErrorKind::Config, "threads must be >= 1");
    require(max_step > 0.0, ErrorKind::Config, "max_step must be positive");
}

InnerOptions SlidingConfig::inner_options() const {
    InnerOptions o;
    o.max_iter = inner_max_iter;
    o.gradient.fd_step = fd_step;
    o.gradient.threads = threads;
    o.feas_tol = feas_tol;
    o.max_step = max_step;
    o.target_metric = converged_tol;
    return o;
}

std::string to_string(StopReason r) {
    switch (r) {
    case StopReason::Converged: return "converged";
    case StopReason::Stalled: return "stalled";
    case StopReason::BasisExhausted: return "basis_exhausted";
    case StopReason::ExtensionFailed: return "extension_failed";
    case StopReason::Completed: return "completed";
    }
    return "unknown";
}

std::vector<double> initialize_weights(std::size_t n, const SlidingConfig& cfg, std::size_t slide_index) {
    std::vector<double> w(n, 0.0);
    if (cfg.init_scale == 0.0 || (slide_index == 0 && cfg.zero_first_window)) {
        return w;
    }
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.rng_seed), static_cast<std::uint32_t>(cfg.rng_seed >> 32),
                      static_cast<std::uint32_t>(slide_index), static_cast<std::uint32_t>(slide_index >> 32)};
    std::mt19937_64 rng(seq);
    // Explicit 53-bit mapping keeps the draws identical across standard libraries.
    for (auto& x : w) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        x = cfg.init_scale * (2.0 * u - 1.0);
    }
    return w;
}

SlideTrace slide_optimize(const DesignProblem& problem, BasisProvider& basis, const SlidingConfig& cfg) {
    cfg.validate();
    const std::size_t n_opt = cfg.n_opt;
    const std::size_t n_s = cfg.slide();
    const std::size_t limit = cfg.max_basis == 0 ? basis.capacity() : std::min(cfg.max_basis, basis.capacity());
    require(limit >= n_opt, ErrorKind::Config, "basis cannot supply n_opt columns");

    const auto t0 = Clock::now();
    const InnerOptions inner = cfg.inner_options();
    EvaluationLog log;
    SlideTrace trace;
    trace.n_opt = n_opt;
    trace.n_s = n_s;

    double f = std::numeric_limits<double>::infinity();
    double metric = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> w;
    std::size_t i_sb = 0;
    int it_s = 0;
    bool converged = false;
    std::optional<double> eps = cfg.epsilon;

    for (std::size_t slide = 0;; ++slide) {
        if (converged) {
            trace.stop = StopReason::Converged;
            break;
        }
        if (it_s >= cfg.s_max) {
            trace.stop = StopReason::Stalled;
            break;
        }
        const std::size_t need = i_sb + n_opt;
        if (need > limit) {
            trace.stop = StopReason::BasisExhausted;
            break;
        }
        try {
            basis.ensure(need);
        } catch (const Error& e) {
            trace.stop = StopReason::ExtensionFailed;
            trace.message = e.what();
            break;
        }
        const auto ts = Clock::now();
        const std::int64_t evals0 = log.evaluations.load();

        std::vector<double> start = w;
        start.resize(need, 0.0);
        const std::vector<double> init = initialize_weights(n_opt, cfg, slide);
        for (std::size_t j = 0; j < n_opt; ++j) {
            start[i_sb + j] = (cfg.warm_start ? start[i_sb + j] : 0.0) + init[j];
        }
        if (!eps) {
            const Evaluation e0 = evaluate_logged(problem, start, log);
            eps = std::max(1e-3 * std::abs(e0.f), std::numeric_limits<double>::min());
        }

        SlideRecord rec;
        rec.i_sb = i_sb;
        rec.f_before = f;
        InnerResult res;
        try {
            res = inner_solve(problem, start, i_sb, n_opt, inner, log);
        } catch (const Error&) {
            rec.failed = true;
        }
        rec.accepted = !rec.failed && res.feasible && f - res.eval.f >= *eps;
        if (rec.accepted) {
            w = std::move(res.w);
            f = res.eval.f;
            metric = res.eval.metric;
            it_s = 0;
            converged = cfg.converged_tol && std::isfinite(metric) && metric <= *cfg.converged_tol;
        } else {
            ++it_s;
        }
        rec.f_window = rec.failed ? std::numeric_limits<double>::quiet_NaN() : res.eval.f;
        rec.f = f;
        rec.metric = metric;
        rec.inner_iterations = res.iterations;
        rec.inner_stop = res.stop;
        rec.evaluations = log.evaluations.load() - evals0;
        rec.seconds = seconds_since(ts);
        trace.records.push_back(rec);

        i_sb += n_s;
        w.resize(i_sb + n_opt, 0.0);
    }

    w.resize(trace.explored_basis(), 0.0);
    trace.weights = std::move(w);
    trace.f = f;
    trace.metric = metric;
    trace.epsilon = eps.value_or(0.0);
    trace.total_evaluations = log.evaluations.load();
    trace.total_seconds = seconds_since(t0);
    return trace;
}

SlideTrace fixed_basis_optimize(const DesignProblem& problem, BasisProvider& basis, std::size_t k,
                                const SlidingConfig& cfg) {
    require(k >= 1 && k <= basis.capacity(), ErrorKind::Config, "fixed basis size out of range");
    require(cfg.inner_max_iter >= 1 && cfg.fd_step > 0.0, ErrorKind::Config, "invalid inner solver settings");
    basis.ensure(k);
    const auto t0 = Clock::now();
    EvaluationLog log;
    SlideTrace trace;
    trace.n_opt = k;
    trace.n_s = 0;

    SlideRecord rec;
    rec.f_before = std::numeric_limits<double>::infinity();
    try {
        InnerResult res = inner_solve(problem, initialize_weights(k, cfg, 0), 0, k, cfg.inner_options(), log);
        rec.accepted = res.feasible;
        rec.f_window = rec.f = res.eval.f;
        rec.metric = res.eval.metric;
        rec.inner_iterations = res.iterations;
        rec.inner_stop = res.stop;
        trace.weights = std::move(res.w);
        trace.f = res.eval.f;
        trace.metric = res.eval.metric;
        const bool hit = cfg.converged_tol && std::isfinite(res.eval.metric) && res.eval.metric <= *cfg.converged_tol;
        trace.stop = hit ? StopReason::Converged : StopReason::Completed;
    } catch (const Error& e) {
        rec.failed = true;
        trace.message = e.what();
        trace.weights.assign(k, 0.0);
        trace.f = std::numeric_limits<double>::infinity();
    }
    rec.evaluations = log.evaluations.load();
    rec.seconds = seconds_since(t0);
    trace.records.push_back(rec);
    trace.total_evaluations = rec.evaluations;
    trace.total_seconds = rec.seconds;
    return trace;
}

} // namespace sbo::optim
