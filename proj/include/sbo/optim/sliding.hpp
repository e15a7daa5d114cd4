#pragma once

#include "sbo/optim/inner.hpp"
#include "sbo/optim/problem.hpp"
#include "sbo/spectral/basis.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sbo::optim {

/// Source of ordered basis columns. Problems synthesize fields through the
/// same provider the optimizer grows, so |w| may be any prefix length.
class BasisProvider {
public:
    virtual ~BasisProvider() = default;
    virtual std::size_t n_elements() const = 0;
    virtual std::size_t available() const = 0;
    /// Largest number of columns the provider can ever hold.
    virtual std::size_t capacity() const = 0;
    /// Makes at least k columns available; throws sbo::Error on failure.
    virtual void ensure(std::size_t k) = 0;
    /// F = B[:, 0:|w|] w.
    virtual std::vector<double> synthesize(std::span<const double> w) const = 0;
    /// First `count` entries of B^T dF.
    virtual std::vector<double> reduce(std::span<const double> dF, std::size_t count) const = 0;
};

/// Laplacian eigenvectors, extended on demand.
class LaplacianBasisProvider final : public BasisProvider {
public:
    explicit LaplacianBasisProvider(spectral::LaplacianMatrix laplacian, spectral::EigensolverOptions opts = {});
    LaplacianBasisProvider(spectral::LaplacianMatrix laplacian, spectral::SpectralBasis initial,
                           spectral::EigensolverOptions opts = {});

    std::size_t n_elements() const override { return basis_.n_elements(); }
    std::size_t available() const override { return basis_.size(); }
    std::size_t capacity() const override { return basis_.n_elements(); }
    void ensure(std::size_t k) override;
    std::vector<double> synthesize(std::span<const double> w) const override;
    std::vector<double> reduce(std::span<const double> dF, std::size_t count) const override;

    const spectral::SpectralBasis& basis() const noexcept { return basis_; }

private:
    spectral::LaplacianEigensolver solver_;
    spectral::SpectralBasis basis_;
};

/// B = I: one weight per element. The conventional baseline.
class IdentityBasisProvider final : public BasisProvider {
public:
    explicit IdentityBasisProvider(std::size_t n) : n_(n) {}
    std::size_t n_elements() const override { return n_; }
    std::size_t available() const override { return n_; }
    std::size_t capacity() const override { return n_; }
    void ensure(std::size_t k) override;
    std::vector<double> synthesize(std::span<const double> w) const override;
    std::vector<double> reduce(std::span<const double> dF, std::size_t count) const override;

private:
    std::size_t n_;
};

struct SlidingConfig {
    std::size_t n_opt = 20;
    /// Unset picks ceil(0.75 n_opt).
    std::optional<std::size_t> n_s;
    int s_max = 3;
    /// Unset picks 1e-3 |f| at the first starting point.
    std::optional<double> epsilon;
    std::uint64_t rng_seed = 0;
    int inner_max_iter = 50;
    double fd_step = 1e-6;
    double init_scale = 0.01;
    /// Stop once the problem's metric drops to this value.
    std::optional<double> converged_tol;
    /// Start the first window from zeros instead of random values.
    bool zero_first_window = false;
    /// Seed overlap coordinates with their previously accepted values.
    bool warm_start = true;
    /// Never explore more than this many columns; 0 means the provider capacity.
    std::size_t max_basis = 0;
    int threads = 1;
    double feas_tol = 1e-7;
    double max_step = 1.0;

    std::size_t slide() const;
    void validate() const;
    InnerOptions inner_options() const;
};

/// Total explored basis after n_slides slides.
constexpr std::size_t total_basis(std::size_t n_opt, std::size_t n_s, std::size_t n_slides) {
    return n_opt + n_slides * n_s;
}

struct SlideRecord {
    std::size_t i_sb = 0;
    bool accepted = false;
    bool failed = false;
    double f_before = 0.0;
    double f_window = 0.0;
    /// Best accepted objective after this slide.
    double f = 0.0;
    double metric = 0.0;
    int inner_iterations = 0;
    InnerStop inner_stop = InnerStop::MaxIterations;
    std::int64_t evaluations = 0;
    double seconds = 0.0;
};

enum class StopReason { Converged, Stalled, BasisExhausted, ExtensionFailed, Completed };
std::string to_string(StopReason r);

struct SlideTrace {
    std::vector<SlideRecord> records;
    std::vector<double> weights;
    double f = 0.0;
    double metric = 0.0;
    double epsilon = 0.0;
    std::size_t n_opt = 0;
    std::size_t n_s = 0;
    std::int64_t total_evaluations = 0;
    double total_seconds = 0.0;
    StopReason stop = StopReason::Completed;
    std::string message;

    std::size_t optimizations() const noexcept { return records.size(); }
    std::size_t n_slides() const noexcept { return records.empty() ? 0 : records.size() - 1; }
    std::size_t explored_basis() const noexcept {
        return records.empty() ? 0 : total_basis(n_opt, n_s, n_slides());
    }
};

/// Uniform values in [-init_scale, init_scale] from (rng_seed, slide_index).
std::vector<double> initialize_weights(std::size_t n, const SlidingConfig& cfg, std::size_t slide_index);

/// Sliding-basis outer loop. The returned weights cover the explored basis.
SlideTrace slide_optimize(const DesignProblem& problem, BasisProvider& basis, const SlidingConfig& cfg);

/// All k weights optimized in one inner solve.
SlideTrace fixed_basis_optimize(const DesignProblem& problem, BasisProvider& basis, std::size_t k,
                                const SlidingConfig& cfg);

} // namespace sbo::optim
