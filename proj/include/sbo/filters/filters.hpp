#pragma once

#include "sbo/mesh/domain.hpp"

#include <span>
#include <vector>

namespace sbo::filters {

/// l(x) = lower + (upper - lower) / (1 + exp(-kappa x)).
struct LogisticBounds {
    double lower = 0.0;
    double upper = 1.0;
    double kappa = 6.0;

    void validate() const;
};

double logistic_bound(double x, const LogisticBounds& b) noexcept;
double logistic_bound_grad(double x, const LogisticBounds& b) noexcept;

/// Element-wise versions; `grad` receives dl/dx per entry when non-empty.
std::vector<double> logistic_bound(std::span<const double> x, const LogisticBounds& b,
                                   std::vector<double>* grad = nullptr);

struct Material {
    double density = 0.0;
    double modulus = 0.0;
};

/// Ordered discrete materials for multi-material SIMP.
struct MaterialSet {
    std::vector<Material> materials;
    double penalty = 3.0;

    void validate() const;
    double min_density() const { return materials.front().density; }
    double max_density() const { return materials.back().density; }
    double max_modulus() const { return materials.back().modulus; }
    /// Index of the material whose density is nearest to rho.
    std::size_t nearest(double rho) const;
};

struct SimpValue {
    double modulus = 0.0;
    double derivative = 0.0;
    bool saturated = false;
};

/// On [rho_m, rho_m+1]: E = E_m + (E_m+1 - E_m) (rho^p - rho_m^p) / (rho_m+1^p - rho_m^p).
/// Exact at the knots; densities outside the set range are clamped with zero slope.
SimpValue ordered_simp(double rho, const MaterialSet& mats) noexcept;

/// Convex averaging with weights H_ei = max(0, r_min - |c_e - c_i|).
class DensityFilter {
public:
    DensityFilter() = default;
    DensityFilter(std::span<const mesh::Vec3> centroids, double r_min);

    std::size_t size() const noexcept { return row_sums_.size(); }
    double radius() const noexcept { return r_min_; }
    /// True when no two centroids are closer than r_min, so only self weights exist.
    bool is_identity() const noexcept { return identity_; }

    std::span<const int> row_indices(std::size_t e) const noexcept {
        return {cols_.data() + offsets_[e], cols_.data() + offsets_[e + 1]};
    }
    std::span<const double> row_weights(std::size_t e) const noexcept {
        return {weights_.data() + offsets_[e], weights_.data() + offsets_[e + 1]};
    }
    double row_sum(std::size_t e) const noexcept { return row_sums_[e]; }

    std::vector<double> apply(std::span<const double> rho) const;
    /// Maps d/d(filtered) to d/d(unfiltered): H^T (g / row_sum).
    std::vector<double> chain(std::span<const double> grad_filtered) const;

private:
    double r_min_ = 0.0;
    bool identity_ = true;
    std::vector<int> offsets_{0};
    std::vector<int> cols_;
    std::vector<double> weights_;
    std::vector<double> row_sums_;
};

} // namespace sbo::filters
