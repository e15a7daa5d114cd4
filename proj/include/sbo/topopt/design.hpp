#pragma once

#include "sbo/filters/filters.hpp"
#include "sbo/optim/sliding.hpp"
#include "sbo/topopt/fem.hpp"

namespace sbo::topopt {

/// Densities {0, 0.1, 1} with moduli {0, 2, 3} GPa.
filters::MaterialSet cantilever_materials();
/// Densities {0.1, 0.3, 1} with moduli {1.5, 2.5, 3} GPa.
filters::MaterialSet bracket_materials();

struct ToPoConfig {
    double m_frac = 0.5;
    filters::MaterialSet materials = cantilever_materials();
    /// Density filter radius; negative picks 1.5x the mean edge length, 0 disables.
    double filter_radius = -1.0;
    double kappa = 6.0;
    /// Modulus added to every element, relative to the stiffest material, so
    /// void regions keep K positive definite.
    double void_modulus = 1e-9;

    void validate() const;
};

struct TopoptEvaluation {
    std::vector<double> rho;           // bounded, before filtering
    std::vector<double> rho_filtered;
    std::vector<double> modulus;
    StaticSolution solution;
    double compliance = 0.0;
    double mass_fraction = 0.0;
};

/// min F^T u s.t. m / m_0 - m_frac <= 0 with K(E(w)) u = F solved per evaluation.
/// Pipeline: x = sqrt(n_e) B w, rho = l(x) on [rho_1, rho_M], density filter,
/// ordered SIMP, assembly.
class TopoptDesign {
public:
    TopoptDesign(const FemModel& model, ToPoConfig cfg, const optim::BasisProvider& basis);

    const FemModel& model() const noexcept { return *model_; }
    const ToPoConfig& config() const noexcept { return cfg_; }
    const filters::DensityFilter& filter() const noexcept { return filter_; }

    TopoptEvaluation evaluate(std::span<const double> w) const;
    /// Full-length df and the mass row, by the adjoint of the pipeline.
    optim::Sensitivity gradient(std::span<const double> w, const TopoptEvaluation& e) const;
    /// Metric is the compliance. `analytic` attaches the adjoint gradient.
    optim::DesignProblem problem(bool analytic = true) const;

    /// Nearest material index per element.
    std::vector<int> material_ids(std::span<const double> rho_filtered) const;

private:
    const FemModel* model_;
    ToPoConfig cfg_;
    const optim::BasisProvider* basis_;
    filters::LogisticBounds bounds_;
    filters::DensityFilter filter_;
    double floor_;
};

} // namespace sbo::topopt
