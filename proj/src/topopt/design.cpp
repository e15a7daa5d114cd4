#include "sbo/topopt/design.hpp"

#include "sbo/error.hpp"

#include <cmath>

namespace sbo::topopt {

filters::MaterialSet cantilever_materials() {
    return {{{0.0, 0.0}, {0.1, 2e9}, {1.0, 3e9}}, 3.0};
}

filters::MaterialSet bracket_materials() {
    return {{{0.1, 1.5e9}, {0.3, 2.5e9}, {1.0, 3e9}}, 3.0};
}

void ToPoConfig::validate() const {
    require(m_frac > 0.0 && m_frac <= 1.0, ErrorKind::Config, "m_frac must lie in (0, 1]");
    materials.validate();
    require(materials.max_modulus() > 0.0, ErrorKind::Config, "stiffest material needs a positive modulus");
    require(kappa > 0.0, ErrorKind::Config, "kappa must be positive");
    require(void_modulus > 0.0, ErrorKind::Config, "void modulus must be positive");
}

TopoptDesign::TopoptDesign(const FemModel& model, ToPoConfig cfg, const optim::BasisProvider& basis)
    : model_(&model), cfg_(std::move(cfg)), basis_(&basis) {
    cfg_.validate();
    require(basis.n_elements() == model.mesh().n_elements(), ErrorKind::Dimension, "basis does not match the mesh");
    bounds_ = {cfg_.materials.min_density(), cfg_.materials.max_density(), cfg_.kappa};
    bounds_.validate();
    const double radius = cfg_.filter_radius < 0.0 ? 1.5 * mean_edge_length(model.mesh()) : cfg_.filter_radius;
    const auto centroids = mesh::element_centroids(model.mesh());
    filter_ = filters::DensityFilter(centroids, radius);
    floor_ = cfg_.void_modulus * cfg_.materials.max_modulus();
}

TopoptEvaluation TopoptDesign::evaluate(std::span<const double> w) const {
    TopoptEvaluation e;
    auto x = basis_->synthesize(w);
    const double scale = std::sqrt(static_cast<double>(x.size()));
    for (auto& v : x) {
        v *= scale;
    }
    e.rho = filters::logistic_bound(x, bounds_);
    e.rho_filtered = filter_.apply(e.rho);
    e.modulus.resize(e.rho.size());
    for (std::size_t i = 0; i < e.rho.size(); ++i) {
        e.modulus[i] = filters::ordered_simp(e.rho_filtered[i], cfg_.materials).modulus + floor_;
    }
    e.solution = model_->solve(e.modulus);
    e.compliance = e.solution.compliance;
    e.mass_fraction = mass_fraction(e.rho_filtered, model_->measures(), cfg_.materials);
    return e;
}

optim::Sensitivity TopoptDesign::gradient(std::span<const double> w, const TopoptEvaluation& e) const {
    const std::size_t n = e.rho.size();
    const auto energy = model_->unit_energies(e.solution.u);
    const auto measures = model_->measures();
    double total = 0.0;
    for (double v : measures) {
        total += v;
    }
    const double m0 = cfg_.materials.max_density() * total;

    // d/d(rho_filtered), then back through the filter and the bound.
    std::vector<double> dc(n), dm(n);
    for (std::size_t i = 0; i < n; ++i) {
        dc[i] = -filters::ordered_simp(e.rho_filtered[i], cfg_.materials).derivative * energy[i];
        dm[i] = measures[i] / m0;
    }
    dc = filter_.chain(dc);
    dm = filter_.chain(dm);

    auto x = basis_->synthesize(w);
    const double scale = std::sqrt(static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double dl = filters::logistic_bound_grad(scale * x[i], bounds_) * scale;
        dc[i] *= dl;
        dm[i] *= dl;
    }
    optim::Sensitivity s;
    s.df = basis_->reduce(dc, w.size());
    s.dg = {basis_->reduce(dm, w.size())};
    return s;
}

optim::DesignProblem TopoptDesign::problem(bool analytic) const {
    optim::DesignProblem p;
    p.n_constraints = 1;
    p.evaluate = [this](std::span<const double> w) {
        const TopoptEvaluation e = evaluate(w);
        return optim::Evaluation{e.compliance, {e.mass_fraction - cfg_.m_frac}, e.compliance};
    };
    if (analytic) {
        p.evaluate_with_gradient = [this](std::span<const double> w, optim::Sensitivity& out) {
            const TopoptEvaluation e = evaluate(w);
            out = gradient(w, e);
            return optim::Evaluation{e.compliance, {e.mass_fraction - cfg_.m_frac}, e.compliance};
        };
    }
    return p;
}

std::vector<int> TopoptDesign::material_ids(std::span<const double> rho_filtered) const {
    std::vector<int> ids;
    ids.reserve(rho_filtered.size());
    for (double r : rho_filtered) {
        ids.push_back(static_cast<int>(cfg_.materials.nearest(r)));
    }
    return ids;
}

} // namespace sbo::topopt
