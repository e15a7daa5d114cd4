#pragma once

#include "sbo/filters/filters.hpp"
#include "sbo/optim/sliding.hpp"
#include "sbo/rocket/burn.hpp"

#include <filesystem>
#include <memory>
#include <string>

namespace sbo::rocket {

enum class ProfileKind { ConstantAcceleration, ConstantDeceleration, TwoStep, Bucket };

ProfileKind parse_profile_kind(const std::string& name);
std::string to_string(ProfileKind k);

/// Targets with mean thrust `scale` and high/low ratio `ratio`:
/// linear ramps up or down, low then high halves, or high-low-high thirds.
ThrustProfile make_target_profile(ProfileKind kind, double t_burn, double scale, std::size_t n_samples,
                                  double ratio = 1.5);

/// Two-column CSV with header "t,thrust".
void write_profile_csv(const std::filesystem::path& path, const ThrustProfile& profile);
ThrustProfile read_profile_csv(const std::filesystem::path& path);

struct RocketDesignOptions {
    filters::LogisticBounds bounds{4e-3, 16e-3, 6.0};
    /// Constraint margin on r_b > r_in; negative picks one cell (dr).
    double margin = -1.0;
};

struct RocketEvaluation {
    std::vector<double> field;
    BurnSimulation sim;
    SurfaceRadii radii;
    double objective = 0.0;
    double percent_error = 0.0;
    std::vector<double> constraints;
};

/// min sum_t (th(w) - th_target)^2 s.t. (r_in + margin - r_b^i) / dr <= 0 per node row.
/// The field is the bounded synthesis l(sqrt(n_e) B w); t_burn is the target duration.
class RocketDesign {
public:
    RocketDesign(mesh::QuadGrid grid, RocketParams params, ThrustProfile target,
                 const optim::BasisProvider& basis, RocketDesignOptions opts = {});

    const mesh::QuadGrid& grid() const noexcept { return grid_; }
    const RocketParams& params() const noexcept { return params_; }
    const ThrustProfile& target() const noexcept { return target_; }
    double t_burn() const noexcept { return target_.duration(); }
    std::size_t n_constraints() const noexcept { return static_cast<std::size_t>(grid_.n_z + 1); }

    std::vector<double> field(std::span<const double> w) const;
    RocketEvaluation evaluate(std::span<const double> w) const;
    /// Evaluation with the metric set to the average percent error. The
    /// returned problem refers to this object.
    optim::DesignProblem problem() const;

private:
    mesh::QuadGrid grid_;
    RocketParams params_;
    ThrustProfile target_;
    const optim::BasisProvider* basis_;
    RocketDesignOptions opts_;
    double margin_;
};

/// Mean thrust of the uniform field at the logistic midpoint burned for t_burn.
double reference_thrust_scale(const mesh::QuadGrid& grid, const RocketParams& params,
                              const filters::LogisticBounds& bounds, double t_burn, std::size_t n_samples);

} // namespace sbo::rocket
