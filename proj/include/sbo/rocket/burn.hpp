#pragma once

#include "sbo/mesh/domain.hpp"

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sbo::rocket {

struct RocketParams {
    double C_f = 1.5;
    double A_t = 5e-4;      // m^2
    double c_s = 1000.0;    // m/s
    double rho_p = 1750.0;  // kg/m^3
    double P_ref = 6.895e6; // Pa
    double n = 0.35;
    /// Unset uses C_f * c_s, the value for which inflow and nozzle outflow balance.
    std::optional<double> I_sp;
    double r_in = 0.05;
    double r_out = 0.1;
    double L = 0.5;

    double isp() const { return I_sp ? *I_sp : C_f * c_s; }
    void validate() const;
};

/// Arrival time on grid nodes, zero on the casing r = r_out.
struct ArrivalTimeField {
    mesh::QuadGrid grid;
    std::vector<double> phi;

    double at(int i, int j) const { return phi[static_cast<std::size_t>(grid.node_index(i, j))]; }
    double max() const;
};

/// Mean of the adjacent cell rates at each node. Rates must be finite and positive.
std::vector<double> node_speeds(const mesh::QuadGrid& grid, std::span<const double> cell_rate);

/// First-order fast marching for |grad phi| = 1 / speed on the node lattice,
/// with phi fixed at the given source nodes.
ArrivalTimeField fast_march(const mesh::QuadGrid& grid, std::span<const double> node_speed,
                            std::span<const std::pair<int, double>> sources);

/// Casing boundary value problem: phi = 0 on nodes at r = r_out.
ArrivalTimeField solve_eikonal(const mesh::QuadGrid& grid, std::span<const double> cell_rate);

/// Largest relative residual of the upwind discrete equation over non-source nodes.
double eikonal_residual(const ArrivalTimeField& phi, std::span<const double> node_speed,
                        std::span<const std::pair<int, double>> sources);

struct Segment {
    double r0 = 0.0, z0 = 0.0, r1 = 0.0, z1 = 0.0;
    double length() const;
    double r_mid() const { return 0.5 * (r0 + r1); }
    double z_mid() const { return 0.5 * (z0 + z1); }
};

struct BurnFrontCurve {
    double level = 0.0;
    std::vector<Segment> segments;
    double length() const;
};

/// Marching squares at phi = level; corners with phi > level are inside.
BurnFrontCurve extract_front(const ArrivalTimeField& phi, double level);

/// Bilinear interpolation of node values at (r, z), clamped to the grid.
double interpolate_nodes(const mesh::QuadGrid& grid, std::span<const double> node_values, double r, double z);

/// Sum over segments of rho_p * rate(midpoint) * 2 pi r_mid * length.
double revolved_flux_integral(const BurnFrontCurve& curve, const mesh::QuadGrid& grid,
                              std::span<const double> node_rate, double rho_p);

/// th = (P_ref^-n I_sp^(1-n) A_t^-n c_s^n I)^(1/(1-n)); zero for I = 0.
double thrust_at(double flux_integral, const RocketParams& params);

struct ThrustProfile {
    std::vector<double> times;
    std::vector<double> thrust;
    std::string kind = "custom";

    std::size_t size() const noexcept { return times.size(); }
    double duration() const { return times.empty() ? 0.0 : times.back(); }
    void validate() const;
};

/// n uniform samples on [0, t_end].
std::vector<double> uniform_times(double t_end, std::size_t n);

struct BurnSimulation {
    std::vector<double> node_rate;
    ArrivalTimeField phi;
    double t_burn = 0.0;
    ThrustProfile profile;
    std::vector<double> flux;
};

/// Burn the field and sample thrust at `times` in [0, t_burn]; the front at
/// time t is the level t_burn - t.
BurnSimulation simulate_thrust_at(const mesh::QuadGrid& grid, std::span<const double> cell_rate,
                                  const RocketParams& params, double t_burn, std::span<const double> times);

/// t_burn defaults to max phi over nodes with r >= r_in.
BurnSimulation simulate_thrust_profile(const mesh::QuadGrid& grid, std::span<const double> cell_rate,
                                       const RocketParams& params, std::size_t n_samples,
                                       std::optional<double> t_burn = std::nullopt);

struct SurfaceRadii {
    std::vector<double> radius;
    std::vector<bool> degenerate;
    /// Continuous extension used for constraints: rows with no crossing report
    /// -(t_burn - phi_axis) * speed_axis, i.e. how far past the axis the burn reached.
    std::vector<double> extended;
};

/// Per node row, the largest r with phi >= t_burn, linearly interpolated.
/// Rows without such a radius report r_out and are flagged.
SurfaceRadii inner_surface_radii(const ArrivalTimeField& phi, double t_burn, std::span<const double> node_speed = {});

/// Cells that cannot influence the thrust on [0, t_burn]: no corner is a
/// corner of a cell touching phi <= t_burn, nor an upwind dependency of one.
std::vector<bool> burn_mask(const ArrivalTimeField& phi, double t_burn);

/// Masked cells take the smallest rate of the field; such cells never burn.
std::vector<double> apply_mask(std::span<const double> cell_rate, const std::vector<bool>& mask);

/// 100 * mean |th - target| / mean |target|.
double average_percent_error(std::span<const double> thrust, std::span<const double> target);

} // namespace sbo::rocket
