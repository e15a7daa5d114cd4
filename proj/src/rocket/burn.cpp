#include "sbo/rocket/burn.hpp"

#include "sbo/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>

namespace sbo::rocket {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Godunov upwind update from the smallest neighbor in each axis.
double upwind_update(double a, double b, double dr, double dz, double slowness) {
    if (!std::isfinite(a)) {
        return b + dz * slowness;
    }
    if (!std::isfinite(b)) {
        return a + dr * slowness;
    }
    const double one_sided = std::min(a + dr * slowness, b + dz * slowness);
    if (one_sided <= std::max(a, b)) {
        return one_sided;
    }
    const double ir = 1.0 / (dr * dr), iz = 1.0 / (dz * dz);
    const double qa = ir + iz;
    const double qb = -2.0 * (a * ir + b * iz);
    const double qc = a * a * ir + b * b * iz - slowness * slowness;
    const double disc = std::max(0.0, qb * qb - 4.0 * qa * qc);
    return (-qb + std::sqrt(disc)) / (2.0 * qa);
}

struct AxisMins {
    double a = kInf; // r-axis
    double b = kInf; // z-axis
    int ia = -1;
    int ib = -1;
};

} // namespace

void RocketParams::validate() const {
    require(C_f > 0 && A_t > 0 && c_s > 0 && rho_p > 0 && P_ref > 0, ErrorKind::Config,
            "rocket constants must be positive");
    require(!I_sp || *I_sp > 0.0, ErrorKind::Config, "I_sp must be positive");
    require(n > 0.0 && n < 1.0, ErrorKind::Config, "pressure exponent must lie in (0, 1)");
    require(r_in > 0.0 && r_in < r_out && L > 0.0, ErrorKind::Config, "need 0 < r_in < r_out and L > 0");
}

double ArrivalTimeField::max() const {
    return phi.empty() ? 0.0 : *std::max_element(phi.begin(), phi.end());
}

std::vector<double> node_speeds(const mesh::QuadGrid& grid, std::span<const double> cell_rate) {
    require(cell_rate.size() == grid.n_elements(), ErrorKind::Dimension, "rate field has wrong length");
    for (double v : cell_rate) {
        require(std::isfinite(v) && v > 0.0, ErrorKind::InvalidField, "burn rate must be finite and positive");
    }
    std::vector<double> out(grid.n_nodes(), 0.0);
    for (int j = 0; j <= grid.n_z; ++j) {
        for (int i = 0; i <= grid.n_r; ++i) {
            double sum = 0.0;
            int count = 0;
            for (int cj = j - 1; cj <= j; ++cj) {
                for (int ci = i - 1; ci <= i; ++ci) {
                    if (ci >= 0 && ci < grid.n_r && cj >= 0 && cj < grid.n_z) {
                        sum += cell_rate[grid.index(ci, cj)];
                        ++count;
                    }
                }
            }
            out[grid.node_index(i, j)] = sum / count;
        }
    }
    return out;
}

namespace {

AxisMins axis_mins(const mesh::QuadGrid& g, const std::vector<double>& phi, int i, int j,
                   const std::vector<char>* accepted) {
    AxisMins m;
    auto consider = [&](int ni, int nj, bool r_axis) {
        if (ni < 0 || ni > g.n_r || nj < 0 || nj > g.n_z) {
            return;
        }
        const auto k = g.node_index(ni, nj);
        if (accepted != nullptr && !(*accepted)[k]) {
            return;
        }
        double& slot = r_axis ? m.a : m.b;
        int& idx = r_axis ? m.ia : m.ib;
        if (phi[k] < slot) {
            slot = phi[k];
            idx = static_cast<int>(k);
        }
    };
    consider(i - 1, j, true);
    consider(i + 1, j, true);
    consider(i, j - 1, false);
    consider(i, j + 1, false);
    return m;
}

} // namespace

ArrivalTimeField fast_march(const mesh::QuadGrid& grid, std::span<const double> node_speed,
                            std::span<const std::pair<int, double>> sources) {
    require(node_speed.size() == grid.n_nodes(), ErrorKind::Dimension, "node speed has wrong length");
    require(!sources.empty(), ErrorKind::Config, "fast marching needs at least one source");
    const std::size_t n = grid.n_nodes();
    std::vector<double> phi(n, kInf);
    std::vector<char> accepted(n, 0);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    for (const auto& [k, v] : sources) {
        require(k >= 0 && static_cast<std::size_t>(k) < n, ErrorKind::Dimension, "source node out of range");
        if (v < phi[static_cast<std::size_t>(k)]) {
            phi[static_cast<std::size_t>(k)] = v;
            heap.emplace(v, k);
        }
    }
    const int nr = grid.nodes_r();
    while (!heap.empty()) {
        const auto [v, k] = heap.top();
        heap.pop();
        const auto uk = static_cast<std::size_t>(k);
        if (accepted[uk] || v > phi[uk]) {
            continue;
        }
        accepted[uk] = 1;
        const int i = k % nr, j = k / nr;
        const int ni[4] = {i - 1, i + 1, i, i};
        const int nj[4] = {j, j, j - 1, j + 1};
        for (int q = 0; q < 4; ++q) {
            if (ni[q] < 0 || ni[q] > grid.n_r || nj[q] < 0 || nj[q] > grid.n_z) {
                continue;
            }
            const auto nk = grid.node_index(ni[q], nj[q]);
            if (accepted[nk]) {
                continue;
            }
            const AxisMins m = axis_mins(grid, phi, ni[q], nj[q], &accepted);
            const double t = upwind_update(m.a, m.b, grid.dr, grid.dz, 1.0 / node_speed[nk]);
            if (t < phi[nk]) {
                phi[nk] = t;
                heap.emplace(t, static_cast<int>(nk));
            }
        }
    }
    return {grid, std::move(phi)};
}

ArrivalTimeField solve_eikonal(const mesh::QuadGrid& grid, std::span<const double> cell_rate) {
    const auto speed = node_speeds(grid, cell_rate);
    std::vector<std::pair<int, double>> sources;
    for (int j = 0; j <= grid.n_z; ++j) {
        sources.emplace_back(static_cast<int>(grid.node_index(grid.n_r, j)), 0.0);
    }
    return fast_march(grid, speed, sources);
}

double eikonal_residual(const ArrivalTimeField& f, std::span<const double> node_speed,
                        std::span<const std::pair<int, double>> sources) {
    const auto& g = f.grid;
    std::vector<char> is_source(g.n_nodes(), 0);
    for (const auto& s : sources) {
        is_source[static_cast<std::size_t>(s.first)] = 1;
    }
    double worst = 0.0;
    for (int j = 0; j <= g.n_z; ++j) {
        for (int i = 0; i <= g.n_r; ++i) {
            const auto k = g.node_index(i, j);
            if (is_source[k]) {
                continue;
            }
            const AxisMins m = axis_mins(g, f.phi, i, j, nullptr);
            const double p = f.phi[k];
            const double tr = std::isfinite(m.a) ? std::max(0.0, (p - m.a) / g.dr) : 0.0;
            const double tz = std::isfinite(m.b) ? std::max(0.0, (p - m.b) / g.dz) : 0.0;
            const double slowness = 1.0 / node_speed[k];
            worst = std::max(worst, std::abs(std::sqrt(tr * tr + tz * tz) - slowness) / slowness);
        }
    }
    return worst;
}

double Segment::length() const {
    return std::hypot(r1 - r0, z1 - z0);
}

double BurnFrontCurve::length() const {
    double s = 0.0;
    for (const auto& seg : segments) {
        s += seg.length();
    }
    return s;
}

BurnFrontCurve extract_front(const ArrivalTimeField& f, double level) {
    const auto& g = f.grid;
    BurnFrontCurve curve;
    curve.level = level;
    // Edge e: 0 bottom (v0-v1), 1 right (v1-v2), 2 top (v2-v3), 3 left (v3-v0).
    static constexpr int kEdges[16][4] = {
        {-1, -1, -1, -1}, {3, 0, -1, -1}, {0, 1, -1, -1}, {3, 1, -1, -1}, {1, 2, -1, -1}, {3, 0, 1, 2},
        {0, 2, -1, -1},   {3, 2, -1, -1}, {2, 3, -1, -1}, {0, 2, -1, -1}, {0, 1, 2, 3},  {1, 2, -1, -1},
        {1, 3, -1, -1},   {0, 1, -1, -1}, {3, 0, -1, -1}, {-1, -1, -1, -1}};
    for (int j = 0; j < g.n_z; ++j) {
        for (int i = 0; i < g.n_r; ++i) {
            const double r[4] = {g.node_r(i), g.node_r(i + 1), g.node_r(i + 1), g.node_r(i)};
            const double z[4] = {g.node_z(j), g.node_z(j), g.node_z(j + 1), g.node_z(j + 1)};
            const double v[4] = {f.at(i, j), f.at(i + 1, j), f.at(i + 1, j + 1), f.at(i, j + 1)};
            int c = 0;
            for (int q = 0; q < 4; ++q) {
                if (v[q] > level) {
                    c |= 1 << q;
                }
            }
            if (c == 0 || c == 15) {
                continue;
            }
            int edges[4];
            std::copy(std::begin(kEdges[c]), std::end(kEdges[c]), edges);
            if (c == 5 || c == 10) {
                const bool center_inside = 0.25 * (v[0] + v[1] + v[2] + v[3]) > level;
                // Either cut off corners v1 and v3 or corners v0 and v2.
                const bool cut_odd = (c == 5) == center_inside;
                static constexpr int kOdd[4] = {0, 1, 2, 3};
                static constexpr int kEven[4] = {3, 0, 1, 2};
                std::copy(cut_odd ? kOdd : kEven, (cut_odd ? kOdd : kEven) + 4, edges);
            }
            auto point = [&](int e, double& pr, double& pz) {
                const int p0 = e, p1 = (e + 1) % 4;
                const double den = v[p1] - v[p0];
                const double t = den == 0.0 ? 0.5 : std::clamp((level - v[p0]) / den, 0.0, 1.0);
                pr = r[p0] + t * (r[p1] - r[p0]);
                pz = z[p0] + t * (z[p1] - z[p0]);
            };
            for (int s = 0; s < 4 && edges[s] >= 0; s += 2) {
                Segment seg;
                point(edges[s], seg.r0, seg.z0);
                point(edges[s + 1], seg.r1, seg.z1);
                curve.segments.push_back(seg);
            }
        }
    }
    return curve;
}

double interpolate_nodes(const mesh::QuadGrid& g, std::span<const double> nv, double r, double z) {
    const double fr = std::clamp((r - g.r0) / g.dr, 0.0, static_cast<double>(g.n_r));
    const double fz = std::clamp((z - g.z0) / g.dz, 0.0, static_cast<double>(g.n_z));
    const int i = std::min(static_cast<int>(fr), g.n_r - 1);
    const int j = std::min(static_cast<int>(fz), g.n_z - 1);
    const double tr = fr - i, tz = fz - j;
    const double v00 = nv[g.node_index(i, j)], v10 = nv[g.node_index(i + 1, j)];
    const double v01 = nv[g.node_index(i, j + 1)], v11 = nv[g.node_index(i + 1, j + 1)];
    return (1 - tr) * (1 - tz) * v00 + tr * (1 - tz) * v10 + (1 - tr) * tz * v01 + tr * tz * v11;
}

double revolved_flux_integral(const BurnFrontCurve& curve, const mesh::QuadGrid& grid,
                              std::span<const double> node_rate, double rho_p) {
    double total = 0.0;
    for (const auto& s : curve.segments) {
        const double rate = interpolate_nodes(grid, node_rate, s.r_mid(), s.z_mid());
        total += rho_p * rate * 2.0 * std::numbers::pi * s.r_mid() * s.length();
    }
    return total;
}

double thrust_at(double flux_integral, const RocketParams& p) {
    require(p.n != 1.0, ErrorKind::SingularExponent, "thrust closure is singular for n = 1");
    require(flux_integral >= 0.0, ErrorKind::InvalidField, "flux integral must be non-negative");
    if (flux_integral == 0.0) {
        return 0.0;
    }
    const double log_th = (-p.n * std::log(p.P_ref) + (1.0 - p.n) * std::log(p.isp()) - p.n * std::log(p.A_t) +
                           p.n * std::log(p.c_s) + std::log(flux_integral)) /
                          (1.0 - p.n);
    return std::exp(log_th);
}

void ThrustProfile::validate() const {
    require(!times.empty() && times.size() == thrust.size(), ErrorKind::Config, "thrust profile is empty or ragged");
    for (std::size_t i = 0; i < times.size(); ++i) {
        require(std::isfinite(times[i]) && std::isfinite(thrust[i]) && thrust[i] >= 0.0, ErrorKind::Config,
                "thrust samples must be finite and non-negative");
        require(i == 0 || times[i] > times[i - 1], ErrorKind::Config, "profile times must increase");
    }
    require(times.front() >= 0.0, ErrorKind::Config, "profile times must be non-negative");
}

std::vector<double> uniform_times(double t_end, std::size_t n) {
    require(n >= 2, ErrorKind::Config, "need at least two thrust samples");
    require(t_end > 0.0, ErrorKind::Config, "burn time must be positive");
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = t_end * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    t.back() = t_end;
    return t;
}

BurnSimulation simulate_thrust_at(const mesh::QuadGrid& grid, std::span<const double> cell_rate,
                                  const RocketParams& params, double t_burn, std::span<const double> times) {
    require(!times.empty(), ErrorKind::Config, "no thrust samples requested");
    BurnSimulation sim;
    sim.node_rate = node_speeds(grid, cell_rate);
    std::vector<std::pair<int, double>> sources;
    for (int j = 0; j <= grid.n_z; ++j) {
        sources.emplace_back(static_cast<int>(grid.node_index(grid.n_r, j)), 0.0);
    }
    sim.phi = fast_march(grid, sim.node_rate, sources);
    sim.t_burn = t_burn;
    sim.profile.times.assign(times.begin(), times.end());
    sim.profile.thrust.reserve(times.size());
    sim.flux.reserve(times.size());
    for (double t : times) {
        const double level = std::max(0.0, t_burn - t);
        const double flux =
            revolved_flux_integral(extract_front(sim.phi, level), grid, sim.node_rate, params.rho_p);
        sim.flux.push_back(flux);
        sim.profile.thrust.push_back(thrust_at(flux, params));
    }
    return sim;
}

BurnSimulation simulate_thrust_profile(const mesh::QuadGrid& grid, std::span<const double> cell_rate,
                                       const RocketParams& params, std::size_t n_samples,
                                       std::optional<double> t_burn) {
    require(n_samples >= 2, ErrorKind::Config, "need at least two thrust samples");
    double tb = 0.0;
    if (t_burn) {
        tb = *t_burn;
    } else {
        const auto phi = solve_eikonal(grid, cell_rate);
        for (int j = 0; j <= grid.n_z; ++j) {
            for (int i = 0; i <= grid.n_r; ++i) {
                if (grid.node_r(i) >= params.r_in - 1e-12 * params.r_out) {
                    tb = std::max(tb, phi.at(i, j));
                }
            }
        }
    }
    return simulate_thrust_at(grid, cell_rate, params, tb, uniform_times(tb, n_samples));
}

SurfaceRadii inner_surface_radii(const ArrivalTimeField& f, double t_burn, std::span<const double> node_speed) {
    const auto& g = f.grid;
    SurfaceRadii out;
    for (int j = 0; j <= g.n_z; ++j) {
        int found = -1;
        for (int i = g.n_r; i >= 0; --i) {
            if (f.at(i, j) >= t_burn) {
                found = i;
                break;
            }
        }
        if (found == g.n_r) {
            out.radius.push_back(g.r_max());
            out.degenerate.push_back(false);
            out.extended.push_back(g.r_max());
        } else if (found >= 0) {
            const double a = f.at(found, j), b = f.at(found + 1, j);
            const double r = g.node_r(found) + g.dr * (a - t_burn) / (a - b);
            out.radius.push_back(r);
            out.degenerate.push_back(false);
            out.extended.push_back(r);
        } else {
            out.radius.push_back(g.r_max());
            out.degenerate.push_back(true);
            const double speed = node_speed.empty() ? 0.0 : node_speed[g.node_index(0, j)];
            out.extended.push_back(g.r0 - (t_burn - f.at(0, j)) * speed);
        }
    }
    return out;
}

std::vector<bool> burn_mask(const ArrivalTimeField& f, double t_burn) {
    const auto& g = f.grid;
    std::vector<char> active(g.n_nodes(), 0);
    std::vector<std::size_t> work;
    auto activate = [&](std::size_t k) {
        if (!active[k]) {
            active[k] = 1;
            work.push_back(k);
        }
    };
    for (int j = 0; j < g.n_z; ++j) {
        for (int i = 0; i < g.n_r; ++i) {
            const std::size_t c[4] = {g.node_index(i, j), g.node_index(i + 1, j), g.node_index(i + 1, j + 1),
                                      g.node_index(i, j + 1)};
            if (std::any_of(std::begin(c), std::end(c), [&](std::size_t k) { return f.phi[k] <= t_burn; })) {
                for (auto k : c) {
                    activate(k);
                }
            }
        }
    }
    // Close under upwind dependencies so kept nodes keep their arrival times.
    while (!work.empty()) {
        const std::size_t k = work.back();
        work.pop_back();
        const int i = static_cast<int>(k % static_cast<std::size_t>(g.nodes_r()));
        const int j = static_cast<int>(k / static_cast<std::size_t>(g.nodes_r()));
        const AxisMins m = axis_mins(g, f.phi, i, j, nullptr);
        if (m.ia >= 0 && m.a < f.phi[k]) {
            activate(static_cast<std::size_t>(m.ia));
        }
        if (m.ib >= 0 && m.b < f.phi[k]) {
            activate(static_cast<std::size_t>(m.ib));
        }
    }
    std::vector<bool> mask(g.n_elements(), false);
    for (int j = 0; j < g.n_z; ++j) {
        for (int i = 0; i < g.n_r; ++i) {
            mask[g.index(i, j)] = !active[g.node_index(i, j)] && !active[g.node_index(i + 1, j)] &&
                                  !active[g.node_index(i + 1, j + 1)] && !active[g.node_index(i, j + 1)];
        }
    }
    return mask;
}

std::vector<double> apply_mask(std::span<const double> cell_rate, const std::vector<bool>& mask) {
    require(mask.size() == cell_rate.size(), ErrorKind::Dimension, "mask has wrong length");
    const double lo = *std::min_element(cell_rate.begin(), cell_rate.end());
    std::vector<double> out(cell_rate.begin(), cell_rate.end());
    for (std::size_t e = 0; e < out.size(); ++e) {
        if (mask[e]) {
            out[e] = lo;
        }
    }
    return out;
}

double average_percent_error(std::span<const double> thrust, std::span<const double> target) {
    require(thrust.size() == target.size() && !target.empty(), ErrorKind::Dimension, "profile lengths differ");
    double err = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        err += std::abs(thrust[i] - target[i]);
        ref += std::abs(target[i]);
    }
    require(ref > 0.0, ErrorKind::InvalidField, "target profile is identically zero");
    return 100.0 * err / ref;
}

} // namespace sbo::rocket
