// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run all criteria, exit 0 unless the harness itself breaks
//   acceptance --strict   exit 1 when any criterion fails
//   acceptance 4 9        run only the listed criteria

#include "oracles.hpp"

#include "sbo/error.hpp"
#include "sbo/io/writers.hpp"
#include "sbo/rocket/design.hpp"
#include "sbo/topopt/design.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace sbo;
using mesh::Vec3;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    // Records one check; failures are listed first in the detail.
    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail = "FAILED " + what + "; " + detail;
        } else {
            detail += what + "; ";
        }
    }
};

class Stopwatch {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string sci(double v) {
    return fmt("%.2e", v);
}

std::vector<int> nodes_where(const mesh::TetMesh& m, const std::function<bool(const Vec3&)>& pred) {
    std::vector<int> out;
    for (std::size_t i = 0; i < m.vertices.size(); ++i)
        if (pred(m.vertices[i])) out.push_back(static_cast<int>(i));
    return out;
}

topopt::FemModel cantilever(int nx, int ny, int nz, double lx, double ly, double lz, double nu = 0.3) {
    auto m = mesh::make_box_tet_mesh(nx, ny, nz, lx, ly, lz);
    auto clamp = topopt::clamp_nodes(nodes_where(m, [](const Vec3& x) { return x[0] < 1e-12; }));
    auto edge = nodes_where(m, [&](const Vec3& x) { return x[0] > lx - 1e-12 && x[1] < 1e-12; });
    std::vector<double> f(3 * m.vertices.size(), 0.0);
    for (int v : edge) f[3 * static_cast<std::size_t>(v) + 1] = -1e3 / static_cast<double>(edge.size());
    return topopt::FemModel(std::move(m), nu, std::move(clamp), std::move(f));
}

// ---------------------------------------------------------------------------

Verdict spectral_correctness() {
    Verdict v;
    Stopwatch sw;
    auto run = [&](const std::string& name, const mesh::ElementAdjacency& adj, const Eigen::MatrixXd& dense) {
        const int n = static_cast<int>(dense.rows());
        const auto basis = spectral::smallest_eigenpairs(spectral::assemble_laplacian(adj), static_cast<std::size_t>(n));
        const auto ref = oracle::dense_eigen(dense);
        Eigen::MatrixXd b(n, n);
        double val_err = 0.0, res_err = 0.0;
        for (int j = 0; j < n; ++j) {
            const auto col = basis.column(static_cast<std::size_t>(j));
            for (int i = 0; i < n; ++i) b(i, j) = col[static_cast<std::size_t>(i)];
            val_err = std::max(val_err, std::abs(basis.eigenvalue(static_cast<std::size_t>(j)) - ref.values(j)));
            res_err = std::max(res_err, (dense * b.col(j) - basis.eigenvalue(static_cast<std::size_t>(j)) * b.col(j)).norm());
        }
        // Eigenvectors compared through spectral projectors, so degenerate
        // eigenspaces are compared as subspaces.
        double proj_err = 0.0;
        for (int first = 0; first < n;) {
            int last = first + 1;
            while (last < n && ref.values(last) - ref.values(first) < 1e-6) ++last;
            proj_err = std::max(proj_err, (oracle::projector(b, first, last) - oracle::projector(ref.vectors, first, last))
                                              .cwiseAbs()
                                              .maxCoeff());
            first = last;
        }
        const double ortho = (b.transpose() * b - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
        double const_err = 0.0;
        const double s = b(0, 0) > 0 ? 1.0 : -1.0;
        for (int i = 0; i < n; ++i) const_err = std::max(const_err, std::abs(s * b(i, 0) - 1.0 / std::sqrt(n)));
        v.check(val_err <= 1e-8, name + " eigenvalues " + sci(val_err));
        v.check(res_err <= 1e-7 && proj_err <= 1e-7, name + " vectors residual " + sci(res_err) + " projector " + sci(proj_err));
        v.check(std::abs(basis.eigenvalue(0)) <= 1e-8 && const_err <= 1e-8, name + " lambda_1 " + sci(basis.eigenvalue(0)));
        v.check(ortho <= 1e-8, name + " B^T B - I " + sci(ortho));
    };
    run("path10", oracle::path_adjacency(10), oracle::dense_path_laplacian(10));
    run("grid4x4", mesh::face_adjacency(mesh::build_quad_grid(4, 4, 0.25, 1.0, 1.0)), oracle::dense_grid_laplacian(4, 4));
    const double t = sw.seconds();
    v.check(t < 1.0, "runtime " + fmt("%.3f s", t));
    return v;
}

// Least squares |B w - target|^2 with an analytic gradient.
optim::DesignProblem least_squares(const optim::BasisProvider& b, std::vector<double> target, bool analytic) {
    optim::DesignProblem p;
    p.evaluate = [&b, target](std::span<const double> w) {
        auto field = b.synthesize(w);
        optim::Evaluation e;
        e.f = 0.0;
        for (std::size_t i = 0; i < field.size(); ++i) e.f += (field[i] - target[i]) * (field[i] - target[i]);
        e.metric = e.f;
        return e;
    };
    if (analytic) {
        p.evaluate_with_gradient = [&b, target](std::span<const double> w, optim::Sensitivity& s) {
            auto field = b.synthesize(w);
            optim::Evaluation e;
            e.f = 0.0;
            std::vector<double> r(field.size());
            for (std::size_t i = 0; i < field.size(); ++i) {
                e.f += (field[i] - target[i]) * (field[i] - target[i]);
                r[i] = 2.0 * (field[i] - target[i]);
            }
            e.metric = e.f;
            s.df = b.reduce(r, w.size());
            return e;
        };
    }
    return p;
}

Verdict sliding_accounting() {
    Verdict v;
    struct Row {
        const char* name;
        std::size_t n_opt, n_s, n_slides, listed;
    };
    const Row rows[] = {{"constant-acceleration", 20, 15, 14, 230},
                        {"two-step", 20, 15, 7, 125},
                        {"bucket", 20, 15, 24, 380},
                        {"constant-deceleration", 50, 40, 7, 320}};
    for (const auto& r : rows) {
        const std::size_t k = optim::total_basis(r.n_opt, r.n_s, r.n_slides);
        // The same count from the optimizer: every slide improves, the basis
        // limit stops it after exactly n_slides slides.
        optim::IdentityBasisProvider id(1000);
        optim::SlidingConfig c;
        c.n_opt = r.n_opt;
        c.n_s = r.n_s;
        c.s_max = 1;
        c.epsilon = 1e-12;
        c.inner_max_iter = 3;
        c.max_step = 10.0;
        c.max_basis = k;
        auto trace = optim::slide_optimize(least_squares(id, std::vector<double>(1000, 1.0), true), id, c);
        const bool loop_ok = trace.stop == optim::StopReason::BasisExhausted && trace.n_slides() == r.n_slides &&
                             trace.explored_basis() == k && trace.weights.size() == k;
        const std::string what = std::string(r.name) + " " + std::to_string(k) + " (listed " +
                                 std::to_string(r.listed) + ", loop " + std::to_string(trace.explored_basis()) + ")";
        if (r.listed == 320) {
            // The reference row lists 320, but 50 + 7 * 40 = 330.
            v.check(k == 330 && k != r.listed && loop_ok, what + " listed total inconsistent");
        } else {
            v.check(k == r.listed && loop_ok, what);
        }
    }
    return v;
}

Verdict algorithm_semantics() {
    Verdict v;
    Stopwatch sw;
    auto grid = mesh::build_quad_grid(10, 8, 0.0, 1.0, 1.0);
    optim::LaplacianBasisProvider prov(spectral::assemble_laplacian(mesh::face_adjacency(grid)));
    prov.ensure(30);
    std::vector<double> w_star(30);
    for (std::size_t j = 0; j < 30; ++j) w_star[j] = std::cos(1.0 + static_cast<double>(j)) / (1.0 + 0.2 * static_cast<double>(j));
    const auto target = prov.synthesize(w_star);
    const auto problem = least_squares(prov, target, false);

    optim::SlidingConfig c;
    c.n_opt = 8;
    c.n_s = 5;
    c.s_max = 2;
    c.rng_seed = 4;
    c.epsilon = 1e-6;
    c.max_step = 10.0;
    const auto t = optim::slide_optimize(problem, prov, c);

    bool monotone = true;
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& r : t.records) {
        monotone = monotone && r.f <= prev;
        prev = r.f;
    }
    v.check(monotone, "accepted objective non-increasing over " + std::to_string(t.records.size()) + " optimizations");

    // Termination by it_s >= s_max: the run ends on s_max consecutive rejections.
    std::size_t trailing = 0;
    for (auto it = t.records.rbegin(); it != t.records.rend() && !it->accepted; ++it) ++trailing;
    v.check(t.stop == optim::StopReason::Stalled && trailing == static_cast<std::size_t>(c.s_max),
            "stall after " + std::to_string(trailing) + " rejections");

    // Termination by convergence.
    auto cc = c;
    cc.converged_tol = 0.5 * t.records.front().f;
    const auto tc = optim::slide_optimize(problem, prov, cc);
    v.check(tc.stop == optim::StopReason::Converged && tc.metric <= *cc.converged_tol, "converged stop");

    // Rejected slides: weights after the accepted window are zeros and the
    // accepted prefix equals a run limited to that window.
    const auto anchor = prov.synthesize(std::vector<double>(w_star.begin(), w_star.begin() + 6));
    optim::SlidingConfig rc;
    rc.n_opt = 6;
    rc.n_s = 4;
    rc.s_max = 3;
    rc.epsilon = 1e-3;
    rc.max_step = 10.0;
    const auto rp = least_squares(prov, anchor, true);
    const auto rt = optim::slide_optimize(rp, prov, rc);
    auto one = rc;
    one.max_basis = 6;
    const auto first = optim::slide_optimize(rp, prov, one);
    bool prefix = rt.weights.size() == 6 + 3 * 4 && first.weights.size() == 6;
    for (std::size_t j = 0; prefix && j < 6; ++j) prefix = std::memcmp(&rt.weights[j], &first.weights[j], sizeof(double)) == 0;
    bool zeros = rt.weights.size() > 6;
    for (std::size_t j = 6; j < rt.weights.size(); ++j) zeros = zeros && rt.weights[j] == 0.0 && !std::signbit(rt.weights[j]);
    bool rejected = rt.records.size() == 4 && rt.records[0].accepted;
    for (std::size_t i = 1; rejected && i < 4; ++i)
        rejected = !rt.records[i].accepted && rt.records[i].f == rt.records[0].f;
    v.check(rejected && prefix && zeros, "rejected slides append " + std::to_string(rc.slide()) + " zeros each, prefix bit-identical");

    // Determinism under a fixed seed.
    const auto t2 = optim::slide_optimize(problem, prov, c);
    bool same = t2.weights == t.weights && t2.records.size() == t.records.size();
    for (std::size_t i = 0; same && i < t.records.size(); ++i)
        same = t2.records[i].f == t.records[i].f && t2.records[i].accepted == t.records[i].accepted &&
               t2.records[i].evaluations == t.records[i].evaluations;
    v.check(same, "deterministic replay");
    const double s = sw.seconds();
    v.check(s < 10.0, "runtime " + fmt("%.2f s", s));
    return v;
}

Verdict evaluation_dominance() {
    Verdict v;
    Stopwatch sw;
    rocket::RocketParams p;
    const auto grid = mesh::build_quad_grid(60, 30, p.r_in, p.r_out, p.L);
    optim::LaplacianBasisProvider basis(spectral::assemble_laplacian(mesh::face_adjacency(grid)));
    const filters::LogisticBounds bounds{4e-3, 16e-3, 6.0};
    const double t_burn = 4.5, ratio = 1.5;
    const std::size_t samples = 50;
    const double scale = rocket::reference_thrust_scale(grid, p, bounds, t_burn, samples);
    const auto target = rocket::make_target_profile(rocket::ProfileKind::TwoStep, t_burn, scale, samples, ratio);
    rocket::RocketDesign design(grid, p, target, basis, {bounds, -1.0});
    const auto problem = design.problem();  // black box: finite-difference gradients

    optim::SlidingConfig c;
    c.n_opt = 10;
    c.n_s = 8;
    c.s_max = 3;
    c.inner_max_iter = 30;
    c.rng_seed = 1;
    c.converged_tol = 5.0;
    c.threads = static_cast<int>(std::clamp(std::thread::hardware_concurrency(), 1u, 8u));
    const auto slide = optim::slide_optimize(problem, basis, c);
    const double t_slide = sw.seconds();
    const auto fixed = optim::fixed_basis_optimize(problem, basis, slide.explored_basis(), c);

    const double eval_ratio = static_cast<double>(fixed.total_evaluations) / static_cast<double>(slide.total_evaluations);
    v.check(slide.total_evaluations < fixed.total_evaluations,
            "evaluations sliding " + std::to_string(slide.total_evaluations) + " vs fixed " +
                std::to_string(fixed.total_evaluations) + " at k = " + std::to_string(slide.explored_basis()) +
                ", fixed/sliding ratio " + fmt("%.3f", eval_ratio));
    v.check(slide.metric <= 5.0, "sliding profile error " + fmt("%.2f%%", slide.metric) + " (fixed " +
                                     fmt("%.2f%%", fixed.metric) + ")");
    v.check(t_slide < 1800.0, "sliding time " + fmt("%.1f s", t_slide));
    return v;
}

Verdict eikonal_accuracy() {
    Verdict v;
    Stopwatch sw;
    const double c = 0.01;
    // Axisymmetric annulus r_in <= r <= r_out, burning inward from the casing.
    for (int n : {20, 40, 80}) {
        rocket::RocketParams p;
        auto g = mesh::build_quad_grid(n, n / 2, p.r_in, p.r_out, p.L);
        auto phi = rocket::solve_eikonal(g, std::vector<double>(g.n_elements(), c));
        double worst = 0.0;
        for (int j = 0; j <= g.n_z; ++j)
            for (int i = 0; i <= g.n_r; ++i)
                if (g.node_r(i) >= p.r_in) worst = std::max(worst, std::abs(phi.at(i, j) - (p.r_out - g.node_r(i)) / c));
        v.check(worst <= 2.0 * g.dr / c, "axisymmetric n=" + std::to_string(n) + " err " + sci(worst));
    }
    // Planar annulus R_in <= |x| <= R_out in the cross-section, sources on and
    // beyond the outer circle; the front is curved so the scheme's error shows.
    const double r_in = 0.5, r_out = 1.0;
    std::vector<double> errs;
    for (int n : {40, 80, 160}) {
        auto g = mesh::build_quad_grid(n, n, 0.1, 2.0 * r_out, 2.0 * r_out);
        auto radius = [&](int i, int j) { return std::hypot(g.node_r(i) - r_out, g.node_z(j) - r_out); };
        std::vector<std::pair<int, double>> src;
        for (int j = 0; j <= n; ++j)
            for (int i = 0; i <= n; ++i)
                if (radius(i, j) >= r_out) src.emplace_back(static_cast<int>(g.node_index(i, j)), (r_out - radius(i, j)) / c);
        auto phi = rocket::fast_march(g, std::vector<double>(g.n_nodes(), c), src);
        double worst = 0.0;
        for (int j = 0; j <= n; ++j)
            for (int i = 0; i <= n; ++i)
                if (radius(i, j) >= r_in && radius(i, j) < r_out)
                    worst = std::max(worst, std::abs(phi.at(i, j) - (r_out - radius(i, j)) / c));
        v.check(worst <= 2.0 * g.dr / c, "annulus n=" + std::to_string(n) + " err*c/h " + fmt("%.3f", worst * c / g.dr));
        errs.push_back(worst);
    }
    const double d1 = errs[0] / errs[1], d2 = errs[1] / errs[2];
    v.check(d1 > 1.4 && d2 > 1.4 && d1 < 2.8 && d2 < 2.8, "error ratios under halving " + fmt("%.2f", d1) + ", " + fmt("%.2f", d2));
    const double s = sw.seconds();
    v.check(s < 5.0, "runtime " + fmt("%.2f s", s));
    return v;
}

Verdict thrust_physics() {
    Verdict v;
    rocket::RocketParams p;

    // Homogeneity through the full burn simulation.
    {
        auto g = mesh::build_quad_grid(30, 12, p.r_in, p.r_out, p.L);
        std::vector<double> rate(g.n_elements());
        for (std::size_t e = 0; e < rate.size(); ++e) {
            const double r = g.r0 + (g.i_of(e) + 0.5) * g.dr, z = g.z0 + (g.j_of(e) + 0.5) * g.dz;
            rate[e] = 0.01 * (1.0 + 0.4 * std::sin(40.0 * r) * std::cos(9.0 * z));
        }
        const auto base = rocket::simulate_thrust_profile(g, rate, p, 25);
        double worst = 0.0;
        for (double alpha : {0.5, 2.0, 3.7}) {
            auto scaled = rate;
            for (auto& r : scaled) r *= alpha;
            const auto sim = rocket::simulate_thrust_profile(g, scaled, p, 25);
            for (std::size_t k = 0; k < 25; ++k) {
                if (base.profile.thrust[k] == 0.0) continue;
                const double expect = std::pow(alpha, 1.0 / (1.0 - p.n)) * base.profile.thrust[k];
                worst = std::max(worst, std::abs(sim.profile.thrust[k] - expect) / expect);
            }
        }
        v.check(worst <= 1e-10, "homogeneity " + sci(worst));
    }
    // Uniform cylinder: the front is the circle r = r_in + c t.
    {
        const double c = 0.01;
        auto g = mesh::build_quad_grid(100, 30, p.r_in, p.r_out, p.L);
        const auto sim = rocket::simulate_thrust_profile(g, std::vector<double>(g.n_elements(), c), p, 40);
        double worst = 0.0;
        for (std::size_t k = 0; k < sim.profile.size(); ++k) {
            const double radius = p.r_in + c * sim.profile.times[k];
            const double flux = p.rho_p * c * 2.0 * std::numbers::pi * radius * p.L;
            const double exact = std::pow(std::pow(p.P_ref, -p.n) * std::pow(p.isp(), 1.0 - p.n) * std::pow(p.A_t, -p.n) *
                                              std::pow(p.c_s, p.n) * flux,
                                          1.0 / (1.0 - p.n));
            worst = std::max(worst, std::abs(sim.profile.thrust[k] - exact) / exact);
        }
        v.check(worst <= 0.05, "cylinder burnback 100x30 max rel err " + fmt("%.4f", worst));
    }
    // Mass balance: inflow under the pressure law equals nozzle outflow, with
    // I_sp = th / mdot_out = C_f c_s.
    {
        double worst = 0.0;
        for (double n : {0.2, 0.35, 0.6}) {
            rocket::RocketParams q = p;
            q.n = n;
            const double flux = 2.75;
            const double th = rocket::thrust_at(flux, q);
            const double pc = th / (q.C_f * q.A_t);
            const double out = q.A_t * pc / q.c_s;
            const double in = flux * std::pow(pc / q.P_ref, q.n);
            worst = std::max({worst, std::abs(in - out) / out, std::abs(th / out - q.isp()) / q.isp()});
        }
        v.check(worst <= 1e-10, "mass balance " + sci(worst));
    }
    return v;
}

// Element stiffness from the Lame form with shape gradients taken from face
// normals: grad N_a = -n_a A_a / (3 V) for the face opposite vertex a.
Eigen::Matrix<double, 12, 12> lame_oracle(const std::array<Vec3, 4>& x, double e, double nu) {
    auto sub = [](const Vec3& a, const Vec3& b) { return Eigen::Vector3d(a[0] - b[0], a[1] - b[1], a[2] - b[2]); };
    const double vol = sub(x[1], x[0]).cross(sub(x[2], x[0])).dot(sub(x[3], x[0])) / 6.0;
    std::array<Eigen::Vector3d, 4> grad;
    for (int a = 0; a < 4; ++a) {
        const auto& p = x[(a + 1) % 4];
        const auto& q = x[(a + 2) % 4];
        const auto& r = x[(a + 3) % 4];
        Eigen::Vector3d n = 0.5 * sub(q, p).cross(sub(r, p));  // area-weighted normal
        if (n.dot(sub(x[a], p)) > 0) n = -n;                  // point away from vertex a
        grad[a] = n / (3.0 * vol);
    }
    const double lambda = e * nu / ((1 + nu) * (1 - 2 * nu));
    const double mu = e / (2 * (1 + nu));
    Eigen::Matrix<double, 12, 12> k;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    k(3 * a + i, 3 * b + j) = vol * (lambda * grad[a](i) * grad[b](j) + mu * grad[a](j) * grad[b](i) +
                                                     (i == j ? mu * grad[a].dot(grad[b]) : 0.0));
    return k;
}

Verdict fem_correctness() {
    Verdict v;
    Stopwatch sw;
    {
        const std::array<Vec3, 4> x{Vec3{0.1, 0.0, 0.2}, Vec3{1.3, 0.1, 0.0}, Vec3{0.2, 0.9, 0.1}, Vec3{0.3, 0.2, 1.1}};
        const double e = 2.5, nu = 0.28;
        const auto k = topopt::tet_stiffness(x, e, nu);
        const auto ref = lame_oracle(x, e, nu);
        const double err = (k - ref).cwiseAbs().maxCoeff() / ref.cwiseAbs().maxCoeff();
        v.check(err <= 1e-12, "single tet vs Lame oracle " + sci(err));
    }
    {
        // Patch test on a box with perturbed interior nodes.
        const double len[3] = {1.0, 2.0, 1.5};
        auto box = mesh::make_box_tet_mesh(4, 4, 4, len[0], len[1], len[2]);
        auto on_boundary = [&](const Vec3& p) {
            for (int d = 0; d < 3; ++d)
                if (p[d] < 1e-12 || p[d] > len[d] - 1e-12) return true;
            return false;
        };
        std::mt19937_64 rng(21);
        std::uniform_real_distribution<double> u(-0.08, 0.08);
        auto verts = box.vertices;
        for (auto& p : verts)
            if (!on_boundary(p))
                for (int d = 0; d < 3; ++d) p[d] += u(rng) * len[d] / 4.0;
        auto m = mesh::make_tet_mesh(verts, box.tets);
        const double a[3][3] = {{1e-3, 2e-4, -3e-4}, {5e-4, -1e-3, 1e-4}, {-2e-4, 3e-4, 7e-4}};
        const double b[3] = {1e-3, -2e-3, 5e-4};
        auto exact = [&](const Vec3& p, int c) { return b[c] + a[c][0] * p[0] + a[c][1] * p[1] + a[c][2] * p[2]; };
        std::vector<topopt::Dirichlet> fixed;
        for (int n : nodes_where(m, on_boundary))
            for (int c = 0; c < 3; ++c) fixed.push_back({3 * n + c, exact(m.vertices[static_cast<std::size_t>(n)], c)});
        topopt::FemModel model(m, 0.3, fixed, std::vector<double>(3 * m.vertices.size(), 0.0));
        const auto sol = model.solve(std::vector<double>(m.n_elements(), 1.0));
        double err = 0.0;
        for (std::size_t n = 0; n < m.vertices.size(); ++n)
            for (int c = 0; c < 3; ++c) err = std::max(err, std::abs(sol.u[3 * n + static_cast<std::size_t>(c)] - exact(m.vertices[n], c)));
        v.check(err <= 1e-12, "patch test max err " + sci(err));
    }
    {
        // Slender cantilever, 60000 tets; nu = 0 as beam theory assumes.
        const double lx = 10.0, ly = 1.0, lz = 1.0, e = 1000.0, load = 1.0;
        auto m = mesh::make_box_tet_mesh(100, 10, 10, lx, ly, lz);
        auto clamp = topopt::clamp_nodes(nodes_where(m, [](const Vec3& p) { return p[0] < 1e-12; }));
        auto tip = nodes_where(m, [&](const Vec3& p) { return p[0] > lx - 1e-12; });
        std::vector<double> f(3 * m.vertices.size(), 0.0);
        for (int n : tip) f[3 * static_cast<std::size_t>(n) + 1] = -load / static_cast<double>(tip.size());
        topopt::FemModel model(m, 0.0, clamp, f);
        const auto sol = model.solve(std::vector<double>(m.n_elements(), e));
        double tip_v = 0.0;
        for (int n : tip) tip_v -= sol.u[3 * static_cast<std::size_t>(n) + 1];
        tip_v /= static_cast<double>(tip.size());
        const double beam = load * lx * lx * lx / (3.0 * e * lz * ly * ly * ly / 12.0);
        const double rel = std::abs(tip_v - beam) / beam;
        v.check(rel <= 0.05, "cantilever tip " + fmt("%.4f", tip_v) + " vs beam " + fmt("%.4f", beam) + " (" +
                                 fmt("%.1f%%", 100 * rel) + ")");
    }
    const double s = sw.seconds();
    v.check(s < 30.0, "runtime " + fmt("%.1f s", s));
    return v;
}

Verdict gradient_correctness() {
    Verdict v;
    auto model = cantilever(4, 2, 2, 2.0, 1.0, 1.0);
    const std::size_t k = 12;
    optim::LaplacianBasisProvider basis(spectral::assemble_laplacian(mesh::face_adjacency(model.mesh())));
    basis.ensure(k);
    topopt::TopoptDesign design(model, topopt::ToPoConfig{}, basis);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    double worst_c = 0.0, worst_m = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> w(k);
        for (auto& x : w) x = u(rng);
        const auto s = design.gradient(w, design.evaluate(w));
        const double h = 1e-5;
        const auto fd_c = oracle::central_difference([&](const std::vector<double>& x) { return design.evaluate(x).compliance; }, w, h);
        const auto fd_m = oracle::central_difference([&](const std::vector<double>& x) { return design.evaluate(x).mass_fraction; }, w, h);
        worst_c = std::max(worst_c, oracle::rel_error(s.df, fd_c));
        worst_m = std::max(worst_m, oracle::rel_error(s.dg[0], fd_m));
    }
    v.check(model.mesh().n_elements() <= 200, std::to_string(model.mesh().n_elements()) + " elements");
    v.check(worst_c <= 1e-4, "compliance gradient " + sci(worst_c));
    v.check(worst_m <= 1e-4, "mass gradient " + sci(worst_m));

    double adj = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> w(k), df(model.mesh().n_elements());
        for (auto& x : w) x = u(rng);
        for (auto& x : df) x = u(rng);
        const auto field = basis.synthesize(w);
        const auto red = basis.reduce(df, k);
        double lhs = 0.0, rhs = 0.0, nf = 0.0, nd = 0.0;
        for (std::size_t i = 0; i < df.size(); ++i) {
            lhs += field[i] * df[i];
            nf += field[i] * field[i];
            nd += df[i] * df[i];
        }
        for (std::size_t j = 0; j < k; ++j) rhs += w[j] * red[j];
        adj = std::max(adj, std::abs(lhs - rhs) / std::sqrt(nf * nd));
    }
    v.check(adj <= 1e-12, "<Bw, dF> = <w, B^T dF> " + sci(adj));
    return v;
}

Verdict topopt_scenario() {
    Verdict v;
    Stopwatch sw;
    auto model = cantilever(20, 10, 4, 2.0, 1.0, 0.4);
    optim::LaplacianBasisProvider basis(spectral::assemble_laplacian(mesh::face_adjacency(model.mesh())));
    topopt::ToPoConfig cfg;  // {0, 0.1, 1} / {0, 2, 3} GPa, m_frac 0.5
    topopt::TopoptDesign design(model, cfg, basis);
    const auto problem = design.problem(true);
    optim::SlidingConfig c;
    c.n_opt = 20;
    c.n_s = 15;
    c.s_max = 3;
    c.inner_max_iter = 50;
    c.rng_seed = 1;
    const auto slide = optim::slide_optimize(problem, basis, c);
    const auto fixed = optim::fixed_basis_optimize(problem, basis, slide.explored_basis(), c);
    const auto es = design.evaluate(slide.weights);
    const auto ef = design.evaluate(fixed.weights);

    const double slack = es.mass_fraction - cfg.m_frac;
    v.check(model.mesh().n_elements() <= 5000, std::to_string(model.mesh().n_elements()) + " tets");
    v.check(slack <= 1e-6, "mass fraction " + fmt("%.9f", es.mass_fraction) + " (violation " + sci(std::max(slack, 0.0)) + ")");
    v.check(es.compliance <= 1.05 * ef.compliance,
            "compliance sliding " + fmt("%.6g", es.compliance) + " vs fixed " + fmt("%.6g", ef.compliance) +
                " at k = " + std::to_string(slide.explored_basis()) + " (ratio " + fmt("%.4f", es.compliance / ef.compliance) + ")");

    // Visual artifact: the strongest material should sit on the load paths.
    const auto dir = std::filesystem::current_path() / "acceptance_artifacts";
    std::filesystem::create_directories(dir);
    io::write_field_vtk(dir / "cantilever_density.vtk", model.mesh(), es.rho_filtered, "density");
    const auto ids = design.material_ids(es.rho_filtered);
    io::write_field_vtk(dir / "cantilever_material.vtk", model.mesh(), std::vector<double>(ids.begin(), ids.end()), "material");
    v.check(true, "artifacts in " + dir.string() + ", " + fmt("%.0f s", sw.seconds()));
    return v;
}

Verdict filter_suite() {
    Verdict v;
    {
        const filters::LogisticBounds b{0.1, 1.0, 6.0};
        const double mid = filters::logistic_bound(0.0, b);
        const double lo = filters::logistic_bound(-40.0, b), hi = filters::logistic_bound(40.0, b);
        v.check(std::abs(mid - 0.55) <= 1e-15, "logistic midpoint " + fmt("%.17g", mid));
        v.check(std::abs(lo - 0.1) <= 1e-12 && std::abs(hi - 1.0) <= 1e-12 && lo >= 0.1 && hi <= 1.0, "asymptotes");
        double worst_fd = 0.0, worst_exact = 0.0;
        for (double x : {-3.0, -1.3, -0.2, 0.0, 0.4, 0.9, 2.1}) {
            const double q = std::exp(-b.kappa * x);
            const double exact = b.kappa * (b.upper - b.lower) * q / ((1.0 + q) * (1.0 + q));
            worst_exact = std::max(worst_exact, std::abs(filters::logistic_bound_grad(x, b) - exact) / exact);
            if (std::abs(x) <= 1.0) {
                const double h = 1e-5;
                const double fd = (filters::logistic_bound(x + h, b) - filters::logistic_bound(x - h, b)) / (2 * h);
                worst_fd = std::max(worst_fd, std::abs(filters::logistic_bound_grad(x, b) - fd) / std::abs(fd));
            }
        }
        v.check(worst_exact <= 1e-12, "logistic derivative vs closed form " + sci(worst_exact));
        v.check(worst_fd <= 1e-7, "logistic derivative vs FD " + sci(worst_fd));
    }
    {
        bool exact = true;
        for (const auto& set : {topopt::cantilever_materials(), topopt::bracket_materials()})
            for (const auto& m : set.materials) {
                const double e = filters::ordered_simp(m.density, set).modulus;
                exact = exact && std::abs(e - m.modulus) <= 1e-12 * std::max(1.0, m.modulus);
            }
        const auto cm = topopt::cantilever_materials();
        const auto bm = topopt::bracket_materials();
        const bool sets_ok = cm.materials.size() == 3 && cm.materials[1].density == 0.1 && cm.materials[1].modulus == 2e9 &&
                               cm.materials[2].modulus == 3e9 && bm.materials[0].density == 0.1 &&
                               bm.materials[1].density == 0.3 && bm.materials[0].modulus == 1.5e9 &&
                               bm.materials[1].modulus == 2.5e9;
        v.check(exact && sets_ok, "ordered SIMP knots exact on both material sets");
    }
    {
        auto g = mesh::build_quad_grid(9, 7, 0.05, 0.1, 0.2);
        const auto cent = mesh::element_centroids(g);
        const double radius = 2.5 * std::max(g.dr, g.dz);
        filters::DensityFilter filter(cent, radius);
        std::mt19937_64 rng(8);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<double> x(cent.size());
        for (auto& t : x) t = u(rng);
        const auto y = filter.apply(x);
        double worst = 0.0;
        for (std::size_t e = 0; e < cent.size(); ++e) {
            long double num = 0.0L, den = 0.0L;
            for (std::size_t i = 0; i < cent.size(); ++i) {
                const double d = std::sqrt((cent[e][0] - cent[i][0]) * (cent[e][0] - cent[i][0]) +
                                           (cent[e][1] - cent[i][1]) * (cent[e][1] - cent[i][1]) +
                                           (cent[e][2] - cent[i][2]) * (cent[e][2] - cent[i][2]));
                const double w = std::max(0.0, radius - d);
                num += static_cast<long double>(w) * x[i];
                den += w;
            }
            worst = std::max(worst, std::abs(y[e] - static_cast<double>(num / den)));
        }
        v.check(worst <= 1e-12, "density filter vs brute force " + sci(worst));
    }
    return v;
}

} // namespace

int main(int argc, char** argv) {
    bool strict = false;
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--strict") == 0) {
            strict = true;
        } else {
            only.insert(std::atoi(argv[i]));
        }
    }
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"spectral correctness", spectral_correctness},
        {"sliding-window accounting", sliding_accounting},
        {"sliding algorithm semantics", algorithm_semantics},
        {"evaluation-count dominance", evaluation_dominance},
        {"eikonal accuracy", eikonal_accuracy},
        {"thrust physics", thrust_physics},
        {"FEM correctness", fem_correctness},
        {"gradient correctness", gradient_correctness},
        {"topology optimization scenario", topopt_scenario},
        {"filter suite", filter_suite},
    };
    int failed = 0, broken = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("ERROR ") + e.what();
            ++broken;
        }
        std::string detail = v.detail;
        while (!detail.empty() && (detail.back() == ' ' || detail.back() == ';')) detail.pop_back();
        std::printf("criterion %2d %-31s %s: %s\n", id, criteria[i].first, v.pass ? "PASS" : "FAIL", detail.c_str());
        std::fflush(stdout);
        failed += v.pass ? 0 : 1;
    }
    std::printf("%d of %zu criteria failed\n", failed, only.empty() ? criteria.size() : only.size());
    if (broken > 0) return 2;
    return strict && failed > 0 ? 1 : 0;
}
