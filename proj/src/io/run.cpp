#include "sbo/io/run.hpp"

#include "sbo/error.hpp"
#include "sbo/io/writers.hpp"
#include "sbo/spectral/basis.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

namespace sbo::io {

using json = nlohmann::ordered_json;

std::string to_string(Command c) {
    switch (c) {
    case Command::Basis: return "basis";
    case Command::Simulate: return "simulate";
    case Command::Rocket: return "rocket";
    case Command::Topopt: return "topopt";
    case Command::Compare: return "compare";
    }
    return "unknown";
}

int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::Dimension: return 2;
    case ErrorKind::Solver:
    case ErrorKind::SpectralFailure: return 3;
    case ErrorKind::InvalidDomain:
    case ErrorKind::NonManifold:
    case ErrorKind::DegenerateElement:
    case ErrorKind::InvalidField:
    case ErrorKind::SingularExponent: return 4;
    case ErrorKind::Io: return 5;
    }
    return 1;
}

mesh::QuadGrid rocket_grid(const RunConfig& c) {
    const auto& p = c.rocket.params;
    return mesh::build_quad_grid(c.rocket.n_r, c.rocket.n_z, p.r_in, p.r_out, p.L);
}

rocket::ThrustProfile rocket_target(const RunConfig& c, const mesh::QuadGrid& grid) {
    const auto& t = c.rocket.target;
    if (t.csv) {
        return rocket::read_profile_csv(*t.csv);
    }
    const double scale =
        t.scale ? *t.scale
                : rocket::reference_thrust_scale(grid, c.rocket.params, c.rocket.bounds, t.t_burn, t.samples);
    return rocket::make_target_profile(t.kind, t.t_burn, scale, t.samples, t.ratio);
}

topopt::FemModel topopt_model(const RunConfig& c) {
    const auto& t = c.topopt;
    mesh::TetMesh m = t.nodes ? mesh::read_tet_mesh(*t.nodes, *t.elements)
                              : mesh::make_box_tet_mesh(t.box.nx, t.box.ny, t.box.nz, t.box.lx, t.box.ly, t.box.lz);
    mesh::Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    for (const auto& v : m.vertices) {
        for (int d = 0; d < 3; ++d) {
            lo[d] = std::min(lo[d], v[d]);
            hi[d] = std::max(hi[d], v[d]);
        }
    }
    const double tol = 1e-9 * std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]});

    std::vector<topopt::Dirichlet> fixed;
    if (t.bc) {
        fixed = topopt::read_supports_csv(*t.bc);
    } else {
        std::vector<int> face;
        for (std::size_t i = 0; i < m.vertices.size(); ++i) {
            if (m.vertices[i][0] <= lo[0] + tol) {
                face.push_back(static_cast<int>(i));
            }
        }
        fixed = topopt::clamp_nodes(face);
    }

    std::vector<double> f;
    if (t.loads) {
        f = topopt::read_loads_csv(*t.loads, m.vertices.size());
    } else {
        std::vector<std::size_t> edge;
        for (std::size_t i = 0; i < m.vertices.size(); ++i) {
            if (m.vertices[i][0] >= hi[0] - tol && m.vertices[i][1] <= lo[1] + tol) {
                edge.push_back(i);
            }
        }
        require(!edge.empty(), ErrorKind::InvalidDomain, "mesh has no nodes on the loaded edge");
        f.assign(3 * m.vertices.size(), 0.0);
        for (std::size_t i : edge) {
            f[3 * i + 1] = -t.tip_load / static_cast<double>(edge.size());
        }
    }
    return topopt::FemModel(std::move(m), t.nu, std::move(fixed), std::move(f), t.solver_tol);
}

std::unique_ptr<optim::BasisProvider> make_basis(const mesh::Domain& domain, Mode mode) {
    const std::size_t n = std::visit([](const auto& d) { return d.n_elements(); }, domain);
    if (mode == Mode::Conventional) {
        return std::make_unique<optim::IdentityBasisProvider>(n);
    }
    auto adj = std::visit([](const auto& d) { return mesh::face_adjacency(d); }, domain);
    return std::make_unique<optim::LaplacianBasisProvider>(spectral::assemble_laplacian(adj));
}

ModeResult optimize(const optim::DesignProblem& problem, optim::BasisProvider& basis, const RunConfig& c, Mode mode) {
    ModeResult r;
    r.mode = mode;
    switch (mode) {
    case Mode::Sliding:
        r.trace = optim::slide_optimize(problem, basis, c.sliding);
        r.k = r.trace.explored_basis();
        break;
    case Mode::Fixed:
        r.k = c.fixed_k ? *c.fixed_k : c.sliding.n_opt;
        r.trace = optim::fixed_basis_optimize(problem, basis, r.k, c.sliding);
        break;
    case Mode::Conventional:
        r.k = basis.capacity();
        r.trace = optim::fixed_basis_optimize(problem, basis, r.k, c.sliding);
        break;
    }
    const auto e = problem.evaluate(r.trace.weights);
    r.objective = e.f;
    r.metric = e.metric;
    r.max_violation = e.max_violation();
    r.feasible = r.max_violation <= c.sliding.feas_tol;
    return r;
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

json trace_json(const ModeResult& r) {
    const auto& t = r.trace;
    return {{"mode", to_string(r.mode)},
            {"k", r.k},
            {"objective", r.objective},
            {"metric", r.metric},
            {"max_violation", r.max_violation},
            {"feasible", r.feasible},
            {"evaluations", t.total_evaluations},
            {"optimizations", t.optimizations()},
            {"slides", t.n_slides()},
            {"explored_basis", t.explored_basis()},
            {"n_opt", t.n_opt},
            {"n_s", t.n_s},
            {"epsilon", t.epsilon},
            {"stop", optim::to_string(t.stop)},
            {"seconds", t.total_seconds}};
}

json header(Command command, const RunConfig& c) {
    return {{"command", to_string(command)},
            {"application", to_string(c.application)},
            {"mode", to_string(c.mode)},
            {"seed", c.sliding.rng_seed}};
}

void finish(StagedDirectory& stage, const RunConfig& c, json& summary, Clock::time_point t0) {
    summary["seconds"] = since(t0);
    write_text(stage.file("config.json"), dump_config(c));
    write_text(stage.file("summary.json"), summary.dump(2) + "\n");
    stage.commit();
}

mesh::Domain domain_of(const RunConfig& c) {
    if (c.application == Application::Rocket) {
        return rocket_grid(c);
    }
    const auto& t = c.topopt;
    if (t.nodes) {
        return mesh::read_tet_mesh(*t.nodes, *t.elements);
    }
    return mesh::make_box_tet_mesh(t.box.nx, t.box.ny, t.box.nz, t.box.lx, t.box.ly, t.box.lz);
}

void write_domain_field(const std::filesystem::path& path, const mesh::Domain& d, std::span<const double> v,
                        const std::string& name) {
    std::visit([&](const auto& m) { write_field_vtk(path, m, v, name); }, d);
}

std::string run_basis(const RunConfig& c) {
    const auto t0 = Clock::now();
    const mesh::Domain domain = domain_of(c);
    const auto adj = std::visit([](const auto& d) { return mesh::face_adjacency(d); }, domain);
    spectral::LaplacianEigensolver solver(spectral::assemble_laplacian(adj));
    const std::size_t k = std::min(c.basis.k, solver.n_elements());
    const auto basis = solver.smallest(k);

    StagedDirectory stage(c.output);
    CsvTable ev;
    ev.header = {"index", "eigenvalue", "residual"};
    ev.columns.assign(3, {});
    double worst = 0.0;
    for (std::size_t j = 0; j < basis.size(); ++j) {
        const double res = solver.residual(basis, j);
        worst = std::max(worst, res);
        ev.columns[0].push_back(static_cast<double>(j));
        ev.columns[1].push_back(basis.eigenvalue(j));
        ev.columns[2].push_back(res);
    }
    write_csv(stage.file("eigenvalues.csv"), ev);
    for (std::size_t j = 0; j < std::min(c.basis.export_modes, basis.size()); ++j) {
        char name[32];
        std::snprintf(name, sizeof name, "mode_%03zu.vtk", j);
        write_domain_field(stage.file(name), domain, basis.column(j), "mode");
    }
    spectral::save_basis(stage.file("basis.bin"), basis, spectral::domain_hash(adj));

    json s = header(Command::Basis, c);
    s["n_elements"] = basis.n_elements();
    s["k"] = basis.size();
    s["max_residual"] = worst;
    s["orthonormality_error"] = basis.orthonormality_error();
    finish(stage, c, s, t0);
    return s.dump(2);
}

std::vector<double> read_field(const std::filesystem::path& path, std::size_t n) {
    const auto table = read_csv(path);
    const auto& rate = table.column("rate");
    require(rate.size() == n, ErrorKind::Dimension,
            "field file has " + std::to_string(rate.size()) + " rates for " + std::to_string(n) + " cells");
    return rate;
}

CsvTable field_table(const mesh::QuadGrid& grid, std::span<const double> rate, const std::vector<bool>* mask) {
    CsvTable t;
    t.header = {"cell", "i", "j", "r", "z", "rate"};
    if (mask) {
        t.header.push_back("masked");
    }
    t.columns.assign(t.header.size(), {});
    const auto cent = mesh::element_centroids(grid);
    for (std::size_t e = 0; e < grid.n_elements(); ++e) {
        t.columns[0].push_back(static_cast<double>(e));
        t.columns[1].push_back(grid.i_of(e));
        t.columns[2].push_back(grid.j_of(e));
        t.columns[3].push_back(cent[e][0]);
        t.columns[4].push_back(cent[e][1]);
        t.columns[5].push_back(rate[e]);
        if (mask) {
            t.columns[6].push_back((*mask)[e] ? 1.0 : 0.0);
        }
    }
    return t;
}

void write_thrust(const std::filesystem::path& path, const rocket::ThrustProfile& p,
                  const rocket::ThrustProfile* target) {
    CsvTable t;
    t.header = {"t", "thrust"};
    t.columns = {p.times, p.thrust};
    if (target) {
        t.header.push_back("target");
        t.columns.push_back(target->thrust);
    }
    write_csv(path, t);
}

std::string run_simulate(const RunConfig& c) {
    require(c.application == Application::Rocket, ErrorKind::Config, "simulate burns a rocket grain");
    const auto t0 = Clock::now();
    const auto grid = rocket_grid(c);
    std::vector<double> rate;
    if (c.rocket.field) {
        rate = read_field(*c.rocket.field, grid.n_elements());
    } else {
        rate.assign(grid.n_elements(), 0.5 * (c.rocket.bounds.lower + c.rocket.bounds.upper));
    }
    const auto sim = rocket::simulate_thrust_profile(grid, rate, c.rocket.params, c.rocket.target.samples);

    StagedDirectory stage(c.output);
    write_thrust(stage.file("thrust.csv"), sim.profile, nullptr);
    write_field_vtk(stage.file("field.vtk"), grid, rate, "burn_rate");
    json s = header(Command::Simulate, c);
    s["t_burn"] = sim.t_burn;
    s["peak_thrust"] = *std::max_element(sim.profile.thrust.begin(), sim.profile.thrust.end());
    double impulse = 0.0;
    for (std::size_t i = 1; i < sim.profile.size(); ++i) {
        impulse += 0.5 * (sim.profile.thrust[i] + sim.profile.thrust[i - 1]) *
                   (sim.profile.times[i] - sim.profile.times[i - 1]);
    }
    s["total_impulse"] = impulse;
    finish(stage, c, s, t0);
    return s.dump(2);
}

rocket::RocketDesignOptions rocket_options(const RunConfig& c) {
    rocket::RocketDesignOptions o;
    o.bounds = c.rocket.bounds;
    o.margin = c.rocket.margin ? *c.rocket.margin : -1.0;
    return o;
}

CsvTable constraint_table(const rocket::RocketDesign& design, const rocket::RocketEvaluation& e) {
    CsvTable t;
    t.header = {"row", "z", "r_b", "extended", "degenerate", "g"};
    t.columns.assign(6, {});
    const auto& g = design.grid();
    for (int j = 0; j < g.nodes_z(); ++j) {
        const auto u = static_cast<std::size_t>(j);
        t.columns[0].push_back(j);
        t.columns[1].push_back(g.node_z(j));
        t.columns[2].push_back(e.radii.radius[u]);
        t.columns[3].push_back(e.radii.extended[u]);
        t.columns[4].push_back(e.radii.degenerate[u] ? 1.0 : 0.0);
        t.columns[5].push_back(e.constraints[u]);
    }
    return t;
}

std::string run_rocket(const RunConfig& c) {
    const auto t0 = Clock::now();
    const auto grid = rocket_grid(c);
    const auto target = rocket_target(c, grid);
    auto basis = make_basis(grid, c.mode);
    rocket::RocketDesign design(grid, c.rocket.params, target, *basis, rocket_options(c));
    const auto problem = design.problem();
    const ModeResult r = optimize(problem, *basis, c, c.mode);
    const auto e = design.evaluate(r.trace.weights);
    const auto mask = rocket::burn_mask(e.sim.phi, design.t_burn());
    const auto masked = rocket::apply_mask(e.field, mask);

    StagedDirectory stage(c.output);
    write_field_vtk(stage.file("field.vtk"), grid, masked, "burn_rate");
    write_csv(stage.file("field.csv"), field_table(grid, e.field, &mask));
    write_thrust(stage.file("profile.csv"), e.sim.profile, &target);
    rocket::write_profile_csv(stage.file("target.csv"), target);
    write_csv(stage.file("constraints.csv"), constraint_table(design, e));
    write_trace_csv(stage.file("trace.csv"), r.trace);
    write_weights(stage.file("weights.txt"), r.trace.weights);

    json s = header(Command::Rocket, c);
    s["target"] = target.kind;
    s["t_burn"] = design.t_burn();
    s["percent_error"] = e.percent_error;
    s["result"] = trace_json(r);
    finish(stage, c, s, t0);
    return s.dump(2);
}

CsvTable element_table(const topopt::TopoptDesign& design, const topopt::TopoptEvaluation& e) {
    CsvTable t;
    t.header = {"element", "rho", "rho_filtered", "material", "modulus"};
    t.columns.assign(5, {});
    const auto ids = design.material_ids(e.rho_filtered);
    for (std::size_t i = 0; i < e.rho.size(); ++i) {
        t.columns[0].push_back(static_cast<double>(i));
        t.columns[1].push_back(e.rho[i]);
        t.columns[2].push_back(e.rho_filtered[i]);
        t.columns[3].push_back(ids[i]);
        t.columns[4].push_back(e.modulus[i]);
    }
    return t;
}

std::string run_topopt(const RunConfig& c) {
    const auto t0 = Clock::now();
    const auto model = topopt_model(c);
    auto basis = make_basis(model.mesh(), c.mode);
    topopt::TopoptDesign design(model, c.topopt.design, *basis);
    const auto problem = design.problem(c.topopt.analytic_gradient);
    const ModeResult r = optimize(problem, *basis, c, c.mode);
    const auto e = design.evaluate(r.trace.weights);
    const auto ids = design.material_ids(e.rho_filtered);

    StagedDirectory stage(c.output);
    write_field_vtk(stage.file("density.vtk"), model.mesh(), e.rho_filtered, "density");
    write_field_vtk(stage.file("material.vtk"), model.mesh(), std::vector<double>(ids.begin(), ids.end()),
                    "material");
    write_csv(stage.file("elements.csv"), element_table(design, e));
    write_trace_csv(stage.file("trace.csv"), r.trace);
    write_weights(stage.file("weights.txt"), r.trace.weights);

    json s = header(Command::Topopt, c);
    s["n_elements"] = model.mesh().n_elements();
    s["compliance"] = e.compliance;
    s["mass_fraction"] = e.mass_fraction;
    s["mass_slack"] = e.mass_fraction - c.topopt.design.m_frac;
    s["filter_radius"] = design.filter().radius();
    s["result"] = trace_json(r);
    finish(stage, c, s, t0);
    return s.dump(2);
}

std::string run_compare(const RunConfig& c) {
    const auto t0 = Clock::now();
    std::unique_ptr<topopt::FemModel> model;
    std::unique_ptr<rocket::ThrustProfile> target;
    mesh::Domain domain;
    if (c.application == Application::Rocket) {
        domain = rocket_grid(c);
        target = std::make_unique<rocket::ThrustProfile>(rocket_target(c, std::get<mesh::QuadGrid>(domain)));
    } else {
        model = std::make_unique<topopt::FemModel>(topopt_model(c));
        domain = model->mesh();
    }

    std::vector<ModeResult> results;
    std::optional<std::size_t> sliding_k;
    // Sliding runs first so fixed mode can cover the same k.
    std::vector<Mode> order = c.compare_modes;
    std::stable_sort(order.begin(), order.end(), [](Mode a, Mode b) {
        return (a == Mode::Sliding) > (b == Mode::Sliding);
    });
    for (Mode m : order) {
        RunConfig mc = c;
        if (m == Mode::Fixed && !c.fixed_k && sliding_k) {
            mc.fixed_k = sliding_k;
        }
        auto basis = make_basis(domain, m);
        if (c.application == Application::Rocket) {
            rocket::RocketDesign design(std::get<mesh::QuadGrid>(domain), c.rocket.params, *target, *basis,
                                        rocket_options(c));
            results.push_back(optimize(design.problem(), *basis, mc, m));
        } else {
            topopt::TopoptDesign design(*model, c.topopt.design, *basis);
            results.push_back(optimize(design.problem(c.topopt.analytic_gradient), *basis, mc, m));
        }
        if (m == Mode::Sliding) {
            sliding_k = results.back().k;
        }
    }

    StagedDirectory stage(c.output);
    std::FILE* f = std::fopen(stage.file("comparison.csv").c_str(), "w");
    require(f != nullptr, ErrorKind::Io, "cannot write comparison.csv");
    std::fprintf(f, "mode,k,objective,metric,evaluations,seconds,feasible\n");
    for (const auto& r : results) {
        std::fprintf(f, "%s,%zu,%.17g,%.17g,%lld,%.17g,%d\n", to_string(r.mode).c_str(), r.k, r.objective,
                     r.metric, static_cast<long long>(r.trace.total_evaluations), r.trace.total_seconds,
                     r.feasible ? 1 : 0);
    }
    require(std::fclose(f) == 0, ErrorKind::Io, "failed writing comparison.csv");
    json s = header(Command::Compare, c);
    json rows = json::array();
    for (const auto& r : results) {
        write_trace_csv(stage.file("trace_" + to_string(r.mode) + ".csv"), r.trace);
        write_weights(stage.file("weights_" + to_string(r.mode) + ".txt"), r.trace.weights);
        rows.push_back(trace_json(r));
    }
    s["results"] = rows;
    const auto find = [&](Mode m) -> const ModeResult* {
        for (const auto& r : results) {
            if (r.mode == m) return &r;
        }
        return nullptr;
    };
    if (const auto *a = find(Mode::Sliding), *b = find(Mode::Fixed); a && b && a->trace.total_evaluations > 0) {
        s["fixed_to_sliding_evaluations"] =
            static_cast<double>(b->trace.total_evaluations) / static_cast<double>(a->trace.total_evaluations);
    }
    finish(stage, c, s, t0);
    return s.dump(2);
}

} // namespace

std::string run_command(Command command, const RunConfig& c) {
    c.validate();
    switch (command) {
    case Command::Basis: return run_basis(c);
    case Command::Simulate: return run_simulate(c);
    case Command::Rocket:
        require(c.application == Application::Rocket, ErrorKind::Config, "rocket needs application rocket");
        return run_rocket(c);
    case Command::Topopt:
        require(c.application == Application::Topopt, ErrorKind::Config, "topopt needs application topopt");
        return run_topopt(c);
    case Command::Compare: return run_compare(c);
    }
    fail(ErrorKind::Config, "unknown command");
}

} // namespace sbo::io
