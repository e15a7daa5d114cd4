#pragma once

#include "sbo/error.hpp"
#include "sbo/io/config.hpp"
#include "sbo/optim/sliding.hpp"
#include "sbo/rocket/design.hpp"
#include "sbo/topopt/design.hpp"

#include <memory>
#include <string>

namespace sbo::io {

enum class Command { Basis, Simulate, Rocket, Topopt, Compare };

std::string to_string(Command c);

/// Exit status for a library error: 2 config or usage, 3 solver or spectral,
/// 4 physics or geometry, 5 file IO.
int exit_code(ErrorKind kind) noexcept;

mesh::QuadGrid rocket_grid(const RunConfig& c);
/// Analytic target, or the configured CSV.
rocket::ThrustProfile rocket_target(const RunConfig& c, const mesh::QuadGrid& grid);
/// Mesh from files or the configured box; supports default to a clamped x = min
/// face, loads to tip_load in -y over the edge x = max, y = min.
topopt::FemModel topopt_model(const RunConfig& c);

/// Laplacian eigenbasis of the domain, or the identity for conventional mode.
std::unique_ptr<optim::BasisProvider> make_basis(const mesh::Domain& domain, Mode mode);

struct ModeResult {
    Mode mode = Mode::Sliding;
    /// Number of weights optimized over.
    std::size_t k = 0;
    optim::SlideTrace trace;
    double objective = 0.0;
    double metric = 0.0;
    double max_violation = 0.0;
    bool feasible = false;
};

/// One optimization in the given mode. Fixed mode uses fixed_k (n_opt when unset).
ModeResult optimize(const optim::DesignProblem& problem, optim::BasisProvider& basis, const RunConfig& c,
                    Mode mode);

/// Runs the command and writes its artifacts to c.output; nothing is left
/// behind on failure. Returns the summary JSON.
std::string run_command(Command command, const RunConfig& c);

} // namespace sbo::io
