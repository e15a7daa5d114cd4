#pragma once

#include "sbo/filters/filters.hpp"
#include "sbo/optim/sliding.hpp"
#include "sbo/rocket/burn.hpp"
#include "sbo/rocket/design.hpp"
#include "sbo/topopt/design.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sbo::io {

enum class Application { Rocket, Topopt };
enum class Mode { Sliding, Fixed, Conventional };

std::string to_string(Application a);
std::string to_string(Mode m);
Mode parse_mode(const std::string& s);
Application parse_application(const std::string& s);

struct TargetSpec {
    rocket::ProfileKind kind = rocket::ProfileKind::TwoStep;
    double t_burn = 4.5;
    std::size_t samples = 50;
    double ratio = 1.5;
    /// Mean thrust; unset uses the uniform mid-bound field burned for t_burn.
    std::optional<double> scale;
    /// Profile CSV; overrides the analytic target when set.
    std::optional<std::filesystem::path> csv;
};

struct RocketSection {
    int n_r = 60;
    int n_z = 30;
    rocket::RocketParams params;
    filters::LogisticBounds bounds{4e-3, 16e-3, 6.0};
    std::optional<double> margin;
    TargetSpec target;
    /// Per-cell burn rates for `simulate`; unset burns the uniform mid-bound field.
    std::optional<std::filesystem::path> field;
};

struct BoxSpec {
    int nx = 20, ny = 10, nz = 4;
    double lx = 2.0, ly = 1.0, lz = 0.4;
};

struct TopoptSection {
    std::optional<std::filesystem::path> nodes;
    std::optional<std::filesystem::path> elements;
    /// Used when no mesh files are given.
    BoxSpec box;
    std::optional<std::filesystem::path> bc;
    std::optional<std::filesystem::path> loads;
    /// Without a loads file: total force in -y spread over the edge x = max, y = min.
    double tip_load = 1e3;
    double nu = 0.3;
    double solver_tol = 1e-8;
    bool analytic_gradient = true;
    topopt::ToPoConfig design;
};

struct BasisSection {
    std::size_t k = 20;
    std::size_t export_modes = 4;
};

struct RunConfig {
    Application application = Application::Rocket;
    Mode mode = Mode::Sliding;
    std::filesystem::path output = "out";
    optim::SlidingConfig sliding;
    /// Basis size for fixed mode; unset uses n_opt.
    std::optional<std::size_t> fixed_k;
    RocketSection rocket;
    TopoptSection topopt;
    BasisSection basis;
    std::vector<Mode> compare_modes{Mode::Sliding, Mode::Fixed, Mode::Conventional};

    void validate() const;
};

/// Throws a Config error on malformed JSON, unknown keys or bad values.
/// Relative paths are resolved against `base_dir`.
RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
/// Every tunable, defaults included; parse_config(dump_config(c)) == c.
std::string dump_config(const RunConfig& config);

} // namespace sbo::io
