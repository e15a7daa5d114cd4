// sbo: batch front-end for the sliding-basis design toolkit.

#include "sbo/error.hpp"
#include "sbo/io/config.hpp"
#include "sbo/io/run.hpp"
#include "sbo/rocket/design.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace sbo;

namespace {

struct Flags {
    std::string config;
    std::string target;
    std::string out;
    std::string mesh;
    std::string bc;
    std::string loads;
    std::optional<std::uint64_t> seed;
    std::string mode;
};

void add_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--out", f.out, "output directory (overrides config)");
    cmd->add_option("--seed", f.seed, "random seed (overrides config)");
    cmd->add_option("--mode", f.mode, "sliding | fixed | conventional");
}

fs::path absolute(const std::string& p) {
    return fs::absolute(fs::path(p));
}

io::RunConfig resolve(io::Command command, const Flags& f) {
    io::RunConfig c = f.config.empty() ? io::parse_config("{}") : io::load_config(f.config);
    switch (command) {
    case io::Command::Rocket:
    case io::Command::Simulate: c.application = io::Application::Rocket; break;
    case io::Command::Topopt: c.application = io::Application::Topopt; break;
    default: break;
    }
    if (!f.out.empty()) c.output = absolute(f.out);
    if (f.seed) c.sliding.rng_seed = *f.seed;
    if (!f.mode.empty()) c.mode = io::parse_mode(f.mode);
    if (!f.target.empty()) {
        try {
            c.rocket.target.kind = rocket::parse_profile_kind(f.target);
            c.rocket.target.csv.reset();
        } catch (const Error&) {
            c.rocket.target.csv = absolute(f.target);
        }
    }
    if (!f.mesh.empty()) {
        const auto comma = f.mesh.find(',');
        require(comma != std::string::npos && comma > 0 && comma + 1 < f.mesh.size(), ErrorKind::Config,
                "--mesh expects <nodes>,<elements>");
        c.topopt.nodes = absolute(f.mesh.substr(0, comma));
        c.topopt.elements = absolute(f.mesh.substr(comma + 1));
    }
    if (!f.bc.empty()) c.topopt.bc = absolute(f.bc);
    if (!f.loads.empty()) c.topopt.loads = absolute(f.loads);
    if (c.output.is_relative()) c.output = fs::absolute(c.output);
    c.validate();
    return c;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sliding-basis reduced-order design optimization"};
    app.require_subcommand(1);
    Flags f;

    auto* basis = app.add_subcommand("basis", "compute and export the Laplacian eigenbasis of the domain");
    add_flags(basis, f);
    auto* simulate = app.add_subcommand("simulate", "forward burn of a burn-rate field");
    add_flags(simulate, f);
    auto* rocket_cmd = app.add_subcommand("rocket", "optimize a grain burn-rate field against a thrust target");
    add_flags(rocket_cmd, f);
    rocket_cmd->add_option("--target", f.target, "profile kind or CSV with header t,thrust");
    auto* topopt_cmd = app.add_subcommand("topopt", "multi-material compliance minimization");
    add_flags(topopt_cmd, f);
    auto* compare = app.add_subcommand("compare", "run sliding, fixed and conventional on one problem");
    add_flags(compare, f);
    compare->add_option("--target", f.target, "profile kind or CSV with header t,thrust");
    for (auto* cmd : {basis, topopt_cmd, compare}) {
        cmd->add_option("--mesh", f.mesh, "<nodes>,<elements> tet mesh files");
        cmd->add_option("--bc", f.bc, "supports CSV (node,component,value)");
        cmd->add_option("--loads", f.loads, "loads CSV (node,fx,fy,fz)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    io::Command command = io::Command::Basis;
    if (*simulate) command = io::Command::Simulate;
    if (*rocket_cmd) command = io::Command::Rocket;
    if (*topopt_cmd) command = io::Command::Topopt;
    if (*compare) command = io::Command::Compare;

    try {
        const auto config = resolve(command, f);
        std::cout << io::run_command(command, config) << '\n';
        return 0;
    } catch (const Error& e) {
        std::cerr << "sbo " << io::to_string(command) << ": " << to_string(e.kind()) << ": " << e.what() << '\n';
        return io::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "sbo " << io::to_string(command) << ": unexpected error: " << e.what() << '\n';
        return 1;
    }
}
