#include "sbo/rocket/design.hpp"

#include "sbo/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sbo::rocket {

ProfileKind parse_profile_kind(const std::string& name) {
    if (name == "constant-acceleration") return ProfileKind::ConstantAcceleration;
    if (name == "constant-deceleration") return ProfileKind::ConstantDeceleration;
    if (name == "two-step") return ProfileKind::TwoStep;
    if (name == "bucket") return ProfileKind::Bucket;
    fail(ErrorKind::Config, "unknown profile kind '" + name + "'");
}

std::string to_string(ProfileKind k) {
    switch (k) {
    case ProfileKind::ConstantAcceleration: return "constant-acceleration";
    case ProfileKind::ConstantDeceleration: return "constant-deceleration";
    case ProfileKind::TwoStep: return "two-step";
    case ProfileKind::Bucket: return "bucket";
    }
    return "unknown";
}

ThrustProfile make_target_profile(ProfileKind kind, double t_burn, double scale, std::size_t n_samples,
                                  double ratio) {
    require(scale > 0.0 && ratio >= 1.0, ErrorKind::Config, "target needs scale > 0 and ratio >= 1");
    ThrustProfile p;
    p.kind = to_string(kind);
    p.times = uniform_times(t_burn, n_samples);
    const double low2 = 2.0 * scale / (1.0 + ratio);
    const double low3 = 3.0 * scale / (2.0 * ratio + 1.0);
    for (double t : p.times) {
        const double s = t / t_burn;
        double th = 0.0;
        switch (kind) {
        case ProfileKind::ConstantAcceleration: th = low2 * (1.0 + (ratio - 1.0) * s); break;
        case ProfileKind::ConstantDeceleration: th = low2 * (ratio - (ratio - 1.0) * s); break;
        case ProfileKind::TwoStep: th = s < 0.5 ? low2 : ratio * low2; break;
        case ProfileKind::Bucket: th = (s < 1.0 / 3.0 || s > 2.0 / 3.0) ? ratio * low3 : low3; break;
        }
        p.thrust.push_back(th);
    }
    return p;
}

void write_profile_csv(const std::filesystem::path& path, const ThrustProfile& profile) {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
    out << "t,thrust\n";
    char buf[64];
    for (std::size_t i = 0; i < profile.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,", profile.times[i]);
        out << buf;
        std::snprintf(buf, sizeof buf, "%.17g\n", profile.thrust[i]);
        out << buf;
    }
    require(static_cast<bool>(out), ErrorKind::Io, "failed writing " + path.string());
}

ThrustProfile read_profile_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot read " + path.string());
    ThrustProfile p;
    std::string line;
    std::getline(in, line);
    require(line.rfind("t,thrust", 0) == 0, ErrorKind::Config, "profile CSV must start with header t,thrust");
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream row(line);
        std::string a, b;
        require(std::getline(row, a, ',') && std::getline(row, b), ErrorKind::Config, "malformed profile row");
        try {
            p.times.push_back(std::stod(a));
            p.thrust.push_back(std::stod(b));
        } catch (const std::exception&) {
            fail(ErrorKind::Config, "non-numeric profile row: " + line);
        }
    }
    p.validate();
    return p;
}

RocketDesign::RocketDesign(mesh::QuadGrid grid, RocketParams params, ThrustProfile target,
                           const optim::BasisProvider& basis, RocketDesignOptions opts)
    : grid_(grid), params_(params), target_(std::move(target)), basis_(&basis), opts_(opts) {
    params_.validate();
    target_.validate();
    opts_.bounds.validate();
    require(opts_.bounds.lower > 0.0, ErrorKind::Config, "burn-rate lower bound must be positive");
    require(basis.n_elements() == grid_.n_elements(), ErrorKind::Dimension, "basis does not match the grid");
    margin_ = opts_.margin < 0.0 ? grid_.dr : opts_.margin;
}

std::vector<double> RocketDesign::field(std::span<const double> w) const {
    auto x = basis_->synthesize(w);
    const double scale = std::sqrt(static_cast<double>(x.size()));
    for (auto& v : x) {
        v *= scale;
    }
    return filters::logistic_bound(x, opts_.bounds);
}

RocketEvaluation RocketDesign::evaluate(std::span<const double> w) const {
    RocketEvaluation e;
    e.field = field(w);
    e.sim = simulate_thrust_at(grid_, e.field, params_, t_burn(), target_.times);
    e.radii = inner_surface_radii(e.sim.phi, t_burn(), e.sim.node_rate);
    for (std::size_t i = 0; i < target_.size(); ++i) {
        const double d = e.sim.profile.thrust[i] - target_.thrust[i];
        e.objective += d * d;
    }
    e.percent_error = average_percent_error(e.sim.profile.thrust, target_.thrust);
    for (double r : e.radii.extended) {
        e.constraints.push_back((params_.r_in + margin_ - r) / grid_.dr);
    }
    return e;
}

optim::DesignProblem RocketDesign::problem() const {
    optim::DesignProblem p;
    p.n_constraints = n_constraints();
    p.evaluate = [this](std::span<const double> w) {
        optim::Evaluation out;
        try {
            RocketEvaluation e = evaluate(w);
            out.f = e.objective;
            out.g = std::move(e.constraints);
            out.metric = e.percent_error;
        } catch (const Error& err) {
            if (err.kind() != ErrorKind::InvalidField) {
                throw;
            }
            out.f = std::numeric_limits<double>::quiet_NaN();
            out.g.assign(n_constraints(), std::numeric_limits<double>::quiet_NaN());
        }
        return out;
    };
    return p;
}

double reference_thrust_scale(const mesh::QuadGrid& grid, const RocketParams& params,
                              const filters::LogisticBounds& bounds, double t_burn, std::size_t n_samples) {
    const std::vector<double> uniform(grid.n_elements(), filters::logistic_bound(0.0, bounds));
    const auto sim = simulate_thrust_at(grid, uniform, params, t_burn, uniform_times(t_burn, n_samples));
    double s = 0.0;
    for (double th : sim.profile.thrust) {
        s += th;
    }
    return s / static_cast<double>(sim.profile.thrust.size());
}

} // namespace sbo::rocket
