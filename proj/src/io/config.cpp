#include "sbo/io/config.hpp"

#include "sbo/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace sbo::io {

using json = nlohmann::ordered_json;

namespace {

// Reads one JSON object, remembering which keys were consumed so unknown
// keys (usually typos) can be rejected.
class Section {
public:
    Section(const json& j, std::string where, std::filesystem::path base)
        : j_(j), where_(std::move(where)), base_(std::move(base)) {
        require(j_.is_object(), ErrorKind::Config, where_ + " must be a JSON object");
    }

    template <class T>
    void get(const char* key, T& out) {
        used_.insert(key);
        if (!j_.contains(key)) {
            return;
        }
        const json& v = j_.at(key);
        require(!v.is_null(), ErrorKind::Config, name(key) + " may not be null");
        out = convert<T>(v, key);
    }

    template <class T>
    void get(const char* key, std::optional<T>& out) {
        used_.insert(key);
        if (!j_.contains(key)) {
            return;
        }
        const json& v = j_.at(key);
        if (v.is_null()) {
            out.reset();
        } else {
            out = convert<T>(v, key);
        }
    }

    void get_path(const char* key, std::optional<std::filesystem::path>& out) {
        std::optional<std::string> s;
        if (out) {
            s = out->string();
        }
        get(key, s);
        if (!s) {
            out.reset();
            return;
        }
        require(!s->empty(), ErrorKind::Config, name(key) + " is an empty path");
        std::filesystem::path p(*s);
        out = p.is_absolute() || base_.empty() ? p : base_ / p;
    }

    Section child(const char* key) {
        used_.insert(key);
        static const json empty = json::object();
        return Section(j_.contains(key) ? j_.at(key) : empty, name(key), base_);
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            require(used_.count(it.key()) > 0, ErrorKind::Config, "unknown key " + name(it.key()));
        }
    }

private:
    std::string name(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

    template <class T>
    T convert(const json& v, const char* key) const {
        try {
            if constexpr (std::is_same_v<T, bool>) {
                require(v.is_boolean(), ErrorKind::Config, name(key) + " must be true or false");
            } else if constexpr (std::is_integral_v<T>) {
                require(v.is_number_integer(), ErrorKind::Config, name(key) + " must be an integer");
                if constexpr (std::is_unsigned_v<T>) {
                    require(!v.is_number_integer() || v.is_number_unsigned() || v.get<long long>() >= 0,
                            ErrorKind::Config, name(key) + " must be non-negative");
                }
            } else if constexpr (std::is_floating_point_v<T>) {
                require(v.is_number(), ErrorKind::Config, name(key) + " must be a number");
            } else if constexpr (std::is_same_v<T, std::string>) {
                require(v.is_string(), ErrorKind::Config, name(key) + " must be a string");
            } else {
                require(v.is_array(), ErrorKind::Config, name(key) + " must be an array");
            }
            return v.get<T>();
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Config, name(key) + ": " + e.what());
        }
    }

    const json& j_;
    std::string where_;
    std::filesystem::path base_;
    std::set<std::string> used_;
};

template <class T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

json opt_path(const std::optional<std::filesystem::path>& p) {
    return p ? json(p->string()) : json(nullptr);
}

void read_sliding(Section s, optim::SlidingConfig& c, std::optional<std::size_t>& fixed_k) {
    s.get("n_opt", c.n_opt);
    s.get("n_s", c.n_s);
    s.get("s_max", c.s_max);
    s.get("epsilon", c.epsilon);
    s.get("inner_max_iter", c.inner_max_iter);
    s.get("fd_step", c.fd_step);
    s.get("init_scale", c.init_scale);
    s.get("converged_tol", c.converged_tol);
    s.get("zero_first_window", c.zero_first_window);
    s.get("warm_start", c.warm_start);
    s.get("max_basis", c.max_basis);
    s.get("threads", c.threads);
    s.get("feas_tol", c.feas_tol);
    s.get("max_step", c.max_step);
    s.get("fixed_k", fixed_k);
    s.finish();
}

void read_bounds(Section s, filters::LogisticBounds& b) {
    s.get("lower", b.lower);
    s.get("upper", b.upper);
    s.get("kappa", b.kappa);
    s.finish();
}

void read_rocket(Section s, RocketSection& r) {
    s.get("n_r", r.n_r);
    s.get("n_z", r.n_z);
    {
        Section p = s.child("params");
        auto& q = r.params;
        p.get("C_f", q.C_f);
        p.get("A_t", q.A_t);
        p.get("c_s", q.c_s);
        p.get("rho_p", q.rho_p);
        p.get("P_ref", q.P_ref);
        p.get("n", q.n);
        p.get("I_sp", q.I_sp);
        p.get("r_in", q.r_in);
        p.get("r_out", q.r_out);
        p.get("L", q.L);
        p.finish();
    }
    read_bounds(s.child("bounds"), r.bounds);
    s.get("margin", r.margin);
    {
        Section t = s.child("target");
        std::string kind = rocket::to_string(r.target.kind);
        t.get("kind", kind);
        r.target.kind = rocket::parse_profile_kind(kind);
        t.get("t_burn", r.target.t_burn);
        t.get("samples", r.target.samples);
        t.get("ratio", r.target.ratio);
        t.get("scale", r.target.scale);
        t.get_path("csv", r.target.csv);
        t.finish();
    }
    s.get_path("field", r.field);
    s.finish();
}

void read_topopt(Section s, TopoptSection& t) {
    s.get_path("nodes", t.nodes);
    s.get_path("elements", t.elements);
    {
        Section b = s.child("box");
        b.get("nx", t.box.nx);
        b.get("ny", t.box.ny);
        b.get("nz", t.box.nz);
        b.get("lx", t.box.lx);
        b.get("ly", t.box.ly);
        b.get("lz", t.box.lz);
        b.finish();
    }
    s.get_path("bc", t.bc);
    s.get_path("loads", t.loads);
    s.get("tip_load", t.tip_load);
    s.get("nu", t.nu);
    s.get("solver_tol", t.solver_tol);
    s.get("analytic_gradient", t.analytic_gradient);
    auto& d = t.design;
    s.get("m_frac", d.m_frac);
    s.get("penalty", d.materials.penalty);
    s.get("filter_radius", d.filter_radius);
    s.get("kappa", d.kappa);
    s.get("void_modulus", d.void_modulus);
    std::optional<std::vector<std::vector<double>>> mats;
    s.get("materials", mats);
    if (mats) {
        d.materials.materials.clear();
        for (const auto& m : *mats) {
            require(m.size() == 2, ErrorKind::Config, "topopt.materials entries are [density, modulus]");
            d.materials.materials.push_back({m[0], m[1]});
        }
    }
    s.finish();
}

void check_file(const std::optional<std::filesystem::path>& p, const std::string& what) {
    if (p) {
        require(std::filesystem::is_regular_file(*p), ErrorKind::Io, what + " not found: " + p->string());
    }
}

} // namespace

std::string to_string(Application a) {
    return a == Application::Rocket ? "rocket" : "topopt";
}

std::string to_string(Mode m) {
    switch (m) {
    case Mode::Sliding: return "sliding";
    case Mode::Fixed: return "fixed";
    case Mode::Conventional: return "conventional";
    }
    return "unknown";
}

Mode parse_mode(const std::string& s) {
    if (s == "sliding") return Mode::Sliding;
    if (s == "fixed") return Mode::Fixed;
    if (s == "conventional") return Mode::Conventional;
    fail(ErrorKind::Config, "mode must be sliding, fixed or conventional, not '" + s + "'");
}

Application parse_application(const std::string& s) {
    if (s == "rocket") return Application::Rocket;
    if (s == "topopt") return Application::Topopt;
    fail(ErrorKind::Config, "application must be rocket or topopt, not '" + s + "'");
}

void RunConfig::validate() const {
    sliding.validate();
    require(!fixed_k || *fixed_k >= 1, ErrorKind::Config, "fixed_k must be positive");
    require(rocket.n_r >= 2 && rocket.n_z >= 2, ErrorKind::Config, "rocket grid needs n_r, n_z >= 2");
    rocket.params.validate();
    rocket.bounds.validate();
    require(rocket.bounds.lower > 0.0, ErrorKind::Config, "burn-rate lower bound must be positive");
    require(!rocket.margin || *rocket.margin >= 0.0, ErrorKind::Config, "margin must be non-negative");
    const auto& t = rocket.target;
    require(t.t_burn > 0.0 && t.samples >= 2 && t.ratio >= 1.0, ErrorKind::Config,
            "target needs t_burn > 0, samples >= 2 and ratio >= 1");
    require(!t.scale || *t.scale > 0.0, ErrorKind::Config, "target scale must be positive");
    check_file(t.csv, "target profile");
    check_file(rocket.field, "burn-rate field");

    require(topopt.nodes.has_value() == topopt.elements.has_value(), ErrorKind::Config,
            "topopt mesh needs both nodes and elements");
    check_file(topopt.nodes, "mesh nodes file");
    check_file(topopt.elements, "mesh elements file");
    check_file(topopt.bc, "supports file");
    check_file(topopt.loads, "loads file");
    const auto& b = topopt.box;
    require(b.nx >= 1 && b.ny >= 1 && b.nz >= 1 && b.lx > 0.0 && b.ly > 0.0 && b.lz > 0.0, ErrorKind::Config,
            "topopt.box needs positive counts and lengths");
    require(topopt.nu > -1.0 && topopt.nu < 0.5, ErrorKind::Config, "nu must lie in (-1, 0.5)");
    require(std::isfinite(topopt.tip_load) && topopt.tip_load != 0.0, ErrorKind::Config,
            "tip_load must be finite and nonzero");
    require(topopt.solver_tol > 0.0, ErrorKind::Config, "solver_tol must be positive");
    topopt.design.validate();
    require(basis.k >= 1, ErrorKind::Config, "basis.k must be positive");
    require(!compare_modes.empty(), ErrorKind::Config, "compare.modes may not be empty");
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::Config, std::string("malformed config: ") + e.what());
    }
    RunConfig c;
    Section root(j, "", base_dir);
    std::string app = to_string(c.application);
    root.get("application", app);
    c.application = parse_application(app);
    std::string mode = to_string(c.mode);
    root.get("mode", mode);
    c.mode = parse_mode(mode);
    root.get("seed", c.sliding.rng_seed);
    std::optional<std::filesystem::path> out = c.output;
    root.get_path("output", out);
    require(out.has_value(), ErrorKind::Config, "output may not be null");
    c.output = *out;
    read_sliding(root.child("sliding"), c.sliding, c.fixed_k);
    read_rocket(root.child("rocket"), c.rocket);
    read_topopt(root.child("topopt"), c.topopt);
    {
        Section b = root.child("basis");
        b.get("k", c.basis.k);
        b.get("export_modes", c.basis.export_modes);
        b.finish();
    }
    {
        Section cmp = root.child("compare");
        std::optional<std::vector<std::string>> modes;
        cmp.get("modes", modes);
        if (modes) {
            c.compare_modes.clear();
            for (const auto& m : *modes) {
                c.compare_modes.push_back(parse_mode(m));
            }
        }
        cmp.finish();
    }
    root.finish();
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::filesystem::absolute(path).parent_path());
}

std::string dump_config(const RunConfig& c) {
    json j;
    j["application"] = to_string(c.application);
    j["mode"] = to_string(c.mode);
    j["seed"] = c.sliding.rng_seed;
    j["output"] = c.output.string();
    const auto& s = c.sliding;
    j["sliding"] = {{"n_opt", s.n_opt},
                    {"n_s", opt(s.n_s)},
                    {"s_max", s.s_max},
                    {"epsilon", opt(s.epsilon)},
                    {"inner_max_iter", s.inner_max_iter},
                    {"fd_step", s.fd_step},
                    {"init_scale", s.init_scale},
                    {"converged_tol", opt(s.converged_tol)},
                    {"zero_first_window", s.zero_first_window},
                    {"warm_start", s.warm_start},
                    {"max_basis", s.max_basis},
                    {"threads", s.threads},
                    {"feas_tol", s.feas_tol},
                    {"max_step", s.max_step},
                    {"fixed_k", opt(c.fixed_k)}};
    const auto& r = c.rocket;
    const auto& p = r.params;
    j["rocket"] = {
        {"n_r", r.n_r},
        {"n_z", r.n_z},
        {"params",
         {{"C_f", p.C_f},
          {"A_t", p.A_t},
          {"c_s", p.c_s},
          {"rho_p", p.rho_p},
          {"P_ref", p.P_ref},
          {"n", p.n},
          {"I_sp", opt(p.I_sp)},
          {"r_in", p.r_in},
          {"r_out", p.r_out},
          {"L", p.L}}},
        {"bounds", {{"lower", r.bounds.lower}, {"upper", r.bounds.upper}, {"kappa", r.bounds.kappa}}},
        {"margin", opt(r.margin)},
        {"target",
         {{"kind", rocket::to_string(r.target.kind)},
          {"t_burn", r.target.t_burn},
          {"samples", r.target.samples},
          {"ratio", r.target.ratio},
          {"scale", opt(r.target.scale)},
          {"csv", opt_path(r.target.csv)}}},
        {"field", opt_path(r.field)}};
    const auto& t = c.topopt;
    json mats = json::array();
    for (const auto& m : t.design.materials.materials) {
        mats.push_back({m.density, m.modulus});
    }
    j["topopt"] = {{"nodes", opt_path(t.nodes)},
                   {"elements", opt_path(t.elements)},
                   {"box",
                    {{"nx", t.box.nx},
                     {"ny", t.box.ny},
                     {"nz", t.box.nz},
                     {"lx", t.box.lx},
                     {"ly", t.box.ly},
                     {"lz", t.box.lz}}},
                   {"bc", opt_path(t.bc)},
                   {"loads", opt_path(t.loads)},
                   {"tip_load", t.tip_load},
                   {"nu", t.nu},
                   {"solver_tol", t.solver_tol},
                   {"analytic_gradient", t.analytic_gradient},
                   {"m_frac", t.design.m_frac},
                   {"materials", mats},
                   {"penalty", t.design.materials.penalty},
                   {"filter_radius", t.design.filter_radius},
                   {"kappa", t.design.kappa},
                   {"void_modulus", t.design.void_modulus}};
    j["basis"] = {{"k", c.basis.k}, {"export_modes", c.basis.export_modes}};
    json modes = json::array();
    for (Mode m : c.compare_modes) {
        modes.push_back(to_string(m));
    }
    j["compare"] = {{"modes", modes}};
    return j.dump(2) + "\n";
}

} // namespace sbo::io
