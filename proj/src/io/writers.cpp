#include "sbo/io/writers.hpp"

#include "sbo/error.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include <unistd.h>

namespace sbo::io {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
    return out;
}

void close_out(std::ofstream& out, const fs::path& path) {
    out.flush();
    require(static_cast<bool>(out), ErrorKind::Io, "failed writing " + path.string());
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double parse_real(const std::string& s, const fs::path& path, std::size_t line) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    require(ec == std::errc() && ptr == last, ErrorKind::Config,
            path.string() + ":" + std::to_string(line) + ": not a number '" + s + "'");
    return v;
}

void check_field(std::size_t expect, std::size_t got) {
    require(expect == got, ErrorKind::Dimension,
            "field has " + std::to_string(got) + " values for " + std::to_string(expect) + " cells");
}

} // namespace

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

const std::vector<double>& CsvTable::column(const std::string& name) const {
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == name) {
            return columns[c];
        }
    }
    fail(ErrorKind::Config, "CSV has no column '" + name + "'");
}

void write_csv(const fs::path& path, const CsvTable& table) {
    require(table.header.size() == table.columns.size(), ErrorKind::Dimension, "CSV header and column count differ");
    const std::size_t n = table.rows();
    for (const auto& c : table.columns) {
        require(c.size() == n, ErrorKind::Dimension, "CSV columns differ in length");
    }
    auto out = open_out(path);
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        out << (c ? "," : "") << table.header[c];
    }
    out << '\n';
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < table.columns.size(); ++c) {
            out << (c ? "," : "") << format_real(table.columns[c][r]);
        }
        out << '\n';
    }
    close_out(out, path);
}

CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot read " + path.string());
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        auto cells = split(line);
        if (t.header.empty()) {
            for (auto& c : cells) {
                t.header.push_back(trim(c));
            }
            t.columns.assign(t.header.size(), {});
            continue;
        }
        require(cells.size() == t.header.size(), ErrorKind::Config,
                path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                    " values");
        for (std::size_t c = 0; c < cells.size(); ++c) {
            t.columns[c].push_back(parse_real(trim(cells[c]), path, lineno));
        }
    }
    require(!t.header.empty(), ErrorKind::Config, path.string() + " is empty");
    return t;
}

void write_field_vtk(const fs::path& path, const mesh::QuadGrid& grid, std::span<const double> field,
                     const std::string& name) {
    check_field(grid.n_elements(), field.size());
    auto out = open_out(path);
    out << "# vtk DataFile Version 3.0\n" << name << "\nASCII\nDATASET STRUCTURED_GRID\n";
    out << "DIMENSIONS " << grid.nodes_r() << ' ' << grid.nodes_z() << " 1\n";
    out << "POINTS " << grid.n_nodes() << " double\n";
    for (int j = 0; j < grid.nodes_z(); ++j) {
        for (int i = 0; i < grid.nodes_r(); ++i) {
            out << format_real(grid.node_r(i)) << ' ' << format_real(grid.node_z(j)) << " 0\n";
        }
    }
    out << "CELL_DATA " << field.size() << "\nSCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (double v : field) {
        out << format_real(v) << '\n';
    }
    close_out(out, path);
}

void write_field_vtk(const fs::path& path, const mesh::TetMesh& mesh, std::span<const double> field,
                     const std::string& name) {
    check_field(mesh.n_elements(), field.size());
    auto out = open_out(path);
    out << "# vtk DataFile Version 3.0\n" << name << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.vertices.size() << " double\n";
    for (const auto& v : mesh.vertices) {
        out << format_real(v[0]) << ' ' << format_real(v[1]) << ' ' << format_real(v[2]) << '\n';
    }
    const std::size_t n = mesh.n_elements();
    out << "CELLS " << n << ' ' << 5 * n << '\n';
    for (const auto& t : mesh.tets) {
        out << "4 " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
    }
    out << "CELL_TYPES " << n << '\n';
    for (std::size_t e = 0; e < n; ++e) {
        out << "10\n";
    }
    out << "CELL_DATA " << n << "\nSCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (double v : field) {
        out << format_real(v) << '\n';
    }
    close_out(out, path);
}

void write_trace_csv(const fs::path& path, const optim::SlideTrace& trace) {
    CsvTable t;
    t.header = {"i_sb", "accepted", "f", "evals", "seconds"};
    t.columns.assign(5, {});
    for (const auto& r : trace.records) {
        t.columns[0].push_back(static_cast<double>(r.i_sb));
        t.columns[1].push_back(r.accepted ? 1.0 : 0.0);
        t.columns[2].push_back(r.f);
        t.columns[3].push_back(static_cast<double>(r.evaluations));
        t.columns[4].push_back(r.seconds);
    }
    write_csv(path, t);
}

void write_weights(const fs::path& path, std::span<const double> w) {
    auto out = open_out(path);
    for (double v : w) {
        out << format_real(v) << '\n';
    }
    close_out(out, path);
}

std::vector<double> read_weights(const fs::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot read " + path.string());
    std::vector<double> w;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (!line.empty() && line[0] != '#') {
            w.push_back(parse_real(line, path, lineno));
        }
    }
    return w;
}

void write_text(const fs::path& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
    close_out(out, path);
}

StagedDirectory::StagedDirectory(fs::path target) : target_(std::move(target)) {
    require(!target_.empty(), ErrorKind::Config, "empty output directory");
    target_ = fs::absolute(target_).lexically_normal();
    if (!target_.has_filename()) {
        target_ = target_.parent_path();
    }
    std::error_code ec;
    fs::create_directories(target_.parent_path(), ec);
    require(!ec, ErrorKind::Io, "cannot create " + target_.parent_path().string() + ": " + ec.message());
    stage_ = target_;
    stage_ += ".tmp-" + std::to_string(::getpid());
    fs::remove_all(stage_, ec);
    require(fs::create_directory(stage_, ec) && !ec, ErrorKind::Io,
            "cannot create staging directory " + stage_.string());
}

StagedDirectory::~StagedDirectory() {
    if (!committed_) {
        std::error_code ec;
        fs::remove_all(stage_, ec);
    }
}

void StagedDirectory::commit() {
    std::error_code ec;
    if (fs::exists(target_, ec)) {
        const bool replaceable = fs::is_directory(target_) &&
                                 (fs::is_empty(target_) || fs::exists(target_ / "summary.json"));
        require(replaceable, ErrorKind::Io, target_.string() + " exists and is not an earlier run directory");
        fs::remove_all(target_, ec);
        require(!ec, ErrorKind::Io, "cannot replace " + target_.string() + ": " + ec.message());
    }
    fs::rename(stage_, target_, ec);
    require(!ec, ErrorKind::Io, "cannot move results to " + target_.string() + ": " + ec.message());
    committed_ = true;
}

} // namespace sbo::io
