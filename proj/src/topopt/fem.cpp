#include "sbo/topopt/fem.hpp"

#include "sbo/error.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace sbo::topopt {

namespace {

std::array<mesh::Vec3, 4> tet_vertices(const mesh::TetMesh& m, std::size_t e) {
    const auto& t = m.tets[e];
    return {m.vertices[static_cast<std::size_t>(t[0])], m.vertices[static_cast<std::size_t>(t[1])],
            m.vertices[static_cast<std::size_t>(t[2])], m.vertices[static_cast<std::size_t>(t[3])]};
}

int element_dof(const mesh::TetMesh& m, std::size_t e, int local) {
    return 3 * m.tets[e][static_cast<std::size_t>(local / 3)] + local % 3;
}

double norm(std::span<const double> v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cell.erase(0, cell.find_first_not_of(" \t\r"));
        cell.erase(cell.find_last_not_of(" \t\r") + 1);
        out.push_back(cell);
    }
    return out;
}

double parse_number(const std::string& s, const std::string& line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size() && std::isfinite(v)) {
            return v;
        }
    } catch (const std::exception&) {
    }
    fail(ErrorKind::Config, "non-numeric value in row: " + line);
}

int parse_node(const std::string& s, const std::string& line) {
    const double v = parse_number(s, line);
    require(v >= 0.0 && v == std::floor(v), ErrorKind::Config, "node id must be a non-negative integer: " + line);
    return static_cast<int>(v);
}

// Reads data rows after checking the header prefix.
std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path, const std::string& header,
                                                std::size_t columns) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot read " + path.string());
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::Config, path.string() + " is empty");
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    require(line == header, ErrorKind::Config, path.string() + ": expected header '" + header + "'");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r" || line[0] == '#') {
            continue;
        }
        auto cells = split_csv(line);
        require(cells.size() == columns, ErrorKind::Config, path.string() + ": malformed row: " + line);
        cells.push_back(line);
        rows.push_back(std::move(cells));
    }
    return rows;
}

} // namespace

Eigen::Matrix<double, 6, 6> isotropic_elasticity(double modulus, double nu) {
    require(nu > -1.0 && nu < 0.5, ErrorKind::Config, "Poisson ratio must lie in (-1, 0.5)");
    const double lambda = modulus * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    const double mu = modulus / (2.0 * (1.0 + nu));
    Eigen::Matrix<double, 6, 6> d = Eigen::Matrix<double, 6, 6>::Zero();
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            d(i, j) = lambda;
        }
        d(i, i) = lambda + 2.0 * mu;
        d(i + 3, i + 3) = mu;
    }
    return d;
}

StrainMatrix tet_strain_matrix(const std::array<mesh::Vec3, 4>& x, double* volume) {
    Eigen::Matrix4d m;
    for (int i = 0; i < 4; ++i) {
        m.row(i) << 1.0, x[static_cast<std::size_t>(i)][0], x[static_cast<std::size_t>(i)][1],
            x[static_cast<std::size_t>(i)][2];
    }
    const double det = m.determinant();
    require(std::abs(det) > 0.0, ErrorKind::DegenerateElement, "zero-volume tetrahedron");
    // Columns of the inverse hold the coefficients of each shape function.
    const Eigen::Matrix4d c = m.inverse();
    StrainMatrix b = StrainMatrix::Zero();
    for (int i = 0; i < 4; ++i) {
        const double dx = c(1, i), dy = c(2, i), dz = c(3, i);
        const int k = 3 * i;
        b(0, k) = dx;
        b(1, k + 1) = dy;
        b(2, k + 2) = dz;
        b(3, k) = dy;
        b(3, k + 1) = dx;
        b(4, k + 1) = dz;
        b(4, k + 2) = dy;
        b(5, k) = dz;
        b(5, k + 2) = dx;
    }
    if (volume) {
        *volume = std::abs(det) / 6.0;
    }
    return b;
}

Matrix12 tet_stiffness(const std::array<mesh::Vec3, 4>& x, double modulus, double nu) {
    double vol = 0.0;
    const StrainMatrix b = tet_strain_matrix(x, &vol);
    return vol * b.transpose() * isotropic_elasticity(modulus, nu) * b;
}

SparseMatrix assemble_stiffness(const mesh::TetMesh& mesh, std::span<const double> modulus, double nu) {
    require(modulus.size() == mesh.n_elements(), ErrorKind::Dimension, "one modulus per element required");
    const auto n = static_cast<Eigen::Index>(3 * mesh.vertices.size());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(144 * mesh.n_elements());
    for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
        const Matrix12 ke = tet_stiffness(tet_vertices(mesh, e), modulus[e], nu);
        for (int a = 0; a < 12; ++a) {
            for (int b = 0; b < 12; ++b) {
                trip.emplace_back(element_dof(mesh, e, a), element_dof(mesh, e, b), ke(a, b));
            }
        }
    }
    SparseMatrix k(n, n);
    k.setFromTriplets(trip.begin(), trip.end());
    return k;
}

std::vector<Dirichlet> clamp_nodes(std::span<const int> nodes) {
    std::vector<Dirichlet> out;
    for (int v : nodes) {
        for (int c = 0; c < 3; ++c) {
            out.push_back({3 * v + c, 0.0});
        }
    }
    return out;
}

std::vector<double> solve_displacements(const SparseMatrix& k, std::span<const double> f,
                                        std::span<const Dirichlet> fixed, double tol) {
    const auto n = static_cast<std::size_t>(k.rows());
    require(k.cols() == k.rows() && f.size() == n, ErrorKind::Dimension, "stiffness and load sizes differ");
    std::vector<int> map(n, 0);
    std::vector<double> u(n, 0.0);
    for (const auto& d : fixed) {
        require(d.dof >= 0 && static_cast<std::size_t>(d.dof) < n, ErrorKind::Dimension, "prescribed dof out of range");
        map[static_cast<std::size_t>(d.dof)] = -1;
        u[static_cast<std::size_t>(d.dof)] = d.value;
    }
    int nf = 0;
    for (auto& m : map) {
        m = m < 0 ? -1 : nf++;
    }
    require(nf > 0, ErrorKind::Config, "every degree of freedom is prescribed");
    Eigen::VectorXd rhs(nf);
    for (std::size_t i = 0; i < n; ++i) {
        if (map[i] >= 0) {
            rhs(map[i]) = f[i];
        }
    }
    std::vector<Eigen::Triplet<double>> trip;
    for (Eigen::Index col = 0; col < k.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(k, col); it; ++it) {
            const int r = map[static_cast<std::size_t>(it.row())];
            const int c = map[static_cast<std::size_t>(it.col())];
            if (r >= 0 && c >= 0) {
                trip.emplace_back(r, c, it.value());
            } else if (r >= 0) {
                rhs(r) -= it.value() * u[static_cast<std::size_t>(it.col())];
            }
        }
    }
    SparseMatrix kff(nf, nf);
    kff.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLLT<SparseMatrix> llt(kff);
    require(llt.info() == Eigen::Success, ErrorKind::Solver,
            "stiffness is singular after eliminating supports (unsupported rigid motion?)");
    const Eigen::VectorXd x = llt.solve(rhs);
    const double rn = rhs.norm();
    const double res = rn > 0.0 ? (kff * x - rhs).norm() / rn : x.norm();
    require(std::isfinite(res) && res <= tol, ErrorKind::Solver,
            "linear solve residual " + std::to_string(res) + " exceeds tolerance");
    for (std::size_t i = 0; i < n; ++i) {
        if (map[i] >= 0) {
            u[i] = x(map[i]);
        }
    }
    return u;
}

double compliance(std::span<const double> u, std::span<const double> f) {
    require(u.size() == f.size(), ErrorKind::Dimension, "displacement and load sizes differ");
    return std::inner_product(u.begin(), u.end(), f.begin(), 0.0);
}

double mass_fraction(std::span<const double> rho, std::span<const double> measures,
                     const filters::MaterialSet& mats) {
    require(rho.size() == measures.size(), ErrorKind::Dimension, "one density per element required");
    double m = 0.0, total = 0.0;
    for (std::size_t e = 0; e < rho.size(); ++e) {
        m += rho[e] * measures[e];
        total += measures[e];
    }
    return m / (mats.max_density() * total);
}

FemModel::FemModel(mesh::TetMesh mesh, double nu, std::vector<Dirichlet> fixed, std::vector<double> loads, double tol)
    : mesh_(std::move(mesh)), nu_(nu), fixed_(std::move(fixed)), loads_(std::move(loads)), tol_(tol) {
    const std::size_t n = n_dofs();
    require(mesh_.n_elements() > 0, ErrorKind::InvalidDomain, "empty mesh");
    require(!fixed_.empty(), ErrorKind::Config, "at least one support is required");
    require(loads_.size() == n, ErrorKind::Dimension, "load vector must have 3 entries per node");
    require(tol > 0.0, ErrorKind::Config, "solver tolerance must be positive");
    isotropic_elasticity(1.0, nu);

    reduced_.assign(n, 0);
    prescribed_.assign(n, 0.0);
    for (const auto& d : fixed_) {
        require(d.dof >= 0 && static_cast<std::size_t>(d.dof) < n, ErrorKind::Config, "support on a missing node");
        require(reduced_[static_cast<std::size_t>(d.dof)] == 0, ErrorKind::Config, "degree of freedom fixed twice");
        reduced_[static_cast<std::size_t>(d.dof)] = -1;
        prescribed_[static_cast<std::size_t>(d.dof)] = d.value;
    }
    int nf = 0;
    for (auto& m : reduced_) {
        m = m < 0 ? -1 : nf++;
    }
    require(nf > 0, ErrorKind::Config, "every degree of freedom is prescribed");

    k0_.resize(mesh_.n_elements());
    volume_.resize(mesh_.n_elements());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(144 * mesh_.n_elements());
    for (std::size_t e = 0; e < mesh_.n_elements(); ++e) {
        const auto x = tet_vertices(mesh_, e);
        const StrainMatrix b = tet_strain_matrix(x, &volume_[e]);
        k0_[e] = volume_[e] * b.transpose() * isotropic_elasticity(1.0, nu_) * b;
        for (int a = 0; a < 12; ++a) {
            for (int c = 0; c < 12; ++c) {
                const int r = reduced_[static_cast<std::size_t>(element_dof(mesh_, e, a))];
                const int s = reduced_[static_cast<std::size_t>(element_dof(mesh_, e, c))];
                if (r >= 0 && s >= 0) {
                    trip.emplace_back(r, s, 1.0);
                }
            }
        }
    }
    pattern_.resize(nf, nf);
    pattern_.setFromTriplets(trip.begin(), trip.end());
    pattern_.makeCompressed();

    scatter_.assign(144 * mesh_.n_elements(), -1);
    const int* outer = pattern_.outerIndexPtr();
    const int* inner = pattern_.innerIndexPtr();
    for (std::size_t e = 0; e < mesh_.n_elements(); ++e) {
        for (int a = 0; a < 12; ++a) {
            for (int c = 0; c < 12; ++c) {
                const int r = reduced_[static_cast<std::size_t>(element_dof(mesh_, e, a))];
                const int s = reduced_[static_cast<std::size_t>(element_dof(mesh_, e, c))];
                if (r >= 0 && s >= 0) {
                    const int* pos = std::lower_bound(inner + outer[s], inner + outer[s + 1], r);
                    scatter_[144 * e + static_cast<std::size_t>(12 * a + c)] = static_cast<int>(pos - inner);
                }
            }
        }
    }
}

StaticSolution FemModel::solve(std::span<const double> modulus) const {
    require(modulus.size() == mesh_.n_elements(), ErrorKind::Dimension, "one modulus per element required");
    SparseMatrix k = pattern_;
    double* values = k.valuePtr();
    std::fill(values, values + k.nonZeros(), 0.0);
    Eigen::VectorXd rhs(k.rows());
    for (std::size_t i = 0; i < n_dofs(); ++i) {
        if (reduced_[i] >= 0) {
            rhs(reduced_[i]) = loads_[i];
        }
    }
    for (std::size_t e = 0; e < mesh_.n_elements(); ++e) {
        const double ee = modulus[e];
        require(std::isfinite(ee) && ee >= 0.0, ErrorKind::InvalidField, "moduli must be finite and non-negative");
        const int* slot = scatter_.data() + 144 * e;
        for (int a = 0; a < 12; ++a) {
            const int r = reduced_[static_cast<std::size_t>(element_dof(mesh_, e, a))];
            for (int c = 0; c < 12; ++c) {
                const int s = slot[12 * a + c];
                if (s >= 0) {
                    values[s] += ee * k0_[e](a, c);
                } else if (r >= 0) {
                    const double up = prescribed_[static_cast<std::size_t>(element_dof(mesh_, e, c))];
                    if (up != 0.0) {
                        rhs(r) -= ee * k0_[e](a, c) * up;
                    }
                }
            }
        }
    }
    Eigen::SimplicialLLT<SparseMatrix> llt(k);
    require(llt.info() == Eigen::Success, ErrorKind::Solver,
            "stiffness is singular after eliminating supports (unsupported rigid motion?)");
    const Eigen::VectorXd x = llt.solve(rhs);
    StaticSolution out;
    const double rn = rhs.norm();
    out.residual = rn > 0.0 ? (k * x - rhs).norm() / rn : x.norm();
    require(std::isfinite(out.residual) && out.residual <= tol_, ErrorKind::Solver,
            "linear solve residual " + std::to_string(out.residual) + " exceeds tolerance");
    out.u = prescribed_;
    for (std::size_t i = 0; i < n_dofs(); ++i) {
        if (reduced_[i] >= 0) {
            out.u[i] = x(reduced_[i]);
        }
    }
    out.compliance = compliance(out.u, loads_);
    return out;
}

std::vector<double> FemModel::unit_energies(std::span<const double> u) const {
    require(u.size() == n_dofs(), ErrorKind::Dimension, "displacement vector has wrong length");
    std::vector<double> out(mesh_.n_elements());
    Eigen::Matrix<double, 12, 1> ue;
    for (std::size_t e = 0; e < mesh_.n_elements(); ++e) {
        for (int a = 0; a < 12; ++a) {
            ue(a) = u[static_cast<std::size_t>(element_dof(mesh_, e, a))];
        }
        out[e] = ue.dot(k0_[e] * ue);
    }
    return out;
}

double mean_edge_length(const mesh::TetMesh& mesh) {
    std::unordered_set<std::uint64_t> seen;
    double sum = 0.0;
    for (const auto& t : mesh.tets) {
        for (int a = 0; a < 4; ++a) {
            for (int b = a + 1; b < 4; ++b) {
                const auto lo = static_cast<std::uint64_t>(std::min(t[static_cast<std::size_t>(a)], t[static_cast<std::size_t>(b)]));
                const auto hi = static_cast<std::uint64_t>(std::max(t[static_cast<std::size_t>(a)], t[static_cast<std::size_t>(b)]));
                if (!seen.insert(lo << 32 | hi).second) {
                    continue;
                }
                const auto& p = mesh.vertices[lo];
                const auto& q = mesh.vertices[hi];
                sum += std::hypot(p[0] - q[0], p[1] - q[1], p[2] - q[2]);
            }
        }
    }
    return seen.empty() ? 0.0 : sum / static_cast<double>(seen.size());
}

std::vector<Dirichlet> read_supports_csv(const std::filesystem::path& path) {
    std::vector<Dirichlet> out;
    for (const auto& row : read_rows(path, "node,component,value", 3)) {
        const int node = parse_node(row[0], row[3]);
        int comp = -1;
        if (row[1] == "x" || row[1] == "0") comp = 0;
        if (row[1] == "y" || row[1] == "1") comp = 1;
        if (row[1] == "z" || row[1] == "2") comp = 2;
        require(comp >= 0, ErrorKind::Config, "component must be x, y, z or 0, 1, 2: " + row[3]);
        out.push_back({3 * node + comp, parse_number(row[2], row[3])});
    }
    require(!out.empty(), ErrorKind::Config, path.string() + " lists no supports");
    return out;
}

std::vector<double> read_loads_csv(const std::filesystem::path& path, std::size_t n_nodes) {
    std::vector<double> f(3 * n_nodes, 0.0);
    for (const auto& row : read_rows(path, "node,fx,fy,fz", 4)) {
        const auto node = static_cast<std::size_t>(parse_node(row[0], row[4]));
        require(node < n_nodes, ErrorKind::Config, "load on a missing node: " + row[4]);
        for (std::size_t c = 0; c < 3; ++c) {
            f[3 * node + c] += parse_number(row[c + 1], row[4]);
        }
    }
    require(norm(f) > 0.0, ErrorKind::Config, path.string() + " applies no load");
    return f;
}

} // namespace sbo::topopt
