#pragma once

#include "sbo/filters/filters.hpp"
#include "sbo/mesh/domain.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <filesystem>
#include <span>
#include <vector>

namespace sbo::topopt {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Matrix12 = Eigen::Matrix<double, 12, 12>;
using StrainMatrix = Eigen::Matrix<double, 6, 12>;

/// Isotropic constitutive matrix in Voigt order xx, yy, zz, xy, yz, zx
/// (engineering shear strains).
Eigen::Matrix<double, 6, 6> isotropic_elasticity(double modulus, double nu);

/// Strain-displacement matrix of a linear tet; dof order is (x, y, z) per vertex.
StrainMatrix tet_strain_matrix(const std::array<mesh::Vec3, 4>& x, double* volume = nullptr);

/// volume * B^T D B for the given modulus.
Matrix12 tet_stiffness(const std::array<mesh::Vec3, 4>& x, double modulus, double nu);

/// Global 3n x 3n stiffness, no boundary conditions.
SparseMatrix assemble_stiffness(const mesh::TetMesh& mesh, std::span<const double> modulus, double nu);

/// Prescribed displacement of one degree of freedom (3 * node + component).
struct Dirichlet {
    int dof = 0;
    double value = 0.0;
};

/// All three components of each node fixed at zero.
std::vector<Dirichlet> clamp_nodes(std::span<const int> nodes);

/// Solves K u = F with the constrained rows and columns eliminated. Throws a
/// Solver error when the reduced system is singular or the relative residual
/// on the free rows exceeds tol.
std::vector<double> solve_displacements(const SparseMatrix& k, std::span<const double> f,
                                        std::span<const Dirichlet> fixed, double tol = 1e-8);

/// c = F^T u.
double compliance(std::span<const double> u, std::span<const double> f);

/// sum_e rho_e vol_e / (rho_max sum_e vol_e).
double mass_fraction(std::span<const double> rho, std::span<const double> measures,
                     const filters::MaterialSet& mats);

struct StaticSolution {
    std::vector<double> u;
    double compliance = 0.0;
    double residual = 0.0;
};

/// Mesh, supports and loads with the element matrices and the reduced sparsity
/// pattern prepared once, for repeated solves with changing moduli.
class FemModel {
public:
    FemModel(mesh::TetMesh mesh, double nu, std::vector<Dirichlet> fixed, std::vector<double> loads,
             double tol = 1e-8);

    const mesh::TetMesh& mesh() const noexcept { return mesh_; }
    double nu() const noexcept { return nu_; }
    std::size_t n_dofs() const noexcept { return 3 * mesh_.vertices.size(); }
    std::span<const double> loads() const noexcept { return loads_; }
    std::span<const Dirichlet> fixed() const noexcept { return fixed_; }
    std::span<const double> measures() const noexcept { return volume_; }
    /// Element stiffness at unit modulus.
    const Matrix12& unit_stiffness(std::size_t e) const { return k0_[e]; }

    /// Displacements for per-element moduli. Thread-safe.
    StaticSolution solve(std::span<const double> modulus) const;
    /// u_e^T k0_e u_e for every element.
    std::vector<double> unit_energies(std::span<const double> u) const;

private:
    mesh::TetMesh mesh_;
    double nu_;
    std::vector<Dirichlet> fixed_;
    std::vector<double> loads_;
    double tol_;
    std::vector<Matrix12> k0_;
    std::vector<double> volume_;
    std::vector<int> reduced_;  // dof -> reduced index, -1 when prescribed
    std::vector<double> prescribed_;
    SparseMatrix pattern_;
    std::vector<int> scatter_;  // per element, 144 slots into pattern_ values or -1
};

/// Mean length of the distinct tet edges.
double mean_edge_length(const mesh::TetMesh& mesh);

/// Supports file: header "node,component,value", component x|y|z or 0|1|2.
std::vector<Dirichlet> read_supports_csv(const std::filesystem::path& path);
/// Loads file: header "node,fx,fy,fz"; rows add up. Returns a 3 n_nodes vector.
std::vector<double> read_loads_csv(const std::filesystem::path& path, std::size_t n_nodes);

} // namespace sbo::topopt
