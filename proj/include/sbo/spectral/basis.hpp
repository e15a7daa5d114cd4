#pragma once

#include "sbo/mesh/domain.hpp"

#include <Eigen/Sparse>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace sbo::spectral {

using LaplacianMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

/// L = D - A on the element dual graph.
LaplacianMatrix assemble_laplacian(const mesh::ElementAdjacency& adj);

/// Ordered eigenpairs of the Laplacian stored as an n_e x k column-major matrix.
/// Columns can only be appended.
class SpectralBasis {
public:
    SpectralBasis() = default;
    explicit SpectralBasis(std::size_t n_elements) : n_(n_elements) {}

    std::size_t n_elements() const noexcept { return n_; }
    std::size_t size() const noexcept { return eigenvalues_.size(); }

    std::span<const double> eigenvalues() const noexcept { return eigenvalues_; }
    double eigenvalue(std::size_t j) const { return eigenvalues_.at(j); }
    std::span<const double> column(std::size_t j) const noexcept { return {data_.data() + j * n_, n_}; }
    std::span<const double> data() const noexcept { return data_; }

    void append(double eigenvalue, std::span<const double> vector);

    /// F = B w; |w| must equal size().
    std::vector<double> synthesize(std::span<const double> w) const;
    /// F = B[:, 0:|w|] w for |w| <= size().
    std::vector<double> synthesize_prefix(std::span<const double> w) const;
    /// B^T dF; |dF| must equal n_elements().
    std::vector<double> reduce_gradient(std::span<const double> dF) const;
    /// First `count` entries of B^T dF.
    std::vector<double> reduce_gradient_prefix(std::span<const double> dF, std::size_t count) const;

    /// max |B^T B - I|.
    double orthonormality_error() const;

private:
    std::size_t n_ = 0;
    std::vector<double> eigenvalues_;
    std::vector<double> data_;
};

struct EigensolverOptions {
    // Shift-invert uses (L - shift I)^{-1}.
    double shift = -1e-8;
    // Converged when ||L v - lambda v|| <= residual_tol * max(1, |lambda|).
    double residual_tol = 1e-9;
    // Eigenvalues closer than cluster_tol * max(1, |lambda|) form one cluster.
    double cluster_tol = 1e-9;
    int block_size = 8;
    // Krylov subspace cap; 0 picks 10 * wanted + 200.
    std::size_t max_subspace = 0;
    std::uint64_t seed = 0x5eedba5e;
};

/// Smallest eigenpairs of a sparse symmetric positive semidefinite matrix by
/// block shift-invert Lanczos with full reorthogonalization and Rayleigh-Ritz.
/// Eigenspaces of repeated eigenvalues are returned in a canonical basis and
/// every column has its first non-negligible entry positive, so the result
/// does not depend on the random start block.
class LaplacianEigensolver {
public:
    explicit LaplacianEigensolver(LaplacianMatrix laplacian, EigensolverOptions options = {});
    ~LaplacianEigensolver();
    LaplacianEigensolver(LaplacianEigensolver&&) noexcept;
    LaplacianEigensolver& operator=(LaplacianEigensolver&&) noexcept;

    std::size_t n_elements() const noexcept;
    const LaplacianMatrix& matrix() const noexcept;

    SpectralBasis smallest(std::size_t k) const;
    /// Appends the next m eigenpairs; existing columns are not modified.
    void extend(SpectralBasis& basis, std::size_t m) const;

    /// ||L v - lambda v||_2 for column j.
    double residual(const SpectralBasis& basis, std::size_t j) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

SpectralBasis smallest_eigenpairs(const LaplacianMatrix& laplacian, std::size_t k, EigensolverOptions options = {});
SpectralBasis extend_basis(const LaplacianMatrix& laplacian, const SpectralBasis& basis, std::size_t m,
                           EigensolverOptions options = {});

/// FNV-1a over the compressed adjacency; keys the basis cache.
std::uint64_t domain_hash(const mesh::ElementAdjacency& adj);

/// Binary dump of (eigenvalues, columns). Little-endian host layout.
void save_basis(const std::filesystem::path& path, const SpectralBasis& basis, std::uint64_t hash);
/// Returns nullopt when the file is missing or belongs to another domain.
std::optional<SpectralBasis> load_basis(const std::filesystem::path& path, std::uint64_t hash);

} // namespace sbo::spectral
