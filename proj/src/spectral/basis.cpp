#include "sbo/spectral/basis.hpp"

#include "sbo/error.hpp"
#include "sbo/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace sbo::spectral {

LaplacianMatrix assemble_laplacian(const mesh::ElementAdjacency& adj) {
    const auto n = static_cast<int>(adj.size());
    LaplacianMatrix laplacian(n, n);
    laplacian.reserve(Eigen::VectorXi::Constant(n, 1 + adj.max_degree()));
    for (int e = 0; e < n; ++e) {
        auto nbs = adj.neighbors(static_cast<std::size_t>(e));
        // Row entries in column order, the diagonal slotted between neighbors.
        bool diag_done = false;
        for (int nb : nbs) {
            if (!diag_done && nb > e) {
                laplacian.insert(e, e) = adj.degree(static_cast<std::size_t>(e));
                diag_done = true;
            }
            laplacian.insert(e, nb) = -1.0;
        }
        if (!diag_done) {
            laplacian.insert(e, e) = adj.degree(static_cast<std::size_t>(e));
        }
    }
    laplacian.makeCompressed();
    return laplacian;
}

void SpectralBasis::append(double eigenvalue, std::span<const double> vector) {
    require(vector.size() == n_, ErrorKind::Dimension, "basis column has wrong length");
    eigenvalues_.push_back(eigenvalue);
    data_.insert(data_.end(), vector.begin(), vector.end());
}

std::vector<double> SpectralBasis::synthesize(std::span<const double> w) const {
    require(w.size() == size(), ErrorKind::Dimension,
            "synthesize: weight count " + std::to_string(w.size()) + " != basis count " + std::to_string(size()));
    return synthesize_prefix(w);
}

std::vector<double> SpectralBasis::synthesize_prefix(std::span<const double> w) const {
    require(w.size() <= size(), ErrorKind::Dimension, "synthesize: more weights than basis columns");
    std::vector<double> field(n_, 0.0);
    simd::gemv(data(), n_, w.size(), w, field);
    return field;
}

std::vector<double> SpectralBasis::reduce_gradient(std::span<const double> dF) const {
    return reduce_gradient_prefix(dF, size());
}

std::vector<double> SpectralBasis::reduce_gradient_prefix(std::span<const double> dF, std::size_t count) const {
    require(dF.size() == n_, ErrorKind::Dimension,
            "reduce_gradient: field gradient length " + std::to_string(dF.size()) + " != " + std::to_string(n_));
    require(count <= size(), ErrorKind::Dimension, "reduce_gradient: more weights than basis columns");
    std::vector<double> g(count, 0.0);
    simd::gemv_t(data(), n_, count, dF, g);
    return g;
}

double SpectralBasis::orthonormality_error() const {
    double worst = 0.0;
    for (std::size_t a = 0; a < size(); ++a) {
        for (std::size_t b = a; b < size(); ++b) {
            const double d = simd::dot(column(a), column(b)) - (a == b ? 1.0 : 0.0);
            worst = std::max(worst, std::abs(d));
        }
    }
    return worst;
}

SpectralBasis smallest_eigenpairs(const LaplacianMatrix& laplacian, std::size_t k, EigensolverOptions options) {
    return LaplacianEigensolver(laplacian, options).smallest(k);
}

SpectralBasis extend_basis(const LaplacianMatrix& laplacian, const SpectralBasis& basis, std::size_t m,
                           EigensolverOptions options) {
    SpectralBasis out = basis;
    LaplacianEigensolver(laplacian, options).extend(out, m);
    return out;
}

std::uint64_t domain_hash(const mesh::ElementAdjacency& adj) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xffu;
            h *= 1099511628211ull;
        }
    };
    mix(adj.size());
    for (int v : adj.offsets()) mix(static_cast<std::uint64_t>(v));
    for (int v : adj.flat_neighbors()) mix(static_cast<std::uint64_t>(v));
    return h;
}

namespace {
constexpr char kMagic[8] = {'S', 'B', 'O', 'B', 'A', 'S', 'I', 'S'};
constexpr std::uint32_t kVersion = 1;
} // namespace

void save_basis(const std::filesystem::path& path, const SpectralBasis& basis, std::uint64_t hash) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write basis cache " + path.string());
    const std::uint64_t n = basis.n_elements();
    const std::uint64_t k = basis.size();
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
    out.write(reinterpret_cast<const char*>(&hash), sizeof hash);
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(&k), sizeof k);
    out.write(reinterpret_cast<const char*>(basis.eigenvalues().data()),
              static_cast<std::streamsize>(k * sizeof(double)));
    out.write(reinterpret_cast<const char*>(basis.data().data()),
              static_cast<std::streamsize>(n * k * sizeof(double)));
    require(static_cast<bool>(out), ErrorKind::Io, "failed writing basis cache " + path.string());
}

std::optional<SpectralBasis> load_basis(const std::filesystem::path& path, std::uint64_t hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return std::nullopt;
    }
    char magic[8];
    std::uint32_t version = 0;
    std::uint64_t stored_hash = 0, n = 0, k = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    in.read(reinterpret_cast<char*>(&stored_hash), sizeof stored_hash);
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    in.read(reinterpret_cast<char*>(&k), sizeof k);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0 || version != kVersion || stored_hash != hash) {
        return std::nullopt;
    }
    std::vector<double> values(k);
    std::vector<double> data(n * k);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(k * sizeof(double)));
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * k * sizeof(double)));
    require(static_cast<bool>(in), ErrorKind::Io, "truncated basis cache " + path.string());
    SpectralBasis basis(n);
    for (std::size_t j = 0; j < k; ++j) {
        basis.append(values[j], std::span<const double>(data.data() + j * n, n));
    }
    return basis;
}

} // namespace sbo::spectral
