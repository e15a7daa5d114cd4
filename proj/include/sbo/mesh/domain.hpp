#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

namespace sbo::mesh {

using Vec3 = std::array<double, 3>;

/// Structured (r, z) lattice of quad cells; flat cell index is j * n_r + i.
struct QuadGrid {
    int n_r = 0;
    int n_z = 0;
    double dr = 0.0;
    double dz = 0.0;
    double r0 = 0.0;
    double z0 = 0.0;

    std::size_t n_elements() const noexcept { return static_cast<std::size_t>(n_r) * n_z; }
    std::size_t index(int i, int j) const noexcept { return static_cast<std::size_t>(j) * n_r + i; }
    int i_of(std::size_t e) const noexcept { return static_cast<int>(e % n_r); }
    int j_of(std::size_t e) const noexcept { return static_cast<int>(e / n_r); }

    // Nodes are the (n_r + 1) x (n_z + 1) cell corners, flat index j * (n_r + 1) + i.
    int nodes_r() const noexcept { return n_r + 1; }
    int nodes_z() const noexcept { return n_z + 1; }
    std::size_t n_nodes() const noexcept { return static_cast<std::size_t>(n_r + 1) * (n_z + 1); }
    std::size_t node_index(int i, int j) const noexcept { return static_cast<std::size_t>(j) * (n_r + 1) + i; }
    double node_r(int i) const noexcept { return r0 + i * dr; }
    double node_z(int j) const noexcept { return z0 + j * dz; }
    double r_max() const noexcept { return r0 + n_r * dr; }
    double z_max() const noexcept { return z0 + n_z * dz; }
};

/// Grid over the full rectangle [0, r_out] x [0, length]. Cells inside r_in stay
/// part of the design field; the bore is masked downstream.
QuadGrid build_quad_grid(int n_r, int n_z, double r_in, double r_out, double length);

/// Linear tetrahedral mesh. Construction through make_tet_mesh guarantees
/// positive orientation of every element.
struct TetMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 4>> tets;

    std::size_t n_elements() const noexcept { return tets.size(); }
};

/// Validates indices, flips negatively oriented tets, rejects zero-volume ones.
TetMesh make_tet_mesh(std::vector<Vec3> vertices, std::vector<std::array<int, 4>> tets);

double signed_tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) noexcept;

/// Box [0,lx]x[0,ly]x[0,lz] split into nx*ny*nz hexes of six tets each (Kuhn split,
/// conforming across hexes).
TetMesh make_box_tet_mesh(int nx, int ny, int nz, double lx, double ly, double lz);

/// Nodes file: "id x y z" per line; elements file: "id v0 v1 v2 v3". Ids are 0-based
/// and sequential. Blank lines and lines starting with '#' are skipped.
TetMesh read_tet_mesh(const std::filesystem::path& nodes, const std::filesystem::path& elements);
void write_tet_mesh(const TetMesh& mesh, const std::filesystem::path& nodes,
                    const std::filesystem::path& elements);

/// Face-sharing dual graph in compressed row form.
class ElementAdjacency {
public:
    ElementAdjacency() = default;
    /// Neighbor lists are sorted; symmetry and the absence of self loops are checked.
    explicit ElementAdjacency(const std::vector<std::vector<int>>& lists);

    std::size_t size() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    std::span<const int> neighbors(std::size_t e) const noexcept {
        return {neighbors_.data() + offsets_[e], neighbors_.data() + offsets_[e + 1]};
    }
    int degree(std::size_t e) const noexcept { return offsets_[e + 1] - offsets_[e]; }
    std::size_t shared_faces() const noexcept { return neighbors_.size() / 2; }
    int max_degree() const noexcept;

    const std::vector<int>& offsets() const noexcept { return offsets_; }
    const std::vector<int>& flat_neighbors() const noexcept { return neighbors_; }

    /// Number of connected components of the dual graph.
    std::size_t components() const;

private:
    std::vector<int> offsets_;
    std::vector<int> neighbors_;
};

ElementAdjacency face_adjacency(const QuadGrid& grid);
/// Faces are matched by their sorted vertex triple; a face on more than two tets
/// throws a non-manifold error.
ElementAdjacency face_adjacency(const TetMesh& mesh);

std::vector<Vec3> element_centroids(const QuadGrid& grid);
std::vector<Vec3> element_centroids(const TetMesh& mesh);
std::vector<double> element_measures(const QuadGrid& grid);
std::vector<double> element_measures(const TetMesh& mesh);

using Domain = std::variant<QuadGrid, TetMesh>;

} // namespace sbo::mesh
