#include "sbo/mesh/domain.hpp"

#include "sbo/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>

namespace sbo::mesh {

QuadGrid build_quad_grid(int n_r, int n_z, double r_in, double r_out, double length) {
    require(n_r >= 2 && n_z >= 2, ErrorKind::InvalidDomain, "quad grid needs n_r >= 2 and n_z >= 2");
    require(r_in >= 0.0 && r_out > r_in, ErrorKind::InvalidDomain, "quad grid needs 0 <= r_in < r_out");
    require(length > 0.0, ErrorKind::InvalidDomain, "quad grid needs a positive length");
    QuadGrid grid;
    grid.n_r = n_r;
    grid.n_z = n_z;
    grid.r0 = 0.0;
    grid.z0 = 0.0;
    grid.dr = (r_out - grid.r0) / n_r;
    grid.dz = length / n_z;
    return grid;
}

double signed_tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) noexcept {
    const double ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2];
    const double vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2];
    const double wx = d[0] - a[0], wy = d[1] - a[1], wz = d[2] - a[2];
    const double det = ux * (vy * wz - vz * wy) - uy * (vx * wz - vz * wx) + uz * (vx * wy - vy * wx);
    return det / 6.0;
}

TetMesh make_tet_mesh(std::vector<Vec3> vertices, std::vector<std::array<int, 4>> tets) {
    const int nv = static_cast<int>(vertices.size());
    double extent = 0.0;
    for (const auto& v : vertices) {
        for (double x : v) {
            extent = std::max(extent, std::abs(x));
        }
    }
    const double vol_floor = 1e-14 * std::max(1.0, extent * extent * extent);
    for (std::size_t e = 0; e < tets.size(); ++e) {
        auto& t = tets[e];
        for (int v : t) {
            require(v >= 0 && v < nv, ErrorKind::InvalidDomain,
                    "tet " + std::to_string(e) + " references vertex " + std::to_string(v) + " out of range");
        }
        const double vol = signed_tet_volume(vertices[t[0]], vertices[t[1]], vertices[t[2]], vertices[t[3]]);
        require(std::abs(vol) > vol_floor, ErrorKind::DegenerateElement,
                "tet " + std::to_string(e) + " has zero volume");
        if (vol < 0.0) {
            std::swap(t[2], t[3]);
        }
    }
    TetMesh mesh;
    mesh.vertices = std::move(vertices);
    mesh.tets = std::move(tets);
    return mesh;
}

TetMesh make_box_tet_mesh(int nx, int ny, int nz, double lx, double ly, double lz) {
    require(nx >= 1 && ny >= 1 && nz >= 1, ErrorKind::InvalidDomain, "box mesh needs at least one cell per axis");
    require(lx > 0.0 && ly > 0.0 && lz > 0.0, ErrorKind::InvalidDomain, "box mesh needs positive extents");
    std::vector<Vec3> vertices;
    vertices.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1) * (nz + 1));
    auto vid = [&](int i, int j, int k) { return (k * (ny + 1) + j) * (nx + 1) + i; };
    for (int k = 0; k <= nz; ++k) {
        for (int j = 0; j <= ny; ++j) {
            for (int i = 0; i <= nx; ++i) {
                vertices.push_back({lx * i / nx, ly * j / ny, lz * k / nz});
            }
        }
    }
    // Kuhn split: one tet per axis permutation, all sharing the main diagonal.
    static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    std::vector<std::array<int, 4>> tets;
    tets.reserve(static_cast<std::size_t>(nx) * ny * nz * 6);
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                for (const auto& p : perms) {
                    int c[3] = {0, 0, 0};
                    std::array<int, 4> t{};
                    t[0] = vid(i, j, k);
                    for (int s = 0; s < 3; ++s) {
                        c[p[s]] = 1;
                        t[s + 1] = vid(i + c[0], j + c[1], k + c[2]);
                    }
                    tets.push_back(t);
                }
            }
        }
    }
    return make_tet_mesh(std::move(vertices), std::move(tets));
}

namespace {

bool skip_line(const std::string& line) {
    const auto pos = line.find_first_not_of(" \t\r");
    return pos == std::string::npos || line[pos] == '#';
}

} // namespace

TetMesh read_tet_mesh(const std::filesystem::path& nodes, const std::filesystem::path& elements) {
    std::ifstream nin(nodes);
    require(static_cast<bool>(nin), ErrorKind::Io, "cannot open nodes file " + nodes.string());
    std::vector<Vec3> vertices;
    std::string line;
    while (std::getline(nin, line)) {
        if (skip_line(line)) {
            continue;
        }
        std::istringstream ss(line);
        long id = -1;
        Vec3 x{};
        require(static_cast<bool>(ss >> id >> x[0] >> x[1] >> x[2]), ErrorKind::InvalidDomain,
                "malformed node line: " + line);
        require(id == static_cast<long>(vertices.size()), ErrorKind::InvalidDomain,
                "node ids must be 0-based and sequential, got " + std::to_string(id));
        vertices.push_back(x);
    }
    std::ifstream ein(elements);
    require(static_cast<bool>(ein), ErrorKind::Io, "cannot open elements file " + elements.string());
    std::vector<std::array<int, 4>> tets;
    while (std::getline(ein, line)) {
        if (skip_line(line)) {
            continue;
        }
        std::istringstream ss(line);
        long id = -1;
        std::array<int, 4> t{};
        require(static_cast<bool>(ss >> id >> t[0] >> t[1] >> t[2] >> t[3]), ErrorKind::InvalidDomain,
                "malformed element line: " + line);
        require(id == static_cast<long>(tets.size()), ErrorKind::InvalidDomain,
                "element ids must be 0-based and sequential, got " + std::to_string(id));
        tets.push_back(t);
    }
    require(!tets.empty(), ErrorKind::InvalidDomain, "mesh has no elements");
    return make_tet_mesh(std::move(vertices), std::move(tets));
}

void write_tet_mesh(const TetMesh& mesh, const std::filesystem::path& nodes, const std::filesystem::path& elements) {
    std::ofstream nout(nodes);
    require(static_cast<bool>(nout), ErrorKind::Io, "cannot write " + nodes.string());
    nout << std::setprecision(17);
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const auto& v = mesh.vertices[i];
        nout << i << ' ' << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
    }
    std::ofstream eout(elements);
    require(static_cast<bool>(eout), ErrorKind::Io, "cannot write " + elements.string());
    for (std::size_t e = 0; e < mesh.tets.size(); ++e) {
        const auto& t = mesh.tets[e];
        eout << e << ' ' << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
    }
    require(static_cast<bool>(nout) && static_cast<bool>(eout), ErrorKind::Io, "failed writing mesh files");
}

ElementAdjacency::ElementAdjacency(const std::vector<std::vector<int>>& lists) {
    const int n = static_cast<int>(lists.size());
    offsets_.assign(lists.size() + 1, 0);
    for (std::size_t e = 0; e < lists.size(); ++e) {
        offsets_[e + 1] = offsets_[e] + static_cast<int>(lists[e].size());
    }
    neighbors_.reserve(offsets_.back());
    for (std::size_t e = 0; e < lists.size(); ++e) {
        std::vector<int> sorted = lists[e];
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t k = 0; k < sorted.size(); ++k) {
            const int nb = sorted[k];
            require(nb >= 0 && nb < n, ErrorKind::InvalidDomain, "adjacency index out of range");
            require(nb != static_cast<int>(e), ErrorKind::InvalidDomain, "adjacency has a self loop");
            require(k == 0 || sorted[k - 1] != nb, ErrorKind::InvalidDomain, "adjacency has a duplicate edge");
        }
        neighbors_.insert(neighbors_.end(), sorted.begin(), sorted.end());
    }
    for (std::size_t e = 0; e < lists.size(); ++e) {
        for (int nb : neighbors(e)) {
            auto back = neighbors(static_cast<std::size_t>(nb));
            require(std::binary_search(back.begin(), back.end(), static_cast<int>(e)), ErrorKind::InvalidDomain,
                    "adjacency is not symmetric");
        }
    }
}

int ElementAdjacency::max_degree() const noexcept {
    int best = 0;
    for (std::size_t e = 0; e < size(); ++e) {
        best = std::max(best, degree(e));
    }
    return best;
}

std::size_t ElementAdjacency::components() const {
    const std::size_t n = size();
    std::vector<char> seen(n, 0);
    std::vector<int> stack;
    std::size_t count = 0;
    for (std::size_t s = 0; s < n; ++s) {
        if (seen[s]) {
            continue;
        }
        ++count;
        seen[s] = 1;
        stack.push_back(static_cast<int>(s));
        while (!stack.empty()) {
            const int e = stack.back();
            stack.pop_back();
            for (int nb : neighbors(static_cast<std::size_t>(e))) {
                if (!seen[nb]) {
                    seen[nb] = 1;
                    stack.push_back(nb);
                }
            }
        }
    }
    return count;
}

ElementAdjacency face_adjacency(const QuadGrid& grid) {
    std::vector<std::vector<int>> lists(grid.n_elements());
    for (int j = 0; j < grid.n_z; ++j) {
        for (int i = 0; i < grid.n_r; ++i) {
            auto& l = lists[grid.index(i, j)];
            if (i > 0) l.push_back(static_cast<int>(grid.index(i - 1, j)));
            if (i + 1 < grid.n_r) l.push_back(static_cast<int>(grid.index(i + 1, j)));
            if (j > 0) l.push_back(static_cast<int>(grid.index(i, j - 1)));
            if (j + 1 < grid.n_z) l.push_back(static_cast<int>(grid.index(i, j + 1)));
        }
    }
    return ElementAdjacency(lists);
}

namespace {

struct FaceKeyHash {
    std::size_t operator()(const std::array<int, 3>& k) const noexcept {
        std::size_t h = 1469598103934665603ull;
        for (int v : k) {
            h ^= static_cast<std::size_t>(static_cast<unsigned>(v));
            h *= 1099511628211ull;
        }
        return h;
    }
};

} // namespace

ElementAdjacency face_adjacency(const TetMesh& mesh) {
    static constexpr int face_local[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
    struct Owners {
        int first = -1;
        int second = -1;
    };
    std::unordered_map<std::array<int, 3>, Owners, FaceKeyHash> faces;
    faces.reserve(mesh.tets.size() * 3);
    for (std::size_t e = 0; e < mesh.tets.size(); ++e) {
        const auto& t = mesh.tets[e];
        for (const auto& f : face_local) {
            std::array<int, 3> key{t[f[0]], t[f[1]], t[f[2]]};
            std::sort(key.begin(), key.end());
            auto& owners = faces[key];
            if (owners.first < 0) {
                owners.first = static_cast<int>(e);
            } else if (owners.second < 0) {
                owners.second = static_cast<int>(e);
            } else {
                fail(ErrorKind::NonManifold, "face (" + std::to_string(key[0]) + "," + std::to_string(key[1]) + "," +
                                                 std::to_string(key[2]) + ") is shared by more than two tets");
            }
        }
    }
    std::vector<std::vector<int>> lists(mesh.tets.size());
    for (const auto& [key, owners] : faces) {
        if (owners.second >= 0) {
            lists[owners.first].push_back(owners.second);
            lists[owners.second].push_back(owners.first);
        }
    }
    return ElementAdjacency(lists);
}

std::vector<Vec3> element_centroids(const QuadGrid& grid) {
    std::vector<Vec3> c(grid.n_elements());
    for (int j = 0; j < grid.n_z; ++j) {
        for (int i = 0; i < grid.n_r; ++i) {
            c[grid.index(i, j)] = {grid.r0 + (i + 0.5) * grid.dr, grid.z0 + (j + 0.5) * grid.dz, 0.0};
        }
    }
    return c;
}

std::vector<Vec3> element_centroids(const TetMesh& mesh) {
    std::vector<Vec3> c(mesh.tets.size());
    for (std::size_t e = 0; e < mesh.tets.size(); ++e) {
        Vec3 sum{0.0, 0.0, 0.0};
        for (int v : mesh.tets[e]) {
            for (int d = 0; d < 3; ++d) {
                sum[d] += mesh.vertices[v][d];
            }
        }
        c[e] = {sum[0] / 4.0, sum[1] / 4.0, sum[2] / 4.0};
    }
    return c;
}

std::vector<double> element_measures(const QuadGrid& grid) {
    return std::vector<double>(grid.n_elements(), grid.dr * grid.dz);
}

std::vector<double> element_measures(const TetMesh& mesh) {
    std::vector<double> m(mesh.tets.size());
    for (std::size_t e = 0; e < mesh.tets.size(); ++e) {
        const auto& t = mesh.tets[e];
        const double vol =
            signed_tet_volume(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]], mesh.vertices[t[3]]);
        require(vol > 0.0, ErrorKind::DegenerateElement, "tet " + std::to_string(e) + " has non-positive volume");
        m[e] = vol;
    }
    return m;
}

} // namespace sbo::mesh
