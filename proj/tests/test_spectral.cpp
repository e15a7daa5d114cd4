#include "doctest.h"
#include "oracles.hpp"

#include "sbo/error.hpp"
#include "sbo/spectral/basis.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

using namespace sbo;
using namespace sbo::spectral;

namespace {

Eigen::MatrixXd to_dense(const LaplacianMatrix& l) { return Eigen::MatrixXd(l); }

Eigen::MatrixXd basis_matrix(const SpectralBasis& b) {
    return Eigen::Map<const Eigen::MatrixXd>(b.data().data(), static_cast<Eigen::Index>(b.n_elements()),
                                             static_cast<Eigen::Index>(b.size()));
}

LaplacianMatrix grid_laplacian(int nr, int nz) {
    return assemble_laplacian(mesh::face_adjacency(mesh::build_quad_grid(nr, nz, 0.0, 1.0, 1.0)));
}

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> d;
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

} // namespace

TEST_CASE("assemble_laplacian small cases") {
    auto path2 = to_dense(assemble_laplacian(oracle::path_adjacency(2)));
    CHECK(path2(0, 0) == 1.0);
    CHECK(path2(0, 1) == -1.0);
    CHECK(path2(1, 0) == -1.0);
    CHECK(path2(1, 1) == 1.0);

    auto single = to_dense(assemble_laplacian(oracle::path_adjacency(1)));
    CHECK(single.rows() == 1);
    CHECK(single(0, 0) == 0.0);

    auto g = to_dense(grid_laplacian(2, 2));
    for (int i = 0; i < 4; ++i) {
        CHECK(g(i, i) == 2.0);
        CHECK(g.row(i).sum() == 0.0);
    }
}

TEST_CASE("Laplacian invariants match the geometric oracle") {
    for (auto [nr, nz] : {std::pair{3, 4}, std::pair{5, 2}, std::pair{6, 6}}) {
        auto l = to_dense(grid_laplacian(nr, nz));
        CHECK((l - oracle::dense_grid_laplacian(nr, nz)).cwiseAbs().maxCoeff() == 0.0);
        CHECK((l - l.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(l.rowwise().sum().cwiseAbs().maxCoeff() == 0.0);
        auto ev = oracle::dense_eigen(l).values;
        CHECK(ev.minCoeff() > -1e-12);
    }
}

TEST_CASE("k = 1 gives the constant eigenvector") {
    auto b = smallest_eigenpairs(grid_laplacian(7, 5), 1);
    REQUIRE(b.size() == 1);
    CHECK(std::abs(b.eigenvalue(0)) < 1e-10);
    const double c = 1.0 / std::sqrt(35.0);
    for (double x : b.column(0)) CHECK(x == doctest::Approx(c).epsilon(1e-9));
}

TEST_CASE("10-element path spectrum matches closed form and dense oracle") {
    auto l = assemble_laplacian(oracle::path_adjacency(10));
    auto dense = oracle::dense_eigen(oracle::dense_path_laplacian(10));
    auto b = smallest_eigenpairs(l, 10);
    for (int m = 0; m < 10; ++m) {
        const double exact = 2.0 - 2.0 * std::cos(m * std::numbers::pi / 10.0);
        CHECK(std::abs(dense.values(m) - exact) < 1e-12);
        CHECK(std::abs(b.eigenvalue(m) - dense.values(m)) < 1e-8);
    }
    CHECK(b.orthonormality_error() < 1e-8);
}

TEST_CASE("4x4 grid, k = 16, matches the dense oracle including degenerate eigenspaces") {
    auto l = grid_laplacian(4, 4);
    LaplacianEigensolver solver(l);
    auto b = solver.smallest(16);
    auto dense = oracle::dense_eigen(oracle::dense_grid_laplacian(4, 4));
    for (int i = 0; i < 16; ++i) {
        CHECK(std::abs(b.eigenvalue(i) - dense.values(i)) < 1e-8);
        CHECK(solver.residual(b, i) < 1e-7 * std::max(1.0, b.eigenvalue(i)));
    }
    CHECK(b.orthonormality_error() < 1e-8);
    // Compare eigenspace projectors cluster by cluster.
    auto bm = basis_matrix(b);
    int start = 0;
    while (start < 16) {
        int stop = start + 1;
        while (stop < 16 && dense.values(stop) - dense.values(stop - 1) < 1e-8) ++stop;
        auto p_dense = oracle::projector(dense.vectors, start, stop);
        auto p_ours = oracle::projector(bm, start, stop);
        CHECK((p_dense - p_ours).cwiseAbs().maxCoeff() < 1e-8);
        start = stop;
    }
}

TEST_CASE("eigenvalues ascend and sign convention holds") {
    auto b = smallest_eigenpairs(grid_laplacian(9, 7), 30);
    for (std::size_t i = 0; i + 1 < b.size(); ++i) CHECK(b.eigenvalue(i) <= b.eigenvalue(i + 1));
    for (std::size_t j = 0; j < b.size(); ++j) {
        auto col = b.column(j);
        double vmax = 0.0;
        for (double x : col) vmax = std::max(vmax, std::abs(x));
        for (double x : col) {
            if (std::abs(x) > 1e-6 * vmax) {
                CHECK(x > 0.0);
                break;
            }
        }
    }
}

TEST_CASE("extend_basis reproduces the direct computation") {
    auto l = grid_laplacian(4, 4);
    LaplacianEigensolver solver(l);
    auto direct = solver.smallest(8);
    auto ext = solver.smallest(5);
    auto first5 = ext;
    solver.extend(ext, 3);
    REQUIRE(ext.size() == 8);
    // Existing columns bit-identical.
    for (std::size_t j = 0; j < 5; ++j) {
        for (std::size_t i = 0; i < 16; ++i) CHECK(ext.column(j)[i] == first5.column(j)[i]);
    }
    for (std::size_t j = 0; j < 8; ++j) {
        CHECK(std::abs(ext.eigenvalue(j) - direct.eigenvalue(j)) < 1e-8);
        for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(ext.column(j)[i] - direct.column(j)[i]) < 1e-8);
    }
    CHECK(ext.orthonormality_error() < 1e-8);

    auto same = ext;
    solver.extend(same, 0);
    CHECK(same.size() == ext.size());
}

TEST_CASE("extension to the full basis on a 3x3 grid is orthonormal") {
    auto l = grid_laplacian(3, 3);
    LaplacianEigensolver solver(l);
    auto b = solver.smallest(4);
    solver.extend(b, 5);
    REQUIRE(b.size() == 9);
    auto bm = basis_matrix(b);
    CHECK((bm.transpose() * bm - Eigen::MatrixXd::Identity(9, 9)).cwiseAbs().maxCoeff() < 1e-8);
    auto dense = oracle::dense_eigen(oracle::dense_grid_laplacian(3, 3));
    for (int i = 0; i < 9; ++i) CHECK(std::abs(b.eigenvalue(i) - dense.values(i)) < 1e-8);
    CHECK_THROWS_AS(solver.extend(b, 1), Error);
}

TEST_CASE("incremental extension keeps invariants on a larger grid") {
    auto l = grid_laplacian(30, 20);
    LaplacianEigensolver solver(l);
    auto b = solver.smallest(10);
    for (int step = 0; step < 4; ++step) {
        solver.extend(b, 8);
        CHECK(b.orthonormality_error() < 1e-8);
        for (std::size_t j = 0; j < b.size(); ++j) {
            CHECK(solver.residual(b, j) <= 1e-7 * std::max(1.0, b.eigenvalue(j)));
            if (j + 1 < b.size()) CHECK(b.eigenvalue(j) <= b.eigenvalue(j + 1));
        }
    }
    auto direct = solver.smallest(b.size());
    for (std::size_t j = 0; j < b.size(); ++j) {
        CHECK(std::abs(direct.eigenvalue(j) - b.eigenvalue(j)) < 1e-8);
        for (std::size_t i = 0; i < b.n_elements(); ++i)
            CHECK(std::abs(direct.column(j)[i] - b.column(j)[i]) < 1e-7);
    }
}

TEST_CASE("long extension through repeated eigenvalues matches the dense spectrum") {
    // A 24x12 grid has many multiplicity-2 and higher eigenvalues past index 100.
    auto l = grid_laplacian(24, 12);
    auto dense = oracle::dense_eigen(oracle::dense_grid_laplacian(24, 12));
    LaplacianEigensolver solver(l);
    auto b = solver.smallest(10);
    while (b.size() + 8 <= 170) solver.extend(b, 8);
    REQUIRE(b.size() == 170);
    CHECK(b.orthonormality_error() < 1e-8);
    for (std::size_t j = 0; j < b.size(); ++j) {
        CHECK(std::abs(b.eigenvalue(j) - dense.values(static_cast<Eigen::Index>(j))) < 1e-8);
        CHECK(solver.residual(b, j) <= 1e-7 * std::max(1.0, b.eigenvalue(j)));
    }
}

TEST_CASE("eigensolver is deterministic") {
    auto l = grid_laplacian(12, 9);
    auto a = smallest_eigenpairs(l, 20);
    auto b = smallest_eigenpairs(l, 20);
    CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST_CASE("synthesize_field") {
    auto l = grid_laplacian(4, 4);
    auto b = smallest_eigenpairs(l, 6);
    std::vector<double> w(6, 0.0);
    w[0] = 3.0;
    for (double x : b.synthesize(w)) CHECK(x == doctest::Approx(3.0 / 4.0).epsilon(1e-9));
    std::fill(w.begin(), w.end(), 0.0);
    for (double x : b.synthesize(w)) CHECK(x == 0.0);

    std::mt19937_64 rng(11);
    auto wr = random_vector(rng, 6);
    auto f = b.synthesize(wr);
    Eigen::VectorXd expect = basis_matrix(b) * Eigen::Map<Eigen::VectorXd>(wr.data(), 6);
    for (int i = 0; i < 16; ++i) CHECK(std::abs(f[i] - expect(i)) < 1e-14);

    std::vector<double> bad(5, 1.0);
    try {
        b.synthesize(bad);
        FAIL("expected dimension error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Dimension);
    }
}

TEST_CASE("reduce_gradient") {
    auto l = grid_laplacian(5, 4);
    auto b = smallest_eigenpairs(l, 7);
    for (std::size_t j = 0; j < 7; ++j) {
        std::vector<double> df(b.column(j).begin(), b.column(j).end());
        auto g = b.reduce_gradient(df);
        for (std::size_t i = 0; i < 7; ++i) CHECK(std::abs(g[i] - (i == j ? 1.0 : 0.0)) < 1e-10);
    }
    // A higher eigenvector is orthogonal to the first seven.
    auto full = smallest_eigenpairs(l, 12);
    std::vector<double> perp(full.column(11).begin(), full.column(11).end());
    for (double x : b.reduce_gradient(perp)) CHECK(std::abs(x) < 1e-10);

    // f(w) = g(Bw), g(F) = sum sin(F_i) + F_i^2 / 2: grad_w = B^T (cos F + F).
    std::mt19937_64 rng(5);
    auto w = random_vector(rng, 7);
    auto f = [&](const std::vector<double>& ww) {
        double s = 0.0;
        for (double x : b.synthesize(ww)) s += std::sin(x) + 0.5 * x * x;
        return s;
    };
    auto field = b.synthesize(w);
    std::vector<double> dg(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) dg[i] = std::cos(field[i]) + field[i];
    auto analytic = b.reduce_gradient(dg);
    auto fd = oracle::central_difference(f, w, 1e-5);
    CHECK(oracle::rel_error(analytic, fd) < 1e-5);
    CHECK_THROWS_AS(b.reduce_gradient(std::vector<double>(3, 0.0)), Error);
}

TEST_CASE("Parseval, linearity and adjoint consistency") {
    auto l = grid_laplacian(5, 5);
    auto full = smallest_eigenpairs(l, 25);
    std::mt19937_64 rng(9);
    for (int t = 0; t < 5; ++t) {
        auto w = random_vector(rng, 25);
        auto f = full.synthesize(w);
        double nw = 0.0, nf = 0.0;
        for (double x : w) nw += x * x;
        for (double x : f) nf += x * x;
        CHECK(std::abs(std::sqrt(nw) - std::sqrt(nf)) < 1e-10 * std::sqrt(nw));

        auto w2 = random_vector(rng, 25);
        const double a = 1.7, c = -0.3;
        std::vector<double> combo(25);
        for (int i = 0; i < 25; ++i) combo[i] = a * w[i] + c * w2[i];
        auto lhs = full.synthesize(combo);
        auto f2 = full.synthesize(w2);
        for (int i = 0; i < 25; ++i) CHECK(std::abs(lhs[i] - (a * f[i] + c * f2[i])) < 1e-13);

        auto df = random_vector(rng, 25);
        double lhs_ip = 0.0, rhs_ip = 0.0;
        auto g = full.reduce_gradient(df);
        for (int i = 0; i < 25; ++i) {
            lhs_ip += f[i] * df[i];
            rhs_ip += w[i] * g[i];
        }
        CHECK(std::abs(lhs_ip - rhs_ip) < 1e-12 * std::max(1.0, std::abs(lhs_ip)));
    }
}

TEST_CASE("sign changes grow with eigenvector index on a path") {
    auto b = smallest_eigenpairs(assemble_laplacian(oracle::path_adjacency(24)), 12);
    int previous = -1;
    for (std::size_t j = 0; j < b.size(); ++j) {
        // Count sign flips among entries that are not numerically zero.
        int changes = 0;
        int last_sign = 0;
        for (double x : b.column(j)) {
            const int s = x > 1e-10 ? 1 : (x < -1e-10 ? -1 : 0);
            if (s != 0) {
                if (last_sign != 0 && s != last_sign) ++changes;
                last_sign = s;
            }
        }
        CHECK(changes >= previous);
        CHECK(changes == static_cast<int>(j));
        previous = changes;
    }
}

TEST_CASE("basis cache round-trips and rejects other domains") {
    auto adj = mesh::face_adjacency(mesh::build_quad_grid(6, 5, 0.0, 1.0, 1.0));
    auto b = smallest_eigenpairs(assemble_laplacian(adj), 9);
    const auto hash = domain_hash(adj);
    auto path = std::filesystem::temp_directory_path() / "sbo_basis_cache.bin";
    save_basis(path, b, hash);
    auto back = load_basis(path, hash);
    REQUIRE(back.has_value());
    CHECK(back->size() == 9);
    CHECK(std::equal(b.data().begin(), b.data().end(), back->data().begin()));
    CHECK(std::equal(b.eigenvalues().begin(), b.eigenvalues().end(), back->eigenvalues().begin()));
    auto other = domain_hash(mesh::face_adjacency(mesh::build_quad_grid(5, 6, 0.0, 1.0, 1.0)));
    CHECK(other != hash);
    CHECK_FALSE(load_basis(path, other).has_value());
    CHECK_FALSE(load_basis(path.string() + ".missing", hash).has_value());
    std::filesystem::remove(path);
}

TEST_CASE("desk-scale basis on the 60x30 rocket grid") {
    auto t0 = std::chrono::steady_clock::now();
    auto l = grid_laplacian(60, 30);
    LaplacianEigensolver solver(l);
    auto b = solver.smallest(40);
    solver.extend(b, 40);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    MESSAGE("80 eigenpairs on 1800 cells in " << secs << " s");
    CHECK(b.orthonormality_error() < 1e-8);
    for (std::size_t j = 0; j < b.size(); ++j) CHECK(solver.residual(b, j) <= 1e-7 * std::max(1.0, b.eigenvalue(j)));
    // Rectangle spectrum: 4 sin^2(a pi / 2 n_r) + 4 sin^2(b pi / 2 n_z).
    std::vector<double> exact;
    for (int a = 0; a < 60; ++a)
        for (int c = 0; c < 30; ++c)
            exact.push_back(4 * std::pow(std::sin(a * std::numbers::pi / 120), 2) +
                            4 * std::pow(std::sin(c * std::numbers::pi / 60), 2));
    std::sort(exact.begin(), exact.end());
    for (std::size_t j = 0; j < b.size(); ++j) CHECK(std::abs(b.eigenvalue(j) - exact[j]) < 1e-8);
}
