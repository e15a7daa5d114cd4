#include "sbo/error.hpp"
#include "sbo/simd/kernels.hpp"
#include "sbo/spectral/basis.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <random>

namespace sbo::spectral {

namespace {

using ColMajorSparse = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

struct RitzPair {
    double value;
    std::vector<double> vector;
};

// Column-major n x cols storage that grows by whole columns.
struct ColumnBlock {
    std::size_t n = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    std::span<const double> col(std::size_t j) const { return {data.data() + j * n, n}; }
    std::span<double> col(std::size_t j) { return {data.data() + j * n, n}; }
    void push(std::span<const double> v) {
        data.insert(data.end(), v.begin(), v.end());
        ++cols;
    }
};

// v -= C (C^T v), twice, with the SIMD gemv kernels.
void project_out(std::span<const double> cols_data, std::size_t n, std::size_t cols, std::vector<double>& v,
                 std::vector<double>& coeff, std::vector<double>& tmp) {
    if (cols == 0) {
        return;
    }
    coeff.resize(cols);
    tmp.resize(n);
    simd::gemv_t(cols_data.first(n * cols), n, cols, v, coeff);
    simd::gemv(cols_data.first(n * cols), n, cols, coeff, tmp);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] -= tmp[i];
    }
}

void apply_sign_convention(std::vector<double>& v) {
    double vmax = 0.0;
    for (double x : v) {
        vmax = std::max(vmax, std::abs(x));
    }
    for (double x : v) {
        if (std::abs(x) > 1e-6 * vmax) {
            if (x < 0.0) {
                for (double& y : v) {
                    y = -y;
                }
            }
            return;
        }
    }
}

} // namespace

struct LaplacianEigensolver::Impl {
    LaplacianMatrix laplacian;
    ColMajorSparse shifted;
    Eigen::SimplicialLDLT<ColMajorSparse> factor;
    EigensolverOptions options;

    void apply_l(std::span<const double> x, std::span<double> y) const {
        Eigen::Map<const Eigen::VectorXd> xm(x.data(), static_cast<Eigen::Index>(x.size()));
        Eigen::Map<Eigen::VectorXd> ym(y.data(), static_cast<Eigen::Index>(y.size()));
        ym.noalias() = laplacian * xm;
    }

    double rayleigh(std::span<const double> v) const {
        std::vector<double> lv(v.size());
        apply_l(v, lv);
        return simd::dot(v, lv);
    }

    std::vector<RitzPair> solve_complement(const SpectralBasis& locked, std::size_t want) const;
    std::vector<RitzPair> solve_complement(const SpectralBasis& locked, std::size_t want,
                                           const Eigen::SimplicialLDLT<ColMajorSparse>& factor) const;
    std::vector<RitzPair> canonicalize(std::vector<RitzPair> pairs, std::size_t cluster_end) const;
};

LaplacianEigensolver::LaplacianEigensolver(LaplacianMatrix laplacian, EigensolverOptions options)
    : impl_(std::make_unique<Impl>()) {
    require(laplacian.rows() == laplacian.cols(), ErrorKind::Dimension, "Laplacian must be square");
    require(options.shift < 0.0, ErrorKind::SpectralFailure, "shift must be negative for a PSD operator");
    impl_->laplacian = std::move(laplacian);
    impl_->options = options;
    const auto n = impl_->laplacian.rows();
    ColMajorSparse identity(n, n);
    identity.setIdentity();
    impl_->shifted = ColMajorSparse(impl_->laplacian) - options.shift * identity;
    impl_->factor.compute(impl_->shifted);
    if (impl_->factor.info() != Eigen::Success) {
        throw SpectralError("factorization of the shifted Laplacian failed", 0.0);
    }
}

LaplacianEigensolver::~LaplacianEigensolver() = default;
LaplacianEigensolver::LaplacianEigensolver(LaplacianEigensolver&&) noexcept = default;
LaplacianEigensolver& LaplacianEigensolver::operator=(LaplacianEigensolver&&) noexcept = default;

std::size_t LaplacianEigensolver::n_elements() const noexcept {
    return static_cast<std::size_t>(impl_->laplacian.rows());
}

const LaplacianMatrix& LaplacianEigensolver::matrix() const noexcept { return impl_->laplacian; }

double LaplacianEigensolver::residual(const SpectralBasis& basis, std::size_t j) const {
    auto v = basis.column(j);
    std::vector<double> lv(v.size());
    impl_->apply_l(v, lv);
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double r = lv[i] - basis.eigenvalue(j) * v[i];
        sum += r * r;
    }
    return std::sqrt(sum);
}

// Block Krylov space of (L - shift I)^{-1}, kept orthogonal to the locked
// columns, with Rayleigh-Ritz on L itself. Grows until the wanted pairs and the
// whole eigenvalue cluster at the cut-off have converged.
// Extensions shift just below the last locked eigenvalue, where the wanted
// pairs are nearest. The shifted matrix is indefinite; if its factorization or
// the iteration breaks down, fall back to the global near-zero shift.
std::vector<RitzPair> LaplacianEigensolver::Impl::solve_complement(const SpectralBasis& locked,
                                                                   std::size_t want) const {
    const std::size_t p = locked.size();
    if (p > 0) {
        const double lam = locked.eigenvalue(p - 1);
        const double sigma = lam - 1e-6 * std::max(1.0, lam);
        if (sigma > options.shift) {
            const auto n = laplacian.rows();
            ColMajorSparse identity(n, n);
            identity.setIdentity();
            Eigen::SimplicialLDLT<ColMajorSparse> local(ColMajorSparse(laplacian) - sigma * identity);
            if (local.info() == Eigen::Success) {
                try {
                    return solve_complement(locked, want, local);
                } catch (const SpectralError&) {
                }
            }
        }
    }
    return solve_complement(locked, want, factor);
}

std::vector<RitzPair> LaplacianEigensolver::Impl::solve_complement(
    const SpectralBasis& locked, std::size_t want, const Eigen::SimplicialLDLT<ColMajorSparse>& factor) const {
    const std::size_t n = static_cast<std::size_t>(laplacian.rows());
    const std::size_t p = locked.size();
    const std::size_t avail = n - p;
    const std::size_t block = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, options.block_size)), avail);
    const std::size_t cap =
        std::min(avail, options.max_subspace > 0 ? options.max_subspace : 10 * want + 200);

    std::mt19937_64 rng(options.seed ^ (0x9E3779B97F4A7C15ull * (p + 1)));
    std::uniform_real_distribution<double> uni(-1.0, 1.0);

    ColumnBlock q{n, 0, {}};
    ColumnBlock lq{n, 0, {}};
    q.data.reserve(n * std::min(cap, want + 4 * block));
    std::vector<double> coeff, tmp, lv(n);

    auto try_add = [&](std::vector<double> v) -> bool {
        const double before = std::sqrt(simd::squared_norm(v));
        if (!(before > 0.0) || !std::isfinite(before)) {
            return false;
        }
        for (int pass = 0; pass < 2; ++pass) {
            project_out(locked.data(), n, p, v, coeff, tmp);
            project_out(q.data, n, q.cols, v, coeff, tmp);
        }
        const double after = std::sqrt(simd::squared_norm(v));
        if (after <= 1e-10 * before) {
            return false;
        }
        for (double& x : v) {
            x /= after;
        }
        apply_l(v, lv);
        q.push(v);
        lq.push(lv);
        return true;
    };
    auto random_vector = [&] {
        std::vector<double> v(n);
        for (double& x : v) {
            x = uni(rng);
        }
        return v;
    };
    auto add_random = [&] {
        for (int attempt = 0; attempt < 8 && q.cols < avail; ++attempt) {
            if (try_add(random_vector())) {
                return;
            }
        }
    };

    std::size_t block_start = 0;
    for (std::size_t b = 0; b < block && q.cols < avail; ++b) {
        add_random();
    }
    std::size_t block_end = q.cols;

    std::size_t next_check = std::min(avail, want + block);
    double worst_residual = 0.0;
    Eigen::VectorXd work(static_cast<Eigen::Index>(n));
    for (;;) {
        if (q.cols >= next_check || q.cols == avail || q.cols >= cap) {
            const auto m = static_cast<Eigen::Index>(q.cols);
            Eigen::Map<const Eigen::MatrixXd> qm(q.data.data(), static_cast<Eigen::Index>(n), m);
            Eigen::Map<const Eigen::MatrixXd> lqm(lq.data.data(), static_cast<Eigen::Index>(n), m);
            Eigen::MatrixXd h = qm.transpose() * lqm;
            h = 0.5 * (h + h.transpose()).eval();
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
            if (es.info() != Eigen::Success) {
                throw SpectralError("projected eigenproblem failed", 0.0);
            }
            const Eigen::VectorXd& theta = es.eigenvalues();
            const std::size_t check = std::min<std::size_t>(q.cols, want + block);
            Eigen::MatrixXd s = es.eigenvectors().leftCols(static_cast<Eigen::Index>(check));
            Eigen::MatrixXd y = qm * s;
            Eigen::MatrixXd ly = lqm * s;
            std::size_t converged = 0;
            worst_residual = 0.0;
            std::vector<double> res(check);
            for (std::size_t i = 0; i < check; ++i) {
                const double th = theta(static_cast<Eigen::Index>(i));
                const double r = (ly.col(static_cast<Eigen::Index>(i)) - th * y.col(static_cast<Eigen::Index>(i))).norm();
                res[i] = r;
                if (i < want) {
                    worst_residual = std::max(worst_residual, r);
                }
                if (r <= options.residual_tol * std::max(1.0, std::abs(th)) && converged == i) {
                    converged = i + 1;
                }
            }
            if (converged >= want) {
                std::size_t end = want - 1;
                auto close = [&](std::size_t a, std::size_t b) {
                    const double ta = theta(static_cast<Eigen::Index>(a));
                    const double tb = theta(static_cast<Eigen::Index>(b));
                    return tb - ta <= options.cluster_tol * std::max(1.0, std::abs(ta));
                };
                while (end + 1 < converged && close(end, end + 1)) {
                    ++end;
                }
                // The next Ritz value need not meet the tolerance, only sit
                // provably outside the cluster: |theta - lambda| <= residual.
                const bool separated =
                    end + 1 < converged ||
                    (end + 1 < check &&
                     res[end + 1] < 0.1 * (theta(static_cast<Eigen::Index>(end + 1)) - theta(static_cast<Eigen::Index>(end))));
                const bool exhausted = q.cols == avail && end + 1 == converged;
                if (separated || exhausted || (end + 1 == check && q.cols == avail)) {
                    std::vector<RitzPair> pairs;
                    pairs.reserve(end + 1);
                    for (std::size_t i = 0; i <= end; ++i) {
                        const auto col = y.col(static_cast<Eigen::Index>(i));
                        pairs.push_back({theta(static_cast<Eigen::Index>(i)),
                                         std::vector<double>(col.data(), col.data() + n)});
                    }
                    auto out = canonicalize(std::move(pairs), end + 1);
                    out.resize(want);
                    return out;
                }
            }
            if (q.cols >= cap) {
                throw SpectralError("eigensolver did not converge within a subspace of " + std::to_string(q.cols) +
                                        " vectors (worst residual " + std::to_string(worst_residual) + ")",
                                    worst_residual);
            }
            next_check = std::min(cap, q.cols + std::max(block, q.cols / 5));
        }
        if (q.cols == avail) {
            continue;
        }
        // Next Krylov block from the previous one.
        const std::size_t from = block_start;
        const std::size_t to = block_end;
        block_start = q.cols;
        for (std::size_t j = from; j < to && q.cols < std::min(avail, cap); ++j) {
            Eigen::Map<const Eigen::VectorXd> v(q.col(j).data(), static_cast<Eigen::Index>(n));
            work = factor.solve(v);
            std::vector<double> w(work.data(), work.data() + n);
            if (!try_add(std::move(w))) {
                add_random();
            }
        }
        block_end = q.cols;
        if (block_end == block_start) {
            if (q.cols < avail) {
                add_random();
                block_end = q.cols;
            }
            if (block_end == block_start) {
                next_check = q.cols;
            }
        }
    }
}

// Replaces every eigenvalue cluster by a basis that depends only on its
// eigenspace: Gram-Schmidt over the projections P e_j taken in element order,
// picking the first j whose remaining projection is within a factor 4 of the
// largest one.
std::vector<RitzPair> LaplacianEigensolver::Impl::canonicalize(std::vector<RitzPair> pairs,
                                                               std::size_t cluster_end) const {
    std::vector<RitzPair> out;
    out.reserve(pairs.size());
    std::size_t start = 0;
    while (start < cluster_end) {
        std::size_t stop = start + 1;
        while (stop < cluster_end &&
               pairs[stop].value - pairs[stop - 1].value <=
                   options.cluster_tol * std::max(1.0, std::abs(pairs[stop - 1].value))) {
            ++stop;
        }
        const std::size_t d = stop - start;
        if (d == 1) {
            auto v = std::move(pairs[start].vector);
            apply_sign_convention(v);
            out.push_back({rayleigh(v), std::move(v)});
        } else {
            const std::size_t n = pairs[start].vector.size();
            Eigen::MatrixXd vm(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
            for (std::size_t c = 0; c < d; ++c) {
                vm.col(static_cast<Eigen::Index>(c)) =
                    Eigen::Map<const Eigen::VectorXd>(pairs[start + c].vector.data(), static_cast<Eigen::Index>(n));
            }
            Eigen::MatrixXd coeffs(static_cast<Eigen::Index>(d), 0);
            double cluster_value = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                cluster_value += pairs[start + c].value;
            }
            cluster_value /= static_cast<double>(d);
            for (std::size_t t = 0; t < d; ++t) {
                // Rows of vm are the coordinates of P e_j in the cluster basis.
                Eigen::MatrixXd resid = vm;
                if (coeffs.cols() > 0) {
                    resid -= (vm * coeffs) * coeffs.transpose();
                }
                Eigen::VectorXd norms = resid.rowwise().norm();
                const double best = norms.maxCoeff();
                Eigen::Index pick = 0;
                for (Eigen::Index j = 0; j < norms.size(); ++j) {
                    if (norms(j) >= 0.25 * best) {
                        pick = j;
                        break;
                    }
                }
                Eigen::VectorXd c = resid.row(pick).transpose() / norms(pick);
                // Re-orthogonalize against earlier coefficient vectors.
                if (coeffs.cols() > 0) {
                    c -= coeffs * (coeffs.transpose() * c);
                    c.normalize();
                }
                coeffs.conservativeResize(Eigen::NoChange, coeffs.cols() + 1);
                coeffs.col(coeffs.cols() - 1) = c;
                Eigen::VectorXd u = vm * c;
                std::vector<double> v(u.data(), u.data() + n);
                apply_sign_convention(v);
                out.push_back({cluster_value, std::move(v)});
            }
        }
        start = stop;
    }
    return out;
}

SpectralBasis LaplacianEigensolver::smallest(std::size_t k) const {
    SpectralBasis basis(n_elements());
    extend(basis, k);
    return basis;
}

void LaplacianEigensolver::extend(SpectralBasis& basis, std::size_t m) const {
    require(basis.n_elements() == n_elements(), ErrorKind::Dimension, "basis belongs to a different domain");
    require(basis.size() + m <= n_elements(), ErrorKind::Dimension,
            "cannot extend basis to " + std::to_string(basis.size() + m) + " columns on " +
                std::to_string(n_elements()) + " elements");
    if (m == 0) {
        return;
    }
    auto pairs = impl_->solve_complement(basis, m);
    for (auto& pair : pairs) {
        double value = pair.value;
        if (basis.size() > 0) {
            // Keep the spectrum ordered when a cluster straddles the old cut-off.
            value = std::max(value, basis.eigenvalues().back());
        }
        basis.append(value, pair.vector);
    }
}

} // namespace sbo::spectral
