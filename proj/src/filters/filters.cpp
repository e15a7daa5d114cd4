#include "sbo/filters/filters.hpp"

#include "sbo/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace sbo::filters {

namespace {

double sigmoid(double t) noexcept {
    if (t >= 0.0) {
        return 1.0 / (1.0 + std::exp(-t));
    }
    const double e = std::exp(t);
    return e / (1.0 + e);
}

} // namespace

void LogisticBounds::validate() const {
    require(lower < upper, ErrorKind::Config, "logistic bounds need lower < upper");
    require(kappa > 0.0, ErrorKind::Config, "logistic steepness must be positive");
}

double logistic_bound(double x, const LogisticBounds& b) noexcept {
    return b.lower + (b.upper - b.lower) * sigmoid(b.kappa * x);
}

double logistic_bound_grad(double x, const LogisticBounds& b) noexcept {
    const double s = sigmoid(b.kappa * x);
    return b.kappa * (b.upper - b.lower) * s * (1.0 - s);
}

std::vector<double> logistic_bound(std::span<const double> x, const LogisticBounds& b, std::vector<double>* grad) {
    std::vector<double> out(x.size());
    if (grad != nullptr) {
        grad->resize(x.size());
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double s = sigmoid(b.kappa * x[i]);
        out[i] = b.lower + (b.upper - b.lower) * s;
        if (grad != nullptr) {
            (*grad)[i] = b.kappa * (b.upper - b.lower) * s * (1.0 - s);
        }
    }
    return out;
}

void MaterialSet::validate() const {
    require(materials.size() >= 2, ErrorKind::Config, "material set needs at least two materials");
    require(penalty >= 1.0, ErrorKind::Config, "SIMP penalty must be >= 1");
    for (std::size_t m = 0; m < materials.size(); ++m) {
        const auto& mat = materials[m];
        require(mat.density >= 0.0 && mat.density <= 1.0, ErrorKind::Config, "material densities must lie in [0, 1]");
        require(mat.modulus >= 0.0, ErrorKind::Config, "material moduli must be non-negative");
        if (m > 0) {
            require(mat.density > materials[m - 1].density, ErrorKind::Config,
                    "material densities must be strictly ascending");
            require(mat.modulus >= materials[m - 1].modulus, ErrorKind::Config,
                    "material moduli must be non-decreasing");
        }
    }
}

std::size_t MaterialSet::nearest(double rho) const {
    std::size_t best = 0;
    for (std::size_t m = 1; m < materials.size(); ++m) {
        if (std::abs(materials[m].density - rho) < std::abs(materials[best].density - rho)) {
            best = m;
        }
    }
    return best;
}

SimpValue ordered_simp(double rho, const MaterialSet& mats) noexcept {
    const auto& ms = mats.materials;
    if (rho <= ms.front().density) {
        return {ms.front().modulus, 0.0, rho < ms.front().density};
    }
    if (rho >= ms.back().density) {
        return {ms.back().modulus, 0.0, rho > ms.back().density};
    }
    std::size_t m = 0;
    while (m + 2 < ms.size() && rho >= ms[m + 1].density) {
        ++m;
    }
    const double p = mats.penalty;
    const Material& lo = ms[m];
    const Material& hi = ms[m + 1];
    if (rho == lo.density) {
        // Slope from the interval on the right.
        const double span = std::pow(hi.density, p) - std::pow(lo.density, p);
        return {lo.modulus, (hi.modulus - lo.modulus) * p * std::pow(rho, p - 1.0) / span, false};
    }
    const double span = std::pow(hi.density, p) - std::pow(lo.density, p);
    const double t = (std::pow(rho, p) - std::pow(lo.density, p)) / span;
    const double modulus = lo.modulus + (hi.modulus - lo.modulus) * t;
    const double derivative = (hi.modulus - lo.modulus) * p * std::pow(rho, p - 1.0) / span;
    return {modulus, derivative, false};
}

DensityFilter::DensityFilter(std::span<const mesh::Vec3> centroids, double r_min) : r_min_(r_min) {
    require(r_min > 0.0, ErrorKind::Config, "density filter radius must be positive");
    const std::size_t n = centroids.size();
    // Bucket centroids on a lattice of spacing r_min; only neighboring buckets can interact.
    using Key = std::tuple<long, long, long>;
    auto key_of = [r_min](const mesh::Vec3& c) {
        return Key{static_cast<long>(std::floor(c[0] / r_min)), static_cast<long>(std::floor(c[1] / r_min)),
                   static_cast<long>(std::floor(c[2] / r_min))};
    };
    std::map<Key, std::vector<int>> buckets;
    for (std::size_t e = 0; e < n; ++e) {
        buckets[key_of(centroids[e])].push_back(static_cast<int>(e));
    }
    row_sums_.assign(n, 0.0);
    offsets_.assign(1, 0);
    std::vector<std::pair<int, double>> row;
    identity_ = true;
    for (std::size_t e = 0; e < n; ++e) {
        row.clear();
        const auto [bx, by, bz] = key_of(centroids[e]);
        for (long dx = -1; dx <= 1; ++dx) {
            for (long dy = -1; dy <= 1; ++dy) {
                for (long dz = -1; dz <= 1; ++dz) {
                    auto it = buckets.find(Key{bx + dx, by + dy, bz + dz});
                    if (it == buckets.end()) {
                        continue;
                    }
                    for (int i : it->second) {
                        const auto& a = centroids[e];
                        const auto& b = centroids[static_cast<std::size_t>(i)];
                        const double dist = std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                                                      (a[2] - b[2]) * (a[2] - b[2]));
                        const double w = r_min - dist;
                        if (w > 0.0) {
                            row.emplace_back(i, w);
                        }
                    }
                }
            }
        }
        std::sort(row.begin(), row.end());
        double sum = 0.0;
        for (const auto& [i, w] : row) {
            cols_.push_back(i);
            weights_.push_back(w);
            sum += w;
            if (i != static_cast<int>(e)) {
                identity_ = false;
            }
        }
        row_sums_[e] = sum;
        offsets_.push_back(static_cast<int>(cols_.size()));
    }
}

std::vector<double> DensityFilter::apply(std::span<const double> rho) const {
    require(rho.size() == size(), ErrorKind::Dimension, "density filter: field length mismatch");
    if (identity_) {
        return {rho.begin(), rho.end()};
    }
    std::vector<double> out(rho.size());
    for (std::size_t e = 0; e < rho.size(); ++e) {
        double acc = 0.0;
        auto cols = row_indices(e);
        auto ws = row_weights(e);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            acc += ws[k] * rho[static_cast<std::size_t>(cols[k])];
        }
        out[e] = acc / row_sums_[e];
    }
    return out;
}

std::vector<double> DensityFilter::chain(std::span<const double> grad_filtered) const {
    require(grad_filtered.size() == size(), ErrorKind::Dimension, "density filter: gradient length mismatch");
    if (identity_) {
        return {grad_filtered.begin(), grad_filtered.end()};
    }
    std::vector<double> out(grad_filtered.size(), 0.0);
    for (std::size_t e = 0; e < grad_filtered.size(); ++e) {
        const double scaled = grad_filtered[e] / row_sums_[e];
        auto cols = row_indices(e);
        auto ws = row_weights(e);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            out[static_cast<std::size_t>(cols[k])] += ws[k] * scaled;
        }
    }
    return out;
}

} // namespace sbo::filters
