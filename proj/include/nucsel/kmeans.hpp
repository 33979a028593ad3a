#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nucsel/common.hpp"

namespace nucsel {

template <typename Scalar>
struct KMeansModel {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    int K = 0;
    std::uint64_t seed = 0;
    Matrix centers;                    // K x dim
    std::vector<int> assignment;       // item -> cluster
    std::vector<std::size_t> sizes;    // cluster -> member count
    Scalar distortion = 0;             // sum of squared distances to assigned centers
    int iterations = 0;
    bool converged = false;
    std::vector<Scalar> distortion_history;  // after every Lloyd update
    std::vector<std::string> log;            // empty-cluster repairs and restarts

    /// Member indices of cluster k, ascending.
    std::vector<std::size_t> members(int k) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignment.size(); ++i) {
            if (assignment[i] == k) out.push_back(i);
        }
        return out;
    }
};

struct KMeansOptions {
    int max_iter = 300;
    int restarts = 1;
};

namespace detail {

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> kmeanspp_init(
    const Eigen::MatrixBase<Derived>& data, int K, Rng& rng) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = data.rows();
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> centers(K, data.cols());

    centers.row(0) = data.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> nearest(n);
    for (Eigen::Index i = 0; i < n; ++i) nearest(i) = (data.row(i) - centers.row(0)).squaredNorm();

    for (int k = 1; k < K; ++k) {
        const double total = static_cast<double>(nearest.sum());
        Eigen::Index pick = n - 1;
        if (total > 0) {
            const double target = rng.uniform() * total;
            double cumulative = 0;
            Eigen::Index last_positive = 0;
            bool found = false;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (nearest(i) <= 0) continue;
                last_positive = i;
                cumulative += static_cast<double>(nearest(i));
                if (cumulative > target) {
                    pick = i;
                    found = true;
                    break;
                }
            }
            if (!found) pick = last_positive;
        } else {
            pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
        }
        centers.row(k) = data.row(pick);
        for (Eigen::Index i = 0; i < n; ++i) {
            nearest(i) = std::min(nearest(i), (data.row(i) - centers.row(k)).squaredNorm());
        }
    }
    return centers;
}

// Nearest center per row; ties go to the lowest index.
template <typename Derived, typename CentersT>
void assign_nearest(const Eigen::MatrixBase<Derived>& data, const CentersT& centers, std::vector<int>& assignment) {
    using Scalar = typename Derived::Scalar;
    parallel_for(static_cast<std::size_t>(data.rows()), [&](std::size_t i) {
        const auto row = data.row(static_cast<Eigen::Index>(i));
        int best = 0;
        Scalar best_d = std::numeric_limits<Scalar>::infinity();
        for (Eigen::Index k = 0; k < centers.rows(); ++k) {
            const Scalar d = (row - centers.row(k)).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(k);
            }
        }
        assignment[i] = best;
    });
}

template <typename Derived>
KMeansModel<typename Derived::Scalar> lloyd(const Eigen::MatrixBase<Derived>& data, int K, std::uint64_t seed,
                                            int max_iter) {
    using Scalar = typename Derived::Scalar;
    const std::size_t n = static_cast<std::size_t>(data.rows());
    const Eigen::Index dim = data.cols();

    KMeansModel<Scalar> m;
    m.K = K;
    m.seed = seed;
    Rng rng(seed);
    m.centers = kmeanspp_init(data, K, rng);
    m.assignment.assign(n, -1);

    std::vector<int> next(n, 0);
    for (int iter = 1; iter <= max_iter; ++iter) {
        assign_nearest(data, m.centers, next);

        std::vector<std::size_t> sizes(static_cast<std::size_t>(K), 0);
        for (int a : next) ++sizes[static_cast<std::size_t>(a)];

        // Empty cluster: steal the point farthest from its own center, taken
        // from a cluster that keeps at least one member.
        for (int k = 0; k < K; ++k) {
            if (sizes[static_cast<std::size_t>(k)] != 0) continue;
            std::size_t far = n;
            Scalar far_d = -1;
            for (std::size_t i = 0; i < n; ++i) {
                if (sizes[static_cast<std::size_t>(next[i])] < 2) continue;
                const Scalar d = (data.row(static_cast<Eigen::Index>(i)) - m.centers.row(next[i])).squaredNorm();
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            if (far == n) throw Error("kmeans: cannot repair empty cluster");
            m.log.push_back("iteration " + std::to_string(iter) + ": cluster " + std::to_string(k) +
                            " empty, reassigned item " + std::to_string(far) + " from cluster " +
                            std::to_string(next[far]));
            --sizes[static_cast<std::size_t>(next[far])];
            next[far] = k;
            sizes[static_cast<std::size_t>(k)] = 1;
        }

        // Deterministic mean update in item order.
        typename KMeansModel<Scalar>::Matrix sums = KMeansModel<Scalar>::Matrix::Zero(K, dim);
        for (std::size_t i = 0; i < n; ++i) sums.row(next[i]) += data.row(static_cast<Eigen::Index>(i));
        for (int k = 0; k < K; ++k) m.centers.row(k) = sums.row(k) / static_cast<Scalar>(sizes[static_cast<std::size_t>(k)]);

        Scalar distortion = 0;
        for (std::size_t i = 0; i < n; ++i) {
            distortion += (data.row(static_cast<Eigen::Index>(i)) - m.centers.row(next[i])).squaredNorm();
        }
        m.distortion_history.push_back(distortion);
        m.distortion = distortion;
        m.sizes = sizes;
        m.iterations = iter;

        const bool unchanged = next == m.assignment;
        m.assignment = next;
        if (unchanged) {
            m.converged = true;
            break;
        }
    }
    return m;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding. Rows of `data` are items.
/// Stops after `max_iter` updates or when assignments stop changing.
/// With restarts > 1, restart r > 0 is seeded with derive_seed(seed, r) and
/// the lowest-distortion run wins (earliest on ties).
template <typename Derived>
KMeansModel<typename Derived::Scalar> kmeans(const Eigen::MatrixBase<Derived>& data, int K, std::uint64_t seed,
                                             const KMeansOptions& opts = {}) {
    if (K < 1) throw Error("kmeans: K must be >= 1");
    if (data.rows() < K) {
        throw Error("kmeans: " + std::to_string(data.rows()) + " items cannot form " + std::to_string(K) +
                    " clusters");
    }
    if (opts.max_iter < 1) throw Error("kmeans: max_iter must be >= 1");
    if (!data.allFinite()) throw Error("kmeans: non-finite input");

    auto best = detail::lloyd(data, K, seed, opts.max_iter);
    for (int r = 1; r < opts.restarts; ++r) {
        auto candidate = detail::lloyd(data, K, derive_seed(seed, static_cast<std::uint64_t>(r)), opts.max_iter);
        if (candidate.distortion < best.distortion) {
            candidate.log.insert(candidate.log.begin(), "restart " + std::to_string(r) + " selected");
            best = std::move(candidate);
        }
    }
    return best;
}

}  // namespace nucsel
