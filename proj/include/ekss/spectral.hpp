#pragma once

#include <algorithm>
#include <deque>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ekss/geometry.hpp"
#include "ekss/random.hpp"
#include "ekss/synth.hpp"

namespace ekss {

struct SpectralConfig {
    int K = 1;
    int kmeans_restarts = 20;
    int kmeans_iters = 100;
    SeedSpec seed;
    bool normalized_laplacian = true;  // Ng-Jordan-Weiss; false = L = D - A
};

namespace detail {

// Lloyd's method with greedy farthest-point seeding. Returns labels and
// within-cluster sum of squares. Rows of Y are the points.
inline std::pair<Labeling, double> kmeans_once(const Matrix& Y, int K, int max_iters,
                                               RandomStream& rng) {
    const Eigen::Index N = Y.rows();
    Matrix centers(K, Y.cols());
    std::vector<bool> taken(N, false);

    const Eigen::Index first = static_cast<Eigen::Index>(rng.uniform_index(N));
    centers.row(0) = Y.row(first);
    taken[first] = true;
    Vector min_dist = (Y.rowwise() - centers.row(0)).rowwise().squaredNorm();
    for (int k = 1; k < K; ++k) {
        Eigen::Index far = -1;
        double best = -1.0;
        for (Eigen::Index j = 0; j < N; ++j) {
            if (taken[j]) continue;
            if (min_dist(j) > best) {
                best = min_dist(j);
                far = j;
            }
        }
        if (far < 0) far = 0;  // all points already centers (duplicates)
        centers.row(k) = Y.row(far);
        taken[far] = true;
        min_dist = min_dist.cwiseMin((Y.rowwise() - centers.row(k)).rowwise().squaredNorm());
    }

    Labeling labels(N, 0);
    auto assign = [&]() {
        bool changed = false;
        for (Eigen::Index j = 0; j < N; ++j) {
            int arg = 0;
            double best = (Y.row(j) - centers.row(0)).squaredNorm();
            for (int k = 1; k < K; ++k) {
                const double d = (Y.row(j) - centers.row(k)).squaredNorm();
                if (d < best) {
                    best = d;
                    arg = k;
                }
            }
            if (labels[j] != arg) {
                labels[j] = arg;
                changed = true;
            }
        }
        return changed;
    };

    assign();
    for (int it = 0; it < max_iters; ++it) {
        centers.setZero();
        std::vector<int> sizes(K, 0);
        for (Eigen::Index j = 0; j < N; ++j) {
            centers.row(labels[j]) += Y.row(j);
            ++sizes[labels[j]];
        }
        for (int k = 0; k < K; ++k)
            if (sizes[k] > 0) centers.row(k) /= sizes[k];
        for (int k = 0; k < K; ++k) {
            if (sizes[k] > 0) continue;
            // Empty cluster: seize the point farthest from its center.
            Eigen::Index far = 0;
            double best = -1.0;
            for (Eigen::Index j = 0; j < N; ++j) {
                if (sizes[labels[j]] < 2) continue;
                const double d = (Y.row(j) - centers.row(labels[j])).squaredNorm();
                if (d > best) {
                    best = d;
                    far = j;
                }
            }
            --sizes[labels[far]];
            labels[far] = k;
            sizes[k] = 1;
            centers.row(k) = Y.row(far);
        }
        if (!assign()) break;
    }

    double wcss = 0.0;
    for (Eigen::Index j = 0; j < N; ++j) wcss += (Y.row(j) - centers.row(labels[j])).squaredNorm();
    return {std::move(labels), wcss};
}

}  // namespace detail

/// Normalized spectral clustering of a symmetric nonnegative affinity with
/// zero diagonal: symmetric-normalized Laplacian, K smallest-eigenvalue
/// eigenvectors (sign-fixed), unit row normalization, then seeded k-means,
/// best of cfg.kmeans_restarts by within-cluster sum of squares.
inline Labeling spectral_cluster(const Matrix& A, const SpectralConfig& cfg) {
    const Eigen::Index N = A.rows();
    if (A.cols() != N) throw std::invalid_argument("spectral_cluster: matrix must be square");
    if (cfg.K < 1 || cfg.K > N)
        throw std::invalid_argument("spectral_cluster: need 1 <= K <= N");
    if (cfg.kmeans_restarts < 1)
        throw std::invalid_argument("spectral_cluster: need kmeans_restarts >= 1");
    if (N == 1) return Labeling{0};

    Vector deg = A.rowwise().sum();
    for (Eigen::Index i = 0; i < N; ++i)
        if (deg(i) <= 0.0) deg(i) = 1e-12;  // isolated vertex

    Matrix L;
    if (cfg.normalized_laplacian) {
        const Vector dinv_sqrt = deg.array().rsqrt();
        L = Matrix::Identity(N, N) -
            dinv_sqrt.asDiagonal() * A * dinv_sqrt.asDiagonal();
    } else {
        L = Matrix(deg.asDiagonal()) - A;
    }

    Eigen::SelfAdjointEigenSolver<Matrix> es(L);
    Matrix Y = es.eigenvectors().leftCols(cfg.K);  // ascending eigenvalues
    detail::fix_column_signs(Y);
    if (cfg.normalized_laplacian) {
        for (Eigen::Index j = 0; j < N; ++j) {
            const double n = Y.row(j).norm();
            if (n > 0.0) Y.row(j) /= n;
        }
    }

    Labeling best_labels;
    double best_wcss = std::numeric_limits<double>::infinity();
    for (int r = 0; r < cfg.kmeans_restarts; ++r) {
        RandomStream rng(cfg.seed.sub(static_cast<std::uint64_t>(r)));
        auto [labels, wcss] = detail::kmeans_once(Y, cfg.K, cfg.kmeans_iters, rng);
        if (wcss < best_wcss) {
            best_wcss = wcss;
            best_labels = std::move(labels);
        }
    }
    return best_labels;
}

/// Connected components of the graph with edges A_ij > tol (i != j).
/// Components are numbered in order of first discovery; returns labels and
/// the component count.
inline std::pair<Labeling, int> connected_components(const Matrix& A, double tol = 0.0) {
    const Eigen::Index N = A.rows();
    if (A.cols() != N)
        throw std::invalid_argument("connected_components: matrix must be square");
    Labeling comp(N, -1);
    int count = 0;
    std::deque<Eigen::Index> queue;
    for (Eigen::Index start = 0; start < N; ++start) {
        if (comp[start] >= 0) continue;
        comp[start] = count;
        queue.push_back(start);
        while (!queue.empty()) {
            const Eigen::Index i = queue.front();
            queue.pop_front();
            for (Eigen::Index j = 0; j < N; ++j) {
                if (j == i || comp[j] >= 0) continue;
                if (A(i, j) > tol) {
                    comp[j] = count;
                    queue.push_back(j);
                }
            }
        }
        ++count;
    }
    return {std::move(comp), count};
}

}  // namespace ekss
