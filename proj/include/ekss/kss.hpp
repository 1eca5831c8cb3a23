#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "ekss/geometry.hpp"
#include "ekss/random.hpp"
#include "ekss/synth.hpp"

namespace ekss {

/// What to do when an alternation step leaves a candidate cluster empty.
enum class EmptyClusterPolicy {
    kRedrawRandomBasis,  // replace the candidate with a fresh Stiefel draw
    kStealFarthestPoint, // move the worst-fit point into the empty cluster
};

struct KssResult {
    Labeling labels;
    std::vector<Matrix> bases;
    double cost = 0.0;    // sum of squared residuals to assigned subspaces
    double weight = 0.0;  // 1 - cost / ||X||_F^2
    std::vector<double> cost_trace;  // cost after init and each iteration
    int empty_cluster_events = 0;
};

/// Assigns each column of `data` to the candidate with the largest
/// projection energy ||U_k^T x||_2. Ties go to the lowest index.
inline Labeling assign_by_projection(const Matrix& data, const std::vector<Matrix>& bases) {
    if (bases.empty()) throw std::invalid_argument("assign_by_projection: no candidates");
    for (const Matrix& U : bases)
        if (U.rows() != data.rows())
            throw std::invalid_argument("assign_by_projection: dimension mismatch");

    const Eigen::Index N = data.cols();
    Labeling labels(N, 0);
    Eigen::VectorXd best = (bases[0].transpose() * data).colwise().squaredNorm();
    for (std::size_t k = 1; k < bases.size(); ++k) {
        const Eigen::VectorXd energy = (bases[k].transpose() * data).colwise().squaredNorm();
        for (Eigen::Index j = 0; j < N; ++j) {
            if (energy(j) > best(j)) {
                best(j) = energy(j);
                labels[j] = static_cast<int>(k);
            }
        }
    }
    return labels;
}

/// KSS objective: sum over points of the squared residual to the assigned
/// subspace, sum_k sum_{i in c_k} ||x_i - U_k U_k^T x_i||^2.
inline double kss_cost(const Matrix& data, const Labeling& labels,
                       const std::vector<Matrix>& bases) {
    if (static_cast<Eigen::Index>(labels.size()) != data.cols())
        throw std::invalid_argument("kss_cost: labels/data length mismatch");
    for (const Matrix& U : bases)
        if (U.rows() != data.rows())
            throw std::invalid_argument("kss_cost: dimension mismatch");

    double cost = 0.0;
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
        const int k = labels[j];
        if (k < 0 || k >= static_cast<int>(bases.size()))
            throw std::invalid_argument("kss_cost: label out of range");
        const Vector& x = data.col(j);
        cost += (x - bases[k] * (bases[k].transpose() * x)).squaredNorm();
    }
    return cost;
}

/// Clustering-quality weight 1 - cost/||X||_F^2, in [0, 1].
inline double kss_weight(const Matrix& data, const KssResult& result) {
    const double total = data.squaredNorm();
    if (total == 0.0) throw std::invalid_argument("kss_weight: zero data matrix");
    const double w = 1.0 - result.cost / total;
    return std::min(1.0, std::max(0.0, w));
}

namespace detail {

inline std::vector<std::vector<int>> group_by_cluster(const Labeling& labels, int K) {
    std::vector<std::vector<int>> members(K);
    for (std::size_t j = 0; j < labels.size(); ++j)
        members[labels[j]].push_back(static_cast<int>(j));
    return members;
}

// Reassigns the point with the largest residual to its current subspace
// (among clusters that can spare one) to the empty cluster `k_empty`.
inline void steal_farthest_point(const Matrix& data, Labeling& labels,
                                 const std::vector<Matrix>& bases,
                                 std::vector<std::vector<int>>& members, int k_empty) {
    std::vector<int> sizes(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) sizes[k] = static_cast<int>(members[k].size());
    int best_j = -1;
    double best_r = -1.0;
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
        const int k = labels[j];
        if (sizes[k] < 2) continue;
        const Vector& x = data.col(j);
        const double r = (x - bases[k] * (bases[k].transpose() * x)).squaredNorm();
        if (r > best_r) {
            best_r = r;
            best_j = static_cast<int>(j);
        }
    }
    if (best_j < 0) return;  // no donor cluster; leave empty
    const int from = labels[best_j];
    labels[best_j] = k_empty;
    members[from].erase(std::find(members[from].begin(), members[from].end(), best_j));
    members[k_empty].push_back(best_j);
}

}  // namespace detail

/// One KSS base clustering: K_bar random candidate bases, assignment by
/// projection, then T alternations of PCA refit and reassignment. T = 0
/// returns the purely random-candidate assignment.
inline KssResult run_kss(const Matrix& data, int K_bar, int d_bar, int T, SeedSpec seed,
                         EmptyClusterPolicy policy = EmptyClusterPolicy::kRedrawRandomBasis) {
    validate_data_matrix(data);
    if (K_bar < 1) throw std::invalid_argument("run_kss: need K_bar >= 1");
    if (T < 0) throw std::invalid_argument("run_kss: need T >= 0");
    const Eigen::Index D = data.rows();
    if (d_bar < 1 || d_bar > D) throw std::invalid_argument("run_kss: need 1 <= d_bar <= D");

    RandomStream rng(seed);
    KssResult res;
    res.bases.reserve(K_bar);
    for (int k = 0; k < K_bar; ++k) res.bases.push_back(sample_stiefel(D, d_bar, rng));
    res.labels = assign_by_projection(data, res.bases);
    res.cost_trace.push_back(kss_cost(data, res.labels, res.bases));

    for (int t = 0; t < T; ++t) {
        auto members = detail::group_by_cluster(res.labels, K_bar);
        for (int k = 0; k < K_bar; ++k) {
            if (members[k].empty()) {
                ++res.empty_cluster_events;
                if (policy == EmptyClusterPolicy::kStealFarthestPoint)
                    detail::steal_farthest_point(data, res.labels, res.bases, members, k);
            }
        }
        for (int k = 0; k < K_bar; ++k) {
            if (members[k].empty()) {
                // Redraw policy, or a steal that found no donor.
                res.bases[k] = sample_stiefel(D, d_bar, rng);
                continue;
            }
            Matrix cluster(D, members[k].size());
            for (std::size_t i = 0; i < members[k].size(); ++i)
                cluster.col(i) = data.col(members[k][i]);
            res.bases[k] = pca_basis(cluster, d_bar, rng);
        }
        res.labels = assign_by_projection(data, res.bases);
        res.cost_trace.push_back(kss_cost(data, res.labels, res.bases));
    }

    res.cost = res.cost_trace.back();
    res.weight = data.squaredNorm() > 0.0 ? kss_weight(data, res) : 0.0;
    return res;
}

}  // namespace ekss
