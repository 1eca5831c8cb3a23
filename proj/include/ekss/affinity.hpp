#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ekss/geometry.hpp"
#include "ekss/kss.hpp"
#include "ekss/spectral.hpp"
#include "ekss/threading.hpp"

namespace ekss {

/// Co-association matrix over B base clusterings:
///   A_ij = (1/B) sum_b w(b) 1{i, j co-clustered in labeling b},
/// with w(b) = 1 when no weights are given. Symmetric with entries in [0, 1];
/// the diagonal carries the mean weight (1 when unweighted). Accumulation is
/// sequential in b so the result does not depend on scheduling.
inline Matrix accumulate(const std::vector<Labeling>& labelings,
                         const std::vector<double>& weights = {}) {
    if (labelings.empty()) throw std::invalid_argument("accumulate: no labelings");
    const std::size_t B = labelings.size();
    const std::size_t N = labelings.front().size();
    for (const Labeling& l : labelings)
        if (l.size() != N) throw std::invalid_argument("accumulate: labeling length mismatch");
    if (!weights.empty()) {
        if (weights.size() != B)
            throw std::invalid_argument("accumulate: weights length mismatch");
        for (double w : weights)
            if (w < 0.0 || w > 1.0)
                throw std::invalid_argument("accumulate: weights must lie in [0, 1]");
    }

    Matrix A = Matrix::Zero(N, N);
    std::vector<std::vector<int>> groups;
    for (std::size_t b = 0; b < B; ++b) {
        const double w = weights.empty() ? 1.0 : weights[b];
        const Labeling& labels = labelings[b];
        const auto [lo, hi] = std::minmax_element(labels.begin(), labels.end());
        if (*lo < 0) throw std::invalid_argument("accumulate: negative cluster id");
        groups.assign(1 + *hi, {});
        for (std::size_t j = 0; j < N; ++j) groups[labels[j]].push_back(static_cast<int>(j));
        for (const auto& g : groups)
            for (std::size_t a = 0; a < g.size(); ++a)
                for (std::size_t c = a; c < g.size(); ++c) A(g[a], g[c]) += w;
    }
    A /= static_cast<double>(B);
    // Mirror the upper triangle for exact symmetry.
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = i + 1; j < N; ++j) A(j, i) = A(i, j);
    return A;
}

/// Row/column sparsification of Algorithm Thresh: zero the diagonal, keep
/// the top q entries of each row (Z_row) and of each column (Z_col), and
/// return (Z_row + Z_col) / 2. Ties at the q-th value keep the lower index.
inline Matrix thresh(const Matrix& A, int q) {
    const Eigen::Index N = A.rows();
    if (A.cols() != N) throw std::invalid_argument("thresh: matrix must be square");
    if (q < 1 || q > N) throw std::invalid_argument("thresh: need 1 <= q <= N");

    Matrix Z = A;
    Z.diagonal().setZero();

    auto top_q_mask = [&](auto entry) {
        // Indices sorted by (value desc, index asc); first q survive.
        std::vector<Eigen::Index> order(N);
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            const double va = entry(a), vb = entry(b);
            return va != vb ? va > vb : a < b;
        });
        std::vector<bool> keep(N, false);
        for (int i = 0; i < q; ++i) keep[order[i]] = true;
        return keep;
    };

    Matrix Zrow = Z, Zcol = Z;
    for (Eigen::Index i = 0; i < N; ++i) {
        const auto keep_r = top_q_mask([&](Eigen::Index j) { return Z(i, j); });
        for (Eigen::Index j = 0; j < N; ++j)
            if (!keep_r[j]) Zrow(i, j) = 0.0;
        const auto keep_c = top_q_mask([&](Eigen::Index j) { return Z(j, i); });
        for (Eigen::Index j = 0; j < N; ++j)
            if (!keep_c[j]) Zcol(j, i) = 0.0;
    }
    return (Zrow + Zcol) / 2.0;
}

struct EkssParams {
    int K = 1;      // output clusters
    int K_bar = 1;  // candidate subspaces per base clustering
    int d_bar = 1;  // candidate dimension
    std::optional<int> q;  // thresholding parameter; nullopt = no thresholding
    int B = 1;      // base clusterings
    int T = 3;      // KSS iterations per base clustering
    bool weighted = false;  // weight votes by clustering quality
    SeedSpec seed;
    EmptyClusterPolicy empty_policy = EmptyClusterPolicy::kRedrawRandomBasis;
    int kmeans_restarts = 20;
    int kmeans_iters = 100;
};

struct EkssResult {
    Labeling labels;
    Matrix coassociation;  // raw accumulated votes, unit diagonal when unweighted
    Matrix affinity;       // matrix handed to spectral clustering (thresholded if q set)
};

/// Ensemble K-subspaces: B seeded KSS base clusterings run concurrently,
/// votes accumulated (optionally weighted by clustering quality), optional
/// Thresh sparsification, then spectral clustering into K clusters.
inline EkssResult ekss(const Matrix& data, const EkssParams& p) {
    validate_data_matrix(data);
    if (p.B < 1) throw std::invalid_argument("ekss: need B >= 1");
    if (p.weighted && data.squaredNorm() == 0.0)
        throw std::invalid_argument("ekss: weighted voting needs a nonzero data matrix");

    std::vector<Labeling> labelings(p.B);
    std::vector<double> weights(p.weighted ? p.B : 0);
    parallel_for(static_cast<std::size_t>(p.B), [&](std::size_t b) {
        KssResult r = run_kss(data, p.K_bar, p.d_bar, p.T, p.seed.sub(b), p.empty_policy);
        labelings[b] = std::move(r.labels);
        if (p.weighted) weights[b] = r.weight;
    });

    EkssResult res;
    res.coassociation = accumulate(labelings, weights);
    if (p.q) {
        res.affinity = thresh(res.coassociation, *p.q);
    } else {
        res.affinity = res.coassociation;
        res.affinity.diagonal().setZero();
    }
    SpectralConfig cfg;
    cfg.K = p.K;
    cfg.kmeans_restarts = p.kmeans_restarts;
    cfg.kmeans_iters = p.kmeans_iters;
    cfg.seed = p.seed.sub(static_cast<std::uint64_t>(p.B));  // disjoint from member streams
    res.labels = spectral_cluster(res.affinity, cfg);
    return res;
}

/// EKSS-0: the analyzable specialization with zero KSS iterations and
/// unweighted votes.
inline EkssResult ekss0(const Matrix& data, int K, int K_bar, int d_bar,
                        std::optional<int> q, int B, SeedSpec seed) {
    EkssParams p;
    p.K = K;
    p.K_bar = K_bar;
    p.d_bar = d_bar;
    p.q = q;
    p.B = B;
    p.T = 0;
    p.weighted = false;
    p.seed = seed;
    return ekss(data, p);
}

enum class TscWeight {
    kExpAngle,         // exp(-2 acos(min(1, |<x_i, x_j>|)))
    kAbsInnerProduct,  // |<x_i, x_j>|
};

/// Thresholded subspace clustering affinity: pairwise angle-based weights,
/// zero diagonal, sparsified by thresh(., q).
inline Matrix tsc_affinity(const Matrix& data, int q,
                           TscWeight weight = TscWeight::kExpAngle) {
    validate_data_matrix(data);
    const Eigen::Index N = data.cols();
    if (q < 1 || q >= N) throw std::invalid_argument("tsc_affinity: need 1 <= q < N");

    Matrix Z = (data.transpose() * data).cwiseAbs();
    if (weight == TscWeight::kExpAngle)
        Z = (-2.0 * Z.cwiseMin(1.0).array().acos()).exp();
    Z.diagonal().setZero();
    return thresh(Z, q);
}

}  // namespace ekss
