#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ekss/geometry.hpp"
#include "ekss/hungarian.hpp"
#include "ekss/kss.hpp"
#include "ekss/random.hpp"
#include "ekss/synth.hpp"
#include "ekss/threading.hpp"

namespace ekss {

/// Clustering error in percent: 100 * (1 - matched/N) where the match count
/// is maximized over permutations of the output labels (solved exactly as an
/// optimal assignment on the contingency matrix).
inline double clustering_error(const Labeling& out, const Labeling& truth) {
    if (out.size() != truth.size())
        throw std::invalid_argument("clustering_error: labelings differ in length");
    const int N = static_cast<int>(out.size());
    if (N == 0) throw std::invalid_argument("clustering_error: empty labelings");

    const int k_out = 1 + *std::max_element(out.begin(), out.end());
    const int k_true = 1 + *std::max_element(truth.begin(), truth.end());
    const int K = std::max(k_out, k_true);
    std::vector<std::vector<double>> cost(K, std::vector<double>(K, 0.0));
    for (int j = 0; j < N; ++j) cost[out[j]][truth[j]] -= 1.0;  // maximize matches
    const std::vector<int> assign = hungarian_min_cost(cost);
    double matched = 0.0;
    for (int i = 0; i < K; ++i) matched -= cost[i][assign[i]];
    return 100.0 * (1.0 - matched / N);
}

struct NfcResult {
    bool no_false_connections = true;
    std::vector<std::pair<int, int>> violations;  // (i, j) with i < j
};

/// True iff every nonzero off-diagonal affinity joins points with the same
/// true label.
inline NfcResult nfc_check(const Matrix& A, const Labeling& truth) {
    if (A.rows() != A.cols()) throw std::invalid_argument("nfc_check: matrix must be square");
    if (static_cast<Eigen::Index>(truth.size()) != A.rows())
        throw std::invalid_argument("nfc_check: labels/matrix size mismatch");
    NfcResult res;
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < A.cols(); ++j) {
            if (A(i, j) != 0.0 && truth[i] != truth[j]) {
                res.no_false_connections = false;
                res.violations.emplace_back(static_cast<int>(i), static_cast<int>(j));
            }
        }
    }
    return res;
}

/// q-angular separation phi_q: half the worst-case gap between f of the
/// q-th largest within-cluster absolute inner product and f of the largest
/// cross-cluster absolute inner product.
inline double angular_separation(const Matrix& data, const Labeling& truth, int q,
                                 const std::function<double(double)>& f = {}) {
    validate_data_matrix(data);
    const int N = static_cast<int>(data.cols());
    if (static_cast<int>(truth.size()) != N)
        throw std::invalid_argument("angular_separation: labels/data size mismatch");
    const int K = 1 + *std::max_element(truth.begin(), truth.end());
    if (K < 2) throw std::invalid_argument("angular_separation: need at least two clusters");
    std::vector<int> sizes(K, 0);
    for (int l : truth) ++sizes[l];
    const int min_size = *std::min_element(sizes.begin(), sizes.end());
    if (q < 1 || q >= min_size)
        throw std::invalid_argument("angular_separation: need 1 <= q < min cluster size");

    const auto fx = f ? f : [](double z) { return z; };
    const Matrix G = data.transpose() * data;
    double phi = std::numeric_limits<double>::infinity();
    std::vector<double> within;
    for (int i = 0; i < N; ++i) {
        within.clear();
        double cross = -1.0;
        for (int j = 0; j < N; ++j) {
            if (j == i) continue;
            const double z = std::abs(G(i, j));
            if (truth[j] == truth[i])
                within.push_back(z);
            else
                cross = std::max(cross, z);
        }
        std::nth_element(within.begin(), within.begin() + (q - 1), within.end(),
                         std::greater<double>());
        phi = std::min(phi, (fx(within[q - 1]) - fx(cross)) / 2.0);
    }
    return phi;
}

/// Subspace affinity aff(S_k, S_l) = ||U_k^T U_l||_F / sqrt(min(d_k, d_l));
/// 1 for identical subspaces, 0 for orthogonal ones.
inline double subspace_affinity(const Matrix& U_k, const Matrix& U_l) {
    if (U_k.rows() != U_l.rows())
        throw std::invalid_argument("subspace_affinity: ambient dimensions differ");
    if (!is_orthonormal(U_k) || !is_orthonormal(U_l))
        throw std::invalid_argument("subspace_affinity: bases must be orthonormal");
    const double dmin = static_cast<double>(std::min(U_k.cols(), U_l.cols()));
    return (U_k.transpose() * U_l).norm() / std::sqrt(dmin);
}

namespace detail {

inline std::uint64_t binomial_or_cap(int n, int k, std::uint64_t cap) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) {
        r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
        if (r > cap) return cap + 1;
    }
    return r;
}

inline std::uint64_t subset_count_or_cap(int n, int max_size, std::uint64_t cap) {
    std::uint64_t total = 0;
    for (int k = 0; k <= max_size; ++k) {
        total += binomial_or_cap(n, k, cap);
        if (total > cap) return cap + 1;
    }
    return total;
}

// All subsets of {0..n-1} with |S| <= cap_size, in size-then-lexicographic
// order (starting with the empty set).
template <class Fn>
void for_each_subset_upto(int n, int cap_size, Fn&& fn) {
    std::vector<int> idx;
    fn(idx);  // empty set
    for (int sz = 1; sz <= cap_size; ++sz) {
        idx.resize(sz);
        for (int i = 0; i < sz; ++i) idx[i] = i;
        for (;;) {
            fn(idx);
            int i = sz - 1;
            while (i >= 0 && idx[i] == n - sz + i) --i;
            if (i < 0) break;
            ++idx[i];
            for (int j = i + 1; j < sz; ++j) idx[j] = idx[j - 1] + 1;
        }
    }
}

}  // namespace detail

/// Masked-basis ratio: exhaustive evaluation over every index set D with
/// |D| <= 2s of
///   max_{k != l} ||U_D^(k)T U^(l)||_2 / min_l sigma_min(U_D^(l)T U^(l)),
/// where U_D zeroes the rows indexed by D. Enumeration is refused when
/// C(D, 2s) exceeds the budget.
inline double masked_ratio(const std::vector<Matrix>& bases, int s,
                           std::uint64_t budget = 1'000'000) {
    if (bases.size() < 2) throw std::invalid_argument("masked_ratio: need at least two bases");
    const int D = static_cast<int>(bases.front().rows());
    for (const Matrix& U : bases)
        if (U.rows() != D) throw std::invalid_argument("masked_ratio: ambient dimensions differ");
    if (s < 0 || s >= D) throw std::invalid_argument("masked_ratio: need 0 <= s < D");
    const int cap_size = std::min(2 * s, D);
    if (detail::subset_count_or_cap(D, cap_size, budget) > budget)
        throw std::invalid_argument(
            "masked_ratio: subset enumeration exceeds budget; reduce s or D");

    const int K = static_cast<int>(bases.size());
    double numer = 0.0;
    double denom = std::numeric_limits<double>::infinity();
    detail::for_each_subset_upto(D, cap_size, [&](const std::vector<int>& mask) {
        for (int k = 0; k < K; ++k) {
            Matrix masked = bases[k];
            for (int row : mask) masked.row(row).setZero();
            for (int l = 0; l < K; ++l) {
                const Vector sv =
                    Eigen::JacobiSVD<Matrix>(masked.transpose() * bases[l]).singularValues();
                if (l == k)
                    denom = std::min(denom, sv(sv.size() - 1));
                else
                    numer = std::max(numer, sv(0));
            }
        }
    });
    if (denom <= 0.0) return std::numeric_limits<double>::infinity();
    return numer / denom;
}

struct FEstimate {
    double p = 0.0;        // co-cluster probability estimate
    double std_err = 0.0;  // binomial standard error sqrt(p(1-p)/B)
};

/// Monte-Carlo estimates of the co-cluster probability f_{K_bar,d_bar} at
/// several angles, reusing each sampled candidate set across all angles.
/// The two probe points sit at the canonical positions e1 and
/// cos(theta) e1 + sin(theta) e2; rotational invariance of the candidate
/// draw makes this placement lossless.
inline std::vector<FEstimate> estimate_f_curve(const std::vector<double>& thetas, int K_bar,
                                               int d_bar, int D, std::int64_t B,
                                               SeedSpec seed) {
    if (D < 2) throw std::invalid_argument("estimate_f: need D >= 2");
    if (K_bar < 1 || d_bar < 1 || d_bar > D)
        throw std::invalid_argument("estimate_f: invalid candidate parameters");
    if (B < 1) throw std::invalid_argument("estimate_f: need B >= 1");
    for (double t : thetas)
        if (t < 0.0 || t > M_PI / 2.0 + 1e-12)
            throw std::invalid_argument("estimate_f: need theta in [0, pi/2]");

    const int n_theta = static_cast<int>(thetas.size());
    std::vector<double> cos_t(n_theta), sin_t(n_theta);
    for (int a = 0; a < n_theta; ++a) {
        cos_t[a] = std::cos(thetas[a]);
        sin_t[a] = std::sin(thetas[a]);
    }

    const int workers = thread_count();
    std::vector<std::vector<std::int64_t>> counts(workers,
                                                  std::vector<std::int64_t>(n_theta, 0));
    parallel_ranges(static_cast<std::size_t>(B), workers,
                    [&](std::size_t begin, std::size_t end, int w) {
        std::vector<double> m11(K_bar), m12(K_bar), m22(K_bar);
        for (std::size_t b = begin; b < end; ++b) {
            RandomStream rng(seed.sub(b));
            // Only the first two rows of each candidate matter for points in
            // span(e1, e2): ||U^T (c e1 + s e2)||^2 expands over row moments.
            int arg_i = 0;
            double best_i = 0.0;
            for (int k = 0; k < K_bar; ++k) {
                const Matrix U = sample_stiefel(D, d_bar, rng);
                const auto r1 = U.row(0);
                const auto r2 = U.row(1);
                m11[k] = r1.squaredNorm();
                m12[k] = r1.dot(r2);
                m22[k] = r2.squaredNorm();
                const double e_i = m11[k];
                if (k == 0 || e_i > best_i) {
                    best_i = e_i;
                    arg_i = k;
                }
            }
            for (int a = 0; a < n_theta; ++a) {
                int arg_j = 0;
                double best_j = 0.0;
                for (int k = 0; k < K_bar; ++k) {
                    const double e_j = cos_t[a] * cos_t[a] * m11[k] +
                                       2.0 * cos_t[a] * sin_t[a] * m12[k] +
                                       sin_t[a] * sin_t[a] * m22[k];
                    if (k == 0 || e_j > best_j) {
                        best_j = e_j;
                        arg_j = k;
                    }
                }
                if (arg_j == arg_i) ++counts[w][a];
            }
        }
    });

    std::vector<FEstimate> out(n_theta);
    for (int a = 0; a < n_theta; ++a) {
        std::int64_t total = 0;
        for (int w = 0; w < workers; ++w) total += counts[w][a];
        const double p = static_cast<double>(total) / static_cast<double>(B);
        out[a] = FEstimate{p, std::sqrt(p * (1.0 - p) / static_cast<double>(B))};
    }
    return out;
}

inline FEstimate estimate_f(double theta, int K_bar, int d_bar, int D, std::int64_t B,
                            SeedSpec seed) {
    return estimate_f_curve({theta}, K_bar, d_bar, D, B, seed).front();
}

}  // namespace ekss
