#pragma once

#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ekss/geometry.hpp"
#include "ekss/random.hpp"

namespace ekss {

using Labeling = std::vector<int>;

/// Echo of a generation request, kept with the instance for provenance.
struct GeneratorConfig {
    std::string kind;  // "random" or "angled"
    int D = 0;
    int K = 0;
    std::vector<int> dims;
    std::vector<int> counts;
    double sigma = 0.0;
    double theta = 0.0;  // angled construction only
    int missing_s = 0;
    SeedSpec seed;
};

/// Synthetic union-of-subspaces problem: data with ground truth attached.
struct ProblemInstance {
    Matrix data;  // D x N, column per point
    Labeling true_labels;
    std::vector<Matrix> true_bases;
    double noise_sigma = 0.0;
    std::optional<std::vector<std::vector<int>>> missing_mask;
    GeneratorConfig config;
};

namespace detail {

// Points per cluster k: x = U^(k) a + e with a uniform on the subspace's
// unit sphere and e ~ N(0, sigma^2/D I_D). Coefficients and noise come from
// separate streams so the same seed yields the same geometry at any sigma.
inline void fill_points(ProblemInstance& inst, const std::vector<int>& counts,
                        double sigma, RandomStream& coeff_rng, RandomStream& noise_rng) {
    const Eigen::Index D = inst.true_bases.front().rows();
    const int N = std::accumulate(counts.begin(), counts.end(), 0);
    inst.data.resize(D, N);
    inst.true_labels.resize(N);
    const double noise_scale = sigma / std::sqrt(static_cast<double>(D));
    int j = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        const Matrix& U = inst.true_bases[k];
        for (int i = 0; i < counts[k]; ++i, ++j) {
            Vector x = U * coeff_rng.unit_sphere(U.cols());
            if (sigma > 0.0) x += noise_scale * noise_rng.gaussian_vector(D);
            inst.data.col(j) = x;
            inst.true_labels[j] = static_cast<int>(k);
        }
    }
    inst.noise_sigma = sigma;
}

}  // namespace detail

/// K subspaces drawn independently and uniformly from their Stiefel
/// manifolds, N_k points per subspace.
inline ProblemInstance gen_random_uos(int D, int K, const std::vector<int>& dims,
                                      const std::vector<int>& counts, double sigma,
                                      SeedSpec seed) {
    if (K < 1 || static_cast<int>(dims.size()) != K || static_cast<int>(counts.size()) != K)
        throw std::invalid_argument("gen_random_uos: dims/counts must have K entries");
    for (int d : dims)
        if (d < 1 || d > D) throw std::invalid_argument("gen_random_uos: need 1 <= d_k <= D");
    for (int n : counts)
        if (n < 1) throw std::invalid_argument("gen_random_uos: need N_k >= 1");
    if (sigma < 0.0) throw std::invalid_argument("gen_random_uos: sigma must be >= 0");

    RandomStream basis_rng(seed.sub(0)), coeff_rng(seed.sub(1)), noise_rng(seed.sub(2));
    ProblemInstance inst;
    inst.true_bases.reserve(K);
    for (int k = 0; k < K; ++k) inst.true_bases.push_back(sample_stiefel(D, dims[k], basis_rng));
    detail::fill_points(inst, counts, sigma, coeff_rng, noise_rng);
    inst.config = GeneratorConfig{"random", D, K, dims, counts, sigma, 0.0, 0, seed};
    return inst;
}

/// Three equi-dimensional subspaces with all principal angles between
/// S1 and S2, and between S1 and S3, equal to theta. Built from three
/// mutually orthogonal blocks W0, W1, W2:
///   S1 = span(W0), S2 = span(W0 cos t + W1 sin t), S3 = span(W0 cos t + W2 sin t).
inline ProblemInstance gen_angled_uos(int D, int d, double theta,
                                      const std::vector<int>& counts, double sigma,
                                      SeedSpec seed) {
    constexpr int K = 3;
    if (d < 1) throw std::invalid_argument("gen_angled_uos: need d >= 1");
    if (D < 3 * d)
        throw std::invalid_argument("gen_angled_uos: construction needs D >= 3d");
    if (!(theta > 0.0 && theta <= M_PI / 2.0 + 1e-12))
        throw std::invalid_argument("gen_angled_uos: need theta in (0, pi/2]");
    if (static_cast<int>(counts.size()) != K)
        throw std::invalid_argument("gen_angled_uos: exactly 3 point counts required");
    for (int n : counts)
        if (n < 1) throw std::invalid_argument("gen_angled_uos: need N_k >= 1");
    if (sigma < 0.0) throw std::invalid_argument("gen_angled_uos: sigma must be >= 0");

    RandomStream basis_rng(seed.sub(0)), coeff_rng(seed.sub(1)), noise_rng(seed.sub(2));
    const Matrix W = sample_stiefel(D, 3 * d, basis_rng);
    const Matrix W0 = W.leftCols(d), W1 = W.middleCols(d, d), W2 = W.rightCols(d);
    const double c = std::cos(theta), s = std::sin(theta);

    ProblemInstance inst;
    inst.true_bases = {W0, c * W0 + s * W1, c * W0 + s * W2};
    // Construction identity: singular values of U1^T U2 all equal cos(theta).
    for (int k = 1; k < K; ++k) {
        const Vector sv =
            Eigen::JacobiSVD<Matrix>(inst.true_bases[0].transpose() * inst.true_bases[k])
                .singularValues();
        if ((sv.array() - c).abs().maxCoeff() > 1e-9)
            throw std::logic_error("gen_angled_uos: principal-angle check failed");
    }
    detail::fill_points(inst, counts, sigma, coeff_rng, noise_rng);
    inst.config = GeneratorConfig{"angled", D, K, std::vector<int>(K, d), counts,
                                  sigma, theta, 0, seed};
    return inst;
}

/// Zeroes exactly s uniformly chosen coordinates of every point and records
/// the masked indices.
inline ProblemInstance apply_missing(const ProblemInstance& src, int s, SeedSpec seed) {
    const int D = static_cast<int>(src.data.rows());
    if (s < 0 || s >= D) throw std::invalid_argument("apply_missing: need 0 <= s < D");

    ProblemInstance inst = src;
    RandomStream rng(seed);
    std::vector<std::vector<int>> masks(src.data.cols());
    for (Eigen::Index j = 0; j < src.data.cols(); ++j) {
        masks[j] = rng.index_subset(D, s);
        for (int i : masks[j]) inst.data(i, j) = 0.0;
    }
    inst.missing_mask = std::move(masks);
    inst.config.missing_s = s;
    return inst;
}

}  // namespace ekss
