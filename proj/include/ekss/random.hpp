#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace ekss {

/// Identifies one deterministic random stream: a master seed plus a stream
/// id. Distinct stream ids under the same master yield distinct generator
/// states by construction (the mixing function is a bijection).
struct SeedSpec {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;

    /// Child stream rooted at this one. Used to fan out independent
    /// streams, e.g. one per ensemble member or per Monte-Carlo sample.
    [[nodiscard]] SeedSpec sub(std::uint64_t id) const;
};

namespace detail {

// SplitMix64 finalizer; bijective on 64-bit words.
inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t derived_state(const SeedSpec& s) {
    return splitmix64(splitmix64(s.master_seed) + s.stream_id);
}

}  // namespace detail

inline SeedSpec SeedSpec::sub(std::uint64_t id) const {
    return SeedSpec{detail::derived_state(*this), id};
}

/// Seeded source of scalar and matrix-valued draws. All library randomness
/// flows through this type so results are reproducible given a SeedSpec.
class RandomStream {
public:
    explicit RandomStream(SeedSpec seed) : gen_(detail::derived_state(seed)) {}

    double gaussian() { return normal_(gen_); }

    /// Uniform on [0, 1).
    double uniform() { return unit_(gen_); }

    /// Uniform integer in {0, ..., n-1}.
    std::size_t uniform_index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen_);
    }

    Eigen::VectorXd gaussian_vector(Eigen::Index n) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = gaussian();
        return v;
    }

    /// Column-major fill order.
    Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = gaussian();
        return m;
    }

    /// Uniform draw from the unit sphere S^{d-1} (normalized Gaussian).
    Eigen::VectorXd unit_sphere(Eigen::Index d) {
        Eigen::VectorXd v = gaussian_vector(d);
        double n = v.norm();
        while (n == 0.0) {  // measure-zero guard
            v = gaussian_vector(d);
            n = v.norm();
        }
        return v / n;
    }

    /// Subset of {0,...,n-1} of size k, sampled without replacement
    /// (partial Fisher-Yates), returned sorted ascending.
    std::vector<int> index_subset(int n, int k) {
        std::vector<int> pool(n);
        for (int i = 0; i < n; ++i) pool[i] = i;
        for (int i = 0; i < k; ++i) {
            const auto j = i + static_cast<int>(uniform_index(static_cast<std::size_t>(n - i)));
            std::swap(pool[i], pool[j]);
        }
        std::vector<int> out(pool.begin(), pool.begin() + k);
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    std::mt19937_64 gen_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

}  // namespace ekss
