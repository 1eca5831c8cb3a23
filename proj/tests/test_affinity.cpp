#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <random>

#include "ekss/affinity.hpp"
#include "ekss/eval.hpp"
#include "ekss/synth.hpp"
#include "test_util.hpp"

using ekss::Labeling;
using ekss::Matrix;
using ekss::SeedSpec;

TEST_CASE("accumulate counting rule") {
    SECTION("single all-together labeling gives the all-ones matrix") {
        const Matrix A = ekss::accumulate({{0, 0, 0}});
        REQUIRE(A == Matrix::Ones(3, 3));
    }
    SECTION("two labelings hand trace") {
        const Matrix A = ekss::accumulate({{0, 0, 1}, {0, 1, 1}});
        REQUIRE(A(0, 1) == Catch::Approx(0.5));
        REQUIRE(A(1, 2) == Catch::Approx(0.5));
        REQUIRE(A(0, 2) == Catch::Approx(0.0).margin(1e-15));
        for (int i = 0; i < 3; ++i) REQUIRE(A(i, i) == 1.0);
    }
    SECTION("length mismatch is rejected") {
        REQUIRE_THROWS_AS(ekss::accumulate({{0, 1}, {0, 1, 2}}), std::invalid_argument);
    }
}

TEST_CASE("accumulate entries are symmetric multiples of 1/B in [0, 1]") {
    ekss::RandomStream rng(SeedSpec{80, 0});
    const int B = 7, N = 12;
    std::vector<Labeling> labelings(B, Labeling(N));
    for (auto& l : labelings)
        for (int j = 0; j < N; ++j) l[j] = static_cast<int>(rng.uniform_index(3));
    const Matrix A = ekss::accumulate(labelings);
    REQUIRE((A - A.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            REQUIRE(A(i, j) >= 0.0);
            REQUIRE(A(i, j) <= 1.0);
            const double scaled = A(i, j) * B;
            REQUIRE(std::abs(scaled - std::round(scaled)) <= 1e-9);
        }
}

TEST_CASE("weighted accumulation scales votes by clustering quality") {
    const Matrix A = ekss::accumulate({{0, 0}, {0, 0}}, {1.0, 0.5});
    REQUIRE(A(0, 1) == Catch::Approx(0.75));
    REQUIRE_THROWS_AS(ekss::accumulate({{0, 0}}, {1.5}), std::invalid_argument);
}

TEST_CASE("thresh reproduces the hand-traced example") {
    Matrix A(3, 3);
    A << 0.0, 0.9, 0.2,
         0.9, 0.0, 0.5,
         0.2, 0.5, 0.0;
    const Matrix T = ekss::thresh(A, 1);
    Matrix expected(3, 3);
    expected << 0.0, 0.9, 0.0,
                0.9, 0.0, 0.25,
                0.0, 0.25, 0.0;
    REQUIRE((T - expected).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("thresh with q = N-1 only zeroes the diagonal") {
    ekss::RandomStream rng(SeedSpec{81, 0});
    Matrix A = rng.gaussian_matrix(5, 5).cwiseAbs();
    A = ((A + A.transpose()) / 2.0).eval();
    const Matrix T = ekss::thresh(A, 4);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            if (i == j)
                REQUIRE(T(i, j) == 0.0);
            else
                REQUIRE(T(i, j) == Catch::Approx(A(i, j)));
        }
}

TEST_CASE("thresh keeps at least q nonzeros per row for distinct entries") {
    ekss::RandomStream rng(SeedSpec{82, 0});
    for (int rep = 0; rep < 10; ++rep) {
        const int N = 9;
        Matrix A = rng.gaussian_matrix(N, N).cwiseAbs();
        A = ((A + A.transpose()) / 2.0).eval();  // symmetric, generically distinct
        const int q = 1 + static_cast<int>(rng.uniform_index(N - 2));
        const Matrix T = ekss::thresh(A, q);
        for (int i = 0; i < N; ++i) {
            int nnz = 0;
            for (int j = 0; j < N; ++j)
                if (T(i, j) != 0.0) ++nnz;
            REQUIRE(nnz >= q);
        }
    }
    REQUIRE_THROWS_AS(ekss::thresh(Matrix::Zero(3, 3), 0), std::invalid_argument);
    REQUIRE_THROWS_AS(ekss::thresh(Matrix::Zero(3, 3), 4), std::invalid_argument);
}

TEST_CASE("ekss clusters a toy pair of orthogonal lines exactly") {
    // N = 40 points on two orthogonal lines in R^4.
    ekss::RandomStream rng(SeedSpec{83, 0});
    Matrix data(4, 40);
    Labeling truth(40);
    for (int j = 0; j < 40; ++j) {
        const int k = j < 20 ? 0 : 1;
        truth[j] = k;
        data.col(j).setZero();
        data(k, j) = (rng.uniform() < 0.5 ? -1.0 : 1.0);
    }
    ekss::EkssParams p;
    p.K = 2;
    p.K_bar = 2;
    p.d_bar = 1;
    p.q = std::nullopt;
    p.B = 25;
    p.T = 3;
    p.seed = SeedSpec{83, 1};
    const auto res = ekss::ekss(data, p);
    REQUIRE(ekss::clustering_error(res.labels, truth) == 0.0);
}

TEST_CASE("ekss with B = 1 and matched candidates reproduces the KSS partition") {
    const auto inst = ekss::gen_random_uos(20, 2, {2, 2}, {15, 15}, 0.0, SeedSpec{84, 0});
    ekss::EkssParams p;
    p.K = 2;
    p.K_bar = 2;
    p.d_bar = 2;
    p.q = std::nullopt;
    p.B = 1;
    p.T = 3;
    p.seed = SeedSpec{84, 1};
    const auto res = ekss::ekss(inst.data, p);
    const auto kss = ekss::run_kss(inst.data, 2, 2, 3, p.seed.sub(0));
    // Both clusters nonempty => spectral clustering recovers the partition.
    std::vector<int> hist(2, 0);
    for (int l : kss.labels) ++hist[l];
    REQUIRE(hist[0] > 0);
    REQUIRE(hist[1] > 0);
    REQUIRE(ekss::clustering_error(res.labels, kss.labels) == 0.0);
}

TEST_CASE("co-association blocks sharpen as B grows") {
    // Desk-scale progression texture. The mean in-block/off-block contrast is
    // linear in A and so has the same expectation at every B; the statistic
    // that concentrates is the worst-case gap between in-block and off-block
    // entries. Averaged over seeds it increases strictly with B.
    const auto inst = ekss::gen_random_uos(100, 4, std::vector<int>(4, 3),
                                           std::vector<int>(4, 25), 0.0, SeedSpec{85, 0});
    const int N = static_cast<int>(inst.data.cols());
    double prev_gap = -2.0;
    for (int B : {1, 5, 50}) {
        double gap_sum = 0.0;
        const int seeds = 5;
        for (int s = 0; s < seeds; ++s) {
            ekss::EkssParams p;
            p.K = 4;
            p.K_bar = 4;
            p.d_bar = 3;
            p.q = std::nullopt;
            p.B = B;
            p.T = 3;
            p.seed = SeedSpec{85, static_cast<std::uint64_t>(1 + s)};
            const auto res = ekss::ekss(inst.data, p);
            double in_min = 1.0, out_max = 0.0;
            for (int i = 0; i < N; ++i)
                for (int j = i + 1; j < N; ++j) {
                    if (inst.true_labels[i] == inst.true_labels[j])
                        in_min = std::min(in_min, res.coassociation(i, j));
                    else
                        out_max = std::max(out_max, res.coassociation(i, j));
                }
            gap_sum += in_min - out_max;
        }
        const double gap = gap_sum / seeds;
        REQUIRE(gap > prev_gap);
        prev_gap = gap;
    }
}

TEST_CASE("ekss0 equals ekss with T = 0 and unweighted votes") {
    const auto inst = ekss::gen_random_uos(15, 3, std::vector<int>(3, 2),
                                           std::vector<int>(3, 10), 0.0, SeedSpec{86, 0});
    ekss::EkssParams p;
    p.K = 3;
    p.K_bar = 3;
    p.d_bar = 2;
    p.q = 4;
    p.B = 40;
    p.T = 0;
    p.weighted = false;
    p.seed = SeedSpec{86, 1};
    const auto a = ekss::ekss(inst.data, p);
    const auto b = ekss::ekss0(inst.data, 3, 3, 2, 4, 40, SeedSpec{86, 1});
    REQUIRE(a.labels == b.labels);
    REQUIRE(a.coassociation == b.coassociation);
    REQUIRE(a.affinity == b.affinity);
}

TEST_CASE("identical points always co-cluster") {
    Matrix data(3, 3);
    data.col(0) = ekss::Vector{{1, 0, 0}};
    data.col(1) = ekss::Vector{{1, 0, 0}};  // exact duplicate of point 0
    data.col(2) = ekss::Vector{{0, 1, 0}};
    for (int B : {3, 17}) {
        const auto res = ekss::ekss0(data, 2, 2, 1, std::nullopt, B, SeedSpec{87, 0});
        REQUIRE(res.coassociation(0, 1) == 1.0);
    }
}

TEST_CASE("ekss0 is permutation equivariant") {
    const auto inst = ekss::gen_random_uos(10, 2, {1, 1}, {6, 6}, 0.0, SeedSpec{88, 0});
    const int N = 12;
    std::vector<int> perm(N);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937 shuffler(123);
    std::shuffle(perm.begin(), perm.end(), shuffler);

    Matrix permuted(inst.data.rows(), N);
    Labeling truth_perm(N);
    for (int j = 0; j < N; ++j) {
        permuted.col(j) = inst.data.col(perm[j]);
        truth_perm[j] = inst.true_labels[perm[j]];
    }
    const auto base = ekss::ekss0(inst.data, 2, 2, 1, 3, 30, SeedSpec{88, 1});
    const auto shuf = ekss::ekss0(permuted, 2, 2, 1, 3, 30, SeedSpec{88, 1});
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            REQUIRE(shuf.coassociation(i, j) == base.coassociation(perm[i], perm[j]));
    REQUIRE(ekss::clustering_error(shuf.labels, truth_perm) ==
            ekss::clustering_error(base.labels, inst.true_labels));
}

TEST_CASE("tsc_affinity closed-form weights") {
    Matrix data(2, 3);
    data.col(0) = ekss::Vector{{1, 0}};
    data.col(1) = ekss::Vector{{1, 0}};  // identical: weight exp(0) = 1
    data.col(2) = ekss::Vector{{0, 1}};  // orthogonal: weight exp(-pi)
    // Pre-threshold weights are visible with q = N - 1.
    const Matrix Z = ekss::tsc_affinity(data, 2);
    REQUIRE(Z(0, 1) == Catch::Approx(1.0));
    REQUIRE(Z(0, 2) == Catch::Approx(std::exp(-M_PI)).margin(1e-12));
    REQUIRE_THROWS_AS(ekss::tsc_affinity(data, 3), std::invalid_argument);

    const Matrix raw = ekss::tsc_affinity(data, 2, ekss::TscWeight::kAbsInnerProduct);
    REQUIRE(raw(0, 1) == Catch::Approx(1.0));
    REQUIRE(raw(0, 2) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("tsc graph on disjoint orthogonal subspaces has no false connections") {
    // Two orthogonal 2-dim subspaces in R^8 via a block construction.
    ekss::RandomStream rng(SeedSpec{89, 0});
    const int per = 12;
    Matrix data(8, 2 * per);
    Labeling truth(2 * per);
    for (int j = 0; j < 2 * per; ++j) {
        const int k = j < per ? 0 : 1;
        truth[j] = k;
        ekss::Vector coef = rng.unit_sphere(2);
        data.col(j).setZero();
        data(4 * k, j) = coef(0);
        data(4 * k + 1, j) = coef(1);
    }
    const Matrix Z = ekss::tsc_affinity(data, 3);
    REQUIRE(ekss::nfc_check(Z, truth).no_false_connections);
}

TEST_CASE("weighted ekss scales votes by run quality") {
    const auto inst = ekss::gen_random_uos(20, 2, {2, 2}, {15, 15}, 0.0, SeedSpec{91, 0});
    ekss::EkssParams p;
    p.K = 2;
    p.K_bar = 2;
    p.d_bar = 2;
    p.q = std::nullopt;
    p.B = 30;
    p.T = 3;
    p.weighted = true;
    p.seed = SeedSpec{91, 1};
    const auto res = ekss::ekss(inst.data, p);
    REQUIRE(ekss::clustering_error(res.labels, inst.true_labels) == 0.0);
    // Diagonal carries the mean run weight; entries stay in [0, 1].
    const double mean_w = res.coassociation(0, 0);
    REQUIRE(mean_w > 0.0);
    REQUIRE(mean_w <= 1.0);
    REQUIRE(res.coassociation.maxCoeff() <= mean_w + 1e-12);
    REQUIRE(res.coassociation.minCoeff() >= 0.0);

    // Weights must equal the per-run KSS quality values.
    ekss::Matrix manual = ekss::Matrix::Zero(30, 30);
    std::vector<ekss::Labeling> labelings;
    std::vector<double> weights;
    for (int b = 0; b < 30; ++b) {
        const auto r = ekss::run_kss(inst.data, 2, 2, 3, p.seed.sub(b));
        labelings.push_back(r.labels);
        weights.push_back(r.weight);
    }
    REQUIRE(res.coassociation == ekss::accumulate(labelings, weights));
}

TEST_CASE("ekss output does not depend on the worker count") {
    const auto inst = ekss::gen_random_uos(12, 2, {2, 2}, {10, 10}, 0.1, SeedSpec{92, 0});
    ekss::EkssParams p;
    p.K = 2;
    p.K_bar = 2;
    p.d_bar = 2;
    p.q = 4;
    p.B = 16;
    p.T = 2;
    p.weighted = true;
    p.seed = SeedSpec{92, 1};

    setenv("EKSS_THREADS", "1", 1);
    const auto serial = ekss::ekss(inst.data, p);
    setenv("EKSS_THREADS", "4", 1);
    const auto parallel = ekss::ekss(inst.data, p);
    unsetenv("EKSS_THREADS");

    REQUIRE(serial.labels == parallel.labels);
    REQUIRE(serial.coassociation == parallel.coassociation);
    REQUIRE(serial.affinity == parallel.affinity);

    // Monte-Carlo estimation is likewise scheduling independent.
    setenv("EKSS_THREADS", "1", 1);
    const auto est1 = ekss::estimate_f(0.4, 3, 2, 8, 4000, SeedSpec{92, 2});
    setenv("EKSS_THREADS", "3", 1);
    const auto est3 = ekss::estimate_f(0.4, 3, 2, 8, 4000, SeedSpec{92, 2});
    unsetenv("EKSS_THREADS");
    REQUIRE(est1.p == est3.p);
}

TEST_CASE("ekss0 expected affinity follows the planar closed form") {
    // Two points at angle theta, candidates (K_bar, d_bar, D) = (2, 1, 2):
    // E A_ij = 1 - 2 theta / pi.
    const double theta = 0.6;
    Matrix data(2, 2);
    data.col(0) = ekss::Vector{{1, 0}};
    data.col(1) = ekss::Vector{{std::cos(theta), std::sin(theta)}};
    const int B = 20000;
    const auto res = ekss::ekss0(data, 1, 2, 1, std::nullopt, B, SeedSpec{90, 0});
    const double expected = 1.0 - 2.0 * theta / M_PI;
    const double se = std::sqrt(expected * (1.0 - expected) / B);
    REQUIRE(std::abs(res.coassociation(0, 1) - expected) <= 4.0 * se);
}
