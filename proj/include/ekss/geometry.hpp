#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ekss/random.hpp"

namespace ekss {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kOrthoTol = 1e-9;

/// Max-norm test of U^T U == I.
inline bool is_orthonormal(const Matrix& U, double tol = kOrthoTol) {
    const Matrix G = U.transpose() * U;
    return (G - Matrix::Identity(U.cols(), U.cols())).cwiseAbs().maxCoeff() <= tol;
}

/// Columns must be finite; throws otherwise. Data matrices are D x N with
/// one column per point.
inline void validate_data_matrix(const Matrix& X) {
    if (X.rows() < 1 || X.cols() < 1)
        throw std::invalid_argument("data matrix must be at least 1x1");
    if (!X.allFinite())
        throw std::invalid_argument("data matrix contains non-finite entries");
}

/// Scales every column to unit Euclidean norm. Zero columns are rejected.
inline Matrix normalize_columns(const Matrix& X) {
    validate_data_matrix(X);
    Matrix Y = X;
    for (Eigen::Index j = 0; j < Y.cols(); ++j) {
        const double n = Y.col(j).norm();
        if (n == 0.0)
            throw std::invalid_argument("cannot unit-normalize a zero column");
        Y.col(j) /= n;
    }
    return Y;
}

/// Uniform draw from the Stiefel manifold St(D, d): orthonormal D x d basis.
/// QR of a Gaussian matrix with the R diagonal forced positive; the
/// distribution is invariant under left multiplication by any fixed
/// orthogonal matrix.
inline Matrix sample_stiefel(Eigen::Index D, Eigen::Index d, RandomStream& rng) {
    if (d < 1 || d > D)
        throw std::invalid_argument("sample_stiefel: need 1 <= d <= D");
    const Matrix G = rng.gaussian_matrix(D, d);
    Eigen::HouseholderQR<Matrix> qr(G);
    Matrix Q = qr.householderQ() * Matrix::Identity(D, d);
    const Matrix& R = qr.matrixQR();
    for (Eigen::Index j = 0; j < d; ++j)
        if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
    return Q;
}

inline Matrix sample_stiefel(Eigen::Index D, Eigen::Index d, SeedSpec seed) {
    RandomStream rng(seed);
    return sample_stiefel(D, d, rng);
}

/// ||U^T x||_2, the norm of the projection coefficients of x onto span(U).
inline double projection_energy(const Vector& x, const Matrix& U) {
    if (x.size() != U.rows())
        throw std::invalid_argument("projection_energy: dimension mismatch");
    return (U.transpose() * x).norm();
}

namespace detail {

// Deterministic sign convention: largest-magnitude entry of each column is
// made positive (lowest index wins ties).
inline void fix_column_signs(Matrix& U) {
    for (Eigen::Index j = 0; j < U.cols(); ++j) {
        Eigen::Index best = 0;
        double mag = std::abs(U(0, j));
        for (Eigen::Index i = 1; i < U.rows(); ++i) {
            if (std::abs(U(i, j)) > mag) {
                mag = std::abs(U(i, j));
                best = i;
            }
        }
        if (U(best, j) < 0.0) U.col(j) = -U.col(j);
    }
}

// Appends seeded random orthonormal columns until U has `target` columns.
// `U` must already be orthonormal in its first `filled` columns.
inline void complete_basis(Matrix& U, Eigen::Index filled, Eigen::Index target,
                           RandomStream& rng) {
    const Eigen::Index D = U.rows();
    while (filled < target) {
        Vector g = rng.gaussian_vector(D);
        for (int pass = 0; pass < 2; ++pass)
            g -= U.leftCols(filled) * (U.leftCols(filled).transpose() * g);
        const double n = g.norm();
        if (n < 1e-8) continue;  // nearly in the span; redraw
        U.col(filled) = g / n;
        ++filled;
    }
}

}  // namespace detail

/// Top-d orthonormal basis of the uncentered point matrix (left singular
/// vectors). Rank-deficient inputs are completed with seeded random
/// orthonormal directions so the result always has d columns. Columns are
/// sign-fixed for determinism.
inline Matrix pca_basis(const Matrix& points, Eigen::Index d, RandomStream& rng) {
    const Eigen::Index D = points.rows();
    const Eigen::Index m = points.cols();
    if (m == 0) throw std::invalid_argument("pca_basis: empty point set");
    if (d < 1 || d > D) throw std::invalid_argument("pca_basis: need 1 <= d <= D");

    // Eigendecomposition of the smaller Gram matrix.
    Matrix U(D, d);
    Eigen::Index rank = 0;
    if (D <= m) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(points * points.transpose());
        const Vector& evals = es.eigenvalues();  // ascending
        const double lmax = std::max(evals(D - 1), 0.0);
        const double cut = std::max(static_cast<double>(std::max(D, m)) *
                                        std::numeric_limits<double>::epsilon() * lmax,
                                    0.0);
        for (Eigen::Index j = 0; j < d; ++j) {
            const Eigen::Index src = D - 1 - j;
            if (evals(src) <= cut) break;
            U.col(j) = es.eigenvectors().col(src);
            ++rank;
        }
    } else {
        Eigen::SelfAdjointEigenSolver<Matrix> es(points.transpose() * points);
        const Vector& evals = es.eigenvalues();
        const double lmax = std::max(evals(m - 1), 0.0);
        const double cut = std::max(static_cast<double>(std::max(D, m)) *
                                        std::numeric_limits<double>::epsilon() * lmax,
                                    0.0);
        for (Eigen::Index j = 0; j < std::min(d, m); ++j) {
            const Eigen::Index src = m - 1 - j;
            if (evals(src) <= cut) break;
            const double sigma = std::sqrt(evals(src));
            U.col(j) = points * es.eigenvectors().col(src) / sigma;
            ++rank;
        }
    }

    // Re-orthonormalize: the m-side route can drift near rank deficiency.
    for (Eigen::Index j = 0; j < rank; ++j) {
        Vector v = U.col(j);
        for (int pass = 0; pass < 2; ++pass)
            if (j > 0) v -= U.leftCols(j) * (U.leftCols(j).transpose() * v);
        const double n = v.norm();
        if (n < 1e-8) {  // collapsed under projection; treat as deficient
            rank = j;
            break;
        }
        U.col(j) = v / n;
    }

    detail::complete_basis(U, rank, d, rng);
    detail::fix_column_signs(U);
    return U;
}

inline Matrix pca_basis(const Matrix& points, Eigen::Index d, SeedSpec seed) {
    RandomStream rng(seed);
    return pca_basis(points, d, rng);
}

}  // namespace ekss
