// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

namespace olqr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Kronecker product; entry (i*c + k, j*d + l) equals a(i, j) * b(k, l).
MatrixXd kron(const MatrixXd& a, const MatrixXd& b);

/// Column-stacking vectorization.
VectorXd vec(const MatrixXd& m);

/// Inverse of vec for a rows x cols matrix.
MatrixXd unvec(const VectorXd& v, Eigen::Index rows, Eigen::Index cols);

/// Number of free entries in an n x n symmetric matrix.
constexpr Eigen::Index svec_size(Eigen::Index n) { return n * (n + 1) / 2; }

/// Half-vectorization: upper-triangular entries taken column by column
/// (s(0,0), s(0,1), s(1,1), s(0,2), ...), off-diagonals unscaled.
/// Throws ErrorCode::Symmetry if ||s - s'|| > 1e-10 ||s||.
VectorXd svec(const MatrixXd& s);

/// Inverse of svec.
MatrixXd smat(const VectorXd& v);

/// Duplication matrix D with vec(S) = D * svec(S) for symmetric n x n S.
MatrixXd duplication_matrix(Eigen::Index n);

/// Folds rows expressed against vec(P) coordinates onto svec(P) coordinates,
/// i.e. returns rows * duplication_matrix(n) for a block with n*n columns.
MatrixXd fold_symmetric(const MatrixXd& rows, Eigen::Index n);

/// (m + m') / 2.
MatrixXd symmetrize(const MatrixXd& m);

/// Largest singular value.
double spectral_norm(const MatrixXd& m);

}  // namespace olqr
