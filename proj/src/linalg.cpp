// SPDX-License-Identifier: Apache-2.0
#include "olqr/linalg.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include "olqr/errors.hpp"

namespace olqr {

MatrixXd kron(const MatrixXd& a, const MatrixXd& b) { return Eigen::kroneckerProduct(a, b).eval(); }

VectorXd vec(const MatrixXd& m) { return m.reshaped(); }

MatrixXd unvec(const VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) throw Error(ErrorCode::Shape, "unvec: size mismatch");
  return v.reshaped(rows, cols);
}

VectorXd svec(const MatrixXd& s) {
  if (s.rows() != s.cols()) throw Error(ErrorCode::Shape, "svec: matrix is not square");
  const double scale = s.norm();
  if ((s - s.transpose()).norm() > 1e-10 * scale) {
    throw Error(ErrorCode::Symmetry, "svec: matrix is not symmetric");
  }
  const Eigen::Index n = s.rows();
  VectorXd v(svec_size(n));
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i <= j; ++i) v(k++) = s(i, j);
  return v;
}

MatrixXd smat(const VectorXd& v) {
  // Solve n(n+1)/2 = size for n.
  Eigen::Index n = 0;
  while (svec_size(n) < v.size()) ++n;
  if (svec_size(n) != v.size()) throw Error(ErrorCode::Shape, "smat: length is not triangular");
  MatrixXd s(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i <= j; ++i) {
      s(i, j) = v(k);
      s(j, i) = v(k);
      ++k;
    }
  return s;
}

MatrixXd duplication_matrix(Eigen::Index n) {
  MatrixXd d = MatrixXd::Zero(n * n, svec_size(n));
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i <= j; ++i) {
      d(j * n + i, k) = 1.0;
      d(i * n + j, k) = 1.0;
      ++k;
    }
  return d;
}

MatrixXd fold_symmetric(const MatrixXd& rows, Eigen::Index n) {
  if (rows.cols() != n * n) throw Error(ErrorCode::Shape, "fold_symmetric: expected n*n columns");
  MatrixXd out(rows.rows(), svec_size(n));
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i <= j; ++i) {
      if (i == j)
        out.col(k) = rows.col(j * n + i);
      else
        out.col(k) = rows.col(j * n + i) + rows.col(i * n + j);
      ++k;
    }
  return out;
}

MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

double spectral_norm(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  return svd.singularValues()(0);
}

}  // namespace olqr
