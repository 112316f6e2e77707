#include "slq/matnum.h"

#include <algorithm>
#include <cmath>

#include "slq/errors.h"

namespace slq {

void Tolerances::Validate() const {
  auto ok = [](double v) { return v > 0.0 && v < 1.0; };
  if (!ok(rank_rel_tol) || !ok(psd_tol) || !ok(residual_tol)) {
    throw InvalidInput("tolerances must lie strictly between 0 and 1");
  }
}

bool AllFinite(const Matrix& m) { return m.allFinite(); }

double MaxAbs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

Matrix Pinv(const Matrix& m, const Tolerances& tol) {
  if (!AllFinite(m)) throw InvalidInput("pinv: non-finite input");
  if (m.size() == 0) return Matrix::Zero(m.cols(), m.rows());
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = tol.rank_rel_tol * (s.size() > 0 ? s(0) : 0.0);
  Vector s_inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) s_inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * s_inv.asDiagonal() * svd.matrixU().transpose();
}

double PenroseResidual(const Matrix& m, const Matrix& p) {
  const Matrix mp = m * p;
  const Matrix pm = p * m;
  double r = MaxAbs(mp * m - m);
  r = std::max(r, MaxAbs(pm * p - p));
  r = std::max(r, MaxAbs(mp.transpose() - mp));
  r = std::max(r, MaxAbs(pm.transpose() - pm));
  return r;
}

double MinEigenvalue(const Matrix& m) {
  if (m.rows() != m.cols()) throw InvalidInput("eigenvalues of a non-square matrix");
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(Symmetrized(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

bool PsdCheck(const Matrix& m, const Tolerances& tol) {
  if (m.rows() != m.cols()) throw InvalidInput("psd_check: matrix is not square");
  if (!AllFinite(m)) throw InvalidInput("psd_check: non-finite input");
  return MinEigenvalue(m) >= -tol.psd_tol;
}

double RangeResidual(const Matrix& m, const Matrix& rhat, const Tolerances& tol) {
  if (rhat.rows() != rhat.cols()) throw InvalidInput("range_subset: rhat is not square");
  if (m.rows() != rhat.rows()) throw InvalidInput("range_subset: row count mismatch");
  const Matrix projector = rhat * Pinv(rhat, tol);
  return MaxAbs(m - projector * m);
}

bool RangeSubset(const Matrix& m, const Matrix& rhat, const Tolerances& tol) {
  return RangeResidual(m, rhat, tol) <= tol.residual_tol * (1.0 + MaxAbs(m));
}

double QuadraticForm(const Matrix& m, const Vector& x, const Vector& y) {
  if (m.rows() != x.size() || m.cols() != y.size()) {
    throw InvalidInput("quadratic form: dimension mismatch");
  }
  return x.dot(m * y);
}

}  // namespace slq
