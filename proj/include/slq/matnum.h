#pragma once

#include <Eigen/Dense>

namespace slq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Numerical cutoffs used wherever exact linear algebra needs a decision.
struct Tolerances {
  /// Singular values below rank_rel_tol * sigma_max count as zero.
  double rank_rel_tol = 1e-10;
  /// Eigenvalues >= -psd_tol count as nonnegative.
  double psd_tol = 1e-9;
  /// Bound used by identity and range-inclusion residuals.
  double residual_tol = 1e-9;

  /// Throws InvalidInput unless every tolerance lies in (0, 1).
  void Validate() const;
};

bool AllFinite(const Matrix& m);

/// Largest absolute entry; zero for an empty matrix.
double MaxAbs(const Matrix& m);

/// Moore-Penrose pseudoinverse through an SVD with a relative rank cutoff.
Matrix Pinv(const Matrix& m, const Tolerances& tol = {});

/// Maximum violation of the four Penrose identities for the pair (m, m_pinv).
double PenroseResidual(const Matrix& m, const Matrix& m_pinv);

/// True iff the symmetric part of `m` has no eigenvalue below -psd_tol.
bool PsdCheck(const Matrix& m, const Tolerances& tol = {});

/// Smallest eigenvalue of the symmetric part of `m`.
double MinEigenvalue(const Matrix& m);

/// True iff every column of `m` lies in Range(rhat):
/// ||(I - rhat rhat^+) m||_max <= residual_tol * (1 + ||m||_max).
bool RangeSubset(const Matrix& m, const Matrix& rhat, const Tolerances& tol = {});

/// The residual tested by RangeSubset, before comparison with the bound.
double RangeResidual(const Matrix& m, const Matrix& rhat, const Tolerances& tol = {});

/// x' M y for conforming vectors.
double QuadraticForm(const Matrix& m, const Vector& x, const Vector& y);
inline double QuadraticForm(const Matrix& m, const Vector& x) {
  return QuadraticForm(m, x, x);
}

inline Matrix Symmetrized(const Matrix& m) {
  return 0.5 * (m + m.transpose());
}

}  // namespace slq
