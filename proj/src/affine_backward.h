#pragma once

#include <span>
#include <vector>

#include "slq/model.h"

namespace slq::internal {

struct AffineBackward {
  /// eta_t for t = -1..N-1, entry t+1 at depth t+1; eta_{N-1} = g.
  std::vector<NodeField> eta;
  /// theta_t = E[(B+wD)' eta_t | F_{t-1}] + B'P b + D'P sigma + rho, depth t.
  std::vector<NodeField> theta;
  /// offset_t = -weight_inverse_t theta_t.
  AdaptedProcess offset;
};

/// Backward recursion for the affine part of the feedback law, shared by the
/// generalized (pseudoinverse) and the regularized (inverse) Riccati solvers.
/// A level stays deterministic whenever all of its inputs are.
AffineBackward SolveAffineBackward(const LQProblem& p, std::span<const Matrix> P,
                                   std::span<const Matrix> K,
                                   std::span<const Matrix> weight_inverse);

}  // namespace slq::internal
