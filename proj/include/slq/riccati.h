#pragma once

#include <vector>

#include "slq/matnum.h"
#include "slq/model.h"

namespace slq {

/// Per-step outcome of the regularity conditions of the generalized Riccati
/// solution.
struct RegularityFlags {
  bool rhat_psd = false;      // Rhat_t >= 0
  bool gain_finite = false;   // Khat_t finite (always true on a finite horizon)
  bool gain_range = false;    // Range(M_t) within Range(Rhat_t)
  bool offset_range = false;  // theta_t within Range(Rhat_t) at every node

  bool all() const { return rhat_psd && gain_finite && gain_range && offset_range; }
};

/// Backward solution of the generalized Riccati equation
///   P_t = Q_t + A'P A + C'P C - M_t' Rhat_t^+ M_t,  P_N = H,
/// with Rhat_t = R_t + B'P B + D'P D and M_t = B'P A + D'P C + S_t
/// (P evaluated at t+1), together with the affine data eta and vhat.
struct RiccatiSolution {
  std::vector<Matrix> P;          // t = 0..N
  std::vector<Matrix> Rhat;       // t = 0..N-1
  std::vector<Matrix> Rhat_pinv;
  std::vector<Matrix> M;
  std::vector<Matrix> Khat;       // -Rhat^+ M
  std::vector<NodeField> eta;     // eta_t for t=-1..N-1 at index t+1
  std::vector<NodeField> theta;   // affine term of the offset equation, depth t
  AdaptedProcess vhat;            // -Rhat^+ theta
  std::vector<RegularityFlags> flags;
  bool regular = false;

  int horizon() const { return static_cast<int>(Rhat.size()); }
  const NodeField& eta_at(int t) const { return eta[static_cast<std::size_t>(t + 1)]; }
};

/// P, Rhat, M and Khat by the backward recursion; P is symmetrized each step.
/// The affine fields and flags are left empty.
RiccatiSolution RiccatiBackward(const LQProblem& p, const Tolerances& tol = {});

struct EtaVhat {
  std::vector<NodeField> eta;
  std::vector<NodeField> theta;
  AdaptedProcess vhat;
};

/// Backward recursion for eta (eta_{N-1} = g) and vhat = -Rhat^+ theta.
EtaVhat SolveEtaVhat(const RiccatiSolution& sol, const LQProblem& p);

/// Per-step regularity conditions; computes eta on the fly when `sol` lacks it.
std::vector<RegularityFlags> RegularityCheck(const RiccatiSolution& sol, const LQProblem& p,
                                             const Tolerances& tol = {});

/// Full pipeline: backward recursion, affine data, flags and verdict.
RiccatiSolution SolveRiccati(const LQProblem& p, const Tolerances& tol = {});

/// Member of the closed-loop family K* = Khat + (I - Rhat^+ Rhat) z,
/// v* = vhat + (I - Rhat^+ Rhat) y. Empty z / y select zero.
/// Throws NotClosedLoopSolvable on a non-regular solution.
Strategy ClosedLoop(const RiccatiSolution& sol, const std::vector<Matrix>& z = {},
                    const AdaptedProcess& y = {});

/// Optimal value
///   V(x0) = x0'P_0 x0 + 2 x0'eta_{-1}
///         + sum_t E[b'P b + s'P s + 2 (b + w s)'eta_t - theta' Rhat^+ theta].
/// Throws NotClosedLoopSolvable on a non-regular solution.
double ValueFunction(const RiccatiSolution& sol, const LQProblem& p);

}  // namespace slq
