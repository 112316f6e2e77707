#pragma once

#include <cstddef>
#include <vector>

#include "slq/model.h"

namespace slq {

/// State and control paths on the +/-1 tree: x_t at depth t (t = 0..N) and
/// u_t at depth t (t = 0..N-1).
struct Trajectory {
  AdaptedProcess x;
  AdaptedProcess u;
};

/// Co-state lambda_t for t = -1..N-1; lambda_t lives at depth t+1.
struct CostateProcess {
  std::vector<NodeField> lambda;

  const NodeField& at(int t) const { return lambda[static_cast<std::size_t>(t + 1)]; }
};

/// Exact forward recursion of the state equation on every node of the tree.
Trajectory Rollout(const LQProblem& p, const AdaptedProcess& u);

/// Rolls out u_t = K_t x_t + v_t on the strategy window and follows `tail`
/// afterwards. `tail` may be empty when the window covers the horizon.
Trajectory RolloutStrategy(const LQProblem& p, const Strategy& s,
                           const AdaptedProcess& tail = {});

/// Backward adjoint recursion, expectations taken over the two children.
CostateProcess CostateBackward(const LQProblem& p, const Trajectory& traj);

struct StationarityReport {
  double max_residual = 0.0;
  std::vector<double> per_step;            // max over nodes at each t
  std::vector<std::size_t> argmax_node;    // node attaining it
};

/// Residual of E[R u + S x + (B + w D)' lambda + rho | F_{t-1}] in max norm.
StationarityReport StationarityResiduals(const LQProblem& p, const Trajectory& traj,
                                         const CostateProcess& costate);
double StationarityResidual(const LQProblem& p, const Trajectory& traj,
                            const CostateProcess& costate);

/// Equilibrium residual of a feedback strategy covering {0..N-1}.
double ClosedLoopResidual(const LQProblem& p, const Strategy& s);

/// E sum_t |u_t|^2 under the uniform tree measure.
double ExpectedSquaredNorm(const AdaptedProcess& u);

/// Tree-weighted L2 distance sqrt(E sum_t |a_t - b_t|^2).
double ProcessDistance(const AdaptedProcess& a, const AdaptedProcess& b);

/// Largest node-wise difference max_t,node |a_t - b_t|_max.
double ProcessMaxDifference(const AdaptedProcess& a, const AdaptedProcess& b);

}  // namespace slq
