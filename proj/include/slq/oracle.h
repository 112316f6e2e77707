#pragma once

#include <cstddef>
#include <limits>
#include <string_view>

#include "slq/model.h"
#include "slq/stationarity.h"

namespace slq {

/// Expected cost of a trajectory already rolled out on the +/-1 tree.
double TrajectoryCost(const LQProblem& p, const Trajectory& traj);

/// Exact expected cost E[sum of stage costs + terminal cost] of a
/// tree-adapted control, summed over all 2^N noise histories.
double ExactCost(const LQProblem& p, const AdaptedProcess& u);

/// Exact expected cost of the control induced by a feedback strategy on the
/// whole horizon.
double ExactCostStrategy(const LQProblem& p, const Strategy& s);

/// The cost as an explicit quadratic function of the stacked node controls,
/// J(z) = z'G z + 2 c'z + k. Node (t, idx) owns the m entries starting at
/// m * (2^t - 1 + idx).
struct CostQuadratic {
  Matrix G;
  Vector c;
  double k = 0.0;
};

inline constexpr std::size_t kDefaultOracleCap = 4096;

/// Throws InstanceTooLarge when m (2^N - 1) exceeds `cap`.
CostQuadratic AssembleCostQuadratic(const LQProblem& p, std::size_t cap = kDefaultOracleCap);

/// Converts between stacked node controls and adapted processes.
AdaptedProcess UnstackControl(const Vector& z, int horizon, int control_dim);
Vector StackControl(const AdaptedProcess& u, int control_dim);

enum class OracleVerdict { kMinimizer, kUnboundedBelow, kNoMinimizer };

std::string_view ToString(OracleVerdict verdict);

struct OracleSolution {
  OracleVerdict verdict = OracleVerdict::kMinimizer;
  /// V(x0); -infinity unless a minimizer exists.
  double value = -std::numeric_limits<double>::infinity();
  /// Minimum-norm minimizer; empty unless verdict is kMinimizer.
  AdaptedProcess optimal_control;
  bool hessian_psd = false;
  int flat_directions = 0;
  double min_eigenvalue = 0.0;
};

/// Exact open-loop minimization over every tree-adapted control.
///
/// With G the Hessian, a negative eigenvalue below -1e-9 max(|G|, 1) makes the
/// problem unbounded below; a PSD Hessian whose linear term leaves Range(G)
/// gives no minimizer; otherwise the minimum-norm minimizer -G^+ c is
/// returned together with V = k - c'G^+ c.
OracleSolution ExactValue(const LQProblem& p, std::size_t cap = kDefaultOracleCap);

}  // namespace slq
