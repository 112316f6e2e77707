#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "slq/matnum.h"
#include "slq/model.h"
#include "slq/stationarity.h"

namespace slq {

/// The regularized problem: R_t replaced by R_t + eps I, so its cost is
/// J(x0, u) + eps E sum_t |u_t|^2.
LQProblem RegularizedProblem(const LQProblem& p, double eps);

/// Solution of the eps-regularized Riccati equation and feedback law
///   K_t = -(Rhat_t + eps I)^{-1} M_t,  v_t = -(Rhat_t + eps I)^{-1} theta_t.
struct PerturbedSolution {
  double eps = 0.0;
  std::vector<Matrix> P;        // t = 0..N
  std::vector<Matrix> Rhat;     // R + B'P B + D'P D, without the eps shift
  std::vector<Matrix> M;
  std::vector<Matrix> K;
  std::vector<NodeField> eta;   // eta_t for t=-1..N-1 at index t+1
  AdaptedProcess v;
  /// Rhat_t >= 0 at each t: the eps-problem is uniformly convex there.
  std::vector<bool> convex;
  /// True when eps sits on a removable singularity of the family and the
  /// solution was obtained by continuation in eps.
  bool continued = false;

  int horizon() const { return static_cast<int>(K.size()); }
  bool all_convex() const;
};

/// Weights whose condition number exceeds this are treated as singular.
inline constexpr double kMaxCondition = 1e14;

/// Backward recursion of the regularized Riccati equation with a true inverse.
///
/// When the regularized weight is singular at some t, the eps-family is
/// continued across eps by a symmetric Richardson scheme; if the family has a
/// genuine pole there, IllConditioned naming t is thrown.
PerturbedSolution PerturbedRiccati(const LQProblem& p, double eps, const Tolerances& tol = {});

struct PerturbedFeedbackLaw {
  std::vector<Matrix> K;
  AdaptedProcess v;
  std::vector<NodeField> eta;
};

PerturbedFeedbackLaw PerturbedFeedback(const LQProblem& p, double eps,
                                       const Tolerances& tol = {});

/// eps_k = e0 * ratio^k for k = 0..count-1.
std::vector<double> GeometricSchedule(double e0, double ratio, int count);

/// 1, 1/2, ..., 2^-20.
std::vector<double> DefaultSchedule();

struct SweepEntry {
  double eps = 0.0;
  /// Set when the per-eps solve failed; the remaining fields are then unset.
  std::optional<std::string> error;
  std::optional<int> error_step;
  PerturbedSolution solution;
  Trajectory trajectory;
  double control_norm = 0.0;  // E sum_t |u_t|^2
  double value = 0.0;         // J(x0, u) + eps * control_norm

  bool ok() const { return !error.has_value(); }
};

struct PerturbationRun {
  LQProblem problem;
  std::vector<SweepEntry> entries;

  /// Successful entries in schedule order.
  std::vector<const SweepEntry*> successful() const;
};

/// Solves and rolls out the regularized problem for every eps. Per-eps
/// failures are recorded and the sweep continues. Throws InvalidInput unless
/// the schedule is positive and strictly decreasing.
PerturbationRun EpsilonSweep(const LQProblem& p, const std::vector<double>& schedule,
                             const Tolerances& tol = {});

enum class Boundedness { kOpenLoopSolvable, kNotOpenLoopSolvable, kInconclusive };

std::string_view ToString(Boundedness verdict);

struct BoundednessReport {
  Boundedness verdict = Boundedness::kInconclusive;
  /// Least-squares slope of log(norm) against log(1/eps), last five points.
  double norm_exponent = 0.0;
  /// |n_last - n_prev| / max(n_last, n_prev).
  double last_relative_change = 0.0;
  /// V_eps non-increasing as eps decreases (slack 1e-9).
  bool value_monotone = true;
  /// V_eps >= V - 1e-9 at every eps; empty when no finite V was supplied.
  std::optional<bool> value_bracket;
};

inline constexpr double kDefaultGrowthTol = 1e-4;

/// Needs at least four successful points; throws InvalidInput otherwise.
BoundednessReport BoundednessVerdict(const PerturbationRun& run,
                                     double growth_tol = kDefaultGrowthTol,
                                     std::optional<double> oracle_value = std::nullopt);

struct OpenLoopLimit {
  AdaptedProcess u;
  /// Tree-L2 distance between the last two extrapolants.
  double increment = 0.0;
  double stationarity_residual = 0.0;
};

/// First-order Richardson extrapolation of u^eps to eps = 0 over the last
/// three successful points. Throws ConvergenceFailure when the extrapolants
/// differ by tol or more, when the limit is not stationary within 10 tol, or
/// when the run is not open-loop solvable.
OpenLoopLimit ExtractOpenLoopLimit(const PerturbationRun& run, double tol);

struct WeakClosedLoop {
  int window_end = 0;
  Strategy strategy;  // K*, v* on {0..window_end}
  std::vector<int> divergent_steps;
  std::vector<double> gain_exponents;  // fitted growth of |K^eps_t|, t = 0..N-1
  AdaptedProcess open_loop;            // u*
  double reproduction_error = 0.0;
};

/// Gains with a fitted growth exponent above this count as divergent.
inline constexpr double kDivergentGainExponent = 0.25;

/// Limits of (K^eps, v^eps) on {0..window_end} with window_end <= N-2.
/// Throws WindowTooLong if a divergent step lies inside the window and
/// ConvergenceFailure if the mixed rollout misses u* by more than 10 tol.
WeakClosedLoop ExtractWeakClosedLoop(const PerturbationRun& run, int window_end, double tol);

/// Slope of log(y) against log(1/eps) by least squares.
double FitGrowthExponent(const std::vector<double>& eps, const std::vector<double>& y);

}  // namespace slq
