#include "slq/perturb.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include <Eigen/Eigenvalues>

#include "affine_backward.h"
#include "slq/errors.h"
#include "slq/oracle.h"

namespace slq {

namespace {

// sum_j c_j f_j for fields sharing a depth.
NodeField Combine(const std::vector<const NodeField*>& f, const std::vector<double>& c) {
  const int depth = f.front()->depth();
  bool det = true;
  for (const auto* x : f) det = det && x->deterministic();
  const std::size_t count = det ? 1 : NodesAtDepth(depth);
  std::vector<Vector> vals(count);
  for (std::size_t k = 0; k < count; ++k) {
    vals[k] = Vector::Zero(f.front()->dim());
    for (std::size_t j = 0; j < f.size(); ++j) vals[k] += c[j] * f[j]->at(k);
  }
  return det ? NodeField::Deterministic(depth, std::move(vals[0]))
             : NodeField::Adapted(depth, std::move(vals));
}

AdaptedProcess Combine(const std::vector<const AdaptedProcess*>& f,
                       const std::vector<double>& c) {
  std::vector<NodeField> fields;
  for (int t = 0; t < f.front()->horizon(); ++t) {
    std::vector<const NodeField*> level;
    for (const auto* x : f) level.push_back(&(*x)[t]);
    fields.push_back(Combine(level, c));
  }
  return AdaptedProcess(std::move(fields));
}

Matrix Combine(const std::vector<const Matrix*>& f, const std::vector<double>& c) {
  Matrix out = Matrix::Zero(f.front()->rows(), f.front()->cols());
  for (std::size_t j = 0; j < f.size(); ++j) out += c[j] * *f[j];
  return out;
}

// Linear combination of whole solutions, member by member.
PerturbedSolution Combine(const std::vector<PerturbedSolution>& s,
                          const std::vector<double>& c) {
  auto pick = [&](auto member, std::size_t i) {
    std::vector<std::remove_cvref_t<decltype(&(s[0].*member)[i])>> out;
    for (const auto& x : s) out.push_back(&(x.*member)[i]);
    return out;
  };
  PerturbedSolution out;
  for (std::size_t i = 0; i < s[0].P.size(); ++i) {
    out.P.push_back(Symmetrized(Combine(pick(&PerturbedSolution::P, i), c)));
  }
  for (std::size_t i = 0; i < s[0].K.size(); ++i) {
    out.Rhat.push_back(Symmetrized(Combine(pick(&PerturbedSolution::Rhat, i), c)));
    out.M.push_back(Combine(pick(&PerturbedSolution::M, i), c));
    out.K.push_back(Combine(pick(&PerturbedSolution::K, i), c));
  }
  for (std::size_t i = 0; i < s[0].eta.size(); ++i) {
    out.eta.push_back(Combine(pick(&PerturbedSolution::eta, i), c));
  }
  std::vector<const AdaptedProcess*> v;
  for (const auto& x : s) v.push_back(&x.v);
  out.v = Combine(v, c);
  return out;
}

// Solve of the eps-problem that fails on a singular regularized weight.
PerturbedSolution DirectSolve(const LQProblem& p, double eps) {
  const int N = p.horizon;
  const int m = p.control_dim;
  PerturbedSolution sol;
  sol.eps = eps;
  sol.P.resize(static_cast<std::size_t>(N + 1));
  sol.Rhat.resize(static_cast<std::size_t>(N));
  sol.M.resize(static_cast<std::size_t>(N));
  sol.K.resize(static_cast<std::size_t>(N));
  std::vector<Matrix> inverse(static_cast<std::size_t>(N));
  sol.P[static_cast<std::size_t>(N)] = p.H;
  for (int t = N - 1; t >= 0; --t) {
    const auto i = static_cast<std::size_t>(t);
    const Matrix& Pn = sol.P[i + 1];
    sol.Rhat[i] = Symmetrized(p.R[i] + p.B[i].transpose() * Pn * p.B[i] +
                              p.D[i].transpose() * Pn * p.D[i]);
    sol.M[i] = p.B[i].transpose() * Pn * p.A[i] + p.D[i].transpose() * Pn * p.C[i] + p.S[i];
    const Matrix W = sol.Rhat[i] + eps * Matrix::Identity(m, m);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(W);
    const Vector& lambda = eig.eigenvalues();
    const double largest = lambda.cwiseAbs().maxCoeff();
    const double smallest = lambda.cwiseAbs().minCoeff();
    if (!(smallest > 0.0) || largest / smallest > kMaxCondition) {
      throw IllConditioned(t, "regularized weight at t=" + std::to_string(t) +
                                  " is singular for eps=" + std::to_string(eps));
    }
    inverse[i] = eig.eigenvectors() * lambda.cwiseInverse().asDiagonal() *
                 eig.eigenvectors().transpose();
    sol.K[i] = -(inverse[i] * sol.M[i]);
    sol.P[i] = Symmetrized(p.Q[i] + p.A[i].transpose() * Pn * p.A[i] +
                           p.C[i].transpose() * Pn * p.C[i] + sol.M[i].transpose() * sol.K[i]);
  }
  auto affine = internal::SolveAffineBackward(p, sol.P, sol.K, inverse);
  sol.eta = std::move(affine.eta);
  sol.v = std::move(affine.offset);
  return sol;
}

void MarkConvexity(PerturbedSolution& sol, const Tolerances& tol) {
  sol.convex.clear();
  for (const auto& r : sol.Rhat) sol.convex.push_back(PsdCheck(r, tol));
}

double MaxGainDifference(const PerturbedSolution& a, const PerturbedSolution& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.K.size(); ++i) worst = std::max(worst, MaxAbs(a.K[i] - b.K[i]));
  return worst;
}

// Continues the eps-family across a removable singularity at eps:
// S(h) = (f(eps+h) + f(eps-h)) / 2 is even in h, and
// (S(h) - 20 S(h/2) + 64 S(h/4)) / 45 cancels its h^2 and h^4 terms.
PerturbedSolution Continue(const LQProblem& p, double eps, const IllConditioned& original) {
  const double h = 1e-2 * eps;
  const std::vector<double> offsets = {h, h / 2, h / 4};
  const std::vector<double> weights = {1.0 / 45.0, -20.0 / 45.0, 64.0 / 45.0};
  std::vector<PerturbedSolution> samples;
  std::vector<double> coeff;
  std::vector<double> spread;
  try {
    for (std::size_t j = 0; j < offsets.size(); ++j) {
      samples.push_back(DirectSolve(p, eps + offsets[j]));
      samples.push_back(DirectSolve(p, eps - offsets[j]));
      coeff.push_back(0.5 * weights[j]);
      coeff.push_back(0.5 * weights[j]);
      spread.push_back(MaxGainDifference(samples[samples.size() - 2], samples.back()));
    }
  } catch (const IllConditioned&) {
    throw original;
  }
  // Near a pole the antisymmetric part grows like 1/h instead of shrinking.
  if (spread[2] > 0.5 * spread[0] + 1e-9) throw original;
  PerturbedSolution out = Combine(samples, coeff);
  out.eps = eps;
  out.continued = true;
  return out;
}

NodeField Extrapolate(double ea, const NodeField& a, double eb, const NodeField& b) {
  return Combine(std::vector<const NodeField*>{&a, &b}, {-eb / (ea - eb), ea / (ea - eb)});
}

AdaptedProcess Extrapolate(double ea, const AdaptedProcess& a, double eb,
                           const AdaptedProcess& b) {
  return Combine(std::vector<const AdaptedProcess*>{&a, &b}, {-eb / (ea - eb), ea / (ea - eb)});
}

Matrix Extrapolate(double ea, const Matrix& a, double eb, const Matrix& b) {
  return (ea * b - eb * a) / (ea - eb);
}

}  // namespace

LQProblem RegularizedProblem(const LQProblem& p, double eps) {
  LQProblem out = p;
  for (auto& r : out.R) r += eps * Matrix::Identity(r.rows(), r.cols());
  return out;
}

bool PerturbedSolution::all_convex() const {
  return std::all_of(convex.begin(), convex.end(), [](bool b) { return b; });
}

PerturbedSolution PerturbedRiccati(const LQProblem& p, double eps, const Tolerances& tol) {
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw InvalidInput("eps must be positive and finite");
  }
  p.Validate();
  PerturbedSolution sol;
  try {
    sol = DirectSolve(p, eps);
  } catch (const IllConditioned& e) {
    sol = Continue(p, eps, e);
  }
  MarkConvexity(sol, tol);
  return sol;
}

PerturbedFeedbackLaw PerturbedFeedback(const LQProblem& p, double eps, const Tolerances& tol) {
  PerturbedSolution sol = PerturbedRiccati(p, eps, tol);
  return {std::move(sol.K), std::move(sol.v), std::move(sol.eta)};
}

std::vector<double> GeometricSchedule(double e0, double ratio, int count) {
  if (!(e0 > 0.0) || !(ratio > 0.0 && ratio < 1.0) || count < 1) {
    throw InvalidInput("geometric schedule needs e0 > 0, 0 < ratio < 1, count >= 1");
  }
  std::vector<double> out;
  for (int k = 0; k < count; ++k) out.push_back(e0 * std::pow(ratio, k));
  return out;
}

std::vector<double> DefaultSchedule() { return GeometricSchedule(1.0, 0.5, 21); }

std::vector<const SweepEntry*> PerturbationRun::successful() const {
  std::vector<const SweepEntry*> out;
  for (const auto& e : entries) {
    if (e.ok()) out.push_back(&e);
  }
  return out;
}

PerturbationRun EpsilonSweep(const LQProblem& p, const std::vector<double>& schedule,
                             const Tolerances& tol) {
  if (schedule.empty()) throw InvalidInput("empty eps schedule");
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    if (!(schedule[k] > 0.0) || !std::isfinite(schedule[k])) {
      throw InvalidInput("eps schedule entries must be positive");
    }
    if (k > 0 && !(schedule[k] < schedule[k - 1])) {
      throw InvalidInput("eps schedule must be strictly decreasing");
    }
  }
  p.Validate();
  PerturbationRun run;
  run.problem = p;
  run.entries.resize(schedule.size());

  auto solve_one = [&](std::size_t k) {
    SweepEntry& e = run.entries[k];
    e.eps = schedule[k];
    try {
      e.solution = PerturbedRiccati(p, e.eps, tol);
      Strategy s{e.solution.K, e.solution.v};
      e.trajectory = RolloutStrategy(p, s);
      e.control_norm = ExpectedSquaredNorm(e.trajectory.u);
      e.value = TrajectoryCost(p, e.trajectory) + e.eps * e.control_norm;
    } catch (const IllConditioned& err) {
      e.error = err.what();
      e.error_step = err.step();
    } catch (const Error& err) {
      e.error = err.what();
    }
  };

  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, schedule.size());
  if (workers == 1) {
    for (std::size_t k = 0; k < schedule.size(); ++k) solve_one(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < schedule.size(); k = next++) solve_one(k);
      });
    }
    for (auto& th : pool) th.join();
  }
  return run;
}

std::string_view ToString(Boundedness verdict) {
  switch (verdict) {
    case Boundedness::kOpenLoopSolvable:
      return "open-loop-solvable";
    case Boundedness::kNotOpenLoopSolvable:
      return "not-open-loop-solvable";
    case Boundedness::kInconclusive:
      return "inconclusive";
  }
  return "unknown";
}

double FitGrowthExponent(const std::vector<double>& eps, const std::vector<double>& y) {
  if (eps.size() != y.size() || eps.size() < 2) {
    throw InvalidInput("growth fit needs at least two matching points");
  }
  const double floor = std::numeric_limits<double>::min();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto n = static_cast<double>(eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double x = -std::log(eps[i]);
    const double ly = std::log(std::max(y[i], floor));
    sx += x;
    sy += ly;
    sxx += x * x;
    sxy += x * ly;
  }
  const double denom = n * sxx - sx * sx;
  if (denom <= 0.0) throw InvalidInput("growth fit needs distinct eps values");
  return (n * sxy - sx * sy) / denom;
}

namespace {

// Last `count` successful entries (or fewer), in schedule order.
std::vector<const SweepEntry*> Tail(const PerturbationRun& run, std::size_t count) {
  auto all = run.successful();
  if (all.size() > count) all.erase(all.begin(), all.end() - static_cast<long>(count));
  return all;
}

constexpr std::size_t kFitPoints = 5;

}  // namespace

BoundednessReport BoundednessVerdict(const PerturbationRun& run, double growth_tol,
                                     std::optional<double> oracle_value) {
  const auto ok = run.successful();
  if (ok.size() < 4) {
    throw InvalidInput("boundedness verdict needs at least four solved eps values");
  }
  BoundednessReport rep;
  double largest = 0.0;
  for (const auto* e : ok) largest = std::max(largest, e->control_norm);

  for (std::size_t k = 1; k < ok.size(); ++k) {
    const double prev = ok[k - 1]->value;
    if (ok[k]->value > prev + 1e-9 * std::max(1.0, std::abs(prev))) rep.value_monotone = false;
  }
  if (oracle_value && std::isfinite(*oracle_value)) {
    bool bracket = true;
    for (const auto* e : ok) bracket = bracket && e->value >= *oracle_value - 1e-9;
    rep.value_bracket = bracket;
  }

  if (largest == 0.0) {
    rep.verdict = Boundedness::kOpenLoopSolvable;
    return rep;
  }
  const auto tail = Tail(run, kFitPoints);
  std::vector<double> eps, norms;
  for (const auto* e : tail) {
    eps.push_back(e->eps);
    norms.push_back(e->control_norm);
  }
  rep.norm_exponent = FitGrowthExponent(eps, norms);
  const double a = norms[norms.size() - 2];
  const double b = norms.back();
  rep.last_relative_change = std::abs(b - a) / std::max(a, b);
  if (rep.norm_exponent > 0.5) {
    rep.verdict = Boundedness::kNotOpenLoopSolvable;
  } else if (rep.last_relative_change < growth_tol) {
    rep.verdict = Boundedness::kOpenLoopSolvable;
  } else {
    rep.verdict = Boundedness::kInconclusive;
  }
  return rep;
}

OpenLoopLimit ExtractOpenLoopLimit(const PerturbationRun& run, double tol) {
  if (!(tol > 0.0)) throw InvalidInput("tolerance must be positive");
  const BoundednessReport bounded = BoundednessVerdict(run);
  if (bounded.verdict != Boundedness::kOpenLoopSolvable) {
    throw ConvergenceFailure("u^eps is not bounded (verdict " +
                             std::string(ToString(bounded.verdict)) + ", norm exponent " +
                             std::to_string(bounded.norm_exponent) + ")");
  }
  const auto tail = Tail(run, 3);
  if (tail.size() < 3) throw ConvergenceFailure("extrapolation needs three solved eps values");
  const auto& a = *tail[0];
  const auto& b = *tail[1];
  const auto& c = *tail[2];
  const AdaptedProcess first = Extrapolate(a.eps, a.trajectory.u, b.eps, b.trajectory.u);
  OpenLoopLimit out;
  out.u = Extrapolate(b.eps, b.trajectory.u, c.eps, c.trajectory.u);
  out.increment = ProcessDistance(first, out.u);
  if (!(out.increment < tol)) {
    throw ConvergenceFailure("extrapolants at eps=" + std::to_string(b.eps) + " and eps=" +
                             std::to_string(c.eps) + " differ by " +
                             std::to_string(out.increment));
  }
  const Trajectory traj = Rollout(run.problem, out.u);
  out.stationarity_residual = StationarityResidual(run.problem, traj,
                                                   CostateBackward(run.problem, traj));
  if (out.stationarity_residual > 10.0 * tol) {
    throw ConvergenceFailure("extrapolated control has stationarity residual " +
                             std::to_string(out.stationarity_residual));
  }
  return out;
}

WeakClosedLoop ExtractWeakClosedLoop(const PerturbationRun& run, int window_end, double tol) {
  const LQProblem& p = run.problem;
  if (window_end < 0 || window_end > p.horizon - 2) {
    throw InvalidInput("weak closed-loop window must end in 0..N-2 (N=" +
                       std::to_string(p.horizon) + "), got " + std::to_string(window_end));
  }
  const auto fit = Tail(run, kFitPoints);
  if (fit.size() < 3) throw ConvergenceFailure("extraction needs three solved eps values");

  WeakClosedLoop out;
  out.window_end = window_end;
  std::vector<double> eps;
  for (const auto* e : fit) eps.push_back(e->eps);
  for (int t = 0; t < p.horizon; ++t) {
    std::vector<double> gains;
    for (const auto* e : fit) gains.push_back(e->solution.K[static_cast<std::size_t>(t)].norm());
    const double exponent = FitGrowthExponent(eps, gains);
    out.gain_exponents.push_back(exponent);
    if (exponent > kDivergentGainExponent) out.divergent_steps.push_back(t);
  }
  for (const int t : out.divergent_steps) {
    if (t <= window_end) {
      throw WindowTooLong(t, "gain K^eps_" + std::to_string(t) +
                                 " diverges (fitted exponent " +
                                 std::to_string(out.gain_exponents[static_cast<std::size_t>(t)]) +
                                 "); shorten the window");
    }
  }

  out.open_loop = ExtractOpenLoopLimit(run, tol).u;

  const auto& a = *fit[fit.size() - 3];
  const auto& b = *fit[fit.size() - 2];
  const auto& c = *fit[fit.size() - 1];
  std::vector<NodeField> v;
  for (int t = 0; t <= window_end; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const Matrix K1 = Extrapolate(a.eps, a.solution.K[i], b.eps, b.solution.K[i]);
    Matrix K2 = Extrapolate(b.eps, b.solution.K[i], c.eps, c.solution.K[i]);
    if (MaxAbs(K1 - K2) >= tol * (1.0 + MaxAbs(K2))) {
      throw ConvergenceFailure("gain K_" + std::to_string(t) + " does not settle: successive "
                               "extrapolants differ by " + std::to_string(MaxAbs(K1 - K2)));
    }
    out.strategy.K.push_back(std::move(K2));
    v.push_back(Extrapolate(b.eps, b.solution.v[t], c.eps, c.solution.v[t]));
  }
  out.strategy.v = AdaptedProcess(std::move(v));

  const Trajectory mixed = RolloutStrategy(p, out.strategy, out.open_loop);
  out.reproduction_error = ProcessMaxDifference(mixed.u, out.open_loop);
  if (out.reproduction_error > 10.0 * tol) {
    throw ConvergenceFailure("feedback rollout misses the open-loop limit by " +
                             std::to_string(out.reproduction_error));
  }
  return out;
}

}  // namespace slq
