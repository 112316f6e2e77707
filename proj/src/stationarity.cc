#include "slq/stationarity.h"

#include <algorithm>
#include <cmath>

#include "slq/errors.h"

namespace slq {

namespace {

void CheckControl(const LQProblem& p, const AdaptedProcess& u, int from) {
  if (u.horizon() < p.horizon) {
    throw InvalidInput("control covers " + std::to_string(u.horizon()) +
                       " steps, horizon is " + std::to_string(p.horizon));
  }
  for (int t = from; t < p.horizon; ++t) {
    for (const auto& v : u[t].values()) {
      if (v.size() != p.control_dim) {
        throw InvalidInput("control at t=" + std::to_string(t) + " has wrong dimension");
      }
    }
  }
}

// x_{t+1} at the child of `node` reached by noise w.
Vector Step(const LQProblem& p, int t, std::size_t node, const Vector& x,
            const Vector& u, double w) {
  const auto k = static_cast<std::size_t>(t);
  return p.A[k] * x + p.B[k] * u + p.b.at(t, node) +
         w * (p.C[k] * x + p.D[k] * u + p.sigma.at(t, node));
}

template <typename ControlAt>
Trajectory RolloutImpl(const LQProblem& p, ControlAt&& control_at) {
  RequireTreeDepth(p.horizon);
  std::vector<NodeField> xs;
  std::vector<NodeField> us;
  xs.push_back(NodeField::Adapted(0, {p.x0}));
  for (int t = 0; t < p.horizon; ++t) {
    const NodeField& x = xs.back();
    std::vector<Vector> u_vals(NodesAtDepth(t));
    std::vector<Vector> next(NodesAtDepth(t + 1));
    for (std::size_t k = 0; k < NodesAtDepth(t); ++k) {
      u_vals[k] = control_at(t, k, x.at(k));
      next[Child(k, t, false)] = Step(p, t, k, x.at(k), u_vals[k], 1.0);
      next[Child(k, t, true)] = Step(p, t, k, x.at(k), u_vals[k], -1.0);
    }
    us.push_back(NodeField::Adapted(t, std::move(u_vals)));
    xs.push_back(NodeField::Adapted(t + 1, std::move(next)));
  }
  return {AdaptedProcess(std::move(xs)), AdaptedProcess(std::move(us))};
}

}  // namespace

Trajectory Rollout(const LQProblem& p, const AdaptedProcess& u) {
  CheckControl(p, u, 0);
  return RolloutImpl(p, [&](int t, std::size_t k, const Vector&) { return u.at(t, k); });
}

Trajectory RolloutStrategy(const LQProblem& p, const Strategy& s, const AdaptedProcess& tail) {
  const int window = static_cast<int>(s.K.size());
  if (window > p.horizon) throw InvalidInput("strategy window exceeds the horizon");
  if (s.v.horizon() != window) throw InvalidInput("strategy offsets do not match its gains");
  for (const auto& k : s.K) {
    if (k.rows() != p.control_dim || k.cols() != p.state_dim) {
      throw InvalidInput("strategy gain has wrong shape");
    }
  }
  if (window < p.horizon) CheckControl(p, tail, window);
  return RolloutImpl(p, [&](int t, std::size_t k, const Vector& x) -> Vector {
    if (t < window) return s.K[static_cast<std::size_t>(t)] * x + s.v.at(t, k);
    return tail.at(t, k);
  });
}

CostateProcess CostateBackward(const LQProblem& p, const Trajectory& traj) {
  const int N = p.horizon;
  CostateProcess out;
  out.lambda.resize(static_cast<std::size_t>(N + 1));
  {
    std::vector<Vector> terminal(NodesAtDepth(N));
    for (std::size_t k = 0; k < terminal.size(); ++k) {
      terminal[k] = p.H * traj.x.at(N, k) + p.g.at(k);
    }
    out.lambda[static_cast<std::size_t>(N)] = NodeField::Adapted(N, std::move(terminal));
  }
  for (int t = N - 1; t >= 0; --t) {
    const auto i = static_cast<std::size_t>(t);
    const NodeField& next = out.lambda[i + 1];
    std::vector<Vector> vals(NodesAtDepth(t));
    for (std::size_t k = 0; k < vals.size(); ++k) {
      const Vector& lp = next.at(Child(k, t, false));
      const Vector& lm = next.at(Child(k, t, true));
      const Vector mean = 0.5 * (lp + lm);
      const Vector wmean = 0.5 * (lp - lm);
      vals[k] = p.Q[i] * traj.x.at(t, k) + p.S[i].transpose() * traj.u.at(t, k) +
                p.A[i].transpose() * mean + p.C[i].transpose() * wmean + p.q.at(t, k);
    }
    out.lambda[i] = NodeField::Adapted(t, std::move(vals));
  }
  return out;
}

StationarityReport StationarityResiduals(const LQProblem& p, const Trajectory& traj,
                                         const CostateProcess& costate) {
  StationarityReport rep;
  for (int t = 0; t < p.horizon; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const NodeField& lam = costate.at(t);
    double worst = 0.0;
    std::size_t arg = 0;
    for (std::size_t k = 0; k < NodesAtDepth(t); ++k) {
      const Vector& lp = lam.at(Child(k, t, false));
      const Vector& lm = lam.at(Child(k, t, true));
      const Vector r = p.R[i] * traj.u.at(t, k) + p.S[i] * traj.x.at(t, k) +
                       p.B[i].transpose() * (0.5 * (lp + lm)) +
                       p.D[i].transpose() * (0.5 * (lp - lm)) + p.rho.at(t, k);
      const double mag = MaxAbs(r);
      if (mag > worst) {
        worst = mag;
        arg = k;
      }
    }
    rep.per_step.push_back(worst);
    rep.argmax_node.push_back(arg);
    rep.max_residual = std::max(rep.max_residual, worst);
  }
  return rep;
}

double StationarityResidual(const LQProblem& p, const Trajectory& traj,
                            const CostateProcess& costate) {
  return StationarityResiduals(p, traj, costate).max_residual;
}

double ClosedLoopResidual(const LQProblem& p, const Strategy& s) {
  if (static_cast<int>(s.K.size()) != p.horizon) {
    throw InvalidInput("closed-loop residual needs a strategy on the full horizon");
  }
  const Trajectory traj = RolloutStrategy(p, s);
  return StationarityResidual(p, traj, CostateBackward(p, traj));
}

double ExpectedSquaredNorm(const AdaptedProcess& u) {
  double total = 0.0;
  for (int t = 0; t < u.horizon(); ++t) {
    const NodeField& f = u[t];
    double level = 0.0;
    for (const auto& v : f.values()) level += v.squaredNorm();
    total += level / static_cast<double>(f.stored());
  }
  return total;
}

double ProcessDistance(const AdaptedProcess& a, const AdaptedProcess& b) {
  if (a.horizon() != b.horizon()) throw InvalidInput("process horizons differ");
  double total = 0.0;
  for (int t = 0; t < a.horizon(); ++t) {
    double level = 0.0;
    for (std::size_t k = 0; k < NodesAtDepth(t); ++k) {
      level += (a.at(t, k) - b.at(t, k)).squaredNorm();
    }
    total += level * NodeWeight(t);
  }
  return std::sqrt(total);
}

double ProcessMaxDifference(const AdaptedProcess& a, const AdaptedProcess& b) {
  if (a.horizon() != b.horizon()) throw InvalidInput("process horizons differ");
  double worst = 0.0;
  for (int t = 0; t < a.horizon(); ++t) {
    for (std::size_t k = 0; k < NodesAtDepth(t); ++k) {
      worst = std::max(worst, MaxAbs(a.at(t, k) - b.at(t, k)));
    }
  }
  return worst;
}

}  // namespace slq
