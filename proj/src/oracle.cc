#include "slq/oracle.h"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "slq/errors.h"

namespace slq {

namespace {

std::size_t NodeOffset(int t, std::size_t node, int m) {
  return static_cast<std::size_t>(m) * (NodesAtDepth(t) - 1 + node);
}

// Stacked block W = [[Q, S'], [S, R]] acting on (x, u).
Matrix StageWeight(const LQProblem& p, std::size_t i) {
  const int n = p.state_dim;
  const int m = p.control_dim;
  Matrix W(n + m, n + m);
  W.topLeftCorner(n, n) = p.Q[i];
  W.topRightCorner(n, m) = p.S[i].transpose();
  W.bottomLeftCorner(m, n) = p.S[i];
  W.bottomRightCorner(m, m) = p.R[i];
  return W;
}

// State at a node as an affine function of the ancestors' controls:
// x = phi * (u_0, ..., u_{t-1}) + xi, ancestors ordered by depth.
struct AffineState {
  Matrix phi;
  Vector xi;
};

}  // namespace

double TrajectoryCost(const LQProblem& p, const Trajectory& traj) {
  double total = 0.0;
  for (int t = 0; t < p.horizon; ++t) {
    const auto i = static_cast<std::size_t>(t);
    double level = 0.0;
    for (std::size_t k = 0; k < NodesAtDepth(t); ++k) {
      const Vector& x = traj.x.at(t, k);
      const Vector& u = traj.u.at(t, k);
      level += x.dot(p.Q[i] * x) + 2.0 * u.dot(p.S[i] * x) + u.dot(p.R[i] * u) +
               2.0 * x.dot(p.q.at(t, k)) + 2.0 * u.dot(p.rho.at(t, k));
    }
    total += level * NodeWeight(t);
  }
  double terminal = 0.0;
  for (std::size_t k = 0; k < NodesAtDepth(p.horizon); ++k) {
    const Vector& x = traj.x.at(p.horizon, k);
    terminal += x.dot(p.H * x) + 2.0 * x.dot(p.g.at(k));
  }
  return total + terminal * NodeWeight(p.horizon);
}

double ExactCost(const LQProblem& p, const AdaptedProcess& u) {
  if (u.horizon() != p.horizon) {
    throw InvalidInput("control covers " + std::to_string(u.horizon()) +
                       " steps, horizon is " + std::to_string(p.horizon));
  }
  return TrajectoryCost(p, Rollout(p, u));
}

double ExactCostStrategy(const LQProblem& p, const Strategy& s) {
  if (static_cast<int>(s.K.size()) != p.horizon) {
    throw InvalidInput("strategy must cover the whole horizon");
  }
  return TrajectoryCost(p, RolloutStrategy(p, s));
}

CostQuadratic AssembleCostQuadratic(const LQProblem& p, std::size_t cap) {
  p.Validate();
  const int N = p.horizon;
  const int n = p.state_dim;
  const int m = p.control_dim;
  if (N >= 62 || static_cast<std::size_t>(m) * (NodesAtDepth(N) - 1) > cap) {
    throw InstanceTooLarge("oracle needs " + std::to_string(m) + " x (2^" +
                           std::to_string(N) + " - 1) variables, cap is " +
                           std::to_string(cap));
  }
  const auto vars = static_cast<Eigen::Index>(m * (NodesAtDepth(N) - 1));
  CostQuadratic out{Matrix::Zero(vars, vars), Vector::Zero(vars), 0.0};

  // Scatters a local form over (ancestor controls, optional own control) into
  // the global quadratic.
  auto scatter = [&](std::size_t node, int local_controls, const Matrix& g_local,
                     const Vector& c_local, double k_local, double weight) {
    std::vector<Eigen::Index> index;
    index.reserve(static_cast<std::size_t>(m * local_controls));
    for (int s = 0; s < local_controls; ++s) {
      const std::size_t off = NodeOffset(s, Ancestor(node, s), m);
      for (int j = 0; j < m; ++j) index.push_back(static_cast<Eigen::Index>(off) + j);
    }
    const auto len = static_cast<Eigen::Index>(index.size());
    for (Eigen::Index a = 0; a < len; ++a) {
      out.c(index[a]) += weight * c_local(a);
      for (Eigen::Index b = 0; b < len; ++b) {
        out.G(index[a], index[b]) += weight * g_local(a, b);
      }
    }
    out.k += weight * k_local;
  };

  std::vector<AffineState> level{{Matrix::Zero(n, 0), p.x0}};
  for (int t = 0; t < N; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const Matrix W = StageWeight(p, i);
    const double weight = NodeWeight(t);
    std::vector<AffineState> next(NodesAtDepth(t + 1));
    for (std::size_t k = 0; k < NodesAtDepth(t); ++k) {
      const AffineState& st = level[k];
      const Eigen::Index a = st.phi.cols();
      // (x, u) = L y + l with y = (ancestor controls, u_t).
      Matrix L = Matrix::Zero(n + m, a + m);
      L.topLeftCorner(n, a) = st.phi;
      L.bottomRightCorner(m, m).setIdentity();
      Vector l = Vector::Zero(n + m);
      l.head(n) = st.xi;
      Vector lin(n + m);
      lin.head(n) = p.q.at(t, k);
      lin.tail(m) = p.rho.at(t, k);
      const Vector Wl = W * l;
      scatter(k, t + 1, L.transpose() * W * L, L.transpose() * (Wl + lin),
              l.dot(Wl) + 2.0 * lin.dot(l), weight);

      for (const bool minus : {false, true}) {
        const double w = minus ? -1.0 : 1.0;
        const Matrix Ax = p.A[i] + w * p.C[i];
        AffineState child{Matrix(n, a + m), Vector(n)};
        child.phi.leftCols(a) = Ax * st.phi;
        child.phi.rightCols(m) = p.B[i] + w * p.D[i];
        child.xi = Ax * st.xi + p.b.at(t, k) + w * p.sigma.at(t, k);
        next[Child(k, t, minus)] = std::move(child);
      }
    }
    level = std::move(next);
  }
  const double weight = NodeWeight(N);
  for (std::size_t k = 0; k < NodesAtDepth(N); ++k) {
    const AffineState& st = level[k];
    const Vector Hxi = p.H * st.xi;
    scatter(k, N, st.phi.transpose() * p.H * st.phi,
            st.phi.transpose() * (Hxi + p.g.at(k)), st.xi.dot(Hxi) + 2.0 * st.xi.dot(p.g.at(k)),
            weight);
  }
  out.G = Symmetrized(out.G);
  return out;
}

AdaptedProcess UnstackControl(const Vector& z, int horizon, int control_dim) {
  const int m = control_dim;
  if (z.size() != static_cast<Eigen::Index>(m * (NodesAtDepth(horizon) - 1))) {
    throw InvalidInput("stacked control has the wrong length");
  }
  std::vector<NodeField> fields;
  for (int t = 0; t < horizon; ++t) {
    std::vector<Vector> vals(NodesAtDepth(t));
    for (std::size_t k = 0; k < vals.size(); ++k) {
      vals[k] = z.segment(static_cast<Eigen::Index>(NodeOffset(t, k, m)), m);
    }
    fields.push_back(NodeField::Adapted(t, std::move(vals)));
  }
  return AdaptedProcess(std::move(fields));
}

Vector StackControl(const AdaptedProcess& u, int control_dim) {
  const int m = control_dim;
  Vector z(static_cast<Eigen::Index>(m * (NodesAtDepth(u.horizon()) - 1)));
  for (int t = 0; t < u.horizon(); ++t) {
    for (std::size_t k = 0; k < NodesAtDepth(t); ++k) {
      z.segment(static_cast<Eigen::Index>(NodeOffset(t, k, m)), m) = u.at(t, k);
    }
  }
  return z;
}

std::string_view ToString(OracleVerdict verdict) {
  switch (verdict) {
    case OracleVerdict::kMinimizer:
      return "minimizer";
    case OracleVerdict::kUnboundedBelow:
      return "unbounded-below";
    case OracleVerdict::kNoMinimizer:
      return "no-minimizer";
  }
  return "unknown";
}

OracleSolution ExactValue(const LQProblem& p, std::size_t cap) {
  const CostQuadratic J = AssembleCostQuadratic(p, cap);
  OracleSolution sol;
  if (J.G.size() == 0) {
    sol.verdict = OracleVerdict::kMinimizer;
    sol.value = J.k;
    sol.hessian_psd = true;
    sol.optimal_control = UnstackControl(J.c, p.horizon, p.control_dim);
    return sol;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(J.G);
  const Vector& lambda = eig.eigenvalues();
  const Matrix& V = eig.eigenvectors();
  const double scale = std::max(lambda.cwiseAbs().maxCoeff(), 1.0);
  const double slack = 1e-9 * scale;
  sol.min_eigenvalue = lambda.minCoeff();
  sol.hessian_psd = sol.min_eigenvalue >= -slack;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (std::abs(lambda(i)) <= slack) ++sol.flat_directions;
  }
  if (!sol.hessian_psd) {
    sol.verdict = OracleVerdict::kUnboundedBelow;
    return sol;
  }
  // Split c into its range and kernel components in the eigenbasis.
  const Vector coeff = V.transpose() * J.c;
  double kernel_part = 0.0;
  Vector z = Vector::Zero(J.c.size());
  double correction = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (std::abs(lambda(i)) <= slack) {
      kernel_part = std::max(kernel_part, std::abs(coeff(i)));
    } else {
      z -= (coeff(i) / lambda(i)) * V.col(i);
      correction += coeff(i) * coeff(i) / lambda(i);
    }
  }
  if (kernel_part > 1e-9 * std::max(1.0, J.c.cwiseAbs().maxCoeff())) {
    sol.verdict = OracleVerdict::kNoMinimizer;
    return sol;
  }
  sol.verdict = OracleVerdict::kMinimizer;
  sol.value = J.k - correction;
  sol.optimal_control = UnstackControl(z, p.horizon, p.control_dim);
  return sol;
}

}  // namespace slq
