#include "slq/riccati.h"

#include "affine_backward.h"
#include "slq/errors.h"

namespace slq {

RiccatiSolution RiccatiBackward(const LQProblem& p, const Tolerances& tol) {
  p.Validate();
  const int N = p.horizon;
  RiccatiSolution sol;
  sol.P.resize(static_cast<std::size_t>(N + 1));
  sol.Rhat.resize(static_cast<std::size_t>(N));
  sol.Rhat_pinv.resize(static_cast<std::size_t>(N));
  sol.M.resize(static_cast<std::size_t>(N));
  sol.Khat.resize(static_cast<std::size_t>(N));
  sol.P[static_cast<std::size_t>(N)] = p.H;
  for (int t = N - 1; t >= 0; --t) {
    const auto i = static_cast<std::size_t>(t);
    const Matrix& Pn = sol.P[i + 1];
    const Matrix& A = p.A[i];
    const Matrix& B = p.B[i];
    const Matrix& C = p.C[i];
    const Matrix& D = p.D[i];
    sol.Rhat[i] = Symmetrized(p.R[i] + B.transpose() * Pn * B + D.transpose() * Pn * D);
    sol.M[i] = B.transpose() * Pn * A + D.transpose() * Pn * C + p.S[i];
    sol.Rhat_pinv[i] = Pinv(sol.Rhat[i], tol);
    sol.Khat[i] = -(sol.Rhat_pinv[i] * sol.M[i]);
    sol.P[i] = Symmetrized(p.Q[i] + A.transpose() * Pn * A + C.transpose() * Pn * C -
                           sol.M[i].transpose() * sol.Rhat_pinv[i] * sol.M[i]);
  }
  return sol;
}

EtaVhat SolveEtaVhat(const RiccatiSolution& sol, const LQProblem& p) {
  auto affine = internal::SolveAffineBackward(p, sol.P, sol.Khat, sol.Rhat_pinv);
  return {std::move(affine.eta), std::move(affine.theta), std::move(affine.offset)};
}

std::vector<RegularityFlags> RegularityCheck(const RiccatiSolution& sol, const LQProblem& p,
                                             const Tolerances& tol) {
  std::vector<NodeField> computed_theta;
  const std::vector<NodeField>* theta = &sol.theta;
  if (sol.theta.size() != sol.Rhat.size()) {
    computed_theta = SolveEtaVhat(sol, p).theta;
    theta = &computed_theta;
  }
  std::vector<RegularityFlags> flags(sol.Rhat.size());
  for (std::size_t i = 0; i < sol.Rhat.size(); ++i) {
    RegularityFlags& f = flags[i];
    f.rhat_psd = PsdCheck(sol.Rhat[i], tol);
    f.gain_finite = sol.Khat[i].allFinite();
    f.gain_range = RangeSubset(sol.M[i], sol.Rhat[i], tol);
    f.offset_range = true;
    for (const auto& th : (*theta)[i].values()) {
      if (!RangeSubset(th, sol.Rhat[i], tol)) {
        f.offset_range = false;
        break;
      }
    }
  }
  return flags;
}

RiccatiSolution SolveRiccati(const LQProblem& p, const Tolerances& tol) {
  RiccatiSolution sol = RiccatiBackward(p, tol);
  EtaVhat affine = SolveEtaVhat(sol, p);
  sol.eta = std::move(affine.eta);
  sol.theta = std::move(affine.theta);
  sol.vhat = std::move(affine.vhat);
  sol.flags = RegularityCheck(sol, p, tol);
  sol.regular = true;
  for (const auto& f : sol.flags) sol.regular = sol.regular && f.all();
  return sol;
}

Strategy ClosedLoop(const RiccatiSolution& sol, const std::vector<Matrix>& z,
                    const AdaptedProcess& y) {
  if (!sol.regular) {
    throw NotClosedLoopSolvable("the Riccati solution is not regular");
  }
  const int N = sol.horizon();
  if (!z.empty() && static_cast<int>(z.size()) != N) {
    throw InvalidInput("free gain z must cover the horizon");
  }
  if (y.horizon() != 0 && y.horizon() != N) {
    throw InvalidInput("free offset y must cover the horizon");
  }
  Strategy s;
  std::vector<NodeField> v;
  for (int t = 0; t < N; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const Eigen::Index m = sol.Rhat[i].rows();
    const Matrix projector = Matrix::Identity(m, m) - sol.Rhat_pinv[i] * sol.Rhat[i];
    Matrix K = sol.Khat[i];
    if (!z.empty()) K += projector * z[i];
    s.K.push_back(std::move(K));

    if (y.horizon() == 0) {
      v.push_back(sol.vhat[t]);
      continue;
    }
    const bool det = sol.vhat[t].deterministic() && y[t].deterministic();
    const std::size_t count = det ? 1 : NodesAtDepth(t);
    std::vector<Vector> vals(count);
    for (std::size_t k = 0; k < count; ++k) {
      vals[k] = sol.vhat.at(t, k) + projector * y.at(t, k);
    }
    v.push_back(det ? NodeField::Deterministic(t, std::move(vals[0]))
                    : NodeField::Adapted(t, std::move(vals)));
  }
  s.v = AdaptedProcess(std::move(v));
  return s;
}

double ValueFunction(const RiccatiSolution& sol, const LQProblem& p) {
  if (!sol.regular) {
    throw NotClosedLoopSolvable("value formula requires a regular Riccati solution");
  }
  double value = p.x0.dot(sol.P[0] * p.x0) + 2.0 * p.x0.dot(sol.eta_at(-1).at(0));
  for (int t = 0; t < p.horizon; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const Matrix& Pn = sol.P[i + 1];
    const NodeField& eta = sol.eta_at(t);
    const bool det = eta.deterministic() && p.b[t].deterministic() &&
                     p.sigma[t].deterministic() && sol.theta[i].deterministic();
    const std::size_t count = det ? 1 : NodesAtDepth(t);
    double level = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
      const Vector& b = p.b.at(t, k);
      const Vector& s = p.sigma.at(t, k);
      const Vector& ep = eta.at(Child(k, t, false));
      const Vector& em = eta.at(Child(k, t, true));
      // E[(b + w s)' eta_t] over the two children.
      const double cross = 0.5 * ((b + s).dot(ep) + (b - s).dot(em));
      const Vector& th = sol.theta[i].at(k);
      level += b.dot(Pn * b) + s.dot(Pn * s) + 2.0 * cross -
               th.dot(sol.Rhat_pinv[i] * th);
    }
    value += level / static_cast<double>(count);
  }
  return value;
}

}  // namespace slq
