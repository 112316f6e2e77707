#include "affine_backward.h"

namespace slq::internal {

AffineBackward SolveAffineBackward(const LQProblem& p, std::span<const Matrix> P,
                                   std::span<const Matrix> K,
                                   std::span<const Matrix> weight_inverse) {
  const int N = p.horizon;
  AffineBackward out;
  out.eta.resize(static_cast<std::size_t>(N + 1));
  out.theta.resize(static_cast<std::size_t>(N));
  std::vector<NodeField> offsets(static_cast<std::size_t>(N));
  out.eta[static_cast<std::size_t>(N)] = p.g;

  for (int t = N - 1; t >= 0; --t) {
    const auto i = static_cast<std::size_t>(t);
    const NodeField& next = out.eta[i + 1];
    const bool det = next.deterministic() && p.b[t].deterministic() &&
                     p.sigma[t].deterministic() && p.q[t].deterministic() &&
                     p.rho[t].deterministic();
    if (!det) RequireTreeDepth(t);
    const std::size_t count = det ? 1 : NodesAtDepth(t);
    const Matrix& Pn = P[i + 1];
    const Matrix& Kt = K[i];

    std::vector<Vector> eta_vals(count), theta_vals(count), off_vals(count);
    for (std::size_t k = 0; k < count; ++k) {
      const Vector& ep = next.at(Child(k, t, false));
      const Vector& em = next.at(Child(k, t, true));
      const Vector mean = 0.5 * (ep + em);   // E[eta_t]
      const Vector wmean = 0.5 * (ep - em);  // E[w_t eta_t]
      const Vector Pb = Pn * p.b.at(t, k);
      const Vector Ps = Pn * p.sigma.at(t, k);

      Vector theta = p.B[i].transpose() * mean + p.D[i].transpose() * wmean +
                     p.B[i].transpose() * Pb + p.D[i].transpose() * Ps + p.rho.at(t, k);
      eta_vals[k] = p.A[i].transpose() * mean + p.C[i].transpose() * wmean +
                    Kt.transpose() * (p.B[i].transpose() * mean + p.D[i].transpose() * wmean) +
                    (p.A[i] + p.B[i] * Kt).transpose() * Pb +
                    (p.C[i] + p.D[i] * Kt).transpose() * Ps + p.q.at(t, k) +
                    Kt.transpose() * p.rho.at(t, k);
      off_vals[k] = -(weight_inverse[i] * theta);
      theta_vals[k] = std::move(theta);
    }
    if (det) {
      out.eta[i] = NodeField::Deterministic(t, std::move(eta_vals[0]));
      out.theta[i] = NodeField::Deterministic(t, std::move(theta_vals[0]));
      offsets[i] = NodeField::Deterministic(t, std::move(off_vals[0]));
    } else {
      out.eta[i] = NodeField::Adapted(t, std::move(eta_vals));
      out.theta[i] = NodeField::Adapted(t, std::move(theta_vals));
      offsets[i] = NodeField::Adapted(t, std::move(off_vals));
    }
  }
  out.offset = AdaptedProcess(std::move(offsets));
  return out;
}

}  // namespace slq::internal
