#include <algorithm>

#include "slq/sim_kernels.h"

namespace slq::kernels {

namespace {

// x'Mx with the inner sums formed row by row.
inline double Quadratic(const double* M, const double* x, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) row = row + M[i * n + j] * x[j];
    acc = acc + x[i] * row;
  }
  return acc;
}

inline double Dot(const double* a, const double* x, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc = acc + a[i] * x[i];
  return acc;
}

}  // namespace

void RolloutScalar(const Program& prog, const double* noise, std::size_t lanes,
                   const LaneResults& out) {
  const int n = prog.n;
  const int N = prog.horizon();
  std::vector<double> x(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
  for (std::size_t lane = 0; lane < lanes; ++lane) {
    std::copy(prog.x0.begin(), prog.x0.end(), x.begin());
    double cost = 0.0;
    double energy = 0.0;
    double sup = Dot(x.data(), x.data(), n);
    for (int t = 0; t < N; ++t) {
      const StepData& s = prog.steps[static_cast<std::size_t>(t)];
      const double w = noise[static_cast<std::size_t>(t) * lanes + lane];
      const double stage = Quadratic(s.Qcl.data(), x.data(), n) +
                           2.0 * Dot(s.lcl.data(), x.data(), n);
      cost = cost + (stage + s.kc);
      const double u2 = Quadratic(s.Un.data(), x.data(), n) +
                        2.0 * Dot(s.ul.data(), x.data(), n);
      energy = energy + (u2 + s.uc);
      for (int i = 0; i < n; ++i) {
        double drift = 0.0;
        double diff = 0.0;
        for (int j = 0; j < n; ++j) {
          drift = drift + s.Acl[i * n + j] * x[j];
          diff = diff + s.Ccl[i * n + j] * x[j];
        }
        y[i] = (drift + s.c0[i]) + w * (diff + s.c1[i]);
      }
      std::swap(x, y);
      sup = std::max(sup, Dot(x.data(), x.data(), n));
    }
    const double terminal = Quadratic(prog.H.data(), x.data(), n) +
                            2.0 * Dot(prog.g.data(), x.data(), n);
    out.cost[lane] = cost + terminal;
    out.sup_state_sq[lane] = sup;
    out.control_energy[lane] = energy;
  }
}

}  // namespace slq::kernels
