#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace slq::kernels {

/// One step of a closed-loop system u = K x + v with deterministic data,
/// flattened row-major for the batched rollout kernels.
///   x' = Acl x + c0 + w (Ccl x + c1)
///   stage cost   = x'Qcl x + 2 lcl'x + kc
///   control |u|^2 = x'Un x + 2 ul'x + uc
struct StepData {
  std::vector<double> Acl, Ccl, Qcl, Un;  // n x n
  std::vector<double> c0, c1, lcl, ul;    // n
  double kc = 0.0;
  double uc = 0.0;
};

struct Program {
  int n = 0;
  std::vector<StepData> steps;
  std::vector<double> H;   // n x n terminal weight
  std::vector<double> g;   // n
  std::vector<double> x0;  // n

  int horizon() const { return static_cast<int>(steps.size()); }
};

/// Per-lane outputs; each array holds `lanes` entries.
struct LaneResults {
  double* cost;
  double* sup_state_sq;   // max_t |x_t|^2, t = 0..N
  double* control_energy; // sum_t |u_t|^2
};

/// Rolls out `lanes` independent paths. `noise[t * lanes + lane]` is w_t of
/// that lane. Both variants perform the same floating-point operations in the
/// same order and therefore agree bit for bit.
void RolloutScalar(const Program& prog, const double* noise, std::size_t lanes,
                   const LaneResults& out);
void RolloutAvx2(const Program& prog, const double* noise, std::size_t lanes,
                 const LaneResults& out);

enum class Variant { kScalar, kAvx2 };

std::string_view ToString(Variant v);

/// AVX2 when the CPU supports it, unless SLQ_SIMD=scalar is set.
Variant SelectVariant();
bool Avx2Available();

void Rollout(Variant variant, const Program& prog, const double* noise, std::size_t lanes,
             const LaneResults& out);

}  // namespace slq::kernels
