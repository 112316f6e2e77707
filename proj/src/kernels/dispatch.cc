#include <cstdlib>
#include <string>

#include "slq/errors.h"
#include "slq/sim_kernels.h"

namespace slq::kernels {

std::string_view ToString(Variant v) {
  return v == Variant::kAvx2 ? "avx2" : "scalar";
}

bool Avx2Available() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Variant SelectVariant() {
  const char* forced = std::getenv("SLQ_SIMD");
  if (forced != nullptr && std::string(forced) == "scalar") return Variant::kScalar;
  return Avx2Available() ? Variant::kAvx2 : Variant::kScalar;
}

void Rollout(Variant variant, const Program& prog, const double* noise, std::size_t lanes,
             const LaneResults& out) {
  if (variant == Variant::kAvx2) {
    if (!Avx2Available()) throw UnsupportedCombination("AVX2 kernel requested on a CPU without AVX2");
    RolloutAvx2(prog, noise, lanes, out);
  } else {
    RolloutScalar(prog, noise, lanes, out);
  }
}

}  // namespace slq::kernels
