#include <immintrin.h>

#include <algorithm>
#include <array>
#include <cstdlib>
#include <new>
#include <vector>

#include "slq/sim_kernels.h"

namespace slq::kernels {

namespace {

constexpr std::size_t kWidth = 4;

inline __m256d Quadratic(const double* M, const __m256d* x, int n) {
  __m256d acc = _mm256_setzero_pd();
  for (int i = 0; i < n; ++i) {
    __m256d row = _mm256_setzero_pd();
    for (int j = 0; j < n; ++j) {
      row = _mm256_add_pd(row, _mm256_mul_pd(_mm256_set1_pd(M[i * n + j]), x[j]));
    }
    acc = _mm256_add_pd(acc, _mm256_mul_pd(x[i], row));
  }
  return acc;
}

inline __m256d Dot(const double* a, const __m256d* x, int n) {
  __m256d acc = _mm256_setzero_pd();
  for (int i = 0; i < n; ++i) acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(a[i]), x[i]));
  return acc;
}

inline __m256d SquaredNorm(const __m256d* x, int n) {
  __m256d acc = _mm256_setzero_pd();
  for (int i = 0; i < n; ++i) acc = _mm256_add_pd(acc, _mm256_mul_pd(x[i], x[i]));
  return acc;
}

// Four lanes whose w_t sits at noise[t * stride].
void RolloutBlock(const Program& prog, const double* noise, std::size_t stride, __m256d* x,
                  __m256d* y, double* cost_out, double* sup_out, double* energy_out) {
  const int n = prog.n;
  const int N = prog.horizon();
  const __m256d two = _mm256_set1_pd(2.0);
  for (int i = 0; i < n; ++i) x[i] = _mm256_set1_pd(prog.x0[static_cast<std::size_t>(i)]);
  __m256d cost = _mm256_setzero_pd();
  __m256d energy = _mm256_setzero_pd();
  __m256d sup = SquaredNorm(x, n);
  for (int t = 0; t < N; ++t) {
    const StepData& s = prog.steps[static_cast<std::size_t>(t)];
    const __m256d w = _mm256_loadu_pd(noise + static_cast<std::size_t>(t) * stride);
    const __m256d stage =
        _mm256_add_pd(Quadratic(s.Qcl.data(), x, n), _mm256_mul_pd(two, Dot(s.lcl.data(), x, n)));
    cost = _mm256_add_pd(cost, _mm256_add_pd(stage, _mm256_set1_pd(s.kc)));
    const __m256d u2 =
        _mm256_add_pd(Quadratic(s.Un.data(), x, n), _mm256_mul_pd(two, Dot(s.ul.data(), x, n)));
    energy = _mm256_add_pd(energy, _mm256_add_pd(u2, _mm256_set1_pd(s.uc)));
    for (int i = 0; i < n; ++i) {
      __m256d drift = _mm256_setzero_pd();
      __m256d diff = _mm256_setzero_pd();
      for (int j = 0; j < n; ++j) {
        drift = _mm256_add_pd(drift, _mm256_mul_pd(_mm256_set1_pd(s.Acl[i * n + j]), x[j]));
        diff = _mm256_add_pd(diff, _mm256_mul_pd(_mm256_set1_pd(s.Ccl[i * n + j]), x[j]));
      }
      y[i] = _mm256_add_pd(_mm256_add_pd(drift, _mm256_set1_pd(s.c0[i])),
                           _mm256_mul_pd(w, _mm256_add_pd(diff, _mm256_set1_pd(s.c1[i]))));
    }
    std::swap_ranges(x, x + n, y);
    sup = _mm256_max_pd(sup, SquaredNorm(x, n));
  }
  const __m256d terminal = _mm256_add_pd(Quadratic(prog.H.data(), x, n),
                                         _mm256_mul_pd(two, Dot(prog.g.data(), x, n)));
  _mm256_storeu_pd(cost_out, _mm256_add_pd(cost, terminal));
  _mm256_storeu_pd(sup_out, sup);
  _mm256_storeu_pd(energy_out, energy);
}

// Aligned scratch registers, one per state component.
class RegisterBuffer {
 public:
  explicit RegisterBuffer(int n)
      : data_(static_cast<__m256d*>(
            std::aligned_alloc(alignof(__m256d), sizeof(__m256d) * static_cast<std::size_t>(
                                                                        std::max(n, 1))))) {
    if (data_ == nullptr) throw std::bad_alloc();
  }
  RegisterBuffer(const RegisterBuffer&) = delete;
  RegisterBuffer& operator=(const RegisterBuffer&) = delete;
  ~RegisterBuffer() { std::free(data_); }

  __m256d* data() const { return data_; }

 private:
  __m256d* data_;
};

}  // namespace

void RolloutAvx2(const Program& prog, const double* noise, std::size_t lanes,
                 const LaneResults& out) {
  const int N = prog.horizon();
  RegisterBuffer x(prog.n);
  RegisterBuffer y(prog.n);
  const std::size_t full = lanes - lanes % kWidth;
  for (std::size_t lane = 0; lane < full; lane += kWidth) {
    RolloutBlock(prog, noise + lane, lanes, x.data(), y.data(), out.cost + lane,
                 out.sup_state_sq + lane, out.control_energy + lane);
  }
  if (full == lanes) return;
  // Remaining lanes run through the same vector code on a zero-padded copy.
  const std::size_t rest = lanes - full;
  std::vector<double> padded(static_cast<std::size_t>(N) * kWidth, 0.0);
  for (int t = 0; t < N; ++t) {
    for (std::size_t j = 0; j < rest; ++j) {
      padded[static_cast<std::size_t>(t) * kWidth + j] =
          noise[static_cast<std::size_t>(t) * lanes + full + j];
    }
  }
  std::array<double, kWidth> cost{}, sup{}, energy{};
  RolloutBlock(prog, padded.data(), kWidth, x.data(), y.data(), cost.data(), sup.data(),
               energy.data());
  for (std::size_t j = 0; j < rest; ++j) {
    out.cost[full + j] = cost[j];
    out.sup_state_sq[full + j] = sup[j];
    out.control_energy[full + j] = energy[j];
  }
}

}  // namespace slq::kernels
