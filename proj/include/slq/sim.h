#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <variant>

#include "slq/model.h"
#include "slq/sim_kernels.h"

namespace slq {

/// A feedback strategy on the whole horizon, or an open-loop control given
/// node by node on the +/-1 tree.
using Policy = std::variant<Strategy, AdaptedProcess>;

/// Counter-based noise: w_t of sample `sample` is a pure function of
/// (kind, seed, sample, t). Gaussian draws use Box-Muller on two splitmix64
/// outputs; Rademacher draws use the top bit of one output.
double NoiseSample(NoiseKind kind, std::uint64_t seed, std::uint64_t sample, int t);

struct SimulationOptions {
  /// Kernel override; defaults to kernels::SelectVariant().
  std::optional<kernels::Variant> variant;
  /// When set, the first `paths_limit` paths are written as CSV rows
  /// t,sample,x_0..x_{n-1},u_0..u_{m-1}.
  std::ostream* paths_csv = nullptr;
  std::size_t paths_limit = 100;
};

struct SimulationReport {
  std::size_t samples = 0;
  double cost_mean = 0.0;
  /// Sample standard deviation over sqrt(samples).
  double cost_stderr = 0.0;
  /// Largest |x_t| seen over all paths and times.
  double max_state_sup = 0.0;
  std::uint64_t seed = 0;
  NoiseKind noise = NoiseKind::kGaussian;
  /// "avx2", "scalar" or "tree" (per-path evaluation of adapted data).
  std::string kernel;
  /// Sample means of sup_t |x_t|^2 and of |x0|^2 + sum |u|^2 + sum |b|^2 + sum |sigma|^2.
  double mean_state_sup_sq = 0.0;
  double mean_bound_input = 0.0;
};

/// Monte-Carlo estimate of the cost under p.noise.kind.
///
/// Strategies with deterministic offsets on problems with deterministic
/// drivers run through the batched kernels under either noise law.
/// Tree-adapted controls or drivers need Rademacher noise; under Gaussian
/// noise they throw UnsupportedCombination. Samples are processed in blocks
/// whose results are folded in sample order, so reports do not depend on the
/// number of threads.
SimulationReport SimulateCost(const LQProblem& p, const Policy& policy, std::size_t samples,
                              std::uint64_t seed, const SimulationOptions& options = {});

struct StateBound {
  bool stable = false;
  /// E sup|x|^2 / E(|x0|^2 + sum|u|^2 + sum|b|^2 + sum|sigma|^2) at n and 2n samples.
  double fitted_L = 0.0;
  double fitted_L_doubled = 0.0;
};

/// Empirical constant of the a-priori state bound; stable when the two fits
/// differ by less than a factor of two.
StateBound StateBoundCheck(const LQProblem& p, const Strategy& s, std::size_t samples,
                           std::uint64_t seed);

/// Batched-kernel program of a closed-loop system with deterministic data.
kernels::Program BuildProgram(const LQProblem& p, const Strategy& s);

}  // namespace slq
