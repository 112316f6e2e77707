#include "slq/sim.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include "slq/errors.h"

namespace slq {

namespace {

constexpr std::size_t kBlock = 4096;

std::uint64_t Mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t Draw(std::uint64_t seed, std::uint64_t sample, std::uint64_t counter) {
  return Mix(Mix(Mix(seed) ^ sample) ^ (counter * 0xd1b54a32d192ed03ULL));
}

std::vector<double> Flatten(const Matrix& m) {
  std::vector<double> out(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
    }
  }
  return out;
}

std::vector<double> Flatten(const Vector& v) { return {v.data(), v.data() + v.size()}; }

struct PathResult {
  double cost = 0.0;
  double sup_sq = 0.0;
  double bound_input = 0.0;
};

// Evaluates one path with node lookups driven by the signs of the noise.
// `record` receives (t, x_t, u_t) when non-null.
template <typename Record>
PathResult EvaluatePath(const LQProblem& p, const Policy& policy, std::uint64_t seed,
                        std::uint64_t sample, Record&& record) {
  PathResult r;
  Vector x = p.x0;
  std::size_t node = 0;
  r.sup_sq = x.squaredNorm();
  r.bound_input = x.squaredNorm();
  for (int t = 0; t < p.horizon; ++t) {
    const auto i = static_cast<std::size_t>(t);
    Vector u;
    if (const auto* s = std::get_if<Strategy>(&policy)) {
      u = s->K[i] * x + s->v.at(t, node);
    } else {
      u = std::get<AdaptedProcess>(policy).at(t, node);
    }
    record(t, x, u);
    r.cost += x.dot(p.Q[i] * x) + 2.0 * u.dot(p.S[i] * x) + u.dot(p.R[i] * u) +
              2.0 * x.dot(p.q.at(t, node)) + 2.0 * u.dot(p.rho.at(t, node));
    const Vector& b = p.b.at(t, node);
    const Vector& sg = p.sigma.at(t, node);
    r.bound_input += u.squaredNorm() + b.squaredNorm() + sg.squaredNorm();
    const double w = NoiseSample(p.noise.kind, seed, sample, t);
    x = p.A[i] * x + p.B[i] * u + b + w * (p.C[i] * x + p.D[i] * u + sg);
    if (w < 0.0) node |= std::size_t{1} << t;
    r.sup_sq = std::max(r.sup_sq, x.squaredNorm());
  }
  record(p.horizon, x, Vector());
  r.cost += x.dot(p.H * x) + 2.0 * x.dot(p.g.at(node));
  return r;
}

void CheckPolicy(const LQProblem& p, const Policy& policy) {
  if (const auto* s = std::get_if<Strategy>(&policy)) {
    if (static_cast<int>(s->K.size()) != p.horizon || s->v.horizon() != p.horizon) {
      throw InvalidInput("simulated strategy must cover the whole horizon");
    }
    for (const auto& k : s->K) {
      if (k.rows() != p.control_dim || k.cols() != p.state_dim) {
        throw InvalidInput("strategy gain has wrong shape");
      }
    }
  } else {
    const auto& u = std::get<AdaptedProcess>(policy);
    if (u.horizon() != p.horizon || u.dim() != p.control_dim) {
      throw InvalidInput("simulated control must cover the whole horizon");
    }
  }
}

// Runs `body(begin, end)` over [0, count) split into kBlock-sized chunks.
template <typename Body>
void ForBlocks(std::size_t count, Body&& body) {
  const std::size_t blocks = (count + kBlock - 1) / kBlock;
  const std::size_t workers = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1,
                                                      std::max<std::size_t>(blocks, 1));
  auto run = [&](std::size_t first) {
    for (std::size_t b = first; b < blocks; b += workers) {
      body(b * kBlock, std::min(count, (b + 1) * kBlock));
    }
  };
  if (workers == 1) {
    run(0);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
  for (auto& th : pool) th.join();
}

}  // namespace

double NoiseSample(NoiseKind kind, std::uint64_t seed, std::uint64_t sample, int t) {
  const auto c = 2 * static_cast<std::uint64_t>(t);
  const std::uint64_t h1 = Draw(seed, sample, c);
  if (kind == NoiseKind::kRademacher) return (h1 >> 63) ? -1.0 : 1.0;
  const std::uint64_t h2 = Draw(seed, sample, c + 1);
  constexpr double kUnit = 0x1.0p-53;
  const double u1 = static_cast<double>((h1 >> 11) + 1) * kUnit;  // (0, 1]
  const double u2 = static_cast<double>(h2 >> 11) * kUnit;        // [0, 1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

kernels::Program BuildProgram(const LQProblem& p, const Strategy& s) {
  if (!p.DeterministicDrivers() || !s.v.deterministic()) {
    throw UnsupportedCombination("batched kernels need deterministic offsets and drivers");
  }
  kernels::Program prog;
  prog.n = p.state_dim;
  for (int t = 0; t < p.horizon; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const Matrix& K = s.K[i];
    const Vector& v = s.v.at(t, 0);
    const Matrix RK = p.R[i] * K;
    kernels::StepData d;
    d.Acl = Flatten(Matrix(p.A[i] + p.B[i] * K));
    d.Ccl = Flatten(Matrix(p.C[i] + p.D[i] * K));
    d.c0 = Flatten(Vector(p.B[i] * v + p.b.at(t, 0)));
    d.c1 = Flatten(Vector(p.D[i] * v + p.sigma.at(t, 0)));
    d.Qcl = Flatten(Symmetrized(p.Q[i] + K.transpose() * p.S[i] + p.S[i].transpose() * K +
                                K.transpose() * RK));
    d.lcl = Flatten(Vector(p.q.at(t, 0) + K.transpose() * p.rho.at(t, 0) +
                           p.S[i].transpose() * v + RK.transpose() * v));
    d.kc = v.dot(p.R[i] * v) + 2.0 * v.dot(p.rho.at(t, 0));
    d.Un = Flatten(Matrix(K.transpose() * K));
    d.ul = Flatten(Vector(K.transpose() * v));
    d.uc = v.squaredNorm();
    prog.steps.push_back(std::move(d));
  }
  prog.H = Flatten(p.H);
  prog.g = Flatten(p.g.at(0));
  prog.x0 = Flatten(p.x0);
  return prog;
}

SimulationReport SimulateCost(const LQProblem& p, const Policy& policy, std::size_t samples,
                              std::uint64_t seed, const SimulationOptions& options) {
  p.Validate();
  if (samples < 2) throw InvalidInput("simulation needs at least two samples");
  CheckPolicy(p, policy);

  const auto* strategy = std::get_if<Strategy>(&policy);
  const bool batched = strategy != nullptr && strategy->v.deterministic() &&
                       p.DeterministicDrivers();
  if (!batched && p.noise.kind == NoiseKind::kGaussian) {
    throw UnsupportedCombination(
        "tree-adapted controls or drivers are only defined under rademacher noise");
  }

  std::vector<double> cost(samples), sup(samples), input(samples);
  SimulationReport rep;
  rep.samples = samples;
  rep.seed = seed;
  rep.noise = p.noise.kind;

  if (batched) {
    const kernels::Program prog = BuildProgram(p, *strategy);
    const kernels::Variant variant = options.variant.value_or(kernels::SelectVariant());
    rep.kernel = std::string(kernels::ToString(variant));
    double drift_energy = p.x0.squaredNorm();
    for (int t = 0; t < p.horizon; ++t) {
      drift_energy += p.b.at(t, 0).squaredNorm() + p.sigma.at(t, 0).squaredNorm();
    }
    const int N = p.horizon;
    ForBlocks(samples, [&](std::size_t begin, std::size_t end) {
      const std::size_t lanes = end - begin;
      std::vector<double> noise(static_cast<std::size_t>(N) * lanes);
      for (int t = 0; t < N; ++t) {
        for (std::size_t j = 0; j < lanes; ++j) {
          noise[static_cast<std::size_t>(t) * lanes + j] =
              NoiseSample(p.noise.kind, seed, begin + j, t);
        }
      }
      kernels::Rollout(variant, prog, noise.data(), lanes,
                       {cost.data() + begin, sup.data() + begin, input.data() + begin});
      for (std::size_t j = begin; j < end; ++j) input[j] += drift_energy;
    });
  } else {
    rep.kernel = "tree";
    ForBlocks(samples, [&](std::size_t begin, std::size_t end) {
      for (std::size_t j = begin; j < end; ++j) {
        const PathResult r =
            EvaluatePath(p, policy, seed, j, [](int, const Vector&, const Vector&) {});
        cost[j] = r.cost;
        sup[j] = r.sup_sq;
        input[j] = r.bound_input;
      }
    });
  }

  // Welford accumulation in sample order.
  double mean = 0.0;
  double m2 = 0.0;
  double sup_sum = 0.0;
  double input_sum = 0.0;
  double sup_max = 0.0;
  for (std::size_t j = 0; j < samples; ++j) {
    const double delta = cost[j] - mean;
    mean += delta / static_cast<double>(j + 1);
    m2 += delta * (cost[j] - mean);
    sup_sum += sup[j];
    input_sum += input[j];
    sup_max = std::max(sup_max, sup[j]);
  }
  const auto n = static_cast<double>(samples);
  rep.cost_mean = mean;
  rep.cost_stderr = std::sqrt(std::max(m2, 0.0) / (n - 1.0)) / std::sqrt(n);
  rep.max_state_sup = std::sqrt(sup_max);
  rep.mean_state_sup_sq = sup_sum / n;
  rep.mean_bound_input = input_sum / n;

  if (options.paths_csv != nullptr) {
    std::ostream& os = *options.paths_csv;
    os << "t,sample";
    for (int i = 0; i < p.state_dim; ++i) os << ",x_" << i;
    for (int i = 0; i < p.control_dim; ++i) os << ",u_" << i;
    os << '\n';
    const std::size_t limit = std::min(samples, options.paths_limit);
    for (std::size_t j = 0; j < limit; ++j) {
      EvaluatePath(p, policy, seed, j, [&](int t, const Vector& x, const Vector& u) {
        os << t << ',' << j;
        for (Eigen::Index i = 0; i < x.size(); ++i) os << ',' << x(i);
        for (int i = 0; i < p.control_dim; ++i) {
          os << ',';
          if (u.size() > 0) os << u(i);
        }
        os << '\n';
      });
    }
  }
  return rep;
}

StateBound StateBoundCheck(const LQProblem& p, const Strategy& s, std::size_t samples,
                           std::uint64_t seed) {
  const SimulationReport a = SimulateCost(p, s, samples, seed);
  const SimulationReport b = SimulateCost(p, s, 2 * samples, seed);
  auto fit = [](const SimulationReport& r) {
    return r.mean_bound_input > 0.0 ? r.mean_state_sup_sq / r.mean_bound_input : 0.0;
  };
  StateBound out;
  out.fitted_L = fit(a);
  out.fitted_L_doubled = fit(b);
  const double hi = std::max(out.fitted_L, out.fitted_L_doubled);
  const double lo = std::min(out.fitted_L, out.fitted_L_doubled);
  out.stable = std::isfinite(hi) && (hi == 0.0 || (lo > 0.0 && hi / lo < 2.0));
  return out;
}

}  // namespace slq
