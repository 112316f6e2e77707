#include "slq/perturb.h"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "slq/errors.h"
#include "slq/oracle.h"
#include "slq/riccati.h"
#include "test_instances.h"

namespace slq {
namespace {

using test::Drivers;

// N = 3: the multiplicative-noise steps at t = 0, 1 followed by a step that
// only copies the state, so the gain at t = 1 = N - 2 blows up.
LQProblem DivergentMiddleGain() {
  LQProblem p = test::Scalar(3, 0, 0, 1, 1, 0, 0, -1, 1, 1.0);
  p.A[2] = Matrix::Ones(1, 1);
  p.C[2] = Matrix::Zero(1, 1);
  p.D[2] = Matrix::Zero(1, 1);
  p.R[2] = Matrix::Ones(1, 1);
  return p;
}

// N = 1 with (R + eps) vanishing at eps = 1/2 and a nonzero cross term.
LQProblem PoleAtHalf() { return test::Scalar(1, 1, 0, 0, 0, 0, 1, -0.5, 0, 1.0); }

GTEST_TEST(PerturbedRiccatiTest, MultiplicativeNoiseClosedForms) {
  const LQProblem p = test::MultiplicativeNoise();
  for (double eps : {1.0, 0.5, 0.1, 0.01}) {
    const PerturbedSolution sol = PerturbedRiccati(p, eps);
    for (int t = 0; t < 2; ++t) {
      EXPECT_NEAR(sol.P[t](0, 0), (eps - 1) / (eps + 1 - t), 1e-12) << "eps=" << eps;
    }
    EXPECT_EQ(sol.P[2](0, 0), 1.0);
    for (int t = 0; t < 2; ++t) {
      EXPECT_NEAR(sol.K[t](0, 0), -1.0 / (eps + 1 - t), 1e-12) << "eps=" << eps;
    }
    EXPECT_EQ(sol.continued, eps == 1.0);
    EXPECT_FALSE(sol.all_convex());
  }
}

GTEST_TEST(PerturbedRiccatiTest, LargeEpsSuppressesCrossTerm) {
  const PerturbedSolution sol = PerturbedRiccati(test::IndefiniteWeight(), 1e6);
  for (const auto& P : sol.P) EXPECT_NEAR(P(0, 0), 1.0, 1e-5);
  for (const auto& K : sol.K) EXPECT_NEAR(K(0, 0), 0.0, 1e-5);
}

GTEST_TEST(PerturbedRiccatiTest, ZeroProblem) {
  const PerturbedSolution sol = PerturbedRiccati(test::ZeroProblem(3, 2, 1, Vector::Ones(2)), 0.3);
  for (const auto& P : sol.P) EXPECT_TRUE(P.isZero());
  EXPECT_TRUE(sol.v.IsZero());
}

GTEST_TEST(PerturbedRiccatiTest, RejectsNonPositiveEps) {
  EXPECT_THROW(PerturbedRiccati(test::IndefiniteWeight(), 0.0), InvalidInput);
  EXPECT_THROW(PerturbedRiccati(test::IndefiniteWeight(), -1.0), InvalidInput);
}

GTEST_TEST(PerturbedRiccatiTest, PoleIsReportedWithStep) {
  try {
    PerturbedRiccati(PoleAtHalf(), 0.5);
    FAIL() << "expected IllConditioned";
  } catch (const IllConditioned& e) {
    EXPECT_EQ(e.step(), 0);
  }
  EXPECT_NEAR(PerturbedRiccati(PoleAtHalf(), 0.25).K[0](0, 0), 4.0, 1e-12);
}

GTEST_TEST(PerturbedFeedbackTest, HomogeneousHasZeroOffsets) {
  std::mt19937_64 rng(60);
  const PerturbedFeedbackLaw law = PerturbedFeedback(HomogeneousOf(test::RandomIndefinite(rng, 3, 2, 2)), 0.7);
  EXPECT_TRUE(law.v.IsZero());
  for (const auto& e : law.eta) EXPECT_TRUE(e.IsZero());
}

GTEST_TEST(PerturbedFeedbackTest, SmallEpsApproachesRegularGain) {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    const LQProblem p = test::RandomConvex(rng, 3, 2, 2);
    const RiccatiSolution sol = SolveRiccati(p);
    const PerturbedFeedbackLaw law = PerturbedFeedback(p, 1e-6);
    for (int t = 0; t < 3; ++t) EXPECT_LE(MaxAbs(law.K[t] - sol.Khat[t]), 1e-4);
  }
}

// The feedback law is the closed-loop equilibrium of the eps-problem.
GTEST_TEST(PerturbedFeedbackTest, SolvesRegularizedProblem) {
  std::mt19937_64 rng(62);
  for (int trial = 0; trial < 40; ++trial) {
    const LQProblem p = trial % 2 == 0 ? test::RandomConvex(rng, 3, 2, 2, Drivers::kTree)
                                       : test::RandomIndefinite(rng, 3, 2, 1);
    LQProblem driven = p;
    driven.rho = test::RandomTreeProcess(rng, 3, p.control_dim);
    driven.b = test::RandomTreeProcess(rng, 3, p.state_dim);
    const double eps = 0.5;
    PerturbedFeedbackLaw law;
    try {
      law = PerturbedFeedback(driven, eps);
    } catch (const IllConditioned&) {
      continue;
    }
    const Strategy s{law.K, law.v};
    const double scale = 1.0 + MaxAbs(law.K[0]);
    EXPECT_LE(ClosedLoopResidual(RegularizedProblem(driven, eps), s), 1e-8 * scale);
  }
}

GTEST_TEST(ScheduleTest, Geometric) {
  const std::vector<double> s = GeometricSchedule(1.0, 0.5, 3);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[2], 0.25);
  EXPECT_EQ(DefaultSchedule().size(), 21u);
  EXPECT_EQ(DefaultSchedule().back(), std::ldexp(1.0, -20));
  EXPECT_THROW(GeometricSchedule(1.0, 1.5, 3), InvalidInput);
  EXPECT_THROW(GeometricSchedule(0.0, 0.5, 3), InvalidInput);
  EXPECT_THROW(GeometricSchedule(1.0, 0.5, 0), InvalidInput);
}

GTEST_TEST(EpsilonSweepTest, MultiplicativeNoiseNorms) {
  const PerturbationRun run = EpsilonSweep(test::MultiplicativeNoise(1.0), {1, 0.5, 0.1, 0.01});
  ASSERT_EQ(run.successful().size(), 4u);
  for (const auto& e : run.entries) {
    EXPECT_NEAR(e.control_norm, 2.0 / ((1 + e.eps) * (1 + e.eps)), 1e-12);
  }
}

GTEST_TEST(EpsilonSweepTest, ZeroProblemHasZeroNorms) {
  const PerturbationRun run =
      EpsilonSweep(test::ZeroProblem(2, 1, 1, Vector::Ones(1)), GeometricSchedule(1, 0.5, 6));
  for (const auto& e : run.entries) EXPECT_EQ(e.control_norm, 0.0);
  EXPECT_EQ(BoundednessVerdict(run).verdict, Boundedness::kOpenLoopSolvable);
}

GTEST_TEST(EpsilonSweepTest, DivergenceNormsGrowLikeInverseSquare) {
  const PerturbationRun run = EpsilonSweep(test::Divergence(), DefaultSchedule());
  for (const auto& e : run.entries) {
    EXPECT_NEAR(e.control_norm * e.eps * e.eps, 1.0, 1e-12);
  }
  const BoundednessReport rep = BoundednessVerdict(run);
  EXPECT_EQ(rep.verdict, Boundedness::kNotOpenLoopSolvable);
  EXPECT_NEAR(rep.norm_exponent, 2.0, 0.2);
}

GTEST_TEST(EpsilonSweepTest, FailuresAreRecordedAndSweepContinues) {
  const PerturbationRun run = EpsilonSweep(PoleAtHalf(), {1.0, 0.5, 0.25});
  ASSERT_EQ(run.entries.size(), 3u);
  EXPECT_TRUE(run.entries[0].ok());
  EXPECT_FALSE(run.entries[1].ok());
  EXPECT_EQ(run.entries[1].error_step, 0);
  EXPECT_TRUE(run.entries[2].ok());
  EXPECT_EQ(run.successful().size(), 2u);
}

GTEST_TEST(EpsilonSweepTest, RejectsBadSchedules) {
  const LQProblem p = test::IndefiniteWeight();
  EXPECT_THROW(EpsilonSweep(p, {}), InvalidInput);
  EXPECT_THROW(EpsilonSweep(p, {0.5, 1.0}), InvalidInput);
  EXPECT_THROW(EpsilonSweep(p, {1.0, 0.0}), InvalidInput);
}

// V_eps decreases to V from above and the control norms increase.
GTEST_TEST(EpsilonSweepTest, ValueSandwichAndNormMonotonicity) {
  std::mt19937_64 rng(63);
  for (int trial = 0; trial < 20; ++trial) {
    const LQProblem p = test::RandomConvex(rng, 3, 2, 2, static_cast<Drivers>(trial % 3));
    const double value = ExactValue(p).value;
    const PerturbationRun run = EpsilonSweep(p, DefaultSchedule());
    const BoundednessReport rep = BoundednessVerdict(run, kDefaultGrowthTol, value);
    EXPECT_EQ(rep.verdict, Boundedness::kOpenLoopSolvable);
    EXPECT_TRUE(rep.value_monotone);
    ASSERT_TRUE(rep.value_bracket.has_value());
    EXPECT_TRUE(*rep.value_bracket);
    EXPECT_LE(std::abs(run.entries.back().value - value), 1e-4);
    for (std::size_t k = 1; k < run.entries.size(); ++k) {
      EXPECT_GE(run.entries[k].control_norm,
                run.entries[k - 1].control_norm * (1 - 1e-12) - 1e-15);
    }
  }
}

GTEST_TEST(BoundednessTest, NeedsFourPoints) {
  const PerturbationRun run = EpsilonSweep(test::MultiplicativeNoise(), {1, 0.5, 0.25});
  EXPECT_THROW(BoundednessVerdict(run), InvalidInput);
}

GTEST_TEST(BoundednessTest, IndefiniteWeightIsNotSolvable) {
  const PerturbationRun run = EpsilonSweep(test::IndefiniteWeight(), DefaultSchedule());
  const BoundednessReport rep = BoundednessVerdict(run);
  EXPECT_EQ(rep.verdict, Boundedness::kNotOpenLoopSolvable);
  EXPECT_EQ(ToString(rep.verdict), "not-open-loop-solvable");
  EXPECT_THROW(ExtractOpenLoopLimit(run, 1e-6), ConvergenceFailure);
}

GTEST_TEST(BoundednessTest, GrowthExponent) {
  const std::vector<double> eps = {1, 0.5, 0.25, 0.125};
  std::vector<double> y;
  for (double e : eps) y.push_back(3.0 / (e * e));
  EXPECT_NEAR(FitGrowthExponent(eps, y), 2.0, 1e-12);
  EXPECT_NEAR(FitGrowthExponent(eps, {5, 5, 5, 5}), 0.0, 1e-12);
  EXPECT_THROW(FitGrowthExponent({1}, {1}), InvalidInput);
}

GTEST_TEST(OpenLoopLimitTest, MultiplicativeNoise) {
  const double x0 = 1.5;
  const PerturbationRun run = EpsilonSweep(test::MultiplicativeNoise(x0), DefaultSchedule());
  EXPECT_EQ(BoundednessVerdict(run).verdict, Boundedness::kOpenLoopSolvable);
  const OpenLoopLimit lim = ExtractOpenLoopLimit(run, 1e-6);
  EXPECT_NEAR(lim.u.at(0, 0)(0), -x0, 1e-6);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_NEAR(lim.u.at(1, k)(0), -x0 * NoiseAt(k, 0), 1e-6);
  }
}

GTEST_TEST(OpenLoopLimitTest, MatchesOracleOnConvexInstances) {
  std::mt19937_64 rng(64);
  for (int trial = 0; trial < 10; ++trial) {
    const LQProblem p = test::RandomConvex(rng, 3, 2, 1, static_cast<Drivers>(trial % 3));
    const OpenLoopLimit lim = ExtractOpenLoopLimit(EpsilonSweep(p, DefaultSchedule()), 1e-6);
    EXPECT_LE(ProcessMaxDifference(lim.u, ExactValue(p).optimal_control), 1e-6);
  }
}

GTEST_TEST(WeakClosedLoopTest, MultiplicativeNoiseWindowZero) {
  const PerturbationRun run = EpsilonSweep(test::MultiplicativeNoise(), DefaultSchedule());
  const WeakClosedLoop wcl = ExtractWeakClosedLoop(run, 0, 1e-6);
  ASSERT_EQ(wcl.strategy.K.size(), 1u);
  EXPECT_NEAR(wcl.strategy.K[0](0, 0), -1.0, 1e-6);
  EXPECT_EQ(wcl.divergent_steps, std::vector<int>{1});
  EXPECT_LE(wcl.reproduction_error, 1e-5);
  EXPECT_THROW(ExtractWeakClosedLoop(run, 1, 1e-6), InvalidInput);
}

GTEST_TEST(WeakClosedLoopTest, DivergentStepInsideWindow) {
  const PerturbationRun run = EpsilonSweep(DivergentMiddleGain(), DefaultSchedule());
  try {
    ExtractWeakClosedLoop(run, 1, 1e-6);
    FAIL() << "expected WindowTooLong";
  } catch (const WindowTooLong& e) {
    EXPECT_EQ(e.step(), 1);
  }
  const WeakClosedLoop wcl = ExtractWeakClosedLoop(run, 0, 1e-6);
  EXPECT_NEAR(wcl.strategy.K[0](0, 0), -1.0, 1e-6);
}

GTEST_TEST(WeakClosedLoopTest, RegularInstanceMatchesRiccati) {
  std::mt19937_64 rng(65);
  const LQProblem p = test::RandomConvex(rng, 4, 2, 1, Drivers::kDeterministic);
  const WeakClosedLoop wcl = ExtractWeakClosedLoop(EpsilonSweep(p, DefaultSchedule()), 2, 1e-6);
  const RiccatiSolution sol = SolveRiccati(p);
  EXPECT_TRUE(wcl.divergent_steps.empty());
  for (int t = 0; t <= 2; ++t) {
    EXPECT_LE(MaxAbs(wcl.strategy.K[t] - sol.Khat[t]), 1e-6);
    EXPECT_LE(MaxAbs(wcl.strategy.v.at(t, 0) - sol.vhat.at(t, 0)), 1e-6);
  }
}

}  // namespace
}  // namespace slq
