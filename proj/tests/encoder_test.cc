// Copyright 2026 The ShiftLab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "shiftlab/encoder.h"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "gradient_check.h"
#include "oracle.h"
#include "shiftlab/analysis.h"
#include "shiftlab/datasets.h"
#include "shiftlab/error.h"
#include "shiftlab/info.h"
#include "test_util.h"

namespace shiftlab {
namespace {

using ::shiftlab::testing::CheckGradient;
using ::shiftlab::testing::ExpectError;
using ::shiftlab::testing::ReferenceObjective;

JointTable View(DatasetVariant v) { return SufficientStatisticView(BuildJoint(v)); }

EncoderParams Saturated(const std::vector<int>& mapping, int nz) {
  EncoderParams p(static_cast<int>(mapping.size()), nz);
  for (std::size_t x = 0; x < mapping.size(); ++x) p(static_cast<int>(x), mapping[x]) = 40.0;
  return p;
}

// R computed with the info module on the train split extended by the encoder.
double RegularizerOracle(const JointTable& train_with_z, Criterion c) {
  switch (c) {
    case Criterion::kBottleneck:
      return MutualInformation(train_with_z, {kFeatures}, {kLatent});
    case Criterion::kIndependence:
      return MutualInformation(train_with_z, {kEnvironment}, {kLatent});
    case Criterion::kSufficiency:
      return MutualInformation(train_with_z, {kTarget}, {kEnvironment}, {kLatent});
    case Criterion::kSeparation:
      return MutualInformation(train_with_z, {kEnvironment}, {kLatent}, {kTarget});
  }
  return 0.0;
}

TEST(CriterionTest, NamesRoundTrip) {
  for (Criterion c : kAllCriteria) EXPECT_EQ(ParseCriterion(CriterionName(c)), c);
  ExpectError(ErrorCode::kInvalidArgument, [] { ParseCriterion("fairness"); });
}

TEST(InitParamsTest, ZeroSigmaAndDeterminism) {
  const EncoderParams zero = InitParams(3, 0.0);
  EXPECT_EQ(zero.num_inputs(), kNumFeatureStates);
  EXPECT_EQ(zero.num_latents(), kDefaultLatentStates);
  for (double v : zero.logits()) EXPECT_EQ(v, 0.0);
  const Channel uniform = Materialize(zero);
  for (double q : uniform.table()) EXPECT_NEAR(q, 1.0 / 64, 1e-17);

  EXPECT_EQ(InitParams(5, 1.0).logits(), InitParams(5, 1.0).logits());
  EXPECT_NE(InitParams(5, 1.0).logits(), InitParams(6, 1.0).logits());
  ExpectError(ErrorCode::kInvalidArgument, [] { InitParams(1, -1.0); });
}

TEST(MaterializeTest, RowsAreDistributions) {
  const Channel q = Materialize(InitParams(7, 0.1));
  for (std::size_t x = 0; x < q.num_input_states(); ++x) {
    double sum = 0.0;
    for (double v : q.Row(x)) {
      EXPECT_GT(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  EXPECT_EQ(q.output().name, kLatent);
  EXPECT_EQ(q.InputNames(), (std::vector<std::string>{kFeatures}));
}

TEST(MaterializeTest, SaturatedRowIsOneHot) {
  EncoderParams p = InitParams(1, 0.0);
  p(3, 17) = 40.0;
  const Channel q = Materialize(p);
  EXPECT_NEAR(q(3, 17), 1.0, 1e-15);
  EXPECT_NEAR(q(3, 0), 0.0, 1e-15);
}

TEST(MaterializeTest, RejectsNonFinite) {
  EncoderParams p = InitParams(1, 1.0);
  p(0, 0) = std::numeric_limits<double>::quiet_NaN();
  ExpectError(ErrorCode::kNonFiniteLogits, [&] { Materialize(p); });
  p(0, 0) = std::numeric_limits<double>::infinity();
  ExpectError(ErrorCode::kNonFiniteLogits, [&] { Materialize(p); });
}

TEST(ObjectiveTest, LosslessEncoderAtZeroLambda) {
  const JointTable j = View(DatasetVariant::kCmnist);
  std::vector<int> ident(kNumFeatureStates);
  for (int i = 0; i < kNumFeatureStates; ++i) ident[i] = i;
  const JointTable train = j.Condition({{kSelection, 1}});
  for (Criterion c : kAllCriteria) {
    EXPECT_NEAR(Objective(Saturated(ident, 64), j, c, 0.0),
                -MutualInformation(train, {kFeatures}, {kTarget}), 1e-12);
  }
}

TEST(ObjectiveTest, ConstantEncoderIsZero) {
  const JointTable j = View(DatasetVariant::kCmnist);
  const EncoderParams constant = Saturated(std::vector<int>(kNumFeatureStates, 5), 64);
  for (Criterion c : kAllCriteria) {
    EXPECT_NEAR(Objective(constant, j, c, 3.0), 0.0, 1e-12) << CriterionName(c);
  }
}

// With a constant z the sufficiency penalty is I1(y;e), which is positive
// when the label distribution moves across training environments.
TEST(ObjectiveTest, ConstantEncoderSufficiencyKeepsLabelShift) {
  const EncoderParams constant = Saturated(std::vector<int>(kNumFeatureStates, 5), 64);
  for (DatasetVariant v : {DatasetVariant::kDCmnist, DatasetVariant::kYCmnist}) {
    const JointTable j = View(v);
    const double i_ye =
        MutualInformation(j.Condition({{kSelection, 1}}), {kTarget}, {kEnvironment});
    EXPECT_GT(i_ye, 0.01);
    EXPECT_NEAR(Objective(constant, j, Criterion::kSufficiency, 3.0), 3.0 * i_ye, 1e-12);
    EXPECT_NEAR(Objective(constant, j, Criterion::kSeparation, 3.0), 0.0, 1e-12);
  }
}

TEST(ObjectiveTest, UniformEncoderSufficiency) {
  EXPECT_NEAR(Objective(InitParams(0, 0.0), View(DatasetVariant::kCmnist),
                        Criterion::kSufficiency, 1.0),
              0.0, 1e-12);
}

// Every term against the info module on the extended train joint.
TEST(ObjectivePropertyTest, TermsMatchInfoModule) {
  std::mt19937_64 gen(21);
  for (DatasetVariant v : kAllVariants) {
    const JointTable j = View(v);
    const EncoderProblem problem(j);
    for (int trial = 0; trial < 8; ++trial) {
      const EncoderParams p = InitParams(gen(), 2.0, kNumFeatureStates, 8);
      const JointTable train_z = j.Extend(Materialize(p)).Condition({{kSelection, 1}});
      const double info = MutualInformation(train_z, {kTarget}, {kLatent});
      for (Criterion c : kAllCriteria) {
        const double lambda = 0.5 + trial;
        const ObjectiveTerms t = problem.Evaluate(p, c, lambda);
        const double r = RegularizerOracle(train_z, c);
        EXPECT_NEAR(t.predictive_info, info, 1e-12);
        EXPECT_NEAR(t.regularizer, r, 1e-12) << CriterionName(c);
        EXPECT_NEAR(t.objective, -info + lambda * r, 1e-10);
      }
    }
  }
}

TEST(MetricsTest, MatchesInducedModelCrossEntropy) {
  std::mt19937_64 gen(22);
  for (DatasetVariant v : kAllVariants) {
    const JointTable j = View(v);
    const EncoderProblem problem(j);
    const EncoderParams p = InitParams(gen(), 1.5, kNumFeatureStates, 6);
    const Channel enc = Materialize(p);
    const Channel model = InducedModel(enc, OptimalLatentClassifier(j.Extend(enc)));
    const CrossEntropies ce = problem.Metrics(p);
    EXPECT_NEAR(ce.train, CrossEntropy(j, model, kTarget, {kFeatures}, 1).nats, 1e-12);
    EXPECT_NEAR(ce.test, CrossEntropy(j, model, kTarget, {kFeatures}, 0).nats, 1e-12);
  }
}

TEST(MetricsTest, ConstantEncoderGivesPriorCrossEntropy) {
  const EncoderProblem problem(View(DatasetVariant::kCmnist));
  const CrossEntropies ce =
      problem.Metrics(Saturated(std::vector<int>(kNumFeatureStates, 0), 4));
  EXPECT_NEAR(ce.train, std::log(2.0), 1e-12);
  EXPECT_NEAR(ce.test, std::log(2.0), 1e-12);
}

TEST(GradientTest, RowsSumToZero) {
  const EncoderProblem problem(View(DatasetVariant::kYCmnist));
  for (const EncoderParams& p : {InitParams(0, 0.0), InitParams(4, 1.0)}) {
    for (Criterion c : kAllCriteria) {
      const std::vector<double> g = problem.Gradient(p, c, 1.0);
      for (int x = 0; x < p.num_inputs(); ++x) {
        double sum = 0.0;
        for (int z = 0; z < p.num_latents(); ++z) sum += g[x * p.num_latents() + z];
        EXPECT_NEAR(sum, 0.0, 1e-14);
      }
    }
  }
}

TEST(GradientTest, LinearInLambda) {
  const EncoderProblem problem(View(DatasetVariant::kDCmnist));
  const EncoderParams p = InitParams(8, 1.0);
  for (Criterion c : kAllCriteria) {
    const auto g0 = problem.Gradient(p, c, 0.0);
    const auto g1 = problem.Gradient(p, c, 1.0);
    const auto g2 = problem.Gradient(p, c, 2.0);
    for (std::size_t i = 0; i < g0.size(); ++i) {
      EXPECT_NEAR(g2[i] - g0[i], 2.0 * (g1[i] - g0[i]), 1e-12);
    }
  }
}

oracle::Variant ToOracle(DatasetVariant v) {
  return v == DatasetVariant::kCmnist    ? oracle::Variant::kCmnist
         : v == DatasetVariant::kDCmnist ? oracle::Variant::kDCmnist
                                         : oracle::Variant::kYCmnist;
}

TEST(GradientTest, ReferenceObjectiveAgrees) {
  std::mt19937_64 gen(24);
  for (DatasetVariant v : kAllVariants) {
    const EncoderProblem problem(View(v));
    const ReferenceObjective reference(oracle::Train(oracle::Build(ToOracle(v))));
    const EncoderParams p = InitParams(gen(), 2.0, kNumFeatureStates, 12);
    for (Criterion c : kAllCriteria) {
      EXPECT_NEAR(static_cast<double>(reference.Evaluate(p, c, 1.3)),
                  problem.Evaluate(p, c, 1.3).objective, 1e-12);
      // The difference form agrees with two separate evaluations at a step
      // large enough for plain subtraction.
      const double h = 1e-2;
      const auto diffs = reference.CentralDifferences(p, c, 1.3, h);
      for (int i : {0, 37, 200}) {
        EncoderParams up = p, down = p;
        up.logits()[i] += h;
        down.logits()[i] -= h;
        EXPECT_NEAR(static_cast<double>(diffs[i]),
                    static_cast<double>(reference.Evaluate(up, c, 1.3) -
                                        reference.Evaluate(down, c, 1.3)),
                    1e-15);
      }
    }
  }
}

TEST(GradientTest, MatchesFiniteDifferences) {
  std::mt19937_64 gen(23);
  for (Criterion c : kAllCriteria) {
    for (DatasetVariant v : kAllVariants) {
      const EncoderProblem problem(View(v));
      const ReferenceObjective reference(oracle::Train(oracle::Build(ToOracle(v))));
      const EncoderParams p = InitParams(gen(), 1.0);
      const auto check = CheckGradient(problem, reference, p, c, 0.7);
      EXPECT_TRUE(check.Passed()) << CriterionName(c) << " " << VariantName(v)
                                  << " rel " << check.max_relative << " abs "
                                  << check.max_absolute;
    }
  }
}

TEST(OptimizerConfigTest, Validation) {
  const auto bad = [](auto mutate) {
    OptimizerConfig c;
    mutate(c);
    ExpectError(ErrorCode::kInvalidArgument, [&] { c.Validate(); });
  };
  bad([](OptimizerConfig& c) { c.learning_rate = 0.0; });
  bad([](OptimizerConfig& c) { c.beta1 = 1.0; });
  bad([](OptimizerConfig& c) { c.beta2 = -0.1; });
  bad([](OptimizerConfig& c) { c.convergence_window = 0; });
  bad([](OptimizerConfig& c) { c.max_iterations = 0; });
  OptimizerConfig{}.Validate();
  ExpectError(ErrorCode::kInvalidArgument, [] {
    Optimize(View(DatasetVariant::kCmnist), Criterion::kSufficiency, -1.0, {});
  });
}

TEST(OptimizeTest, MaximumLikelihoodLimit) {
  const oracle::Dist train = oracle::Train(oracle::Build(oracle::Variant::kCmnist));
  const double h_y_given_x =
      oracle::H(train, oracle::Join({oracle::kY, oracle::kX})) - oracle::H(train, oracle::kX);
  const double i_xy = oracle::Mi(train, oracle::kX, oracle::kY);
  OptimizerConfig config;
  config.seed = 1;
  const OptimizeResult r =
      Optimize(View(DatasetVariant::kCmnist), Criterion::kSufficiency, 0.0, config);
  EXPECT_TRUE(r.point.converged);
  EXPECT_NEAR(r.point.train_ce, h_y_given_x, 1e-3);
  EXPECT_GE(r.point.predictive_info, i_xy - 1e-3);
  EXPECT_LE(r.final_objective, r.initial_objective + 1e-9);
  EXPECT_EQ(r.history.size(), static_cast<std::size_t>(r.point.iterations) + 1);
  EXPECT_EQ(r.point.lambda, 0.0);
}

TEST(OptimizeTest, IterationCapReturnsBestIterate) {
  OptimizerConfig config;
  config.max_iterations = 25;
  config.seed = 2;
  const OptimizeResult r =
      Optimize(View(DatasetVariant::kYCmnist), Criterion::kSeparation, 10.0, config);
  EXPECT_FALSE(r.point.converged);
  EXPECT_EQ(r.point.iterations, 25);
  EXPECT_LE(r.final_objective, r.initial_objective);
  for (double v : r.params.logits()) EXPECT_TRUE(std::isfinite(v));
}

TEST(OptimizeTest, DeterministicPerSeed) {
  OptimizerConfig config;
  config.max_iterations = 300;
  config.seed = 9;
  const JointTable j = View(DatasetVariant::kDCmnist);
  const auto a = Optimize(j, Criterion::kIndependence, 1.0, config);
  const auto b = Optimize(j, Criterion::kIndependence, 1.0, config);
  EXPECT_EQ(a.params.logits(), b.params.logits());
  EXPECT_EQ(a.point.test_ce, b.point.test_ce);
}

// Objective descent and row-stochastic encoders along short runs.
TEST(OptimizePropertyTest, DescentOnConvergedRuns) {
  const JointTable j = View(DatasetVariant::kCmnist);
  for (Criterion c : kAllCriteria) {
    OptimizerConfig config;
    config.seed = 31;
    config.num_latents = 8;
    config.convergence_window = 50;
    config.convergence_tolerance = 1e-3;
    config.max_iterations = 20'000;
    const OptimizeResult r = Optimize(j, c, 0.1, config);
    if (r.point.converged) {
      EXPECT_LE(r.final_objective, r.initial_objective + 1e-9) << CriterionName(c);
    }
    const Channel q = Materialize(r.params);
    for (std::size_t x = 0; x < q.num_input_states(); ++x) {
      double sum = 0.0;
      for (double v : q.Row(x)) sum += v;
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(LambdaGridTest, Defaults) {
  for (Criterion c : kAllCriteria) {
    const auto g = DefaultLambdaGrid(c);
    ASSERT_EQ(g.size(), 26u);
    EXPECT_EQ(g[0], 0.0);
    const bool bn = c == Criterion::kBottleneck;
    EXPECT_NEAR(g[1], bn ? 1e-3 : 1e-2, 1e-15);
    EXPECT_NEAR(g[25] / (bn ? 10.0 : 1e6), 1.0, 1e-12);
    for (std::size_t i = 2; i < g.size(); ++i) {
      EXPECT_NEAR(std::log(g[i] / g[i - 1]), std::log(g[2] / g[1]), 1e-9);
    }
  }
}

TEST(SweepTest, DerivedSeedsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::size_t i = 0; i < 1000; ++i) seen.insert(DerivedSeed(42, i));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(DerivedSeed(42, 3), DerivedSeed(42, 3));
}

TEST(SweepTest, SinglePointAndThreadIndependence) {
  const JointTable j = View(DatasetVariant::kCmnist);
  OptimizerConfig config;
  config.max_iterations = 200;
  config.seed = 4;
  const Trajectory one = Sweep(j, Criterion::kSufficiency, {0.0}, config);
  ASSERT_EQ(one.points.size(), 1u);
  EXPECT_EQ(one.points[0].lambda, 0.0);

  const std::vector<double> grid = {0.0, 0.1, 1.0, 10.0};
  const Trajectory serial = Sweep(j, Criterion::kSeparation, grid, config, 1);
  const Trajectory parallel = Sweep(j, Criterion::kSeparation, grid, config, 3);
  EXPECT_EQ(TrajectoryCsv(serial), TrajectoryCsv(parallel));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    OptimizerConfig local = config;
    local.seed = DerivedSeed(config.seed, i);
    EXPECT_EQ(serial.points[i].test_ce,
              Optimize(j, Criterion::kSeparation, grid[i], local).point.test_ce);
  }
  ExpectError(ErrorCode::kInvalidArgument,
              [&] { Sweep(j, Criterion::kSufficiency, {1.0, 0.5}, config); });
  ExpectError(ErrorCode::kInvalidArgument,
              [&] { Sweep(j, Criterion::kSufficiency, {}, config); });
}

TEST(TrajectoryCsvTest, Format) {
  Trajectory t;
  t.points.push_back({0.5, 0.123456789012, 1.0 / 3, 0.0, 2.0, 17, true});
  t.points.push_back({1e6, 0.7, 0.7, 1e-12, 0.0, 200000, false});
  EXPECT_EQ(TrajectoryCsv(t),
            "lambda,train_ce,test_ce,regularizer,predictive_info,iterations,converged\n"
            "0.5,0.123456789,0.333333333,0,2,17,1\n"
            "1000000,0.7,0.7,1e-12,0,200000,0\n");
}

}  // namespace
}  // namespace shiftlab
