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

// Direct optimization of a discrete stochastic encoder q(z | x).
//
// The encoder is a row-wise softmax over a logit matrix with one row per
// feature state. Every criterion minimizes
//
//   L = -I_{t=1}(y; z) + lambda * R_{t=1}
//
// where R is I(x;z) (bottleneck), I(e;z) (independence), I(y;e|z)
// (sufficiency) or I(e;z|y) (separation), all evaluated exactly on the
// training split. The latent classifier is always the optimal p(y | z, t=1).

#ifndef SHIFTLAB_ENCODER_H_
#define SHIFTLAB_ENCODER_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "shiftlab/joint_table.h"

namespace shiftlab {

enum class Criterion { kBottleneck, kIndependence, kSufficiency, kSeparation };

inline constexpr Criterion kAllCriteria[] = {
    Criterion::kBottleneck, Criterion::kIndependence, Criterion::kSufficiency,
    Criterion::kSeparation};

std::string_view CriterionName(Criterion criterion);
Criterion ParseCriterion(std::string_view name);

inline constexpr int kDefaultLatentStates = 64;

class EncoderParams {
 public:
  EncoderParams() = default;
  EncoderParams(int num_inputs, int num_latents)
      : num_inputs_(num_inputs),
        num_latents_(num_latents),
        logits_(static_cast<std::size_t>(num_inputs) * num_latents, 0.0) {}

  int num_inputs() const { return num_inputs_; }
  int num_latents() const { return num_latents_; }
  std::vector<double>& logits() { return logits_; }
  const std::vector<double>& logits() const { return logits_; }
  double& operator()(int x, int z) { return logits_[Index(x, z)]; }
  double operator()(int x, int z) const { return logits_[Index(x, z)]; }

 private:
  std::size_t Index(int x, int z) const {
    return static_cast<std::size_t>(x) * num_latents_ + z;
  }

  int num_inputs_ = 0;
  int num_latents_ = 0;
  std::vector<double> logits_;
};

// I.i.d. Gaussian(0, sigma^2) logits from a seeded mt19937_64.
EncoderParams InitParams(std::uint64_t seed, double sigma, int num_inputs = 20,
                         int num_latents = kDefaultLatentStates);

// Row-wise softmax as a channel x -> z. Throws kNonFiniteLogits.
Channel Materialize(const EncoderParams& params);

struct ObjectiveTerms {
  double objective = 0.0;
  double predictive_info = 0.0;  // I_{t=1}(y; z)
  double regularizer = 0.0;      // R_{t=1}
};

struct CrossEntropies {
  double train = 0.0;
  double test = 0.0;
};

// Precomputed split tables of a dataset joint over (x, y, e, t). Evaluation
// and differentiation are specialised to this layout.
class EncoderProblem {
 public:
  explicit EncoderProblem(const JointTable& dataset_joint);

  int num_inputs() const { return nx_; }

  ObjectiveTerms Evaluate(const EncoderParams& params, Criterion criterion,
                          double lambda) const;
  // dL / dlogits, same layout as params.logits().
  std::vector<double> Gradient(const EncoderParams& params, Criterion criterion,
                               double lambda) const;
  // Train / test cross-entropy of sum_z q(z|x) p(y|z, t=1).
  CrossEntropies Metrics(const EncoderParams& params) const;

  // Shared forward pass; public so the optimizer can fuse metrics, objective
  // and gradient into one evaluation per iteration.
  struct Workspace;
  void Forward(const EncoderParams& params, Workspace& ws) const;
  ObjectiveTerms Terms(const Workspace& ws, Criterion criterion,
                       double lambda) const;
  CrossEntropies Metrics(const Workspace& ws) const;
  void Backward(const Workspace& ws, Criterion criterion, double lambda,
                std::vector<double>& grad) const;

  struct Workspace {
    int nz = 0;
    std::vector<double> q;     // q(z | x), nx * nz
    std::vector<double> pzye;  // p(z, y, e | t=1)
    std::vector<double> pzy;
    std::vector<double> pze;
    std::vector<double> pz;
    // Natural logs of the above (0 where the probability vanishes).
    std::vector<double> log_q;
    std::vector<double> log_pzye;
    std::vector<double> log_pzy;
    std::vector<double> log_pze;
    std::vector<double> log_pz;
  };

 private:
  int nx_ = 0;
  int ny_ = 0;
  int ne_ = 0;
  std::vector<double> train_xye_;  // p(x, y, e | t=1)
  std::vector<double> train_xy_;
  std::vector<double> test_xy_;    // p(x, y | t=0)
  std::vector<double> train_x_;
  double h_x_ = 0.0;
  double h_y_ = 0.0;
  double h_e_ = 0.0;
  double h_ye_ = 0.0;
};

// Convenience wrappers that build an EncoderProblem from the joint.
double Objective(const EncoderParams& params, const JointTable& dataset_joint,
                 Criterion criterion, double lambda);
std::vector<double> Gradient(const EncoderParams& params,
                             const JointTable& dataset_joint,
                             Criterion criterion, double lambda);

struct OptimizerConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_iterations = 200'000;
  double convergence_tolerance = 1e-4;
  int convergence_window = 1000;
  std::uint64_t seed = 0;
  // Wide enough that the initial encoder is close to a random hard
  // assignment of inputs to latent states.
  double init_sigma = 20.0;
  int num_latents = kDefaultLatentStates;

  // Throws kInvalidArgument.
  void Validate() const;
};

struct TrajectoryPoint {
  double lambda = 0.0;
  double train_ce = 0.0;
  double test_ce = 0.0;
  double regularizer = 0.0;
  double predictive_info = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct OptimizeResult {
  EncoderParams params;
  TrajectoryPoint point;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  // Train / test cross-entropy after every iteration (index 0 = init).
  std::vector<CrossEntropies> history;
};

// Adam descent from InitParams(config.seed, config.init_sigma). Stops once the
// total variation of both train and test cross-entropy over the trailing
// convergence_window iterations is below convergence_tolerance. If
// max_iterations is reached first, the lowest-objective iterate is returned
// with converged = false.
OptimizeResult Optimize(const JointTable& dataset_joint, Criterion criterion,
                        double lambda, const OptimizerConfig& config);

struct Trajectory {
  Criterion criterion = Criterion::kSufficiency;
  std::vector<TrajectoryPoint> points;
};

// {0} plus 25 log-spaced values in [1e-2, 1e6] ([1e-3, 10] for the
// bottleneck).
std::vector<double> DefaultLambdaGrid(Criterion criterion);

// Seed used for grid point `index`; distinct per point, stable per config.
std::uint64_t DerivedSeed(std::uint64_t seed, std::size_t index);

// One fresh optimization per lambda. `threads` <= 1 runs sequentially.
Trajectory Sweep(const JointTable& dataset_joint, Criterion criterion,
                 const std::vector<double>& lambda_grid,
                 const OptimizerConfig& config, int threads = 1);

// Header "lambda,train_ce,test_ce,regularizer,predictive_info,iterations,
// converged"; floats with 9 significant digits.
std::string TrajectoryCsv(const Trajectory& trajectory);

}  // namespace shiftlab

#endif  // SHIFTLAB_ENCODER_H_
