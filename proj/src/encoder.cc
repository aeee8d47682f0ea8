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

#include <algorithm>
#include <mutex>
#include <atomic>
#include <cmath>
#include <deque>
#include <random>
#include <thread>

#include "shiftlab/error.h"
#include "shiftlab/info.h"
#include "shiftlab/io.h"

namespace shiftlab {
namespace {

double XLogX(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

double EntropyOf(const std::vector<double>& probs) {
  double h = 0.0;
  for (double p : probs) h -= XLogX(p);
  return h;
}

// log p, with 0 standing in where p vanishes (it is always multiplied by p or
// by a weight that vanishes with p).
void FillLogs(const std::vector<double>& probs, std::vector<double>& logs) {
  logs.resize(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    logs[i] = probs[i] > 0.0 ? std::log(probs[i]) : 0.0;
  }
}

double EntropyOf(const std::vector<double>& probs,
                 const std::vector<double>& logs) {
  double h = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) h -= probs[i] * logs[i];
  return h;
}

// -(log p + 1), the derivative of -p log p; zero where p vanishes.
double EntropyDerivative(double p, double log_p) {
  return p > 0.0 ? -(log_p + 1.0) : 0.0;
}

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Coefficients of the z-dependent entropies H(z), H(z,y), H(z,e), H(z,y,e)
// and H(x,z) in L = -I(y;z) + lambda * R.
struct EntropyWeights {
  double z = 0.0;
  double zy = 0.0;
  double ze = 0.0;
  double zye = 0.0;
  double xz = 0.0;
};

EntropyWeights WeightsFor(Criterion criterion, double lambda) {
  // -I(y;z) = -H(z) - H(y) + H(z,y)
  EntropyWeights w{-1.0, 1.0, 0.0, 0.0, 0.0};
  switch (criterion) {
    case Criterion::kBottleneck:  // H(z) + H(x) - H(x,z)
      w.z += lambda;
      w.xz -= lambda;
      break;
    case Criterion::kIndependence:  // H(z) + H(e) - H(z,e)
      w.z += lambda;
      w.ze -= lambda;
      break;
    case Criterion::kSufficiency:  // H(z,y) + H(z,e) - H(z,y,e) - H(z)
      w.zy += lambda;
      w.ze += lambda;
      w.zye -= lambda;
      w.z -= lambda;
      break;
    case Criterion::kSeparation:  // H(z,y) + H(y,e) - H(z,y,e) - H(y)
      w.zy += lambda;
      w.zye -= lambda;
      break;
  }
  return w;
}

}  // namespace

std::string_view CriterionName(Criterion criterion) {
  switch (criterion) {
    case Criterion::kBottleneck: return "bottleneck";
    case Criterion::kIndependence: return "independence";
    case Criterion::kSufficiency: return "sufficiency";
    case Criterion::kSeparation: return "separation";
  }
  return "";
}

Criterion ParseCriterion(std::string_view name) {
  for (Criterion c : kAllCriteria) {
    if (name == CriterionName(c)) return c;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown criterion '" + std::string(name) + "'");
}

EncoderParams InitParams(std::uint64_t seed, double sigma, int num_inputs,
                         int num_latents) {
  if (!(sigma >= 0.0) || num_inputs < 1 || num_latents < 1) {
    throw Error(ErrorCode::kInvalidArgument, "invalid encoder initialization");
  }
  EncoderParams params(num_inputs, num_latents);
  if (sigma == 0.0) return params;
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  for (double& v : params.logits()) v = normal(gen);
  return params;
}

namespace {

void Softmax(const EncoderParams& params, std::vector<double>& q,
             std::vector<double>* log_q = nullptr) {
  const int nz = params.num_latents();
  q.resize(params.logits().size());
  if (log_q != nullptr) log_q->resize(q.size());
  for (int x = 0; x < params.num_inputs(); ++x) {
    const double* row = &params.logits()[static_cast<std::size_t>(x) * nz];
    double* out = &q[static_cast<std::size_t>(x) * nz];
    double hi = row[0];
    for (int k = 1; k < nz; ++k) hi = std::max(hi, row[k]);
    if (!std::isfinite(hi)) {
      throw Error(ErrorCode::kNonFiniteLogits, "encoder logits are not finite");
    }
    double sum = 0.0;
    for (int k = 0; k < nz; ++k) {
      if (!std::isfinite(row[k])) {
        throw Error(ErrorCode::kNonFiniteLogits, "encoder logits are not finite");
      }
      out[k] = std::exp(row[k] - hi);
      sum += out[k];
    }
    for (int k = 0; k < nz; ++k) out[k] /= sum;
    if (log_q != nullptr) {
      const double shift = hi + std::log(sum);
      double* lout = &(*log_q)[static_cast<std::size_t>(x) * nz];
      for (int k = 0; k < nz; ++k) lout[k] = row[k] - shift;
    }
  }
}

}  // namespace

Channel Materialize(const EncoderParams& params) {
  std::vector<double> q;
  Softmax(params, q);
  return Channel::Make(VariableSchema({{kFeatures, params.num_inputs()}}),
                       Variable{kLatent, params.num_latents()}, std::move(q));
}

EncoderProblem::EncoderProblem(const JointTable& dataset_joint) {
  const JointTable train_full = dataset_joint.Condition({{kSelection, 1}});
  const JointTable test_full = dataset_joint.Condition({{kSelection, 0}});
  const JointTable train = train_full.Marginal({kFeatures, kTarget, kEnvironment});
  nx_ = train.schema().Cardinality(kFeatures);
  ny_ = train.schema().Cardinality(kTarget);
  ne_ = train.schema().Cardinality(kEnvironment);
  train_xye_.assign(train.probs().begin(), train.probs().end());
  const JointTable train_xy = train.Marginal({kFeatures, kTarget});
  train_xy_.assign(train_xy.probs().begin(), train_xy.probs().end());
  const JointTable test_xy = test_full.Marginal({kFeatures, kTarget});
  test_xy_.assign(test_xy.probs().begin(), test_xy.probs().end());
  const JointTable train_x = train.Marginal({kFeatures});
  train_x_.assign(train_x.probs().begin(), train_x.probs().end());
  h_x_ = EntropyOf(train_x_);
  h_y_ = Entropy(train, {kTarget});
  h_e_ = Entropy(train, {kEnvironment});
  h_ye_ = Entropy(train, {kTarget, kEnvironment});
}

void EncoderProblem::Forward(const EncoderParams& params, Workspace& ws) const {
  if (params.num_inputs() != nx_) {
    throw Error(ErrorCode::kShapeMismatch, "encoder input size mismatch");
  }
  const int nz = params.num_latents();
  ws.nz = nz;
  Softmax(params, ws.q, &ws.log_q);
  const int nye = ny_ * ne_;
  ws.pzye.assign(static_cast<std::size_t>(nz) * nye, 0.0);
  for (int x = 0; x < nx_; ++x) {
    const double* j = &train_xye_[static_cast<std::size_t>(x) * nye];
    const double* qx = &ws.q[static_cast<std::size_t>(x) * nz];
    for (int k = 0; k < nz; ++k) {
      double* p = &ws.pzye[static_cast<std::size_t>(k) * nye];
      const double w = qx[k];
      for (int s = 0; s < nye; ++s) p[s] += w * j[s];
    }
  }
  ws.pzy.assign(static_cast<std::size_t>(nz) * ny_, 0.0);
  ws.pze.assign(static_cast<std::size_t>(nz) * ne_, 0.0);
  ws.pz.assign(nz, 0.0);
  for (int k = 0; k < nz; ++k) {
    for (int y = 0; y < ny_; ++y) {
      for (int e = 0; e < ne_; ++e) {
        const double p = ws.pzye[(static_cast<std::size_t>(k) * ny_ + y) * ne_ + e];
        ws.pzy[static_cast<std::size_t>(k) * ny_ + y] += p;
        ws.pze[static_cast<std::size_t>(k) * ne_ + e] += p;
        ws.pz[k] += p;
      }
    }
  }
  FillLogs(ws.pz, ws.log_pz);
  FillLogs(ws.pzy, ws.log_pzy);
  FillLogs(ws.pze, ws.log_pze);
  FillLogs(ws.pzye, ws.log_pzye);
}

ObjectiveTerms EncoderProblem::Terms(const Workspace& ws, Criterion criterion,
                                     double lambda) const {
  const double hz = EntropyOf(ws.pz, ws.log_pz);
  const double hzy = EntropyOf(ws.pzy, ws.log_pzy);
  ObjectiveTerms t;
  t.predictive_info = std::max(0.0, hz + h_y_ - hzy);
  double r = 0.0;
  switch (criterion) {
    case Criterion::kBottleneck: {
      // H(x, z) = H(x) + sum_x p(x) H(z | x).
      double hxz = h_x_;
      for (int x = 0; x < nx_; ++x) {
        const std::size_t row = static_cast<std::size_t>(x) * ws.nz;
        double h = 0.0;
        for (int k = 0; k < ws.nz; ++k) {
          if (ws.q[row + k] > 0.0) h -= ws.q[row + k] * ws.log_q[row + k];
        }
        hxz += train_x_[x] * h;
      }
      r = hz + h_x_ - hxz;
      break;
    }
    case Criterion::kIndependence:
      r = hz + h_e_ - EntropyOf(ws.pze, ws.log_pze);
      break;
    case Criterion::kSufficiency:
      r = hzy + EntropyOf(ws.pze, ws.log_pze) -
          EntropyOf(ws.pzye, ws.log_pzye) - hz;
      break;
    case Criterion::kSeparation:
      r = hzy + h_ye_ - EntropyOf(ws.pzye, ws.log_pzye) - h_y_;
      break;
  }
  t.regularizer = std::max(0.0, r);
  // The objective keeps the unclamped value so it stays smooth.
  t.objective = -(hz + h_y_ - hzy) + lambda * r;
  return t;
}

CrossEntropies EncoderProblem::Metrics(const Workspace& ws) const {
  const int nz = ws.nz;
  std::vector<double> qyz(static_cast<std::size_t>(nz) * ny_);
  for (int k = 0; k < nz; ++k) {
    for (int y = 0; y < ny_; ++y) {
      // p(z | t=1) > 0 for softmax encoders whenever some x has train mass.
      qyz[static_cast<std::size_t>(k) * ny_ + y] =
          ws.pz[k] > 0.0 ? ws.pzy[static_cast<std::size_t>(k) * ny_ + y] / ws.pz[k]
                         : 1.0 / ny_;
    }
  }
  CrossEntropies ce;
  std::vector<double> qyx(ny_);
  for (int x = 0; x < nx_; ++x) {
    std::fill(qyx.begin(), qyx.end(), 0.0);
    const double* qx = &ws.q[static_cast<std::size_t>(x) * nz];
    for (int k = 0; k < nz; ++k) {
      for (int y = 0; y < ny_; ++y) {
        qyx[y] += qx[k] * qyz[static_cast<std::size_t>(k) * ny_ + y];
      }
    }
    for (int y = 0; y < ny_; ++y) {
      const double ptr = train_xy_[static_cast<std::size_t>(x) * ny_ + y];
      const double pte = test_xy_[static_cast<std::size_t>(x) * ny_ + y];
      if (ptr > 0.0) ce.train -= ptr * std::log(qyx[y]);
      if (pte > 0.0) ce.test -= pte * std::log(qyx[y]);
    }
  }
  return ce;
}

void EncoderProblem::Backward(const Workspace& ws, Criterion criterion,
                              double lambda, std::vector<double>& grad) const {
  const int nz = ws.nz;
  const int nye = ny_ * ne_;
  const EntropyWeights w = WeightsFor(criterion, lambda);
  // W(z, y, e) collects every entropy derivative routed through p(z, y, e).
  std::vector<double> weight(static_cast<std::size_t>(nz) * nye);
  for (int k = 0; k < nz; ++k) {
    const double dz = w.z * EntropyDerivative(ws.pz[k], ws.log_pz[k]);
    for (int y = 0; y < ny_; ++y) {
      const std::size_t ky = static_cast<std::size_t>(k) * ny_ + y;
      const double dzy = w.zy * EntropyDerivative(ws.pzy[ky], ws.log_pzy[ky]);
      for (int e = 0; e < ne_; ++e) {
        const std::size_t i = ky * ne_ + e;
        const std::size_t ke = static_cast<std::size_t>(k) * ne_ + e;
        double v = dz + dzy;
        if (w.ze != 0.0) v += w.ze * EntropyDerivative(ws.pze[ke], ws.log_pze[ke]);
        if (w.zye != 0.0) {
          v += w.zye * EntropyDerivative(ws.pzye[i], ws.log_pzye[i]);
        }
        weight[i] = v;
      }
    }
  }
  // dL/dq(z|x), then through the row softmax.
  grad.assign(static_cast<std::size_t>(nx_) * nz, 0.0);
  std::vector<double> dq(nz);
  for (int x = 0; x < nx_; ++x) {
    const double* j = &train_xye_[static_cast<std::size_t>(x) * nye];
    const double* qx = &ws.q[static_cast<std::size_t>(x) * nz];
    const double* log_qx = &ws.log_q[static_cast<std::size_t>(x) * nz];
    const double px = train_x_[x];
    const double log_px = px > 0.0 ? std::log(px) : 0.0;
    for (int k = 0; k < nz; ++k) {
      const double* wk = &weight[static_cast<std::size_t>(k) * nye];
      double v = 0.0;
      for (int s = 0; s < nye; ++s) v += j[s] * wk[s];
      if (w.xz != 0.0 && px > 0.0) v -= w.xz * px * (log_px + log_qx[k] + 1.0);
      dq[k] = v;
    }
    // Centre on the most likely state so that nearly one-hot rows do not
    // lose the gradient to cancellation against the row mean.
    const double ref = dq[std::max_element(qx, qx + nz) - qx];
    double mean = 0.0;
    for (int k = 0; k < nz; ++k) mean += qx[k] * (dq[k] - ref);
    double* g = &grad[static_cast<std::size_t>(x) * nz];
    for (int k = 0; k < nz; ++k) g[k] = qx[k] * ((dq[k] - ref) - mean);
  }
}

ObjectiveTerms EncoderProblem::Evaluate(const EncoderParams& params,
                                        Criterion criterion,
                                        double lambda) const {
  Workspace ws;
  Forward(params, ws);
  return Terms(ws, criterion, lambda);
}

std::vector<double> EncoderProblem::Gradient(const EncoderParams& params,
                                             Criterion criterion,
                                             double lambda) const {
  Workspace ws;
  Forward(params, ws);
  std::vector<double> grad;
  Backward(ws, criterion, lambda, grad);
  return grad;
}

CrossEntropies EncoderProblem::Metrics(const EncoderParams& params) const {
  Workspace ws;
  Forward(params, ws);
  return Metrics(ws);
}

double Objective(const EncoderParams& params, const JointTable& dataset_joint,
                 Criterion criterion, double lambda) {
  return EncoderProblem(dataset_joint).Evaluate(params, criterion, lambda).objective;
}

std::vector<double> Gradient(const EncoderParams& params,
                             const JointTable& dataset_joint,
                             Criterion criterion, double lambda) {
  return EncoderProblem(dataset_joint).Gradient(params, criterion, lambda);
}

void OptimizerConfig::Validate() const {
  const auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, what);
  };
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) fail("epsilon must be > 0");
  if (max_iterations < 1) fail("max_iterations must be >= 1");
  if (!(convergence_tolerance > 0.0)) fail("convergence_tolerance must be > 0");
  if (convergence_window < 1) fail("convergence_window must be >= 1");
  if (!(init_sigma >= 0.0)) fail("init_sigma must be >= 0");
  if (num_latents < 1) fail("num_latents must be >= 1");
}

OptimizeResult Optimize(const JointTable& dataset_joint, Criterion criterion,
                        double lambda, const OptimizerConfig& config) {
  config.Validate();
  if (!(lambda >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda must be >= 0");
  }
  const EncoderProblem problem(dataset_joint);
  EncoderParams params =
      InitParams(config.seed, config.init_sigma, problem.num_inputs(),
                 config.num_latents);
  const std::size_t n = params.logits().size();
  std::vector<double> m(n, 0.0), v(n, 0.0), grad;
  EncoderProblem::Workspace ws;

  OptimizeResult result;
  EncoderParams best = params;
  double best_objective = 0.0;

  const auto window = static_cast<std::size_t>(config.convergence_window);
  std::deque<CrossEntropies> steps;  // |delta| of the trailing window
  CrossEntropies variation;
  double beta1_pow = 1.0, beta2_pow = 1.0;
  bool converged = false;
  int iteration = 0;
  ObjectiveTerms terms;

  for (;; ++iteration) {
    problem.Forward(params, ws);
    terms = problem.Terms(ws, criterion, lambda);
    const CrossEntropies ce = problem.Metrics(ws);
    if (iteration == 0) {
      result.initial_objective = best_objective = terms.objective;
    } else {
      const CrossEntropies& prev = result.history.back();
      const CrossEntropies delta{std::abs(ce.train - prev.train),
                                 std::abs(ce.test - prev.test)};
      steps.push_back(delta);
      variation.train += delta.train;
      variation.test += delta.test;
      if (steps.size() > window) {
        variation.train -= steps.front().train;
        variation.test -= steps.front().test;
        steps.pop_front();
      }
      if (terms.objective < best_objective) {
        best_objective = terms.objective;
        best = params;
      }
    }
    result.history.push_back(ce);
    if (steps.size() == window) {
      // Re-sum once per window to keep the running totals from drifting.
      if (iteration % config.convergence_window == 0) {
        variation = {};
        for (const CrossEntropies& d : steps) {
          variation.train += d.train;
          variation.test += d.test;
        }
      }
      if (variation.train < config.convergence_tolerance &&
          variation.test < config.convergence_tolerance) {
        converged = true;
        break;
      }
    }
    if (iteration >= config.max_iterations) break;

    problem.Backward(ws, criterion, lambda, grad);
    beta1_pow *= config.beta1;
    beta2_pow *= config.beta2;
    const double step_scale = config.learning_rate / (1.0 - beta1_pow);
    const double v_scale = 1.0 / (1.0 - beta2_pow);
    std::vector<double>& theta = params.logits();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
      theta[i] -= step_scale * m[i] / (std::sqrt(v[i] * v_scale) + config.epsilon);
    }
  }

  if (!converged && best_objective < terms.objective) {
    params = best;
    problem.Forward(params, ws);
    terms = problem.Terms(ws, criterion, lambda);
  }
  const CrossEntropies final_ce = problem.Metrics(ws);
  result.params = std::move(params);
  result.final_objective = terms.objective;
  result.point.lambda = lambda;
  result.point.train_ce = final_ce.train;
  result.point.test_ce = final_ce.test;
  result.point.regularizer = terms.regularizer;
  result.point.predictive_info = terms.predictive_info;
  result.point.iterations = iteration;
  result.point.converged = converged;
  return result;
}

std::vector<double> DefaultLambdaGrid(Criterion criterion) {
  const bool bottleneck = criterion == Criterion::kBottleneck;
  const double lo = std::log10(bottleneck ? 1e-3 : 1e-2);
  const double hi = std::log10(bottleneck ? 10.0 : 1e6);
  constexpr int kPoints = 25;
  std::vector<double> grid = {0.0};
  for (int i = 0; i < kPoints; ++i) {
    grid.push_back(std::pow(10.0, lo + (hi - lo) * i / (kPoints - 1)));
  }
  return grid;
}

std::uint64_t DerivedSeed(std::uint64_t seed, std::size_t index) {
  return SplitMix64(seed ^ SplitMix64(static_cast<std::uint64_t>(index) + 1));
}

Trajectory Sweep(const JointTable& dataset_joint, Criterion criterion,
                 const std::vector<double>& lambda_grid,
                 const OptimizerConfig& config, int threads) {
  if (lambda_grid.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "lambda grid is empty");
  }
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    if (!(lambda_grid[i] >= 0.0) ||
        (i > 0 && lambda_grid[i] < lambda_grid[i - 1])) {
      throw Error(ErrorCode::kInvalidArgument,
                  "lambda grid must be nonnegative and sorted");
    }
  }
  config.Validate();
  Trajectory trajectory;
  trajectory.criterion = criterion;
  trajectory.points.resize(lambda_grid.size());
  const auto run_point = [&](std::size_t i) {
    OptimizerConfig local = config;
    local.seed = DerivedSeed(config.seed, i);
    trajectory.points[i] =
        Optimize(dataset_joint, criterion, lambda_grid[i], local).point;
  };
  const int workers =
      std::clamp(threads, 1, static_cast<int>(lambda_grid.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) run_point(i);
    return trajectory;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < lambda_grid.size(); i = next++) {
        try {
          run_point(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return trajectory;
}

std::string TrajectoryCsv(const Trajectory& trajectory) {
  std::string out =
      "lambda,train_ce,test_ce,regularizer,predictive_info,iterations,converged\n";
  for (const TrajectoryPoint& p : trajectory.points) {
    out += FormatSig(p.lambda) + ',' + FormatSig(p.train_ce) + ',' +
           FormatSig(p.test_ce) + ',' + FormatSig(p.regularizer) + ',' +
           FormatSig(p.predictive_info) + ',' + std::to_string(p.iterations) +
           ',' + (p.converged ? "1" : "0") + '\n';
  }
  return out;
}

}  // namespace shiftlab
