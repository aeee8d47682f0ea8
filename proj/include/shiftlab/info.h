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

// Exact information measures over JointTables. All quantities are in nats
// and use the 0 log 0 = 0 convention.

#ifndef SHIFTLAB_INFO_H_
#define SHIFTLAB_INFO_H_

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shiftlab/joint_table.h"

namespace shiftlab {

using VarSet = std::vector<std::string>;

// Conventional variable names shared by the dataset, encoder and analysis
// layers.
inline constexpr const char* kFeatures = "x";
inline constexpr const char* kTarget = "y";
inline constexpr const char* kEnvironment = "e";
inline constexpr const char* kSelection = "t";
inline constexpr const char* kLatent = "z";

// Slack used by every inequality check.
inline constexpr double kInequalitySlack = 1e-9;
// Tolerance for identities that must hold as equalities.
inline constexpr double kIdentityTolerance = 1e-10;

// A KL-type divergence that may be +infinity when the reference assigns zero
// mass where the first argument does not.
struct Divergence {
  double nats = 0.0;
  bool finite = true;

  static Divergence Infinite() { return {0.0, false}; }
  double value() const {
    return finite ? nats : std::numeric_limits<double>::infinity();
  }
};

double Entropy(const JointTable& joint, const VarSet& target,
               const VarSet& given = {});

// I(a; b | given). Values in [-1e-12, 0) from cancellation are clamped to 0.
double MutualInformation(const JointTable& joint, const VarSet& a,
                         const VarSet& b, const VarSet& given = {});

Divergence KlDivergence(std::span<const double> p, std::span<const double> q);

// E_{p(features)} KL(p(target | features) || q(target | features)).
Divergence KlConditional(const JointTable& p, const Channel& q,
                         const std::string& target, const VarSet& features);

// Jensen-Shannon divergence with the equal-weight mixture; bounded by ln 2.
double Jsd(std::span<const double> p, std::span<const double> q);

struct ShiftDecomposition {
  double distribution_shift = 0.0;  // I(features, target; t)
  double covariate_shift = 0.0;     // I(features; t)
  double concept_shift = 0.0;       // I(target; t | features)
};

ShiftDecomposition DecomposeShift(const JointTable& joint,
                                  const VarSet& features,
                                  const std::string& target);

// Pinsker-type bound relating the latent test error at one latent state to
// the Jensen-Shannon divergence between p(y | z, t=0) and q(y | z).
//
// Two right-hand sides are reported. `rhs_as_stated` uses the leading factor
// 1/sqrt(2). `rhs` uses sqrt(2), which is what follows from
// sqrt(JSD) >= TV / sqrt(2) (the JSD generator has f''(1) = 1/4) combined
// with KL <= (m log m / (1 - m) + M log M / (M - 1)) TV.
struct PinskerBound {
  int z = 0;
  double lhs = 0.0;  // KL(p(y | z, t=0) || q(y | z))
  double rhs = 0.0;
  double rhs_as_stated = 0.0;
  double jsd = 0.0;
  double min_ratio = 0.0;  // m(z)
  double max_ratio = 0.0;  // M(z), +inf when the bound is vacuous
  bool infinite_ratio = false;
  bool holds = true;
  bool holds_as_stated = true;
};

// Throws kZeroSupportZ when z has no mass on either split.
PinskerBound PinskerLatentBound(const JointTable& joint_with_z,
                                const Channel& classifier, int z_value);

// Which form of an inequality a record evaluates. kStated records follow the
// published statements literally; kRederived records are the versions that
// follow from the same proof steps with the constants recomputed.
enum class InequalityForm { kStated, kRederived };

struct InequalityRecord {
  std::string name;
  std::optional<int> z;  // set for per-latent-state checks
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // rhs - lhs (or -|lhs - rhs| for identities)
  bool holds = true;
  bool applicable = true;
  bool identity = false;
  InequalityForm form = InequalityForm::kStated;
};

struct PropositionReport {
  double alpha = 0.0;  // min{p(t=0), p(t=1)}
  std::vector<InequalityRecord> records;

  // Applicable records of the given form that fail.
  int Violations(InequalityForm form = InequalityForm::kStated) const;
  int Violations(const std::string& name) const;
  // Smallest slack among applicable records with this name, if any.
  std::optional<double> WorstSlack(const std::string& name) const;
};

// Evaluates every inequality of the framework for one joint over
// (features, y, e, t), an encoder features -> z, a latent classifier z -> y
// and a direct model features -> y.
//
//   ood_error_lower_bound          train KL + test KL >= I(y;t|x) / (1 - a)
//   ood_error_lower_bound_ml       same with q = p(y | x, t=1)
//   train_error_decomposition      KL_1(y|x) <= I_1(x;y|z) + KL_1(y|z)
//   test_error_decomposition       KL_0(y|x) <= I_0(x;y|z) + KL_0(y|z)
//   latent_jsd_bound               per z, with the global a
//   latent_jsd_bound_local_alpha   per z, with a_z = min_t p(t | z)
//   sufficiency_shift_bound        I(y;t|z) <= I(y;e|z) when t = f(e)
//   separation_shift_bound         I(y;t|z) <= I(y;t) + I(e;z|y) when
//                                  t = f(e, y)
//   criteria_chain_identity        I(e;z|y) + I(e;y) = I(e;y|z) + I(e;z)
//   latent_kl_pinsker_bound        per z with finite M(z), stated constant
//   latent_kl_pinsker_bound_tv     per z with finite M(z), rederived constant
PropositionReport CheckPropositions(const JointTable& joint,
                                    const Channel& encoder,
                                    const Channel& classifier,
                                    const Channel& model);

}  // namespace shiftlab

#endif  // SHIFTLAB_INFO_H_
