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

// Classifiers built on top of an encoder, exact cross-entropy evaluation, the
// test-error decomposition and the prior-shift correction.

#ifndef SHIFTLAB_ANALYSIS_H_
#define SHIFTLAB_ANALYSIS_H_

#include <string>
#include <string_view>
#include <vector>

#include "shiftlab/datasets.h"
#include "shiftlab/info.h"
#include "shiftlab/joint_table.h"

namespace shiftlab {

// q(y | z) = p(y | z, t=1). Latent states with no mass at all get a uniform
// row; a state seen only at test time throws kZeroSupportZ.
Channel OptimalLatentClassifier(const JointTable& joint_with_z);

// q(y | x) = sum_z q(z | x) q(y | z). Throws kShapeMismatch unless the
// classifier reads exactly the encoder's output.
Channel InducedModel(const Channel& encoder, const Channel& classifier);

// Deterministic encoder x -> z with z = mapping[x].
Channel DeterministicEncoder(const std::vector<int>& mapping, int num_latents);

// E_{p(features, y | t=split)} [-ln q(y | features)], +inf on support
// violations.
Divergence CrossEntropy(const JointTable& joint, const Channel& model,
                        const std::string& target, const VarSet& features,
                        int split);

enum class BaselineKind { kColorOnly, kDigitOnly, kPicture, kPriorOnly };

inline constexpr BaselineKind kAllBaselines[] = {
    BaselineKind::kColorOnly, BaselineKind::kDigitOnly, BaselineKind::kPicture,
    BaselineKind::kPriorOnly};

std::string_view BaselineName(BaselineKind kind);

// Train conditional of y given the named features, as a channel over x.
Channel Baseline(DatasetVariant variant, BaselineKind kind);

struct ErrorDecomposition {
  double test_error = 0.0;    // KL(p(y|x, t=0) || q(y|x))
  double info_loss = 0.0;     // I_{t=0}(x; y | z)
  double latent_error = 0.0;  // KL(p(y|z, t=0) || q(y|z))
  double bound_gap = 0.0;     // info_loss + latent_error - test_error
  bool finite = true;         // false when either KL is infinite
};

// The encoder is read from the joint as p(z | x). Throws kInvalidArgument if
// the bound gap is below -1e-10.
ErrorDecomposition DecomposeTestError(const JointTable& joint_with_z,
                                      const Channel& classifier);

// q'(y | z) proportional to q(y | z) p(y | t=0) / p(y | t=1). Throws
// kDegeneratePrior when some label has no training mass.
Channel PriorShiftCorrect(const Channel& classifier,
                          const JointTable& joint_with_z);

struct DecompositionRow {
  std::string criterion;
  double lambda = 0.0;
  ErrorDecomposition decomposition;
};

// Header "criterion,lambda,test_error,info_loss,latent_error,bound_gap".
std::string DecompositionCsv(const std::vector<DecompositionRow>& rows);

// One column of the dataset property table: I(a; b | given), evaluated on the
// joint over (e, d, y, c, t), optionally restricted to the training split.
// The picture x stands for the pair (c, d).
struct MeasureDefinition {
  std::string label;
  VarSet a;
  VarSet b;
  VarSet given;
  bool train_only = false;
};

// The 14 columns in table order: concept shift I(y;t|x), I(y;t|c), I(y;t|d),
// I(y;t); independence I1(e;x), I1(e;c), I1(e;d); sufficiency I1(y;e),
// I1(y;e|x), I1(y;e|c), I1(y;e|d); separation I1(e;x|y), I1(e;c|y),
// I1(e;d|y).
const std::vector<MeasureDefinition>& TableMeasures();

std::vector<double> ComputeMeasures(DatasetVariant variant);

}  // namespace shiftlab

#endif  // SHIFTLAB_ANALYSIS_H_
