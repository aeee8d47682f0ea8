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

#include "shiftlab/analysis.h"

#include <cmath>
#include <limits>
#include <optional>

#include "shiftlab/error.h"
#include "shiftlab/io.h"

namespace shiftlab {

Channel OptimalLatentClassifier(const JointTable& joint_with_z) {
  const JointTable zty = joint_with_z.Marginal({kLatent, kSelection, kTarget});
  const int nz = zty.schema().Cardinality(kLatent);
  const int nt = zty.schema().Cardinality(kSelection);
  const int ny = zty.schema().Cardinality(kTarget);
  if (nt != 2) {
    throw Error(ErrorCode::kSchemaMismatch, "selection variable must be binary");
  }
  std::vector<double> table(static_cast<std::size_t>(nz) * ny);
  for (int k = 0; k < nz; ++k) {
    double train = 0.0, test = 0.0;
    for (int y = 0; y < ny; ++y) {
      test += zty.At(std::vector<int>{k, 0, y});
      train += zty.At(std::vector<int>{k, 1, y});
    }
    for (int y = 0; y < ny; ++y) {
      double& out = table[static_cast<std::size_t>(k) * ny + y];
      if (train > 0.0) {
        out = zty.At(std::vector<int>{k, 1, y}) / train;
      } else if (test > 0.0) {
        throw Error(ErrorCode::kZeroSupportZ,
                    "latent state " + std::to_string(k) +
                        " has no training mass");
      } else {
        out = 1.0 / ny;
      }
    }
  }
  return Channel::Make(VariableSchema({{kLatent, nz}}),
                       Variable{kTarget, ny}, std::move(table));
}

Channel InducedModel(const Channel& encoder, const Channel& classifier) {
  if (classifier.inputs().size() != 1 ||
      classifier.inputs().variables()[0] != encoder.output()) {
    throw Error(ErrorCode::kShapeMismatch,
                "classifier must read exactly the encoder output");
  }
  const auto nz = static_cast<std::size_t>(encoder.output().cardinality);
  const auto ny = static_cast<std::size_t>(classifier.output().cardinality);
  std::vector<double> table(encoder.num_input_states() * ny, 0.0);
  for (std::size_t x = 0; x < encoder.num_input_states(); ++x) {
    for (std::size_t k = 0; k < nz; ++k) {
      const double w = encoder(x, static_cast<int>(k));
      if (w == 0.0) continue;
      for (std::size_t y = 0; y < ny; ++y) {
        table[x * ny + y] += w * classifier(k, static_cast<int>(y));
      }
    }
  }
  return Channel::Make(encoder.inputs(), classifier.output(), std::move(table));
}

Channel DeterministicEncoder(const std::vector<int>& mapping, int num_latents) {
  std::vector<double> table(mapping.size() * num_latents, 0.0);
  for (std::size_t x = 0; x < mapping.size(); ++x) {
    if (mapping[x] < 0 || mapping[x] >= num_latents) {
      throw Error(ErrorCode::kInvalidArgument, "latent index out of range");
    }
    table[x * num_latents + mapping[x]] = 1.0;
  }
  return Channel::Make(
      VariableSchema({{kFeatures, static_cast<int>(mapping.size())}}),
      Variable{kLatent, num_latents}, std::move(table));
}

Divergence CrossEntropy(const JointTable& joint, const Channel& model,
                        const std::string& target, const VarSet& features,
                        int split) {
  const JointTable part = joint.Condition({{kSelection, split}});
  if (model.output().name != target || model.InputNames() != features) {
    throw Error(ErrorCode::kSchemaMismatch,
                "model does not map the given features to '" + target + "'");
  }
  VarSet keep = features;
  keep.push_back(target);
  const JointTable m = part.Marginal(keep);
  if (m.schema().num_states() != model.table().size()) {
    throw Error(ErrorCode::kSchemaMismatch, "model shape mismatch");
  }
  double ce = 0.0;
  for (std::size_t i = 0; i < m.schema().num_states(); ++i) {
    const double p = m[i];
    if (p <= 0.0) continue;
    if (model.table()[i] <= 0.0) return Divergence::Infinite();
    ce -= p * std::log(model.table()[i]);
  }
  return {ce, true};
}

std::string_view BaselineName(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kColorOnly: return "color";
    case BaselineKind::kDigitOnly: return "digit";
    case BaselineKind::kPicture: return "picture";
    case BaselineKind::kPriorOnly: return "prior";
  }
  return "";
}

Channel Baseline(DatasetVariant variant, BaselineKind kind) {
  const JointTable train = BuildJoint(variant).Condition({{kSelection, 1}});
  VarSet given;
  switch (kind) {
    case BaselineKind::kColorOnly: given = {"c"}; break;
    case BaselineKind::kDigitOnly: given = {"d"}; break;
    case BaselineKind::kPicture: given = {"c", "d"}; break;
    case BaselineKind::kPriorOnly: break;
  }
  const JointTable py = train.Marginal({kTarget});
  const std::optional<Channel> conditional =
      given.empty() ? std::nullopt
                    : std::optional<Channel>(Channel::FromJoint(train, given, kTarget));
  std::vector<double> table(kNumFeatureStates * 2);
  for (int c = 0; c < kNumColors; ++c) {
    for (int d = 0; d < kNumDigits; ++d) {
      const int x = FeatureIndex(c, d);
      for (int y = 0; y < 2; ++y) {
        double v = 0.0;
        switch (kind) {
          case BaselineKind::kColorOnly: v = (*conditional)(c, y); break;
          case BaselineKind::kDigitOnly: v = (*conditional)(d, y); break;
          case BaselineKind::kPicture: v = (*conditional)(x, y); break;
          case BaselineKind::kPriorOnly: v = py[y]; break;
        }
        table[x * 2 + y] = v;
      }
    }
  }
  return Channel::Make(VariableSchema({{kFeatures, kNumFeatureStates}}),
                       Variable{kTarget, 2}, std::move(table));
}

ErrorDecomposition DecomposeTestError(const JointTable& joint_with_z,
                                      const Channel& classifier) {
  const JointTable test = joint_with_z.Condition({{kSelection, 0}});
  const Channel encoder = Channel::FromJoint(joint_with_z, {kFeatures}, kLatent);
  const Channel model = InducedModel(encoder, classifier);
  const Divergence test_error = KlConditional(test, model, kTarget, {kFeatures});
  const Divergence latent = KlConditional(test, classifier, kTarget, {kLatent});
  ErrorDecomposition d;
  d.info_loss = MutualInformation(test, {kFeatures}, {kTarget}, {kLatent});
  d.test_error = test_error.value();
  d.latent_error = latent.value();
  d.finite = test_error.finite && latent.finite;
  if (d.finite) {
    d.bound_gap = d.info_loss + d.latent_error - d.test_error;
    if (d.bound_gap < -kIdentityTolerance) {
      throw Error(ErrorCode::kInvalidArgument,
                  "test error exceeds information loss plus latent error");
    }
  } else {
    d.bound_gap = latent.finite ? -std::numeric_limits<double>::infinity()
                                : std::numeric_limits<double>::infinity();
  }
  return d;
}

Channel PriorShiftCorrect(const Channel& classifier,
                          const JointTable& joint_with_z) {
  const JointTable ty = joint_with_z.Marginal({kSelection, kTarget});
  const int ny = ty.schema().Cardinality(kTarget);
  if (classifier.output().name != kTarget ||
      classifier.output().cardinality != ny) {
    throw Error(ErrorCode::kSchemaMismatch, "classifier must predict y");
  }
  double train = 0.0, test = 0.0;
  for (int y = 0; y < ny; ++y) {
    test += ty.At(std::vector<int>{0, y});
    train += ty.At(std::vector<int>{1, y});
  }
  if (!(train > 0.0) || !(test > 0.0)) {
    throw Error(ErrorCode::kDegeneratePrior, "a split has no mass");
  }
  std::vector<double> ratio(ny);
  for (int y = 0; y < ny; ++y) {
    const double p1 = ty.At(std::vector<int>{1, y}) / train;
    if (!(p1 > 0.0)) {
      throw Error(ErrorCode::kDegeneratePrior,
                  "label " + std::to_string(y) + " has no training mass");
    }
    ratio[y] = ty.At(std::vector<int>{0, y}) / test / p1;
  }
  std::vector<double> table(classifier.table().begin(), classifier.table().end());
  for (std::size_t k = 0; k < classifier.num_input_states(); ++k) {
    double* row = &table[k * ny];
    double sum = 0.0;
    for (int y = 0; y < ny; ++y) sum += row[y] *= ratio[y];
    if (!(sum > 0.0)) {
      throw Error(ErrorCode::kDegeneratePrior,
                  "corrected row " + std::to_string(k) + " has no mass");
    }
    for (int y = 0; y < ny; ++y) row[y] /= sum;
  }
  return Channel::Make(classifier.inputs(), classifier.output(), std::move(table));
}

std::string DecompositionCsv(const std::vector<DecompositionRow>& rows) {
  std::string out = "criterion,lambda,test_error,info_loss,latent_error,bound_gap\n";
  for (const DecompositionRow& r : rows) {
    const ErrorDecomposition& d = r.decomposition;
    out += r.criterion + ',' + FormatSig(r.lambda) + ',' +
           FormatSig(d.test_error) + ',' + FormatSig(d.info_loss) + ',' +
           FormatSig(d.latent_error) + ',' + FormatSig(d.bound_gap) + '\n';
  }
  return out;
}

const std::vector<MeasureDefinition>& TableMeasures() {
  static const std::vector<MeasureDefinition>* const kMeasures = [] {
    const VarSet x = {"c", "d"}, c = {"c"}, d = {"d"}, none;
    const VarSet y = {kTarget}, e = {kEnvironment}, t = {kSelection};
    return new std::vector<MeasureDefinition>{
        {"I(y;t|x)", y, t, x, false},    {"I(y;t|c)", y, t, c, false},
        {"I(y;t|d)", y, t, d, false},    {"I(y;t)", y, t, none, false},
        {"I1(e;x)", e, x, none, true},   {"I1(e;c)", e, c, none, true},
        {"I1(e;d)", e, d, none, true},   {"I1(y;e)", y, e, none, true},
        {"I1(y;e|x)", y, e, x, true},    {"I1(y;e|c)", y, e, c, true},
        {"I1(y;e|d)", y, e, d, true},    {"I1(e;x|y)", e, x, y, true},
        {"I1(e;c|y)", e, c, y, true},    {"I1(e;d|y)", e, d, y, true},
    };
  }();
  return *kMeasures;
}

std::vector<double> ComputeMeasures(DatasetVariant variant) {
  const JointTable joint = BuildJoint(variant);
  const JointTable train = joint.Condition({{kSelection, 1}});
  std::vector<double> values;
  for (const MeasureDefinition& m : TableMeasures()) {
    values.push_back(
        MutualInformation(m.train_only ? train : joint, m.a, m.b, m.given));
  }
  return values;
}

}  // namespace shiftlab
