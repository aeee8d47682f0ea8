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

#include "shiftlab/datasets.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <random>
#include <sstream>

#include "shiftlab/error.h"
#include "shiftlab/info.h"
#include "shiftlab/io.h"

namespace shiftlab {
namespace {

// Digit groups: 0 for digits 0-4, 1 for digits 5-9.
constexpr int Group(int digit) { return digit < 5 ? 0 : 1; }

// p(t = 1 | e): the first two environments are selected for training.
constexpr std::array<double, kNumEnvironments> kTrainGivenEnv = {1.0, 1.0, 0.0};

// p(c = 1 | y, e), indexed [y][e].
constexpr double kRedGivenLabelEnv[2][kNumEnvironments] = {
    {9.0 / 10, 4.0 / 5, 1.0 / 10},
    {1.0 / 10, 1.0 / 5, 9.0 / 10},
};

// p(y | group), indexed [group][y]. Shared by CMNIST and d-CMNIST.
constexpr double kLabelGivenGroup[2][2] = {
    {3.0 / 4, 1.0 / 4},
    {1.0 / 4, 3.0 / 4},
};

// Environment prior of the d- and y- variants.
constexpr std::array<double, kNumEnvironments> kSkewedEnvPrior = {
    1.0 / 2, 1.0 / 6, 1.0 / 3};

// d-CMNIST p(group | e), indexed [group][e].
constexpr double kGroupGivenEnv[2][kNumEnvironments] = {
    {3.0 / 5, 1.0 / 5, 1.0 / 2},
    {2.0 / 5, 4.0 / 5, 1.0 / 2},
};

// y-CMNIST p(y | e), indexed [y][e].
constexpr double kLabelGivenEnv[2][kNumEnvironments] = {
    {3.0 / 5, 1.0 / 5, 1.0 / 2},
    {2.0 / 5, 4.0 / 5, 1.0 / 2},
};

// y-CMNIST p(group | y), indexed [group][y].
constexpr double kGroupGivenLabel[2][2] = {
    {3.0 / 4, 1.0 / 4},
    {1.0 / 4, 3.0 / 4},
};

// p(e, d, y) for each variant; color and selection are appended uniformly.
double EnvDigitLabel(DatasetVariant variant, int e, int d, int y) {
  const int g = Group(d);
  switch (variant) {
    case DatasetVariant::kCmnist:
      return (1.0 / 3) * (1.0 / 10) * kLabelGivenGroup[g][y];
    case DatasetVariant::kDCmnist:
      return kSkewedEnvPrior[e] * kGroupGivenEnv[g][e] / 5.0 *
             kLabelGivenGroup[g][y];
    case DatasetVariant::kYCmnist:
      return kSkewedEnvPrior[e] * kLabelGivenEnv[y][e] *
             kGroupGivenLabel[g][y] / 5.0;
  }
  return 0.0;
}

double UnitUniform(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Index drawn by inverse CDF; never returns a zero-probability slot.
std::size_t DrawIndex(std::span<const double> cdf, std::span<const double> pmf,
                      std::mt19937_64& gen) {
  const double u = UnitUniform(gen) * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  std::size_t i = std::min<std::size_t>(it - cdf.begin(), cdf.size() - 1);
  while (pmf[i] <= 0.0 && i > 0) --i;
  return i;
}

}  // namespace

std::string_view VariantName(DatasetVariant variant) {
  switch (variant) {
    case DatasetVariant::kCmnist: return "cmnist";
    case DatasetVariant::kDCmnist: return "d-cmnist";
    case DatasetVariant::kYCmnist: return "y-cmnist";
  }
  return "";
}

std::string_view VariantLabel(DatasetVariant variant) {
  switch (variant) {
    case DatasetVariant::kCmnist: return "CMNIST";
    case DatasetVariant::kDCmnist: return "d-CMNIST";
    case DatasetVariant::kYCmnist: return "y-CMNIST";
  }
  return "";
}

DatasetVariant ParseVariant(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return std::tolower(ch); });
  for (DatasetVariant v : kAllVariants) {
    if (lower == VariantName(v)) return v;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown dataset '" + std::string(name) +
                  "' (expected cmnist, d-cmnist or y-cmnist)");
}

JointTable BuildJoint(DatasetVariant variant) {
  VariableSchema schema({{kEnvironment, kNumEnvironments},
                         {"d", kNumDigits},
                         {kTarget, 2},
                         {"c", kNumColors},
                         {kSelection, 2}});
  std::vector<double> probs(schema.num_states(), 0.0);
  for (int e = 0; e < kNumEnvironments; ++e) {
    for (int d = 0; d < kNumDigits; ++d) {
      for (int y = 0; y < 2; ++y) {
        const double edy = EnvDigitLabel(variant, e, d, y);
        for (int c = 0; c < kNumColors; ++c) {
          const double red = kRedGivenLabelEnv[y][e];
          const double pc = c == 1 ? red : 1.0 - red;
          for (int t = 0; t < 2; ++t) {
            const double pt = t == 1 ? kTrainGivenEnv[e] : 1.0 - kTrainGivenEnv[e];
            const std::array<int, 5> a = {e, d, y, c, t};
            probs[schema.Flatten(a)] = edy * pc * pt;
          }
        }
      }
    }
  }
  return JointTable::Make(std::move(schema), std::move(probs));
}

JointTable SufficientStatisticView(const JointTable& joint) {
  const JointTable m = joint.Marginal({"c", "d", kTarget, kEnvironment, kSelection});
  // (c, d) flattened row-major is exactly x = c * 10 + d.
  VariableSchema schema({{kFeatures, kNumFeatureStates},
                         {kTarget, 2},
                         {kEnvironment, kNumEnvironments},
                         {kSelection, 2}});
  return JointTable::Make(std::move(schema),
                          std::vector<double>(m.probs().begin(), m.probs().end()));
}

std::vector<SampleRecord> Sample(DatasetVariant variant, std::size_t n,
                                 std::uint64_t seed, int split) {
  if (split != 0 && split != 1) {
    throw Error(ErrorCode::kInvalidArgument, "split must be 0 or 1");
  }
  std::vector<SampleRecord> records;
  if (n == 0) return records;
  const JointTable cond =
      BuildJoint(variant).Condition({{kSelection, split}});
  // Remaining layout: (e, d, y, c).
  const JointTable by_digit = cond.Marginal({"d", kEnvironment, kTarget, "c"});
  constexpr std::size_t kInner = kNumEnvironments * 2 * kNumColors;

  std::vector<double> digit_pmf(kNumDigits, 0.0), digit_cdf(kNumDigits);
  std::vector<std::vector<double>> inner_pmf(kNumDigits), inner_cdf(kNumDigits);
  double acc = 0.0;
  for (int d = 0; d < kNumDigits; ++d) {
    const auto row = by_digit.probs().subspan(d * kInner, kInner);
    for (double p : row) digit_pmf[d] += p;
    acc += digit_pmf[d];
    digit_cdf[d] = acc;
    inner_pmf[d].assign(row.begin(), row.end());
    inner_cdf[d].resize(kInner);
    double inner_acc = 0.0;
    for (std::size_t i = 0; i < kInner; ++i) {
      inner_acc += row[i];
      inner_cdf[d][i] = inner_acc;
    }
  }

  std::mt19937_64 gen(seed);
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto d = static_cast<int>(DrawIndex(digit_cdf, digit_pmf, gen));
    const std::size_t k = DrawIndex(inner_cdf[d], inner_pmf[d], gen);
    SampleRecord r;
    r.d = d;
    r.e = static_cast<int>(k / (2 * kNumColors));
    r.y = static_cast<int>((k / kNumColors) % 2);
    r.c = static_cast<int>(k % kNumColors);
    r.t = split;
    records.push_back(r);
  }
  return records;
}

void ExportRecords(const std::vector<SampleRecord>& records,
                   const std::filesystem::path& path) {
  std::string out = "d,c,y,e,t\n";
  out.reserve(out.size() + records.size() * 10);
  for (const SampleRecord& r : records) {
    out += std::to_string(r.d) + ',' + std::to_string(r.c) + ',' +
           std::to_string(r.y) + ',' + std::to_string(r.e) + ',' +
           std::to_string(r.t) + '\n';
  }
  WriteFileAtomic(path, out);
}

std::vector<SampleRecord> ImportRecords(const std::filesystem::path& path) {
  std::istringstream in(ReadFile(path));
  std::string line;
  if (!std::getline(in, line) || line != "d,c,y,e,t") {
    throw Error(ErrorCode::kIoError, "missing or malformed header in " + path.string());
  }
  std::vector<SampleRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    SampleRecord r;
    char sep[4];
    std::istringstream row(line);
    if (!(row >> r.d >> sep[0] >> r.c >> sep[1] >> r.y >> sep[2] >> r.e >>
          sep[3] >> r.t)) {
      throw Error(ErrorCode::kIoError, "malformed row: " + line);
    }
    records.push_back(r);
  }
  return records;
}

}  // namespace shiftlab
