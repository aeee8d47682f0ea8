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

// The colored-digit generative processes (CMNIST and its d- and y- variants)
// over environment e, digit d, label y, color c and selection t. Pictures are
// represented by their sufficient statistic x = c * 10 + d.

#ifndef SHIFTLAB_DATASETS_H_
#define SHIFTLAB_DATASETS_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "shiftlab/joint_table.h"

namespace shiftlab {

enum class DatasetVariant { kCmnist, kDCmnist, kYCmnist };

inline constexpr DatasetVariant kAllVariants[] = {
    DatasetVariant::kCmnist, DatasetVariant::kDCmnist, DatasetVariant::kYCmnist};

inline constexpr int kNumDigits = 10;
inline constexpr int kNumColors = 2;
inline constexpr int kNumEnvironments = 3;
inline constexpr int kNumFeatureStates = kNumDigits * kNumColors;

// "cmnist", "d-cmnist", "y-cmnist".
std::string_view VariantName(DatasetVariant variant);
// Display label used in tables: "CMNIST", "d-CMNIST", "y-CMNIST".
std::string_view VariantLabel(DatasetVariant variant);
// Accepts the lowercase name, case-insensitively. Throws kInvalidArgument.
DatasetVariant ParseVariant(std::string_view name);

inline constexpr int FeatureIndex(int color, int digit) {
  return color * kNumDigits + digit;
}

// Joint over (e, d, y, c, t) in that order.
JointTable BuildJoint(DatasetVariant variant);

// Joint over (x, y, e, t) with x = c * 10 + d.
JointTable SufficientStatisticView(const JointTable& joint);

struct SampleRecord {
  int d = 0;
  int c = 0;
  int y = 0;
  int e = 0;
  int t = 0;

  bool operator==(const SampleRecord&) const = default;
};

// Identifier of the pseudo-random generator and draw procedure, written into
// sample metadata.
inline constexpr std::string_view kSamplerGenerator =
    "mt19937_64+inverse-cdf-53bit";

// Draws n records i.i.d. from p(d, c, e, y | t = split): first d from
// p(d | t = split), then (c, e, y) from p(c, e, y | d, t = split).
std::vector<SampleRecord> Sample(DatasetVariant variant, std::size_t n,
                                 std::uint64_t seed, int split);

// CSV with header "d,c,y,e,t" and LF line endings. Written atomically.
void ExportRecords(const std::vector<SampleRecord>& records,
                   const std::filesystem::path& path);
std::vector<SampleRecord> ImportRecords(const std::filesystem::path& path);

}  // namespace shiftlab

#endif  // SHIFTLAB_DATASETS_H_
