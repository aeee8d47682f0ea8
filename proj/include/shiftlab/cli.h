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

// The `shiftlab` command line: measures, sweep, verify, sample, baselines and
// decompose.

#ifndef SHIFTLAB_CLI_H_
#define SHIFTLAB_CLI_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "shiftlab/datasets.h"
#include "shiftlab/encoder.h"
#include "shiftlab/info.h"

namespace shiftlab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct RunConfig {
  std::vector<DatasetVariant> datasets = {std::begin(kAllVariants),
                                          std::end(kAllVariants)};
  std::vector<Criterion> criteria = {std::begin(kAllCriteria),
                                     std::end(kAllCriteria)};
  // "default", or a comma-separated list of numbers and
  // "logspace:LO:HI:N" items (LO, HI are base-10 exponents).
  std::string lambda_grid = "default";
  std::uint64_t seed = 0;
  std::string out = ".";
  std::string format = "csv";
  OptimizerConfig optimizer;
  int fuzz = 1000;
  std::uint64_t n = 0;
  int split = 1;

  std::string ToJson() const;
  // Missing keys keep their defaults. Throws kInvalidArgument.
  static RunConfig FromJson(const std::string& text);
  bool operator==(const RunConfig& other) const;
};

// Expands a grid spec for one criterion; the result is sorted ascending.
// Throws kInvalidArgument.
std::vector<double> ParseLambdaGrid(const std::string& spec, Criterion criterion);

// Counts for one inequality name across a fuzz run.
struct FuzzTally {
  InequalityForm form = InequalityForm::kStated;
  long checks = 0;      // applicable records
  long violations = 0;
  double worst_slack = 0.0;
};

struct FuzzViolation {
  int case_index = 0;
  InequalityRecord record;
};

struct FuzzSummary {
  DatasetVariant variant = DatasetVariant::kCmnist;
  int cases = 0;
  std::map<std::string, FuzzTally> tallies;
  std::vector<FuzzViolation> examples;  // first few violations

  long Violations(InequalityForm form) const;
};

// Random encoders, latent classifiers and direct models on the variant's
// joint, plus random joints with the same variables whose selection depends
// on e or on (e, y). Deterministic given the seed.
FuzzSummary FuzzPropositions(DatasetVariant variant, int cases,
                             std::uint64_t seed);

// Parses argv (without the program name), runs the subcommand and returns the
// process exit code. Human-readable output goes to `out`, diagnostics to `err`.
int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace shiftlab

#endif  // SHIFTLAB_CLI_H_
