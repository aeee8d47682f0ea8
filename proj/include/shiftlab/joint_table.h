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

// Dense probability tables over small sets of named finite variables.
//
// A JointTable stores p(v_1, ..., v_k) in row-major order of its schema (the
// last variable varies fastest). A Channel stores q(out | in_1, ..., in_m)
// with the output as the fastest-varying axis. Both are immutable values.

#ifndef SHIFTLAB_JOINT_TABLE_H_
#define SHIFTLAB_JOINT_TABLE_H_

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace shiftlab {

// Absolute tolerance accepted by JointTable::Make on the total mass.
inline constexpr double kNormalizationTolerance = 1e-9;
// Per-row tolerance accepted by Channel::Make.
inline constexpr double kChannelTolerance = 1e-12;

struct Variable {
  std::string name;
  int cardinality = 1;

  bool operator==(const Variable&) const = default;
};

class VariableSchema {
 public:
  static constexpr std::size_t kDefaultMaxStates = 10'000'000;

  VariableSchema() = default;
  explicit VariableSchema(std::vector<Variable> variables,
                          std::size_t max_states = kDefaultMaxStates);

  const std::vector<Variable>& variables() const { return variables_; }
  std::size_t size() const { return variables_.size(); }
  std::size_t num_states() const { return num_states_; }

  bool Contains(std::string_view name) const;
  // Throws kUnknownVariable.
  std::size_t IndexOf(std::string_view name) const;
  int Cardinality(std::string_view name) const;
  // Flat-index stride of the variable at position `index`.
  std::size_t Stride(std::size_t index) const { return strides_[index]; }
  std::vector<std::string> Names() const;

  // Flat index of a full assignment given in schema order.
  std::size_t Flatten(std::span<const int> assignment) const;
  std::vector<int> Unflatten(std::size_t flat) const;

  bool operator==(const VariableSchema& other) const {
    return variables_ == other.variables_;
  }

 private:
  std::vector<Variable> variables_;
  std::vector<std::size_t> strides_;
  std::size_t num_states_ = 1;
};

// Partial assignment used as conditioning evidence.
using Evidence = std::map<std::string, int, std::less<>>;

class Channel;

class JointTable {
 public:
  // Validates without renormalizing. Throws kShapeMismatch,
  // kNegativeProbability or kNotNormalized.
  static JointTable Make(VariableSchema schema, std::vector<double> probs);

  const VariableSchema& schema() const { return schema_; }
  std::span<const double> probs() const { return probs_; }
  double operator[](std::size_t flat) const { return probs_[flat]; }
  double At(std::span<const int> assignment) const {
    return probs_[schema_.Flatten(assignment)];
  }

  // Marginal over `keep`, laid out in the order given by `keep`.
  JointTable Marginal(const std::vector<std::string>& keep) const;

  // p(remaining | evidence); remaining variables keep schema order.
  // Throws kZeroProbabilityEvidence when the event has no mass.
  JointTable Condition(const Evidence& evidence) const;

  // Probability of the event described by `evidence`.
  double Probability(const Evidence& evidence) const;

  // p'(..., out) = p(...) q(out | inputs); the new variable is appended last.
  JointTable Extend(const Channel& channel) const;

 private:
  JointTable(VariableSchema schema, std::vector<double> probs)
      : schema_(std::move(schema)), probs_(std::move(probs)) {}

  VariableSchema schema_;
  std::vector<double> probs_;
};

class Channel {
 public:
  // `table` is laid out input-major with the output fastest. Throws
  // kShapeMismatch, kNegativeProbability or kNotNormalized.
  static Channel Make(VariableSchema inputs, Variable output,
                      std::vector<double> table);

  // Exact conditional p(output | inputs) read from a joint. Input states with
  // zero mass get a uniform row.
  static Channel FromJoint(const JointTable& joint,
                           const std::vector<std::string>& inputs,
                           const std::string& output);

  const VariableSchema& inputs() const { return inputs_; }
  const Variable& output() const { return output_; }
  std::vector<std::string> InputNames() const { return inputs_.Names(); }
  std::size_t num_input_states() const { return inputs_.num_states(); }

  std::span<const double> table() const { return table_; }
  std::span<const double> Row(std::size_t input_flat) const {
    return std::span<const double>(table_).subspan(
        input_flat * output_.cardinality, output_.cardinality);
  }
  double operator()(std::size_t input_flat, int out) const {
    return table_[input_flat * output_.cardinality + out];
  }

  // Same table with the output variable renamed.
  Channel WithOutputName(std::string name) const;

 private:
  Channel(VariableSchema inputs, Variable output, std::vector<double> table)
      : inputs_(std::move(inputs)),
        output_(std::move(output)),
        table_(std::move(table)) {}

  VariableSchema inputs_;
  Variable output_;
  std::vector<double> table_;
};

}  // namespace shiftlab

#endif  // SHIFTLAB_JOINT_TABLE_H_
