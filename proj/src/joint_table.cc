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

#include "shiftlab/joint_table.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "shiftlab/error.h"

namespace shiftlab {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNegativeProbability: return "NegativeProbability";
    case ErrorCode::kNotNormalized: return "NotNormalized";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kUnknownVariable: return "UnknownVariable";
    case ErrorCode::kZeroProbabilityEvidence: return "ZeroProbabilityEvidence";
    case ErrorCode::kVariableCollision: return "VariableCollision";
    case ErrorCode::kOverlappingVariableSets: return "OverlappingVariableSets";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kMissingSelectionVariable: return "MissingSelectionVariable";
    case ErrorCode::kZeroSupportZ: return "ZeroSupportZ";
    case ErrorCode::kNonFiniteLogits: return "NonFiniteLogits";
    case ErrorCode::kDegeneratePrior: return "DegeneratePrior";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

namespace {

// Walks every flat index of `source` and reports the matching flat index in a
// table whose layout is given by per-source-variable strides (0 = dropped).
template <typename Fn>
void ForEachMapped(const VariableSchema& source,
                   const std::vector<std::size_t>& target_strides, Fn&& fn) {
  const std::size_t k = source.size();
  std::vector<int> digits(k, 0);
  std::size_t target = 0;
  for (std::size_t flat = 0; flat < source.num_states(); ++flat) {
    fn(flat, target);
    // Increment the odometer, last variable fastest.
    for (std::size_t pos = k; pos-- > 0;) {
      const int card = source.variables()[pos].cardinality;
      if (++digits[pos] < card) {
        target += target_strides[pos];
        break;
      }
      target -= target_strides[pos] * static_cast<std::size_t>(card - 1);
      digits[pos] = 0;
    }
  }
}

void ValidateEntries(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kNegativeProbability,
                  std::string(what) + " contains a negative or non-finite entry");
    }
  }
}

}  // namespace

VariableSchema::VariableSchema(std::vector<Variable> variables,
                               std::size_t max_states)
    : variables_(std::move(variables)) {
  std::set<std::string, std::less<>> seen;
  for (const Variable& v : variables_) {
    if (v.cardinality < 1) {
      throw Error(ErrorCode::kInvalidArgument,
                  "variable '" + v.name + "' has cardinality < 1");
    }
    if (!seen.insert(v.name).second) {
      throw Error(ErrorCode::kVariableCollision,
                  "duplicate variable '" + v.name + "'");
    }
    if (num_states_ > max_states / static_cast<std::size_t>(v.cardinality)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "schema exceeds the state limit of " +
                      std::to_string(max_states));
    }
    num_states_ *= static_cast<std::size_t>(v.cardinality);
  }
  strides_.assign(variables_.size(), 1);
  for (std::size_t i = variables_.size(); i-- > 1;) {
    strides_[i - 1] =
        strides_[i] * static_cast<std::size_t>(variables_[i].cardinality);
  }
}

bool VariableSchema::Contains(std::string_view name) const {
  return std::any_of(variables_.begin(), variables_.end(),
                     [&](const Variable& v) { return v.name == name; });
}

std::size_t VariableSchema::IndexOf(std::string_view name) const {
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    if (variables_[i].name == name) return i;
  }
  throw Error(ErrorCode::kUnknownVariable,
              "variable '" + std::string(name) + "' is not in the schema");
}

int VariableSchema::Cardinality(std::string_view name) const {
  return variables_[IndexOf(name)].cardinality;
}

std::vector<std::string> VariableSchema::Names() const {
  std::vector<std::string> names;
  names.reserve(variables_.size());
  for (const Variable& v : variables_) names.push_back(v.name);
  return names;
}

std::size_t VariableSchema::Flatten(std::span<const int> assignment) const {
  if (assignment.size() != variables_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "assignment arity mismatch");
  }
  std::size_t flat = 0;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] < 0 || assignment[i] >= variables_[i].cardinality) {
      throw Error(ErrorCode::kInvalidArgument,
                  "value out of range for '" + variables_[i].name + "'");
    }
    flat += strides_[i] * static_cast<std::size_t>(assignment[i]);
  }
  return flat;
}

std::vector<int> VariableSchema::Unflatten(std::size_t flat) const {
  std::vector<int> digits(variables_.size());
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    digits[i] = static_cast<int>(flat / strides_[i]);
    flat %= strides_[i];
  }
  return digits;
}

JointTable JointTable::Make(VariableSchema schema, std::vector<double> probs) {
  if (probs.size() != schema.num_states()) {
    throw Error(ErrorCode::kShapeMismatch,
                "expected " + std::to_string(schema.num_states()) +
                    " entries, got " + std::to_string(probs.size()));
  }
  ValidateEntries(probs, "joint table");
  double total = 0.0;
  for (double p : probs) total += p;
  if (std::abs(total - 1.0) > kNormalizationTolerance) {
    throw Error(ErrorCode::kNotNormalized,
                "joint table sums to " + std::to_string(total));
  }
  return JointTable(std::move(schema), std::move(probs));
}

JointTable JointTable::Marginal(const std::vector<std::string>& keep) const {
  std::vector<Variable> kept;
  kept.reserve(keep.size());
  for (const std::string& name : keep) {
    kept.push_back(schema_.variables()[schema_.IndexOf(name)]);
  }
  VariableSchema target(std::move(kept));
  std::vector<std::size_t> strides(schema_.size(), 0);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    strides[schema_.IndexOf(keep[i])] = target.Stride(i);
  }
  std::vector<double> out(target.num_states(), 0.0);
  ForEachMapped(schema_, strides, [&](std::size_t src, std::size_t dst) {
    out[dst] += probs_[src];
  });
  return JointTable(std::move(target), std::move(out));
}

double JointTable::Probability(const Evidence& evidence) const {
  std::vector<std::string> names;
  std::vector<int> values;
  for (const auto& [name, value] : evidence) {
    names.push_back(name);
    values.push_back(value);
  }
  const JointTable m = Marginal(names);
  return m.At(values);
}

JointTable JointTable::Condition(const Evidence& evidence) const {
  std::vector<int> fixed(schema_.size(), -1);
  for (const auto& [name, value] : evidence) {
    const std::size_t idx = schema_.IndexOf(name);
    if (value < 0 || value >= schema_.variables()[idx].cardinality) {
      throw Error(ErrorCode::kInvalidArgument,
                  "evidence value out of range for '" + name + "'");
    }
    fixed[idx] = value;
  }
  std::vector<Variable> rest;
  for (std::size_t i = 0; i < schema_.size(); ++i) {
    if (fixed[i] < 0) rest.push_back(schema_.variables()[i]);
  }
  VariableSchema target(std::move(rest));
  std::vector<std::size_t> strides(schema_.size(), 0);
  for (std::size_t i = 0, j = 0; i < schema_.size(); ++i) {
    if (fixed[i] < 0) strides[i] = target.Stride(j++);
  }
  std::vector<double> out(target.num_states(), 0.0);
  double mass = 0.0;
  ForEachMapped(schema_, strides, [&](std::size_t src, std::size_t dst) {
    std::size_t rem = src;
    for (std::size_t i = 0; i < schema_.size(); ++i) {
      const auto digit = static_cast<int>(rem / schema_.Stride(i));
      rem %= schema_.Stride(i);
      if (fixed[i] >= 0 && digit != fixed[i]) return;
    }
    out[dst] += probs_[src];
    mass += probs_[src];
  });
  if (!(mass > 0.0)) {
    throw Error(ErrorCode::kZeroProbabilityEvidence,
                "conditioning event has zero probability");
  }
  for (double& p : out) p /= mass;
  return JointTable(std::move(target), std::move(out));
}

JointTable JointTable::Extend(const Channel& channel) const {
  const Variable& out_var = channel.output();
  if (schema_.Contains(out_var.name)) {
    throw Error(ErrorCode::kVariableCollision,
                "variable '" + out_var.name + "' already present");
  }
  std::vector<std::size_t> in_strides(schema_.size(), 0);
  const VariableSchema& in = channel.inputs();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const std::size_t idx = schema_.IndexOf(in.variables()[i].name);
    if (schema_.variables()[idx].cardinality != in.variables()[i].cardinality) {
      throw Error(ErrorCode::kShapeMismatch,
                  "cardinality mismatch for '" + in.variables()[i].name + "'");
    }
    in_strides[idx] = in.Stride(i);
  }
  std::vector<Variable> vars = schema_.variables();
  vars.push_back(out_var);
  VariableSchema target(std::move(vars));
  const auto card = static_cast<std::size_t>(out_var.cardinality);
  std::vector<double> out(target.num_states(), 0.0);
  ForEachMapped(schema_, in_strides, [&](std::size_t src, std::size_t row) {
    const double p = probs_[src];
    const std::span<const double> q = channel.Row(row);
    for (std::size_t o = 0; o < card; ++o) out[src * card + o] = p * q[o];
  });
  return JointTable(std::move(target), std::move(out));
}

Channel Channel::Make(VariableSchema inputs, Variable output,
                      std::vector<double> table) {
  if (output.cardinality < 1) {
    throw Error(ErrorCode::kInvalidArgument, "output cardinality < 1");
  }
  if (inputs.Contains(output.name)) {
    throw Error(ErrorCode::kVariableCollision,
                "output '" + output.name + "' is also an input");
  }
  const auto card = static_cast<std::size_t>(output.cardinality);
  if (table.size() != inputs.num_states() * card) {
    throw Error(ErrorCode::kShapeMismatch, "channel table has wrong size");
  }
  ValidateEntries(table, "channel table");
  for (std::size_t r = 0; r < inputs.num_states(); ++r) {
    double sum = 0.0;
    for (std::size_t o = 0; o < card; ++o) sum += table[r * card + o];
    if (std::abs(sum - 1.0) > kChannelTolerance) {
      throw Error(ErrorCode::kNotNormalized,
                  "channel row " + std::to_string(r) + " sums to " +
                      std::to_string(sum));
    }
  }
  return Channel(std::move(inputs), std::move(output), std::move(table));
}

Channel Channel::FromJoint(const JointTable& joint,
                           const std::vector<std::string>& inputs,
                           const std::string& output) {
  std::vector<std::string> keep = inputs;
  keep.push_back(output);
  const JointTable m = joint.Marginal(keep);
  const Variable out_var = m.schema().variables().back();
  std::vector<Variable> in_vars(m.schema().variables().begin(),
                                m.schema().variables().end() - 1);
  const auto card = static_cast<std::size_t>(out_var.cardinality);
  std::vector<double> table(m.probs().begin(), m.probs().end());
  for (std::size_t r = 0; r * card < table.size(); ++r) {
    double sum = 0.0;
    for (std::size_t o = 0; o < card; ++o) sum += table[r * card + o];
    for (std::size_t o = 0; o < card; ++o) {
      table[r * card + o] = sum > 0.0 ? table[r * card + o] / sum
                                      : 1.0 / static_cast<double>(card);
    }
  }
  return Channel(VariableSchema(std::move(in_vars)), out_var, std::move(table));
}

Channel Channel::WithOutputName(std::string name) const {
  Variable out = output_;
  out.name = std::move(name);
  return Make(inputs_, std::move(out), table_);
}

}  // namespace shiftlab
