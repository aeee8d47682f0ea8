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

#include "shiftlab/info.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "shiftlab/error.h"

namespace shiftlab {
namespace {

constexpr double kClampFloor = -1e-12;
// Conditional-independence threshold used to decide whether the selection
// assumptions of the concept-shift bounds apply to a joint.
constexpr double kApplicabilityTolerance = 1e-12;

double XLogX(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

double EntropyOfTable(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) h -= XLogX(p);
  return h;
}

void RequireDisjoint(std::initializer_list<const VarSet*> sets) {
  std::set<std::string> seen;
  for (const VarSet* s : sets) {
    for (const std::string& name : *s) {
      if (!seen.insert(name).second) {
        throw Error(ErrorCode::kOverlappingVariableSets,
                    "variable '" + name + "' appears in more than one set");
      }
    }
  }
}

VarSet Union(std::initializer_list<const VarSet*> sets) {
  VarSet out;
  for (const VarSet* s : sets) out.insert(out.end(), s->begin(), s->end());
  return out;
}

double ClampMi(double mi) { return (mi < 0.0 && mi >= kClampFloor) ? 0.0 : mi; }

// Memoizes marginal entropies of one joint, keyed by the sorted variable set.
class EntropyCache {
 public:
  explicit EntropyCache(const JointTable& joint) : joint_(joint) {}

  double H(VarSet vars) {
    if (vars.empty()) return 0.0;
    std::sort(vars.begin(), vars.end());
    auto it = cache_.find(vars);
    if (it != cache_.end()) return it->second;
    const double h = EntropyOfTable(joint_.Marginal(vars).probs());
    cache_.emplace(std::move(vars), h);
    return h;
  }

  double Mi(const VarSet& a, const VarSet& b, const VarSet& given = {}) {
    const double mi = H(Union({&a, &given})) + H(Union({&b, &given})) -
                      H(Union({&a, &b, &given})) - H(given);
    return ClampMi(mi);
  }

 private:
  const JointTable& joint_;
  std::map<VarSet, double> cache_;
};

bool SameNames(VarSet a, VarSet b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

InequalityRecord Inequality(std::string name, double lhs, double rhs,
                            std::optional<int> z = std::nullopt,
                            InequalityForm form = InequalityForm::kStated) {
  InequalityRecord r;
  r.name = std::move(name);
  r.z = z;
  r.lhs = lhs;
  r.rhs = rhs;
  r.slack = rhs - lhs;
  r.holds = std::isinf(rhs) ? true : lhs <= rhs + kInequalitySlack;
  r.form = form;
  return r;
}

double PinskerCoefficient(double m, double big_m) {
  // m log m / (1 - m) tends to -1 and M log M / (M - 1) to 1 at ratio 1.
  const double low = m == 1.0 ? -1.0 : XLogX(m) / (1.0 - m);
  const double high = big_m == 1.0 ? 1.0 : XLogX(big_m) / (big_m - 1.0);
  return low + high;
}

}  // namespace

double Entropy(const JointTable& joint, const VarSet& target,
               const VarSet& given) {
  RequireDisjoint({&target, &given});
  const double joint_h =
      EntropyOfTable(joint.Marginal(Union({&target, &given})).probs());
  const double given_h =
      given.empty() ? 0.0 : EntropyOfTable(joint.Marginal(given).probs());
  return std::max(0.0, joint_h - given_h);
}

double MutualInformation(const JointTable& joint, const VarSet& a,
                         const VarSet& b, const VarSet& given) {
  RequireDisjoint({&a, &b, &given});
  for (const VarSet* s : {&a, &b, &given}) {
    for (const std::string& name : *s) joint.schema().IndexOf(name);
  }
  EntropyCache cache(joint);
  return cache.Mi(a, b, given);
}

Divergence KlDivergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw Error(ErrorCode::kShapeMismatch, "distributions differ in size");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return Divergence::Infinite();
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return {std::max(0.0, kl), true};
}

Divergence KlConditional(const JointTable& p, const Channel& q,
                         const std::string& target, const VarSet& features) {
  if (q.output().name != target || !SameNames(q.InputNames(), features)) {
    throw Error(ErrorCode::kSchemaMismatch,
                "channel does not map the given features to '" + target + "'");
  }
  VarSet keep = q.InputNames();
  keep.push_back(target);
  const JointTable m = p.Marginal(keep);
  if (m.schema().Cardinality(target) != q.output().cardinality) {
    throw Error(ErrorCode::kSchemaMismatch, "target cardinality mismatch");
  }
  const auto card = static_cast<std::size_t>(q.output().cardinality);
  double kl = 0.0;
  for (std::size_t r = 0; r < q.num_input_states(); ++r) {
    const std::span<const double> row = m.probs().subspan(r * card, card);
    double mass = 0.0;
    for (double v : row) mass += v;
    if (mass <= 0.0) continue;
    const std::span<const double> qrow = q.Row(r);
    for (std::size_t y = 0; y < card; ++y) {
      if (row[y] <= 0.0) continue;
      if (qrow[y] <= 0.0) return Divergence::Infinite();
      kl += row[y] * std::log(row[y] / mass / qrow[y]);
    }
  }
  return {std::max(0.0, kl), true};
}

double Jsd(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw Error(ErrorCode::kShapeMismatch, "distributions differ in size");
  }
  std::vector<double> mix(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) mix[i] = 0.5 * (p[i] + q[i]);
  const double v =
      0.5 * KlDivergence(p, mix).nats + 0.5 * KlDivergence(q, mix).nats;
  return std::clamp(v, 0.0, std::numbers::ln2);
}

ShiftDecomposition DecomposeShift(const JointTable& joint,
                                  const VarSet& features,
                                  const std::string& target) {
  if (!joint.schema().Contains(kSelection)) {
    throw Error(ErrorCode::kMissingSelectionVariable,
                "joint has no selection variable 't'");
  }
  const VarSet t = {kSelection};
  const VarSet y = {target};
  RequireDisjoint({&features, &y, &t});
  EntropyCache cache(joint);
  ShiftDecomposition d;
  d.distribution_shift = cache.Mi(Union({&features, &y}), t);
  d.covariate_shift = cache.Mi(features, t);
  d.concept_shift = cache.Mi(y, t, features);
  return d;
}

PinskerBound PinskerLatentBound(const JointTable& joint_with_z,
                                const Channel& classifier, int z_value) {
  const JointTable m = joint_with_z.Marginal({kLatent, kSelection, kTarget});
  const int ny = m.schema().Cardinality(kTarget);
  const int nz = m.schema().Cardinality(kLatent);
  if (classifier.InputNames() != VarSet{kLatent} ||
      classifier.output().cardinality != ny ||
      classifier.num_input_states() != static_cast<std::size_t>(nz)) {
    throw Error(ErrorCode::kSchemaMismatch, "classifier must map z to y");
  }
  if (z_value < 0 || z_value >= nz) {
    throw Error(ErrorCode::kInvalidArgument, "latent state out of range");
  }
  std::vector<double> test(ny);
  double test_mass = 0.0;
  double train_mass = 0.0;
  for (int y = 0; y < ny; ++y) {
    test[y] = m.At(std::vector<int>{z_value, 0, y});
    test_mass += test[y];
    train_mass += m.At(std::vector<int>{z_value, 1, y});
  }
  if (!(test_mass > 0.0) || !(train_mass > 0.0)) {
    throw Error(ErrorCode::kZeroSupportZ,
                "latent state " + std::to_string(z_value) +
                    " lacks support on one of the splits");
  }
  for (double& v : test) v /= test_mass;
  const std::span<const double> q = classifier.Row(z_value);

  PinskerBound b;
  b.z = z_value;
  b.min_ratio = std::numeric_limits<double>::infinity();
  b.max_ratio = 0.0;
  for (int y = 0; y < ny; ++y) {
    if (q[y] <= 0.0) {
      if (test[y] > 0.0) b.infinite_ratio = true;
      continue;
    }
    const double r = test[y] / q[y];
    b.min_ratio = std::min(b.min_ratio, r);
    b.max_ratio = std::max(b.max_ratio, r);
  }
  if (b.infinite_ratio) {
    b.max_ratio = std::numeric_limits<double>::infinity();
    b.lhs = std::numeric_limits<double>::infinity();
    b.rhs = b.rhs_as_stated = std::numeric_limits<double>::infinity();
    b.jsd = Jsd(test, q);
    return b;
  }
  // Ratios where q > 0 but the test mass is zero still count toward m(z).
  b.lhs = KlDivergence(test, q).nats;
  b.jsd = Jsd(test, q);
  const double coef = PinskerCoefficient(b.min_ratio, b.max_ratio);
  b.rhs = std::numbers::sqrt2 * coef * std::sqrt(b.jsd);
  b.rhs_as_stated = coef / std::numbers::sqrt2 * std::sqrt(b.jsd);
  b.holds = b.lhs <= b.rhs + kInequalitySlack;
  b.holds_as_stated = b.lhs <= b.rhs_as_stated + kInequalitySlack;
  return b;
}

int PropositionReport::Violations(InequalityForm form) const {
  return static_cast<int>(std::count_if(
      records.begin(), records.end(), [&](const InequalityRecord& r) {
        return r.applicable && r.form == form && !r.holds;
      }));
}

int PropositionReport::Violations(const std::string& name) const {
  return static_cast<int>(std::count_if(
      records.begin(), records.end(), [&](const InequalityRecord& r) {
        return r.applicable && r.name == name && !r.holds;
      }));
}

std::optional<double> PropositionReport::WorstSlack(
    const std::string& name) const {
  std::optional<double> worst;
  for (const InequalityRecord& r : records) {
    if (!r.applicable || r.name != name) continue;
    if (!worst || r.slack < *worst) worst = r.slack;
  }
  return worst;
}

PropositionReport CheckPropositions(const JointTable& joint,
                                    const Channel& encoder,
                                    const Channel& classifier,
                                    const Channel& model) {
  const VarSet features = encoder.InputNames();
  const std::string z_name = encoder.output().name;
  const VarSet y = {kTarget};
  const VarSet e = {kEnvironment};
  const VarSet t = {kSelection};
  const VarSet z = {z_name};
  for (const char* required : {kTarget, kEnvironment, kSelection}) {
    joint.schema().IndexOf(required);
  }
  if (joint.schema().Cardinality(kSelection) != 2) {
    throw Error(ErrorCode::kSchemaMismatch, "selection variable must be binary");
  }
  if (model.output().name != kTarget || !SameNames(model.InputNames(), features)) {
    throw Error(ErrorCode::kSchemaMismatch, "model must map features to y");
  }
  if (classifier.output().name != kTarget || classifier.InputNames() != z) {
    throw Error(ErrorCode::kSchemaMismatch, "classifier must map z to y");
  }
  if (z_name != kLatent) {
    throw Error(ErrorCode::kSchemaMismatch, "encoder output must be named z");
  }

  const JointTable full = joint.Extend(encoder);
  EntropyCache h(full);
  PropositionReport report;
  const double p_train = full.Probability({{kSelection, 1}});
  const double p_test = full.Probability({{kSelection, 0}});
  report.alpha = std::min(p_train, p_test);
  const bool both_splits = p_train > 0.0 && p_test > 0.0;

  // Composition q(y|x) = sum_z q(z|x) q(y|z).
  const auto ny = static_cast<std::size_t>(classifier.output().cardinality);
  const auto nz = static_cast<std::size_t>(encoder.output().cardinality);
  std::vector<double> induced(encoder.num_input_states() * ny, 0.0);
  for (std::size_t x = 0; x < encoder.num_input_states(); ++x) {
    for (std::size_t k = 0; k < nz; ++k) {
      const double w = encoder(x, static_cast<int>(k));
      for (std::size_t c = 0; c < ny; ++c) {
        induced[x * ny + c] += w * classifier(k, static_cast<int>(c));
      }
    }
  }
  const Channel induced_model =
      Channel::Make(encoder.inputs(), classifier.output(), std::move(induced));

  if (both_splits) {
    const JointTable train = full.Condition({{kSelection, 1}});
    const JointTable test = full.Condition({{kSelection, 0}});
    const double concept_shift = h.Mi(y, t, features);
    const double bound = concept_shift / (1.0 - report.alpha);

    const auto ood = [&](const std::string& name, const Channel& q) {
      const Divergence a = KlConditional(train, q, kTarget, features);
      const Divergence b = KlConditional(test, q, kTarget, features);
      report.records.push_back(Inequality(name, bound, a.value() + b.value()));
    };
    ood("ood_error_lower_bound", model);
    ood("ood_error_lower_bound_ml",
        Channel::FromJoint(train, features, kTarget));

    const auto decomposition = [&](const std::string& name,
                                   const JointTable& split) {
      const Divergence err = KlConditional(split, induced_model, kTarget, features);
      const double info_loss = MutualInformation(split, features, y, z);
      const Divergence latent = KlConditional(split, classifier, kTarget, z);
      report.records.push_back(
          Inequality(name, err.value(), info_loss + latent.value()));
    };
    decomposition("train_error_decomposition", train);
    decomposition("test_error_decomposition", test);

    // Per-latent-state checks read p(z, t, y).
    const JointTable zty = full.Marginal({z_name, kSelection, kTarget});
    for (std::size_t k = 0; k < nz; ++k) {
      std::vector<double> p0(ny), p1(ny);
      double m0 = 0.0, m1 = 0.0;
      for (std::size_t c = 0; c < ny; ++c) {
        p0[c] = zty[(k * 2 + 0) * ny + c];
        p1[c] = zty[(k * 2 + 1) * ny + c];
        m0 += p0[c];
        m1 += p1[c];
      }
      if (!(m0 > 0.0) || !(m1 > 0.0)) continue;
      // I(y; t | z = k) from the normalized slice p(y, t | z = k).
      const double mz = m0 + m1;
      double shift_at_z = 0.0;
      for (std::size_t c = 0; c < ny; ++c) {
        const double py = (p0[c] + p1[c]) / mz;
        if (p0[c] > 0.0) shift_at_z += p0[c] / mz * std::log(p0[c] / m0 / py);
        if (p1[c] > 0.0) shift_at_z += p1[c] / mz * std::log(p1[c] / m1 / py);
      }
      shift_at_z = std::max(0.0, shift_at_z);
      for (std::size_t c = 0; c < ny; ++c) {
        p0[c] /= m0;
        p1[c] /= m1;
      }
      const std::span<const double> q = classifier.Row(k);
      const Divergence train_kl = KlDivergence(p1, q);
      const double lhs = Jsd(p0, q);
      const auto jsd_bound = [&](double a) {
        if (!train_kl.finite) return std::numeric_limits<double>::infinity();
        const double s =
            std::sqrt(shift_at_z / (2.0 * a)) + std::sqrt(train_kl.nats / 2.0);
        return s * s;
      };
      const int zi = static_cast<int>(k);
      report.records.push_back(
          Inequality("latent_jsd_bound", lhs, jsd_bound(report.alpha), zi));
      report.records.push_back(Inequality("latent_jsd_bound_local_alpha", lhs,
                                          jsd_bound(std::min(m0, m1) / mz), zi,
                                          InequalityForm::kRederived));

      const PinskerBound pb = PinskerLatentBound(full, classifier, zi);
      InequalityRecord stated =
          Inequality("latent_kl_pinsker_bound", pb.lhs, pb.rhs_as_stated, zi);
      InequalityRecord tv = Inequality("latent_kl_pinsker_bound_tv", pb.lhs,
                                       pb.rhs, zi, InequalityForm::kRederived);
      stated.applicable = tv.applicable = !pb.infinite_ratio;
      report.records.push_back(stated);
      report.records.push_back(tv);
    }
  }

  const double latent_shift = h.Mi(y, t, z);
  {
    InequalityRecord r = Inequality("sufficiency_shift_bound", latent_shift,
                                    h.Mi(y, e, z));
    VarSet rest = Union({&features, &y, &z});
    r.applicable = h.Mi(t, rest, e) <= kApplicabilityTolerance;
    report.records.push_back(r);
  }
  {
    InequalityRecord r = Inequality("separation_shift_bound", latent_shift,
                                    h.Mi(y, t) + h.Mi(e, z, y));
    VarSet rest = Union({&features, &z});
    VarSet ey = Union({&e, &y});
    r.applicable = h.Mi(t, rest, ey) <= kApplicabilityTolerance;
    report.records.push_back(r);
  }
  {
    const double lhs = h.Mi(e, z, y) + h.Mi(e, y);
    const double rhs = h.Mi(e, y, z) + h.Mi(e, z);
    InequalityRecord r;
    r.name = "criteria_chain_identity";
    r.lhs = lhs;
    r.rhs = rhs;
    r.slack = -std::abs(lhs - rhs);
    r.identity = true;
    r.holds = std::abs(lhs - rhs) <= kIdentityTolerance;
    report.records.push_back(r);
  }
  return report;
}

}  // namespace shiftlab
