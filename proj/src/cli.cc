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

#include "shiftlab/cli.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "shiftlab/analysis.h"
#include "shiftlab/error.h"
#include "shiftlab/io.h"

namespace shiftlab {
namespace {

using nlohmann::json;

constexpr std::size_t kMaxFuzzExamples = 10;

std::string Fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  // Avoid "-0.000000" for values that round to zero.
  std::string s(buf);
  if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

// JSON has no infinity; non-finite values are written as null.
json Number(double value) {
  return std::isfinite(value) ? json(value) : json(nullptr);
}

std::string_view FormName(InequalityForm form) {
  return form == InequalityForm::kStated ? "stated" : "rederived";
}

json OptimizerToJson(const OptimizerConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"max_iterations", c.max_iterations},
          {"convergence_tolerance", c.convergence_tolerance},
          {"convergence_window", c.convergence_window},
          {"init_sigma", c.init_sigma},
          {"num_latents", c.num_latents}};
}

template <typename T>
void ReadKey(const json& j, const char* key, T& target) {
  if (j.contains(key)) target = j.at(key).get<T>();
}

std::vector<double> LogSpace(double lo, double hi, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(n == 1 ? std::pow(10.0, lo)
                         : std::pow(10.0, lo + (hi - lo) * i / (n - 1)));
  }
  return out;
}

double ParseNumber(const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw Error(ErrorCode::kInvalidArgument, "not a number: '" + text + "'");
  }
  return v;
}

std::vector<std::string> Split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) parts.push_back(item);
  return parts;
}

int ThreadBudget() {
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("SHIFTLAB_THREADS")) {
    try {
      threads = std::min(threads, std::max(1, std::stoi(env)));
    } catch (const std::exception&) {
      // Ignore malformed values.
    }
  }
  return threads;
}

std::filesystem::path OutPath(const RunConfig& config, const std::string& name) {
  std::filesystem::path dir(config.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorCode::kIoError, "cannot create directory " + dir.string());
  }
  return dir / name;
}

// ---------------------------------------------------------------------------
// Fuzzing

std::vector<double> DirichletRow(std::mt19937_64& gen, int n, double alpha) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> row(n);
  double sum = 0.0;
  for (double& v : row) sum += v = gamma(gen) + 1e-300;
  for (double& v : row) v /= sum;
  return row;
}

// Random conditional table with `rows` rows over `n` outcomes; each row is
// occasionally given an exact zero to exercise infinite divergences.
std::vector<double> RandomRows(std::mt19937_64& gen, std::size_t rows, int n,
                               double zero_rate) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> table;
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<double> row = DirichletRow(gen, n, unit(gen) < 0.5 ? 1.0 : 0.3);
    if (unit(gen) < zero_rate) {
      const int k = std::uniform_int_distribution<int>(0, n - 1)(gen);
      row[k] = 0.0;
      double sum = 0.0;
      for (double v : row) sum += v;
      if (sum > 0.0) {
        for (double& v : row) v /= sum;
      } else {
        row[(k + 1) % n] = 1.0;
      }
    }
    table.insert(table.end(), row.begin(), row.end());
  }
  return table;
}

// Joint over (x, y, e, t) with t drawn from p(t | e) or p(t | e, y).
JointTable RandomJoint(std::mt19937_64& gen, bool selection_on_label) {
  const int nx = kNumFeatureStates, ny = 2, ne = kNumEnvironments;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::vector<double> base = DirichletRow(gen, nx * ny * ne, 0.5);
  std::vector<double> keep(ne * ny);
  for (int e = 0; e < ne; ++e) {
    const double pe = unit(gen);
    for (int y = 0; y < ny; ++y) {
      keep[e * ny + y] = selection_on_label ? unit(gen) : pe;
    }
  }
  // Force a deterministic split for one environment now and then.
  if (unit(gen) < 0.3) {
    const int e = std::uniform_int_distribution<int>(0, ne - 1)(gen);
    const double v = unit(gen) < 0.5 ? 0.0 : 1.0;
    for (int y = 0; y < ny; ++y) keep[e * ny + y] = v;
  }
  VariableSchema schema({{kFeatures, nx}, {kTarget, ny}, {kEnvironment, ne},
                         {kSelection, 2}});
  std::vector<double> probs(schema.num_states());
  double train = 0.0;
  for (int x = 0; x < nx; ++x) {
    for (int y = 0; y < ny; ++y) {
      for (int e = 0; e < ne; ++e) {
        const double p = base[(x * ny + y) * ne + e];
        const double k = keep[e * ny + y];
        const std::size_t at = ((x * ny + y) * ne + e) * 2;
        probs[at + 0] = p * (1.0 - k);
        probs[at + 1] = p * k;
        train += p * k;
      }
    }
  }
  if (!(train > 1e-6) || !(train < 1.0 - 1e-6)) {
    // Both splits need mass; fall back to a fair coin.
    for (std::size_t i = 0; i < probs.size(); i += 2) {
      const double p = probs[i] + probs[i + 1];
      probs[i] = probs[i + 1] = p / 2.0;
    }
  }
  return JointTable::Make(std::move(schema), std::move(probs));
}

Channel RandomEncoder(std::mt19937_64& gen, int nx) {
  static constexpr double kSigmas[] = {0.1, 1.0, 3.0, 10.0};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int nz = std::uniform_int_distribution<int>(1, 16)(gen);
  if (unit(gen) < 0.2) {
    std::vector<int> mapping(nx);
    std::uniform_int_distribution<int> pick(0, nz - 1);
    for (int& m : mapping) m = pick(gen);
    return DeterministicEncoder(mapping, nz);
  }
  const double sigma = kSigmas[std::uniform_int_distribution<int>(0, 3)(gen)];
  EncoderParams params = InitParams(gen(), sigma, nx, nz);
  return Materialize(params);
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

std::string RunConfig::ToJson() const {
  json j;
  j["dataset"] = json::array();
  for (DatasetVariant v : datasets) j["dataset"].push_back(VariantName(v));
  j["criterion"] = json::array();
  for (Criterion c : criteria) j["criterion"].push_back(CriterionName(c));
  j["lambda_grid"] = lambda_grid;
  j["seed"] = seed;
  j["out"] = out;
  j["format"] = format;
  j["optimizer"] = OptimizerToJson(optimizer);
  j["fuzz"] = fuzz;
  j["n"] = n;
  j["split"] = split;
  return j.dump(2) + "\n";
}

RunConfig RunConfig::FromJson(const std::string& text) {
  RunConfig config;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) {
      throw Error(ErrorCode::kInvalidArgument, "config must be a JSON object");
    }
    const auto names = [&](const char* key) {
      std::vector<std::string> list;
      if (!j.contains(key)) return list;
      const json& v = j.at(key);
      if (v.is_string()) {
        list.push_back(v.get<std::string>());
      } else {
        list = v.get<std::vector<std::string>>();
      }
      return list;
    };
    if (j.contains("dataset")) {
      config.datasets.clear();
      for (const std::string& s : names("dataset")) {
        if (s == "all") {
          config.datasets.assign(std::begin(kAllVariants), std::end(kAllVariants));
        } else {
          config.datasets.push_back(ParseVariant(s));
        }
      }
    }
    if (j.contains("criterion")) {
      config.criteria.clear();
      for (const std::string& s : names("criterion")) {
        if (s == "all") {
          config.criteria.assign(std::begin(kAllCriteria), std::end(kAllCriteria));
        } else {
          config.criteria.push_back(ParseCriterion(s));
        }
      }
    }
    ReadKey(j, "lambda_grid", config.lambda_grid);
    ReadKey(j, "seed", config.seed);
    ReadKey(j, "out", config.out);
    ReadKey(j, "format", config.format);
    ReadKey(j, "fuzz", config.fuzz);
    ReadKey(j, "n", config.n);
    ReadKey(j, "split", config.split);
    if (j.contains("optimizer")) {
      const json& o = j.at("optimizer");
      OptimizerConfig& c = config.optimizer;
      ReadKey(o, "learning_rate", c.learning_rate);
      ReadKey(o, "beta1", c.beta1);
      ReadKey(o, "beta2", c.beta2);
      ReadKey(o, "epsilon", c.epsilon);
      ReadKey(o, "max_iterations", c.max_iterations);
      ReadKey(o, "convergence_tolerance", c.convergence_tolerance);
      ReadKey(o, "convergence_window", c.convergence_window);
      ReadKey(o, "init_sigma", c.init_sigma);
      ReadKey(o, "num_latents", c.num_latents);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("bad config: ") + e.what());
  }
  return config;
}

bool RunConfig::operator==(const RunConfig& o) const {
  const OptimizerConfig& a = optimizer;
  const OptimizerConfig& b = o.optimizer;
  return datasets == o.datasets && criteria == o.criteria &&
         lambda_grid == o.lambda_grid && seed == o.seed && out == o.out &&
         format == o.format && fuzz == o.fuzz && n == o.n && split == o.split &&
         a.learning_rate == b.learning_rate && a.beta1 == b.beta1 &&
         a.beta2 == b.beta2 && a.epsilon == b.epsilon &&
         a.max_iterations == b.max_iterations &&
         a.convergence_tolerance == b.convergence_tolerance &&
         a.convergence_window == b.convergence_window &&
         a.init_sigma == b.init_sigma &&
         a.num_latents == b.num_latents;
}

std::vector<double> ParseLambdaGrid(const std::string& spec, Criterion criterion) {
  if (spec == "default") return DefaultLambdaGrid(criterion);
  std::vector<double> grid;
  for (const std::string& item : Split(spec, ',')) {
    if (item.rfind("logspace:", 0) == 0) {
      const std::vector<std::string> p = Split(item.substr(9), ':');
      if (p.size() != 3) {
        throw Error(ErrorCode::kInvalidArgument,
                    "expected logspace:LO:HI:N, got '" + item + "'");
      }
      const double n = ParseNumber(p[2]);
      if (n < 1 || n != std::floor(n)) {
        throw Error(ErrorCode::kInvalidArgument, "logspace count must be >= 1");
      }
      for (double v : LogSpace(ParseNumber(p[0]), ParseNumber(p[1]),
                               static_cast<int>(n))) {
        grid.push_back(v);
      }
    } else {
      grid.push_back(ParseNumber(item));
    }
  }
  if (grid.empty()) throw Error(ErrorCode::kInvalidArgument, "empty lambda grid");
  for (double v : grid) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument, "lambda values must be finite and >= 0");
    }
  }
  std::sort(grid.begin(), grid.end());
  return grid;
}

// ---------------------------------------------------------------------------
// Fuzzing

long FuzzSummary::Violations(InequalityForm form) const {
  long total = 0;
  for (const auto& [name, tally] : tallies) {
    if (tally.form == form) total += tally.violations;
  }
  return total;
}

FuzzSummary FuzzPropositions(DatasetVariant variant, int cases,
                             std::uint64_t seed) {
  FuzzSummary summary;
  summary.variant = variant;
  summary.cases = cases;
  const JointTable dataset = SufficientStatisticView(BuildJoint(variant));
  const std::size_t variant_index =
      static_cast<std::size_t>(std::find(std::begin(kAllVariants),
                                         std::end(kAllVariants), variant) -
                               std::begin(kAllVariants));
  std::mt19937_64 gen(DerivedSeed(seed, variant_index));
  for (int i = 0; i < cases; ++i) {
    // Three in four cases use the dataset itself.
    const int kind = i % 4;
    const JointTable joint =
        kind < 3 ? dataset : RandomJoint(gen, (i / 4) % 2 == 1);
    const Channel encoder = RandomEncoder(gen, kNumFeatureStates);
    const int nz = encoder.output().cardinality;
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const JointTable with_z = joint.Extend(encoder);
    Channel classifier =
        unit(gen) < 0.3 ? OptimalLatentClassifier(with_z)
                        : Channel::Make(VariableSchema({{kLatent, nz}}),
                                        Variable{kTarget, 2},
                                        RandomRows(gen, nz, 2, 0.05));
    Channel model =
        unit(gen) < 0.3
            ? InducedModel(encoder, classifier)
            : Channel::Make(VariableSchema({{kFeatures, kNumFeatureStates}}),
                            Variable{kTarget, 2},
                            RandomRows(gen, kNumFeatureStates, 2, 0.02));

    const PropositionReport report =
        CheckPropositions(joint, encoder, classifier, model);
    for (const InequalityRecord& r : report.records) {
      FuzzTally& tally = summary.tallies[r.name];
      tally.form = r.form;
      if (!r.applicable) continue;
      if (tally.checks == 0 || r.slack < tally.worst_slack) {
        tally.worst_slack = r.slack;
      }
      ++tally.checks;
      if (!r.holds) {
        ++tally.violations;
        if (summary.examples.size() < kMaxFuzzExamples) {
          summary.examples.push_back({i, r});
        }
      }
    }
  }
  return summary;
}

// ---------------------------------------------------------------------------
// Subcommands

namespace {

void EmitMeasures(const RunConfig& config, std::ostream& out) {
  const std::vector<MeasureDefinition>& measures = TableMeasures();
  std::string csv = "dataset";
  for (const MeasureDefinition& m : measures) csv += "," + m.label;
  csv += "\n";
  json rows = json::array();
  for (DatasetVariant v : config.datasets) {
    const std::vector<double> values = ComputeMeasures(v);
    csv += std::string(VariantLabel(v));
    json row = {{"dataset", VariantName(v)}};
    for (std::size_t i = 0; i < values.size(); ++i) {
      csv += "," + Fixed(values[i], 6);
      row["values"][measures[i].label] = values[i];
    }
    csv += "\n";
    rows.push_back(row);
  }
  out << csv;
  if (config.format == "json") {
    json doc = {{"unit", "nats"}, {"rows", rows}};
    WriteFileAtomic(OutPath(config, "measures.json"), doc.dump(2) + "\n");
  } else {
    WriteFileAtomic(OutPath(config, "measures.csv"), csv);
  }
}

json TrajectoryJson(DatasetVariant v, const Trajectory& t) {
  json points = json::array();
  for (const TrajectoryPoint& p : t.points) {
    points.push_back({{"lambda", p.lambda},
                      {"train_ce", p.train_ce},
                      {"test_ce", p.test_ce},
                      {"regularizer", p.regularizer},
                      {"predictive_info", p.predictive_info},
                      {"iterations", p.iterations},
                      {"converged", p.converged}});
  }
  return {{"dataset", VariantName(v)},
          {"criterion", CriterionName(t.criterion)},
          {"points", points}};
}

void EmitSweep(const RunConfig& config, std::ostream& out) {
  const int threads = ThreadBudget();
  for (DatasetVariant v : config.datasets) {
    const JointTable joint = SufficientStatisticView(BuildJoint(v));
    for (Criterion c : config.criteria) {
      OptimizerConfig opt = config.optimizer;
      opt.seed = config.seed;
      const Trajectory t =
          Sweep(joint, c, ParseLambdaGrid(config.lambda_grid, c), opt, threads);
      const std::string stem = "trajectory_" + std::string(VariantName(v)) + "_" +
                               std::string(CriterionName(c));
      int unconverged = 0;
      for (const TrajectoryPoint& p : t.points) unconverged += !p.converged;
      if (config.format == "json") {
        WriteFileAtomic(OutPath(config, stem + ".json"),
                        TrajectoryJson(v, t).dump(2) + "\n");
      } else {
        WriteFileAtomic(OutPath(config, stem + ".csv"), TrajectoryCsv(t));
      }
      const TrajectoryPoint& last = t.points.back();
      out << VariantName(v) << ' ' << CriterionName(c) << ": " << t.points.size()
          << " points, " << unconverged << " unconverged; lambda="
          << FormatSig(last.lambda, 6) << " train_ce=" << Fixed(last.train_ce, 4)
          << " test_ce=" << Fixed(last.test_ce, 4) << "\n";
    }
  }
}

int EmitVerify(const RunConfig& config, InequalityForm judged, std::ostream& out) {
  json datasets = json::array();
  long judged_violations = 0;
  for (DatasetVariant v : config.datasets) {
    const FuzzSummary s = FuzzPropositions(v, config.fuzz, config.seed);
    json by_name = json::array();
    for (const auto& [name, tally] : s.tallies) {
      by_name.push_back({{"name", name},
                         {"form", FormName(tally.form)},
                         {"checks", tally.checks},
                         {"violations", tally.violations},
                         {"worst_slack", Number(tally.worst_slack)}});
    }
    json examples = json::array();
    for (const FuzzViolation& x : s.examples) {
      json e = {{"case", x.case_index},
                {"name", x.record.name},
                {"form", FormName(x.record.form)},
                {"lhs", Number(x.record.lhs)},
                {"rhs", Number(x.record.rhs)}};
      if (x.record.z) e["z"] = *x.record.z;
      examples.push_back(e);
    }
    const long stated = s.Violations(InequalityForm::kStated);
    const long rederived = s.Violations(InequalityForm::kRederived);
    judged_violations += judged == InequalityForm::kStated ? stated : rederived;
    datasets.push_back({{"dataset", VariantName(v)},
                        {"cases", s.cases},
                        {"violations", {{"stated", stated}, {"rederived", rederived}}},
                        {"inequalities", by_name},
                        {"examples", examples}});
    out << VariantName(v) << ": " << s.cases << " cases, " << stated
        << " stated-form violations, " << rederived
        << " rederived-form violations\n";
    for (const auto& [name, tally] : s.tallies) {
      if (tally.violations > 0) {
        out << "  " << name << " (" << FormName(tally.form)
            << "): " << tally.violations << " of " << tally.checks << "\n";
      }
    }
  }
  const json report = {{"seed", config.seed},
                       {"cases_per_dataset", config.fuzz},
                       {"judged_form", FormName(judged)},
                       {"slack", kInequalitySlack},
                       {"violations", judged_violations},
                       {"passed", judged_violations == 0},
                       {"datasets", datasets}};
  WriteFileAtomic(OutPath(config, "proposition_report.json"), report.dump(2) + "\n");
  out << (judged_violations == 0 ? "PASS" : "FAIL") << ": " << judged_violations
      << " violations of the " << FormName(judged) << " inequalities\n";
  return judged_violations == 0 ? kExitOk : kExitFailure;
}

void EmitSample(const RunConfig& config, const std::string& metadata_path,
                std::ostream& out) {
  for (DatasetVariant v : config.datasets) {
    const std::vector<SampleRecord> records =
        Sample(v, static_cast<std::size_t>(config.n), config.seed, config.split);
    const std::string stem = "samples_" + std::string(VariantName(v)) + "_t" +
                             std::to_string(config.split);
    const std::filesystem::path csv = OutPath(config, stem + ".csv");
    ExportRecords(records, csv);
    const json meta = {{"variant", VariantName(v)},
                       {"n", config.n},
                       {"seed", config.seed},
                       {"split", config.split},
                       {"generator", kSamplerGenerator}};
    std::filesystem::path meta_path =
        metadata_path.empty() || config.datasets.size() > 1
            ? OutPath(config, stem + ".metadata.json")
            : std::filesystem::path(metadata_path);
    WriteFileAtomic(meta_path, meta.dump(2) + "\n");
    out << "wrote " << records.size() << " records to " << csv.string() << "\n";
  }
}

void EmitBaselines(const RunConfig& config, std::ostream& out) {
  std::string csv = "dataset,baseline,train_ce,test_ce\n";
  json rows = json::array();
  for (DatasetVariant v : config.datasets) {
    const JointTable joint = SufficientStatisticView(BuildJoint(v));
    for (BaselineKind kind : kAllBaselines) {
      const Channel model = Baseline(v, kind);
      const Divergence train = CrossEntropy(joint, model, kTarget, {kFeatures}, 1);
      const Divergence test = CrossEntropy(joint, model, kTarget, {kFeatures}, 0);
      csv += std::string(VariantName(v)) + "," + std::string(BaselineName(kind)) +
             "," + FormatSig(train.value()) + "," + FormatSig(test.value()) + "\n";
      rows.push_back({{"dataset", VariantName(v)},
                      {"baseline", BaselineName(kind)},
                      {"train_ce", Number(train.value())},
                      {"test_ce", Number(test.value())}});
    }
  }
  out << csv;
  if (config.format == "json") {
    WriteFileAtomic(OutPath(config, "baselines.json"), rows.dump(2) + "\n");
  } else {
    WriteFileAtomic(OutPath(config, "baselines.csv"), csv);
  }
}

struct SuppliedEncoder {
  EncoderParams params;
  std::string criterion = "supplied";
  double lambda = 0.0;
};

// {"num_inputs": 20, "num_latents": K, "logits": [...row-major...],
//  optional "criterion", "lambda"}.
SuppliedEncoder LoadEncoder(const std::string& path) {
  SuppliedEncoder enc;
  try {
    const json j = json::parse(ReadFile(path));
    const int nx = j.value("num_inputs", kNumFeatureStates);
    const int nz = j.at("num_latents").get<int>();
    const std::vector<double> logits = j.at("logits").get<std::vector<double>>();
    if (nx < 1 || nz < 1 || logits.size() != static_cast<std::size_t>(nx) * nz) {
      throw Error(ErrorCode::kInvalidArgument, "encoder logits have the wrong size");
    }
    enc.params = EncoderParams(nx, nz);
    enc.params.logits() = logits;
    enc.criterion = j.value("criterion", enc.criterion);
    enc.lambda = j.value("lambda", 0.0);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument,
                "bad encoder file " + path + ": " + e.what());
  }
  return enc;
}

void EmitDecompose(const RunConfig& config, const std::string& encoder_path,
                   bool grid_given, std::ostream& out) {
  for (DatasetVariant v : config.datasets) {
    const JointTable joint = SufficientStatisticView(BuildJoint(v));
    std::vector<DecompositionRow> rows;
    const auto add = [&](const std::string& label, double lambda,
                         const EncoderParams& params) {
      const JointTable with_z = joint.Extend(Materialize(params));
      rows.push_back({label, lambda,
                      DecomposeTestError(with_z, OptimalLatentClassifier(with_z))});
    };
    if (!encoder_path.empty()) {
      const SuppliedEncoder enc = LoadEncoder(encoder_path);
      add(enc.criterion, enc.lambda, enc.params);
    } else {
      for (Criterion c : config.criteria) {
        const std::vector<double> grid =
            grid_given ? ParseLambdaGrid(config.lambda_grid, c)
                       : std::vector<double>{1e6};
        for (std::size_t i = 0; i < grid.size(); ++i) {
          OptimizerConfig opt = config.optimizer;
          opt.seed = DerivedSeed(config.seed, i);
          add(std::string(CriterionName(c)), grid[i],
              Optimize(joint, c, grid[i], opt).params);
        }
      }
    }
    const std::string stem = "decomposition_" + std::string(VariantName(v));
    if (config.format == "json") {
      json list = json::array();
      for (const DecompositionRow& r : rows) {
        list.push_back({{"criterion", r.criterion},
                        {"lambda", r.lambda},
                        {"test_error", Number(r.decomposition.test_error)},
                        {"info_loss", Number(r.decomposition.info_loss)},
                        {"latent_error", Number(r.decomposition.latent_error)},
                        {"bound_gap", Number(r.decomposition.bound_gap)}});
      }
      WriteFileAtomic(OutPath(config, stem + ".json"), list.dump(2) + "\n");
    } else {
      WriteFileAtomic(OutPath(config, stem + ".csv"), DecompositionCsv(rows));
    }
    out << VariantName(v) << "\n" << DecompositionCsv(rows);
  }
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app("Exact information measures and encoder optimization for the "
               "colored-digit selection-bias datasets.",
               "shiftlab");
  app.require_subcommand(1);

  std::vector<std::string> datasets, criteria;
  std::string lambda_grid, out_dir, format, config_path, metadata, encoder_path,
      form = "stated";
  std::uint64_t seed = 0, n = 0;
  int fuzz = 0, split = 1, max_iterations = 0;
  double init_sigma = 0.0, learning_rate = 0.0;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--dataset", datasets,
                    "cmnist, d-cmnist, y-cmnist or all (repeatable)");
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--format", format, "Output format")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--config", config_path, "JSON run configuration")
        ->check(CLI::ExistingFile);
  };
  const auto optimizer = [&](CLI::App* sub) {
    sub->add_option("--criterion", criteria,
                    "bottleneck, independence, sufficiency, separation or all");
    sub->add_option("--lambda-grid", lambda_grid,
                    "default, or comma list of values and logspace:LO:HI:N");
    sub->add_option("--max-iterations", max_iterations, "Optimizer iteration cap")
        ->check(CLI::PositiveNumber);
    sub->add_option("--init-sigma", init_sigma, "Std. dev. of initial logits")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--learning-rate", learning_rate, "Adam step size")
        ->check(CLI::PositiveNumber);
  };

  CLI::App* measures = app.add_subcommand("measures", "Dataset property table");
  common(measures);
  CLI::App* sweep = app.add_subcommand("sweep", "Regularization trajectories");
  common(sweep);
  optimizer(sweep);
  CLI::App* verify = app.add_subcommand("verify", "Proposition fuzz suite");
  common(verify);
  verify->add_option("--fuzz", fuzz, "Random cases per dataset")
      ->check(CLI::NonNegativeNumber);
  verify->add_option("--form", form, "Inequalities that decide the exit code")
      ->check(CLI::IsMember({"stated", "rederived"}));
  CLI::App* sample = app.add_subcommand("sample", "Draw dataset records");
  common(sample);
  sample->add_option("--n", n, "Number of records");
  sample->add_option("--split", split, "Selection value t (0 or 1)")
      ->check(CLI::Range(0, 1));
  sample->add_option("--metadata", metadata, "Metadata sidecar path");
  CLI::App* baselines = app.add_subcommand("baselines", "Baseline classifiers");
  common(baselines);
  CLI::App* decompose = app.add_subcommand("decompose", "Test error decomposition");
  common(decompose);
  optimizer(decompose);
  decompose->add_option("--encoder", encoder_path, "Encoder logits JSON")
      ->check(CLI::ExistingFile);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const auto given = [&](const char* flag) {
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    return opt != nullptr && opt->count() > 0;
  };
  try {
    RunConfig config;
    if (given("--config")) config = RunConfig::FromJson(ReadFile(config_path));
    if (given("--dataset")) {
      config.datasets.clear();
      for (const std::string& d : datasets) {
        if (d == "all") {
          config.datasets.assign(std::begin(kAllVariants), std::end(kAllVariants));
        } else {
          config.datasets.push_back(ParseVariant(d));
        }
      }
    }
    if (given("--criterion")) {
      config.criteria.clear();
      for (const std::string& c : criteria) {
        if (c == "all") {
          config.criteria.assign(std::begin(kAllCriteria), std::end(kAllCriteria));
        } else {
          config.criteria.push_back(ParseCriterion(c));
        }
      }
    }
    if (given("--lambda-grid")) config.lambda_grid = lambda_grid;
    if (given("--seed")) config.seed = seed;
    if (given("--out")) config.out = out_dir;
    if (given("--format")) config.format = format;
    if (given("--fuzz")) config.fuzz = fuzz;
    if (given("--n")) config.n = n;
    if (given("--split")) config.split = split;
    if (given("--max-iterations")) config.optimizer.max_iterations = max_iterations;
    if (given("--init-sigma")) config.optimizer.init_sigma = init_sigma;
    if (given("--learning-rate")) config.optimizer.learning_rate = learning_rate;
    config.optimizer.Validate();
    if (config.format != "csv" && config.format != "json") {
      throw Error(ErrorCode::kInvalidArgument, "format must be csv or json");
    }
    if (config.split != 0 && config.split != 1) {
      throw Error(ErrorCode::kInvalidArgument, "split must be 0 or 1");
    }
    // Validate grids up front so usage errors do not surface mid-run.
    for (Criterion c : config.criteria) ParseLambdaGrid(config.lambda_grid, c);

    const std::string name = sub->get_name();
    if (name == "measures") {
      EmitMeasures(config, out);
    } else if (name == "sweep") {
      EmitSweep(config, out);
    } else if (name == "verify") {
      return EmitVerify(config,
                        form == "stated" ? InequalityForm::kStated
                                         : InequalityForm::kRederived,
                        out);
    } else if (name == "sample") {
      EmitSample(config, metadata, out);
    } else if (name == "baselines") {
      EmitBaselines(config, out);
    } else if (name == "decompose") {
      if (!encoder_path.empty() && config.datasets.size() != 1) {
        throw Error(ErrorCode::kInvalidArgument,
                    "--encoder needs exactly one --dataset");
      }
      EmitDecompose(config, encoder_path,
                    given("--lambda-grid") || config.lambda_grid != "default", out);
    }
  } catch (const Error& e) {
    err << "shiftlab: " << e.what() << "\n";
    return e.code() == ErrorCode::kInvalidArgument ? kExitUsage : kExitFailure;
  }
  return kExitOk;
}

}  // namespace shiftlab
