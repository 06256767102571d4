// Copyright 2026 The fmsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fmsim/cli.h"

#include <algorithm>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "fmsim/machine.h"
#include "fmsim/models.h"
#include "fmsim/runner.h"
#include "fmsim/validation.h"

namespace fmsim {
namespace {

// A diagnostic that names the offending flag; maps to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunFlags {
  std::string model = "gpt-j";
  std::string model_config;
  std::string machine_config;
  std::string mode;
  std::string fmt = "fp16";
  int64_t seq = 0;
  int64_t new_tokens = 0;
  int clusters = 0;
  int groups = 0;
  bool fused = true;
  std::string isa = "ssr-frep";
  std::string out = "json";
  bool dump_plan = false;
  uint64_t seed = 1;
};

struct Resolved {
  ModelConfig model;
  RunMode mode = RunMode::kNar;
  Format fmt = Format::kFP16;
  int64_t seq = 0;
  int64_t new_tokens = 0;
  MachineConfig machine;
};

void AddRunFlags(CLI::App* app, RunFlags& f) {
  app->add_option("--model", f.model, "preset: " + PresetNames());
  app->add_option("--model-config", f.model_config, "model JSON file");
  app->add_option("--machine-config", f.machine_config, "machine JSON file");
  app->add_option("--mode", f.mode, "nar, ar or vit");
  app->add_option("--fmt", f.fmt, ValidFormatNames() + " (fp8 = fp8e4m3)");
  app->add_option("--seq", f.seq, "sequence length (ar: prompt length)");
  app->add_option("--new-tokens", f.new_tokens, "tokens to generate (ar)");
  app->add_option("--clusters", f.clusters, "total cluster count");
  app->add_option("--groups", f.groups, "cluster groups");
  app->add_flag("--fused,!--no-fused", f.fused, "layer fusion");
  app->add_option("--isa", f.isa, "baseline or ssr-frep");
  app->add_option("--out", f.out, "json, csv or text");
  app->add_flag("--dump-plan", f.dump_plan, "include tiling plans");
  app->add_option("--seed", f.seed, "seed for numeric checks");
}

Format ParseFmtFlag(const std::string& s) {
  if (s == "fp8") return Format::kFP8E4M3;
  try {
    return ParseFormat(s);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("--fmt: ") + e.what());
  }
}

MachineConfig ResolveMachine(const RunFlags& f, int clusters_override) {
  MachineConfig m;
  try {
    m = f.machine_config.empty() ? DefaultMachineConfig()
                                 : LoadMachineConfig(f.machine_config);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("--machine-config: ") + e.what());
  }
  try {
    m.isa_mode = ParseIsaMode(f.isa);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("--isa: ") + e.what());
  }
  const int clusters = clusters_override > 0 ? clusters_override : f.clusters;
  if (f.groups < 0) throw ConfigError("--groups: must be positive");
  if (clusters < 0) throw ConfigError("--clusters: must be positive");
  if (f.groups > 0) {
    const int total = clusters > 0 ? clusters : m.total_clusters();
    if (total % f.groups != 0) {
      throw ConfigError("--groups: must divide the cluster count");
    }
    m.groups = f.groups;
    m.clusters_per_group = total / f.groups;
  } else if (clusters > 0) {
    try {
      m = WithClusters(m, clusters);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("--clusters: ") + e.what());
    }
  }
  try {
    m.Validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("--machine-config: ") + e.what());
  }
  return m;
}

Resolved Resolve(const RunFlags& f, int clusters_override = 0) {
  Resolved r;
  try {
    r.model = f.model_config.empty() ? PresetModel(f.model)
                                     : LoadModelConfig(f.model_config);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(f.model_config.empty() ? "--model: "
                                                         : "--model-config: ") +
                      e.what());
  }
  if (f.mode.empty()) {
    r.mode = r.model.is_vit() ? RunMode::kVit : RunMode::kNar;
  } else {
    try {
      r.mode = ParseRunMode(f.mode);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("--mode: ") + e.what());
    }
  }
  if (r.mode == RunMode::kVit && !r.model.is_vit()) {
    throw ConfigError("--mode: vit needs an encoder model, got " + r.model.name);
  }
  if (r.mode != RunMode::kVit && r.model.is_vit()) {
    throw ConfigError("--mode: " + std::string(RunModeName(r.mode)) +
                      " needs a decoder model, got " + r.model.name);
  }
  r.fmt = ParseFmtFlag(f.fmt);
  if (f.new_tokens != 0 && r.mode != RunMode::kAr) {
    throw ConfigError("--new-tokens: only valid with --mode ar");
  }
  if (f.seq < 0) throw ConfigError("--seq: must be positive");
  if (r.mode == RunMode::kVit && f.seq != 0 && f.seq != r.model.seq_default) {
    throw ConfigError("--seq: vit models run at " +
                      std::to_string(r.model.seq_default) + " tokens");
  }
  r.seq = f.seq > 0 ? f.seq : r.model.seq_default;
  if (r.mode == RunMode::kNar &&
      (r.seq < r.model.seq_min || r.seq > r.model.seq_max)) {
    throw ConfigError("--seq: " + std::to_string(r.seq) + " outside [" +
                      std::to_string(r.model.seq_min) + ", " +
                      std::to_string(r.model.seq_max) + "]");
  }
  if (r.mode == RunMode::kAr) {
    if (f.new_tokens < 0) throw ConfigError("--new-tokens: must be positive");
    r.new_tokens = f.new_tokens > 0 ? f.new_tokens : 16;
    if (r.seq + r.new_tokens > r.model.seq_max) {
      throw ConfigError("--new-tokens: seq + new tokens exceeds " +
                        std::to_string(r.model.seq_max));
    }
  }
  r.machine = ResolveMachine(f, clusters_override);
  return r;
}

RunReport Execute(const Resolved& r, const RunFlags& f) {
  switch (r.mode) {
    case RunMode::kAr:
      return RunArGenerate(r.model, r.seq, r.new_tokens, r.fmt, r.machine,
                           f.fused);
    case RunMode::kVit:
      return RunVit(r.model, r.fmt, r.machine, f.fused);
    case RunMode::kNar:
      break;
  }
  return RunNar(r.model, r.seq, r.fmt, r.machine, f.fused);
}

RunReport Simulate(const Resolved& r, const RunFlags& f) {
  RunReport report = Execute(r, f);
  Resolved single = r;
  single.machine = WithClusters(r.machine, 1);
  report.speedup_vs_1_cluster =
      r.machine.total_clusters() == 1
          ? 1.0
          : Execute(single, f).total_ns / report.total_ns;
  if (f.dump_plan) {
    const int64_t queries = r.mode == RunMode::kAr ? 1 : r.seq;
    report.plan = DumpPlan(r.model, queries, r.fmt, r.machine);
  }
  return report;
}

void CheckOut(const std::string& out) {
  if (out != "json" && out != "csv" && out != "text") {
    throw ConfigError("--out: expected json, csv or text, got '" + out + "'");
  }
}

int CmdSimulate(const RunFlags& f, std::ostream& out) {
  CheckOut(f.out);
  const Resolved r = Resolve(f);
  const RunReport report = Simulate(r, f);
  if (f.out == "json") {
    out << ReportToJson(report).dump(2) << "\n";
  } else if (f.out == "csv") {
    out << CsvHeader("seq", report.images()) << "\n"
        << CsvRow(std::to_string(report.seq), report) << "\n";
  } else {
    out << ReportToText(report);
  }
  return kExitOk;
}

int CmdSweep(RunFlags f, const std::string& axis,
             const std::vector<std::string>& values, bool out_given,
             std::ostream& out) {
  if (axis != "seq" && axis != "clusters" && axis != "fmt") {
    throw ConfigError("--axis: expected seq, clusters or fmt, got '" + axis + "'");
  }
  if (values.empty()) throw ConfigError("--values: empty axis list");
  if (!out_given) f.out = "csv";
  CheckOut(f.out);
  std::vector<RunReport> reports;
  for (const std::string& v : values) {
    RunFlags point = f;
    int clusters = 0;
    try {
      if (axis == "seq") {
        point.seq = std::stoll(v);
      } else if (axis == "clusters") {
        clusters = std::stoi(v);
      } else {
        point.fmt = v;
      }
    } catch (const std::logic_error&) {
      throw ConfigError("--values: '" + v + "' is not a valid " + axis);
    }
    reports.push_back(Simulate(Resolve(point, clusters), point));
  }
  if (f.out == "json") {
    nlohmann::json arr = nlohmann::json::array();
    for (size_t i = 0; i < reports.size(); ++i) {
      arr.push_back({{axis, values[i]}, {"report", ReportToJson(reports[i])}});
    }
    out << arr.dump(2) << "\n";
  } else if (f.out == "csv") {
    out << CsvHeader(axis, reports[0].images()) << "\n";
    for (size_t i = 0; i < reports.size(); ++i) {
      out << CsvRow(values[i], reports[i]) << "\n";
    }
  } else {
    for (const RunReport& r : reports) out << ReportToText(r) << "\n";
  }
  return kExitOk;
}

int CmdValidate(uint64_t seed, bool recipes, const std::string& recipe_path,
                std::ostream& out, std::ostream& err) {
  ValidationOptions opt;
  opt.seed = seed;
  std::vector<CheckResult> results;
  if (recipes) {
    std::vector<Recipe> list;
    try {
      list = LoadRecipes(recipe_path.empty() ? DefaultRecipePath() : recipe_path);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("--recipes: ") + e.what());
    }
    for (const Recipe& r : list) {
      results.push_back(RunRecipe(r, opt));
      out << "[" << r.criterion << "] " << FormatCheck(results.back()) << "\n";
    }
  } else {
    for (const CheckResult& r : RunValidation(opt)) {
      results.push_back(r);
      out << FormatCheck(r) << "\n";
    }
  }
  const auto failed = std::find_if(results.begin(), results.end(),
                                   [](const CheckResult& r) { return !r.pass; });
  const size_t passed = std::count_if(results.begin(), results.end(),
                                      [](const CheckResult& r) { return r.pass; });
  out << passed << "/" << results.size() << " checks passed\n";
  if (failed != results.end()) {
    err << "first failing check: " << failed->name << "\n";
    return kExitCheckFailed;
  }
  return kExitOk;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"fmsim: transformer kernel emulation and many-cluster "
               "performance simulation"};
  app.require_subcommand(1);

  RunFlags sim_flags;
  CLI::App* simulate = app.add_subcommand("simulate", "simulate one run");
  AddRunFlags(simulate, sim_flags);

  RunFlags sweep_flags;
  std::string axis;
  std::vector<std::string> values;
  CLI::App* sweep = app.add_subcommand("sweep", "simulate along one axis");
  AddRunFlags(sweep, sweep_flags);
  sweep->add_option("--axis", axis, "seq, clusters or fmt")->required();
  sweep->add_option("--values", values, "comma-separated axis values")
      ->delimiter(',');

  uint64_t seed = 1;
  std::string recipe_path;
  CLI::App* validate = app.add_subcommand("validate", "run numeric checks");
  validate->add_option("--seed", seed, "seed of the randomized checks");
  CLI::Option* recipes =
      validate->add_option("--recipes", recipe_path, "recipe manifest")
          ->expected(0, 1);

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }

  try {
    if (simulate->parsed()) return CmdSimulate(sim_flags, out);
    if (sweep->parsed()) {
      return CmdSweep(sweep_flags, axis, values,
                      sweep->count("--out") > 0, out);
    }
    return CmdValidate(seed, recipes->count() > 0, recipe_path, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

}  // namespace fmsim
