#include "logex/cli.hpp"

#include <chrono>
#include <ctime>
#include <memory>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "logex/core.hpp"
#include "logex/errors.hpp"
#include "logex/estimator.hpp"
#include "logex/learner.hpp"
#include "logex/propensity.hpp"
#include "logex/simworld.hpp"
#include "logex/util.hpp"

namespace logex::cli {
namespace {

using Json = nlohmann::ordered_json;

// Collects digests and config for <out>.manifest.json.
class Manifest {
 public:
  explicit Manifest(std::string command)
      : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

  void Input(const std::string& role, const std::string& path) {
    inputs_[role] = {{"path", path}, {"sha256", Sha256Hex(ReadFile(path))}};
  }
  void Output(const std::string& role, const std::string& path, std::string_view content) {
    outputs_[role] = {{"path", path}, {"sha256", Sha256Hex(content)}};
  }
  Json& config() { return config_; }

  void Write(const std::string& out_path) const {
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_);
    Json doc;
    doc["command"] = command_;
    doc["inputs"] = inputs_.empty() ? Json::object() : inputs_;
    doc["config"] = config_.empty() ? Json::object() : config_;
    doc["outputs"] = outputs_;
    doc["finished_at_unix"] = static_cast<std::int64_t>(std::time(nullptr));
    doc["wall_clock_seconds"] = elapsed.count();
    WriteFileAtomic(out_path + ".manifest.json", doc.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::chrono::steady_clock::time_point start_;
  Json inputs_;
  Json config_;
  Json outputs_;
};

void WriteOutput(Manifest& manifest, const std::string& role, const std::string& path,
                 const std::string& content) {
  WriteFileAtomic(path, content);
  manifest.Output(role, path, content);
}

struct Options {
  std::string events;
  std::string catalog;
  std::string table;
  std::string scope = "all";
  std::string out;
  std::string train_out;
  std::vector<double> taus{0.05};
  double delta = 0.05;
  std::uint64_t seed = 0;
  std::vector<double> learning_rates{0.2, 0.1, 0.05, 0.02, 0.01};
  std::size_t passes = 1;
  std::vector<std::string> policies;
  bool naive = false;
  std::string model;
  std::string context;
  std::string candidates;
  std::string world;
  std::string policy_sequence;
  std::optional<std::size_t> rounds;
  std::optional<std::size_t> split;
  std::string catalog_out;
};

// Events plus the catalog used to fill missing action features.
struct LoadedEvents {
  Dataset data;
  ActionCatalog catalog;
};

LoadedEvents LoadEvents(const Options& o, Manifest& manifest) {
  LoadedEvents loaded;
  std::optional<ActionCatalog> file_catalog;
  if (!o.catalog.empty()) {
    file_catalog = ReadCatalog(o.catalog);
    manifest.Input("catalog", o.catalog);
  }
  loaded.data = ReadEvents(o.events, file_catalog ? &*file_catalog : nullptr);
  manifest.Input("events", o.events);
  loaded.catalog = ActionCatalog::FromDataset(loaded.data);
  if (file_catalog) loaded.catalog.MergeFrom(*file_catalog);
  return loaded;
}

int CmdFit(const Options& o, std::ostream& out) {
  Manifest manifest("fit");
  const auto loaded = LoadEvents(o, manifest);
  const FitScope scope = ParseFitScope(o.scope);
  manifest.config()["scope"] = FitScopeName(scope);
  const auto tables = FitScoped(loaded.data, scope);
  const auto text = SerializeTable(tables.evaluation);
  if (o.out.empty()) {
    out << text;
    return kExitOk;
  }
  WriteOutput(manifest, "table", o.out, text);
  if (!o.train_out.empty()) WriteOutput(manifest, "training_table", o.train_out, SerializeTable(tables.training));
  manifest.Write(o.out);
  return kExitOk;
}

Dataset EvaluationPortion(const Dataset& data) {
  return data.split_index() ? data.TestPortion() : data;
}

Dataset TrainingPortionOrAll(const Dataset& data) {
  return data.split_index() ? data.TrainingPortion() : data;
}

std::string MethodName(PolicyKind kind) { return kind == PolicyKind::kNaive ? "Naive" : "Learned"; }

int CmdEvaluate(const Options& o, std::ostream& out) {
  Manifest manifest("evaluate");
  if (o.policies.empty()) throw UsageError("evaluate needs at least one --policy");
  const auto loaded = LoadEvents(o, manifest);
  const FitScope scope = ParseFitScope(o.scope);

  std::shared_ptr<const PropensityTable> table;
  if (!o.table.empty()) {
    table = std::make_shared<PropensityTable>(ReadTable(o.table));
    manifest.Input("table", o.table);
  } else {
    table = std::make_shared<PropensityTable>(FitScoped(loaded.data, scope).evaluation);
    manifest.config()["scope"] = FitScopeName(scope);
  }
  const auto catalog = std::make_shared<const ActionCatalog>(loaded.catalog);
  const Dataset test = EvaluationPortion(loaded.data);

  struct Entry {
    std::string label;
    std::unique_ptr<Policy> policy;  // null for the random baseline
  };
  std::vector<Entry> entries;
  for (const auto& raw : o.policies) {
    std::string spec = raw;
    std::string label;
    if (const auto eq = spec.find('='); eq != std::string::npos) {
      label = spec.substr(0, eq);
      spec = spec.substr(eq + 1);
    }
    if (spec == "random") {
      entries.push_back({label.empty() ? "Random" : label, nullptr});
      continue;
    }
    bool force_naive = false;
    if (spec.starts_with("naive:")) {
      force_naive = true;
      spec = spec.substr(6);
    }
    const auto model = ReadModel(spec);
    manifest.Input("policy:" + raw, spec);
    const PolicyKind kind = force_naive ? PolicyKind::kNaive : model.kind;
    const bool restrict = kind == PolicyKind::kLearned;
    entries.push_back({label.empty() ? MethodName(kind) : label,
                       std::make_unique<ArgmaxPolicy>(model.model, restrict, catalog,
                                                      restrict ? table : nullptr)});
  }

  manifest.config()["tau"] = o.taus;
  manifest.config()["delta"] = o.delta;
  manifest.config()["seed"] = o.seed;
  manifest.config()["policies"] = o.policies;
  std::string report = ReportHeader();
  for (double tau : o.taus) {
    const EstimatorConfig config{tau, o.delta};
    config.Validate();
    for (const auto& entry : entries) {
      const auto estimate = entry.policy == nullptr
                                ? EvaluateRandomBaseline(test, *table, config)
                                : EvaluatePolicy(test, *entry.policy, *table, config);
      report += ReportRow(entry.label, estimate);
    }
  }
  out << report;
  if (!o.out.empty()) {
    WriteOutput(manifest, "report", o.out, report);
    manifest.Write(o.out);
  }
  return kExitOk;
}

int CmdTrain(const Options& o, std::ostream& out, std::ostream& err) {
  Manifest manifest("train");
  if (o.taus.size() != 1) throw UsageError("train takes a single --tau");
  TrainConfig config;
  config.learning_rates = o.learning_rates;
  config.passes = o.passes;
  config.tau = o.taus.front();
  config.seed = o.seed;
  config.Validate();

  const auto loaded = LoadEvents(o, manifest);
  const Dataset training = TrainingPortionOrAll(loaded.data);
  manifest.config()["tau"] = config.tau;
  manifest.config()["learning_rates"] = config.learning_rates;
  manifest.config()["passes"] = config.passes;
  manifest.config()["seed"] = config.seed;
  manifest.config()["naive"] = o.naive;

  ModelSelection selection;
  if (o.naive) {
    config.weighted = false;
    selection = SelectUnweighted(training, config);
  } else {
    PropensityTable table;
    if (!o.table.empty()) {
      table = ReadTable(o.table);
      manifest.Input("table", o.table);
    } else {
      const FitScope scope = ParseFitScope(o.scope);
      table = FitScoped(loaded.data, scope).training;
      manifest.config()["scope"] = FitScopeName(scope);
    }
    selection = SelectModel(training, table, config);
  }
  for (const auto& w : selection.warnings) err << "warning: " << w << '\n';

  for (const auto& c : selection.candidates) {
    out << "candidate\t" << FormatReal(c.learning_rate) << '\t';
    if (c.diverged) {
      out << "diverged\t" << c.failure << '\n';
    } else {
      out << "training_error\t" << FormatReal(c.training_error) << '\n';
    }
  }
  out << "selected\t" << FormatReal(selection.learning_rate) << "\ttraining_error\t"
      << FormatReal(selection.training_error) << '\n';

  ModelFile file;
  file.model = selection.model;
  file.kind = o.naive ? PolicyKind::kNaive : PolicyKind::kLearned;
  file.tau = config.tau;
  file.learning_rate = selection.learning_rate;
  file.passes = config.passes;
  file.weighted = selection.weighted;
  file.seed = config.seed;
  if (o.out.empty()) throw UsageError("train needs --out");
  WriteOutput(manifest, "model", o.out, SerializeModel(file));
  manifest.Write(o.out);
  return kExitOk;
}

int CmdAct(const Options& o, std::ostream& out) {
  Manifest manifest("act");
  const auto model = ReadModel(o.model);
  manifest.Input("model", o.model);
  const std::string& candidates_path = o.candidates.empty() ? o.catalog : o.candidates;
  if (candidates_path.empty()) throw UsageError("act needs --candidates (or --catalog)");
  const auto catalog = ReadCatalog(candidates_path);
  manifest.Input("candidates", candidates_path);
  const auto context = ParseFeatures(o.context);
  manifest.config()["context"] = o.context;

  std::vector<std::pair<std::string, SparseVector>> candidates(catalog.actions().begin(),
                                                               catalog.actions().end());
  std::string text;
  for (const auto& [id, features] : candidates) {
    text += id + '\t' + FormatReal(model.model.Predict(CrossFeatures(context, features))) + '\n';
  }
  text += "chosen\t" + Act(model.model, context, candidates) + '\n';
  out << text;
  if (!o.out.empty()) {
    WriteOutput(manifest, "choice", o.out, text);
    manifest.Write(o.out);
  }
  return kExitOk;
}

int CmdSimulate(const Options& o, std::ostream& out) {
  Manifest manifest("simulate");
  const auto world = sim::ParseWorld(ReadFile(o.world));
  manifest.Input("world", o.world);
  auto sequence = sim::ParsePolicySequence(ReadFile(o.policy_sequence), world);
  manifest.Input("policies", o.policy_sequence);
  if (o.rounds) {
    if (*o.rounds == 0) throw UsageError("--rounds must be at least 1");
    sequence = sequence.Tiled(*o.rounds);
  }
  if (o.split && *o.split > sequence.size()) {
    throw UsageError("--split " + std::to_string(*o.split) + " is past the last round " +
                     std::to_string(sequence.size()));
  }
  manifest.config()["seed"] = o.seed;
  manifest.config()["rounds"] = sequence.size();
  if (o.split) manifest.config()["split"] = *o.split;

  const auto data = sim::LogEvents(world, sequence, o.seed, o.split);
  const auto text = SerializeEvents(data);
  if (o.out.empty()) {
    out << text;
    return kExitOk;
  }
  WriteOutput(manifest, "events", o.out, text);
  if (!o.catalog_out.empty()) {
    WriteOutput(manifest, "catalog", o.catalog_out, SerializeCatalog(sim::WorldCatalog(world)));
  }
  manifest.Write(o.out);
  return kExitOk;
}

int ExitCodeFor(const Error& e) {
  if (dynamic_cast<const UsageError*>(&e) != nullptr) return kExitUsage;
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return kExitUsage;
  if (dynamic_cast<const FormatError*>(&e) != nullptr) return kExitFormat;
  return kExitNumeric;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Offline evaluation and warm-start training from logged exploration data", "logex"};
  app.require_subcommand(1);
  Options o;

  auto* fit = app.add_subcommand("fit", "Fit the empirical propensity table");
  fit->add_option("--events", o.events, "Events file")->required();
  fit->add_option("--catalog", o.catalog, "Action catalog");
  fit->add_option("--scope", o.scope, "all | train | split");
  fit->add_option("--out", o.out, "Table file (evaluation table for --scope split)");
  fit->add_option("--train-out", o.train_out, "Training table file");

  auto* evaluate = app.add_subcommand("evaluate", "Estimate policy values with intervals");
  evaluate->add_option("--events", o.events, "Events file")->required();
  evaluate->add_option("--catalog", o.catalog, "Action catalog");
  evaluate->add_option("--table", o.table, "Propensity table (fitted from events if omitted)");
  evaluate->add_option("--scope", o.scope, "Scope used when fitting from events");
  evaluate->add_option("--policy", o.policies, "random | MODEL | naive:MODEL, optionally LABEL=...")
      ->required();
  evaluate->add_option("--tau", o.taus, "Clipping thresholds")->delimiter(',');
  evaluate->add_option("--delta", o.delta, "Interval failure probability");
  evaluate->add_option("--seed", o.seed, "Seed (recorded in the manifest)");
  evaluate->add_option("--out", o.out, "Report file");

  auto* train = app.add_subcommand("train", "Train a policy with a learning-rate sweep");
  train->add_option("--events", o.events, "Events file")->required();
  train->add_option("--catalog", o.catalog, "Action catalog");
  train->add_option("--table", o.table, "Propensity table (fitted from events if omitted)");
  train->add_option("--scope", o.scope, "Scope used when fitting from events");
  train->add_option("--tau", o.taus, "Clipping threshold")->delimiter(',');
  train->add_option("--learning-rates", o.learning_rates, "Learning-rate sweep")->delimiter(',');
  train->add_option("--passes", o.passes, "Passes over the data");
  train->add_option("--seed", o.seed, "Seed (recorded in the model)");
  train->add_flag("--naive", o.naive, "Unweighted regression, argmax over every action");
  train->add_option("--out", o.out, "Model file")->required();

  auto* act = app.add_subcommand("act", "Choose an action for one context");
  act->add_option("--model", o.model, "Model file")->required();
  act->add_option("--context", o.context, "Context features, e.g. \"site\":1,7:0.5")->required();
  act->add_option("--candidates", o.candidates, "Candidate actions (catalog format)");
  act->add_option("--catalog", o.catalog, "Alias for --candidates");
  act->add_option("--out", o.out, "Output file");

  auto* simulate = app.add_subcommand("simulate", "Log events from a synthetic world");
  simulate->add_option("--world", o.world, "World file")->required();
  simulate->add_option("--policies", o.policy_sequence, "Policy-sequence file")->required();
  simulate->add_option("--seed", o.seed, "RNG seed");
  simulate->add_option("--rounds", o.rounds, "Tile the policy sequence to this many rounds");
  simulate->add_option("--split", o.split, "Index of the first test event");
  simulate->add_option("--out", o.out, "Events file");
  simulate->add_option("--catalog-out", o.catalog_out, "Catalog of every world action");

  std::vector<const char*> argv{"logex"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (fit->parsed()) return CmdFit(o, out);
    if (evaluate->parsed()) return CmdEvaluate(o, out);
    if (train->parsed()) return CmdTrain(o, out, err);
    if (act->parsed()) return CmdAct(o, out);
    return CmdSimulate(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return ExitCodeFor(e);
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFormat;
  }
}

}  // namespace logex::cli
