#include "logex/learner.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "logex/errors.hpp"
#include "logex/util.hpp"

namespace logex {

void TrainConfig::Validate() const {
  if (learning_rates.empty()) throw ConfigError("at least one learning rate is required");
  for (double lr : learning_rates) {
    if (!(lr > 0.0) || !std::isfinite(lr)) {
      throw ConfigError("learning rates must be positive, got " + FormatReal(lr));
    }
  }
  if (passes < 1) throw ConfigError("passes must be at least 1");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0,1], got " + FormatReal(tau));
}

std::vector<TrainingExample> BuildExamples(const Dataset& data, const PropensityModel* propensity,
                                           double tau) {
  std::vector<TrainingExample> examples;
  examples.reserve(data.size());
  for (const auto& e : data.events()) {
    TrainingExample example;
    example.features = CrossFeatures(e.context_features(), e.action_features());
    example.label = e.reward();
    if (propensity != nullptr) {
      example.importance = ClippedWeight(propensity->Prob(e.context_id(), e.action_id()), tau);
    }
    examples.push_back(std::move(example));
  }
  return examples;
}

double SgdStep(LinearModel& model, const SparseVector& features, double label, double importance,
               double learning_rate) {
  const double residual = label - model.Predict(features);
  const double scale = 2.0 * learning_rate * importance * residual;
  if (scale == 0.0) return residual;
  for (const auto& f : features.entries()) model.weights[f.id] += scale * f.value;
  model.intercept += scale;
  return residual;
}

namespace {

bool StepIsFinite(const LinearModel& model, const SparseVector& features) {
  if (!std::isfinite(model.intercept)) return false;
  for (const auto& f : features.entries()) {
    const auto it = model.weights.find(f.id);
    if (it != model.weights.end() && !std::isfinite(it->second)) return false;
  }
  return true;
}

}  // namespace

LinearModel TrainOnExamples(const std::vector<TrainingExample>& examples, double learning_rate,
                            std::size_t passes) {
  LinearModel model;
  for (std::size_t pass = 0; pass < passes; ++pass) {
    for (std::size_t t = 0; t < examples.size(); ++t) {
      const auto& ex = examples[t];
      SgdStep(model, ex.features, ex.label, ex.importance, learning_rate);
      if (!StepIsFinite(model, ex.features)) {
        throw TrainingError("learning rate " + FormatReal(learning_rate) +
                            " diverged (non-finite weight) at event " + std::to_string(t + 1) +
                            " of pass " + std::to_string(pass + 1));
      }
    }
  }
  return model;
}

LinearModel TrainRegressor(const Dataset& data, const PropensityModel& propensity,
                           const TrainConfig& config, double learning_rate) {
  config.Validate();
  if (data.empty()) throw EstimationError("cannot train on an empty dataset");
  const auto examples = BuildExamples(data, config.weighted ? &propensity : nullptr, config.tau);
  return TrainOnExamples(examples, learning_rate, config.passes);
}

double WeightedLoss(const LinearModel& model, const std::vector<TrainingExample>& examples) {
  std::vector<double> terms;
  terms.reserve(examples.size());
  for (const auto& ex : examples) {
    const double residual = ex.label - model.Predict(ex.features);
    terms.push_back(ex.importance * residual * residual);
  }
  return PairwiseSum(terms) / static_cast<double>(examples.size());
}

namespace {

ModelSelection Sweep(const std::vector<TrainingExample>& examples, const TrainConfig& config,
                     bool weighted, std::size_t threads) {
  const std::size_t n = config.learning_rates.size();
  std::vector<CandidateResult> results(n);
  std::vector<LinearModel> models(n);
  ParallelFor(n, threads == 0 ? DefaultThreadCount() : threads, [&](std::size_t i) {
    auto& result = results[i];
    result.learning_rate = config.learning_rates[i];
    try {
      models[i] = TrainOnExamples(examples, result.learning_rate, config.passes);
      result.training_error = WeightedLoss(models[i], examples);
      if (!std::isfinite(result.training_error)) {
        result.diverged = true;
        result.failure = "learning rate " + FormatReal(result.learning_rate) +
                         " diverged (non-finite training error)";
      }
    } catch (const TrainingError& e) {
      result.diverged = true;
      result.failure = e.what();
    }
  });

  std::size_t best = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (results[i].diverged) continue;
    if (best == n || results[i].training_error < results[best].training_error ||
        (results[i].training_error == results[best].training_error &&
         results[i].learning_rate < results[best].learning_rate)) {
      best = i;
    }
  }
  if (best == n) {
    std::string message = "every learning rate diverged:";
    for (const auto& r : results) message += " [" + r.failure + "]";
    throw TrainingError(message);
  }

  ModelSelection selection;
  selection.model = std::move(models[best]);
  selection.learning_rate = results[best].learning_rate;
  selection.training_error = results[best].training_error;
  selection.weighted = weighted;
  selection.candidates = std::move(results);
  return selection;
}

}  // namespace

ModelSelection SelectModel(const Dataset& data, const PropensityModel& propensity,
                           const TrainConfig& config, std::size_t threads) {
  config.Validate();
  if (data.empty()) throw EstimationError("cannot train on an empty dataset");
  const auto examples = BuildExamples(data, config.weighted ? &propensity : nullptr, config.tau);
  return Sweep(examples, config, config.weighted, threads);
}

ModelSelection SelectUnweighted(const Dataset& data, const TrainConfig& config,
                                std::size_t threads) {
  config.Validate();
  if (data.empty()) throw EstimationError("cannot train on an empty dataset");
  const auto examples = BuildExamples(data, nullptr, config.tau);
  auto selection = Sweep(examples, config, false, threads);
  if (config.weighted) {
    selection.warnings.push_back("naive baseline trains unweighted; ignoring weighted=true");
  }
  return selection;
}

std::string Act(const LinearModel& model, const SparseVector& context_features,
                std::span<const std::pair<std::string, SparseVector>> candidates) {
  if (candidates.empty()) throw PolicyError("no candidate actions to choose from");
  const std::string* best_id = nullptr;
  double best_score = 0.0;
  for (const auto& [id, features] : candidates) {
    const double score = model.Predict(CrossFeatures(context_features, features));
    if (best_id == nullptr || score > best_score || (score == best_score && id < *best_id)) {
      best_id = &id;
      best_score = score;
    }
  }
  return *best_id;
}

ArgmaxPolicy::ArgmaxPolicy(LinearModel model, bool restrict_to_feasible,
                           std::shared_ptr<const ActionCatalog> catalog,
                           std::shared_ptr<const PropensityModel> feasibility)
    : model_(std::move(model)),
      restrict_to_feasible_(restrict_to_feasible),
      catalog_(std::move(catalog)),
      feasibility_(std::move(feasibility)) {
  if (catalog_ == nullptr) throw ConfigError("argmax policy needs an action catalog");
  if (restrict_to_feasible_ && feasibility_ == nullptr) {
    throw ConfigError("feasible-set restriction needs a propensity model");
  }
}

std::string ArgmaxPolicy::Choose(const std::string& context_id,
                                 const SparseVector& context_features) const {
  std::vector<std::pair<std::string, SparseVector>> candidates;
  if (restrict_to_feasible_) {
    for (const auto& action : feasibility_->FeasibleSet(context_id)) {
      const auto* features = catalog_->Find(action);
      candidates.emplace_back(action, features != nullptr ? *features : SparseVector{});
    }
  }
  if (candidates.empty()) {
    for (const auto& [action, features] : catalog_->actions()) {
      candidates.emplace_back(action, features);
    }
  }
  return Act(model_, context_features, candidates);
}

NaiveTraining TrainNaive(const Dataset& data, const TrainConfig& config,
                         std::shared_ptr<const ActionCatalog> catalog, std::size_t threads) {
  auto selection = SelectUnweighted(data, config, threads);
  ArgmaxPolicy policy(selection.model, false, std::move(catalog));
  return {std::move(policy), std::move(selection)};
}

std::string SerializeModel(const ModelFile& file) {
  std::string out = "#format\tlogex-linear-model-1\n";
  out += "#policy\t";
  out += file.kind == PolicyKind::kNaive ? "naive" : "learned";
  out += "\n#intercept\t" + FormatReal(file.model.intercept);
  out += "\n#tau\t" + FormatReal(file.tau);
  out += "\n#learning_rate\t" + FormatReal(file.learning_rate);
  out += "\n#passes\t" + std::to_string(file.passes);
  out += "\n#weighted\t" + std::string(file.weighted ? "1" : "0");
  out += "\n#seed\t" + std::to_string(file.seed) + "\n";
  std::vector<std::pair<FeatureId, double>> rows(file.model.weights.begin(),
                                                 file.model.weights.end());
  std::sort(rows.begin(), rows.end());
  for (const auto& [id, weight] : rows) {
    out += std::to_string(id) + '\t' + FormatReal(weight) + '\n';
  }
  return out;
}

ModelFile ParseModel(std::string_view text) {
  ModelFile file;
  std::map<std::string, std::string, std::less<>> header;
  std::size_t line_no = 0;
  for (auto line : Split(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (Trim(line).empty()) continue;
    const auto fields = Split(line, '\t');
    try {
      if (fields.size() != 2) throw FormatError("expected 2 TAB-separated fields");
      if (line.front() == '#') {
        header[std::string(fields[0].substr(1))] = std::string(fields[1]);
        continue;
      }
      const double weight = ParseReal(fields[1]);
      if (!file.model.weights.emplace(ParseUnsigned(fields[0]), weight).second) {
        throw FormatError("duplicate feature id");
      }
    } catch (const FormatError& e) {
      throw FormatError("model line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  const auto require = [&](std::string_view key) -> const std::string& {
    const auto it = header.find(key);
    if (it == header.end()) throw FormatError("model header lacks '" + std::string(key) + "'");
    return it->second;
  };
  if (require("format") != "logex-linear-model-1") throw FormatError("unknown model format");
  const auto& policy = require("policy");
  if (policy == "learned") {
    file.kind = PolicyKind::kLearned;
  } else if (policy == "naive") {
    file.kind = PolicyKind::kNaive;
  } else {
    throw FormatError("unknown policy kind '" + policy + "'");
  }
  file.model.intercept = ParseReal(require("intercept"));
  file.tau = ParseReal(require("tau"));
  file.learning_rate = ParseReal(require("learning_rate"));
  file.passes = static_cast<std::size_t>(ParseUnsigned(require("passes")));
  file.weighted = ParseUnsigned(require("weighted")) != 0;
  file.seed = ParseUnsigned(require("seed"));
  return file;
}

ModelFile ReadModel(const std::string& path) {
  try {
    return ParseModel(ReadFile(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace logex
