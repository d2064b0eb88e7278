#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "logex/core.hpp"
#include "logex/estimator.hpp"
#include "logex/propensity.hpp"

namespace logex {

// f(x,a) = <weights, cross(x,a)> + intercept. Predictions are raw linear
// outputs; they are not clamped to [0,1].
struct LinearModel {
  WeightMap weights;
  double intercept = 0.0;

  double Predict(const SparseVector& features) const {
    return SparseDot(weights, features) + intercept;
  }

  friend bool operator==(const LinearModel&, const LinearModel&) = default;
};

struct TrainConfig {
  std::vector<double> learning_rates{0.2, 0.1, 0.05, 0.02, 0.01};
  std::size_t passes = 1;
  double tau = 0.05;
  // SGD visits events in log order, so the seed does not change the result;
  // it is carried into model files and manifests for provenance.
  std::uint64_t seed = 0;
  bool weighted = true;

  void Validate() const;
};

// One regression example: crossed features of (x, a), label r, importance w.
struct TrainingExample {
  SparseVector features;
  double label = 0.0;
  double importance = 1.0;
};

// w = 1/max(pi_hat(a|x), tau) when `propensity` is non-null, else w = 1.
std::vector<TrainingExample> BuildExamples(const Dataset& data, const PropensityModel* propensity,
                                           double tau);

// One stochastic gradient step on importance * (label - f)^2:
//   weight_i  += 2 * lr * importance * (label - f) * feature_i
//   intercept += 2 * lr * importance * (label - f)
// Returns the residual label - f measured before the step.
double SgdStep(LinearModel& model, const SparseVector& features, double label, double importance,
               double learning_rate);

// Zero-initialized SGD over the examples in order, `passes` times. Throws
// TrainingError naming the learning rate if any weight becomes non-finite.
LinearModel TrainOnExamples(const std::vector<TrainingExample>& examples, double learning_rate,
                            std::size_t passes);

// Importance-weighted regressor (unweighted when config.weighted is false).
LinearModel TrainRegressor(const Dataset& data, const PropensityModel& propensity,
                           const TrainConfig& config, double learning_rate);

// (1/T) sum_t importance_t * (label_t - f_t)^2.
double WeightedLoss(const LinearModel& model, const std::vector<TrainingExample>& examples);

struct CandidateResult {
  double learning_rate = 0.0;
  bool diverged = false;
  double training_error = 0.0;
  std::string failure;
};

struct ModelSelection {
  LinearModel model;
  double learning_rate = 0.0;
  double training_error = 0.0;
  bool weighted = true;
  std::vector<CandidateResult> candidates;  // in config order
  std::vector<std::string> warnings;
};

// Learning-rate sweep: one model per rate, keep the smallest training error
// (ties go to the smaller rate). Diverged candidates are skipped; throws
// TrainingError when every candidate diverged. Candidates run over
// `threads` workers (0 = LOGEX_THREADS).
ModelSelection SelectModel(const Dataset& data, const PropensityModel& propensity,
                           const TrainConfig& config, std::size_t threads = 0);

// Sweep with w = 1 regardless of config.weighted (a warning is recorded when
// the flag had to be overridden).
ModelSelection SelectUnweighted(const Dataset& data, const TrainConfig& config,
                                std::size_t threads = 0);

// Highest-scoring candidate. Equal scores resolve to the lexicographically
// smallest action id. Throws PolicyError on an empty candidate list.
std::string Act(const LinearModel& model, const SparseVector& context_features,
                std::span<const std::pair<std::string, SparseVector>> candidates);

// h(x) = argmax over candidates of f(x,a). With restrict_to_feasible the
// candidates are C(x) from the propensity model; contexts with an empty C(x)
// (never logged) fall back to the whole catalog, as does the unrestricted
// policy. Actions missing from the catalog are scored with empty features.
class ArgmaxPolicy final : public Policy {
 public:
  ArgmaxPolicy(LinearModel model, bool restrict_to_feasible,
               std::shared_ptr<const ActionCatalog> catalog,
               std::shared_ptr<const PropensityModel> feasibility = nullptr);

  std::string Choose(const std::string& context_id,
                     const SparseVector& context_features) const override;

  const LinearModel& model() const { return model_; }
  bool restrict_to_feasible() const { return restrict_to_feasible_; }

 private:
  LinearModel model_;
  bool restrict_to_feasible_;
  std::shared_ptr<const ActionCatalog> catalog_;
  std::shared_ptr<const PropensityModel> feasibility_;
};

struct NaiveTraining {
  ArgmaxPolicy policy;
  ModelSelection selection;
};

// Supervised baseline: unweighted sweep, argmax over every catalog action.
NaiveTraining TrainNaive(const Dataset& data, const TrainConfig& config,
                         std::shared_ptr<const ActionCatalog> catalog, std::size_t threads = 0);

// ---------------------------------------------------------------------------
// Model file: '#key<TAB>value' header lines (format, policy, intercept, tau,
// learning_rate, passes, weighted, seed) followed by "feature_id<TAB>weight"
// rows sorted by feature id. Reals are written in shortest round-trip form.

enum class PolicyKind { kLearned, kNaive };

struct ModelFile {
  LinearModel model;
  PolicyKind kind = PolicyKind::kLearned;
  double tau = 0.05;
  double learning_rate = 0.0;
  std::size_t passes = 1;
  bool weighted = true;
  std::uint64_t seed = 0;

  friend bool operator==(const ModelFile&, const ModelFile&) = default;
};

std::string SerializeModel(const ModelFile& file);
ModelFile ParseModel(std::string_view text);
ModelFile ReadModel(const std::string& path);

}  // namespace logex
