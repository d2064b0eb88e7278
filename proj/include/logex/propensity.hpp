#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>

#include "logex/core.hpp"

namespace logex {

// Estimate of the logging policy, pi_hat(a|x). The estimator and the learner
// only ever call these two operations.
class PropensityModel {
 public:
  virtual ~PropensityModel() = default;

  // Probability in [0,1] that the logging process shows `action` on `context`.
  virtual double Prob(const std::string& context, const std::string& action) const = 0;

  // C(x) = {a : Prob(x,a) > 0}, ordered by action id.
  virtual std::set<std::string> FeasibleSet(const std::string& context) const = 0;
};

// Empirical frequency table:
//   pi_hat(a|x) = |{t : a_t = a, x_t = x}| / |{t : x_t = x}|
// Counts are exact integers; probabilities are formed on demand.
class PropensityTable final : public PropensityModel {
 public:
  double Prob(const std::string& context, const std::string& action) const override;
  std::set<std::string> FeasibleSet(const std::string& context) const override;

  void Count(const std::string& context, const std::string& action, std::uint64_t times = 1);
  // Associative, commutative merge of two count tables.
  void Merge(const PropensityTable& other);

  std::uint64_t PairCount(const std::string& context, const std::string& action) const;
  std::uint64_t ContextCount(const std::string& context) const;
  std::size_t NumContexts() const { return context_counts_.size(); }

  const std::map<std::pair<std::string, std::string>, std::uint64_t>& pair_counts() const {
    return pair_counts_;
  }
  const std::map<std::string, std::uint64_t>& context_counts() const { return context_counts_; }

  friend bool operator==(const PropensityTable& a, const PropensityTable& b) {
    return a.pair_counts_ == b.pair_counts_ && a.context_counts_ == b.context_counts_;
  }

 private:
  std::map<std::pair<std::string, std::string>, std::uint64_t> pair_counts_;
  std::map<std::string, std::uint64_t> context_counts_;
};

// Single pass count over the log. Throws EstimationError on an empty dataset.
PropensityTable FitEmpirical(const Dataset& data);

// Which events the propensity table is fitted on.
//   kAll   : every event (train and test), the default.
//   kTrain : events before the split marker only.
//   kSplit : training events for the training table, test events for the
//            evaluation table.
enum class FitScope { kAll, kTrain, kSplit };

FitScope ParseFitScope(std::string_view name);
std::string_view FitScopeName(FitScope scope);

struct ScopedTables {
  PropensityTable training;    // used to weight the regression
  PropensityTable evaluation;  // used by the value estimator on test events
};

// Throws UsageError for kTrain/kSplit when the log has no split marker.
ScopedTables FitScoped(const Dataset& data, FitScope scope);

// TAB-separated rows "context_id action_id pair_count context_count", sorted
// by (context_id, action_id), preceded by a '#' header line.
std::string SerializeTable(const PropensityTable& table);
// Validates that every context's pair counts sum to its context count.
PropensityTable ParseTable(std::string_view text);
PropensityTable ReadTable(const std::string& path);

}  // namespace logex
