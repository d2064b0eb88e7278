#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace logex {

using FeatureId = std::uint64_t;

struct FeatureEntry {
  FeatureId id = 0;
  double value = 0.0;

  friend bool operator==(const FeatureEntry&, const FeatureEntry&) = default;
};

// Sparse feature vector in canonical form: ids strictly increasing, values
// finite and nonzero. Only Canonicalize builds non-empty instances.
class SparseVector {
 public:
  SparseVector() = default;

  std::span<const FeatureEntry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

 private:
  friend SparseVector Canonicalize(std::vector<FeatureEntry> entries);
  std::vector<FeatureEntry> entries_;
};

// Sorts by id, sums duplicate ids and drops zero entries. Throws FormatError
// on a non-finite value.
SparseVector Canonicalize(std::vector<FeatureEntry> entries);

// Canonical sum of two vectors.
SparseVector Sum(const SparseVector& a, const SparseVector& b);

using WeightMap = std::unordered_map<FeatureId, double>;

// sum_i w[id_i] * value_i, with absent weights read as zero.
double SparseDot(const WeightMap& weights, const SparseVector& features);

// 64-bit FNV-1a of the token bytes. Token features in files ("apple":0.5)
// are mapped to ids with this function.
FeatureId HashToken(std::string_view token);

// Id of the crossed feature (page id, ad id):
//   SplitMix64(SplitMix64(page) + ad)   (mod 2^64)
// The order of the arguments matters.
FeatureId CrossId(FeatureId page, FeatureId ad);

// Cartesian product of page and ad features: one entry per pair with value
// page.value * ad.value, canonicalized (colliding ids are summed).
SparseVector CrossFeatures(const SparseVector& page, const SparseVector& ad);

// One logged interaction (x, a, r). Immutable after construction.
class LoggedEvent {
 public:
  // Throws FormatError for a reward outside [0,1] or an unusable id.
  LoggedEvent(std::string context_id, std::string action_id, double reward,
              SparseVector context_features, SparseVector action_features);

  const std::string& context_id() const { return context_id_; }
  const std::string& action_id() const { return action_id_; }
  double reward() const { return reward_; }
  const SparseVector& context_features() const { return context_features_; }
  const SparseVector& action_features() const { return action_features_; }

  friend bool operator==(const LoggedEvent&, const LoggedEvent&) = default;

 private:
  std::string context_id_;
  std::string action_id_;
  double reward_;
  SparseVector context_features_;
  SparseVector action_features_;
};

// Ordered log. The optional split index marks the first test event: events
// before it are training data, events from it on are test data.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<LoggedEvent> events,
                   std::optional<std::size_t> split_index = std::nullopt);

  std::span<const LoggedEvent> events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }
  const LoggedEvent& operator[](std::size_t i) const { return events_[i]; }

  std::optional<std::size_t> split_index() const { return split_index_; }
  // Both throw UsageError when the log carries no split marker.
  Dataset TrainingPortion() const;
  Dataset TestPortion() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::vector<LoggedEvent> events_;
  std::optional<std::size_t> split_index_;
};

struct EstimatorConfig {
  double tau = 0.05;
  double delta = 0.05;

  // Throws ConfigError unless tau in (0,1] and delta in (0,1).
  void Validate() const;
};

// Features for every known action, ordered by action id.
class ActionCatalog {
 public:
  // Keeps the first features seen for each action.
  static ActionCatalog FromDataset(const Dataset& data);

  // Inserts or replaces.
  void Set(const std::string& action_id, SparseVector features);
  // Inserts only when absent.
  void AddIfAbsent(const std::string& action_id, const SparseVector& features);
  // Entries of `other` take precedence.
  void MergeFrom(const ActionCatalog& other);

  const SparseVector* Find(const std::string& action_id) const;
  const std::map<std::string, SparseVector>& actions() const { return actions_; }
  std::size_t size() const { return actions_.size(); }

 private:
  std::map<std::string, SparseVector> actions_;
};

// ---------------------------------------------------------------------------
// Text formats.
//
// Events file: one event per line, TAB separated
//   context_id  action_id  reward  context_features  [action_features]
// Feature lists are comma-separated id:value pairs where id is an unsigned
// integer or a double-quoted token hashed with HashToken. Lines starting
// with '#' are comments, except the exact line "#!split" which marks the
// boundary between training and test events. When action_features is
// missing or empty the catalog (if any) supplies them.
//
// Catalog file: action_id TAB features.

inline constexpr std::string_view kSplitMarker = "#!split";

SparseVector ParseFeatures(std::string_view text);
std::string FormatFeatures(const SparseVector& features);

Dataset ParseEvents(std::string_view text, const ActionCatalog* catalog = nullptr);
std::string SerializeEvents(const Dataset& data);
Dataset ReadEvents(const std::string& path, const ActionCatalog* catalog = nullptr);

ActionCatalog ParseCatalog(std::string_view text);
std::string SerializeCatalog(const ActionCatalog& catalog);
ActionCatalog ReadCatalog(const std::string& path);

}  // namespace logex
