#include "logex/core.hpp"

#include <algorithm>
#include <cmath>

#include "logex/errors.hpp"
#include "logex/util.hpp"

namespace logex {

SparseVector Canonicalize(std::vector<FeatureEntry> entries) {
  for (const auto& e : entries) {
    if (!std::isfinite(e.value)) throw FormatError("non-finite feature value");
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const FeatureEntry& a, const FeatureEntry& b) { return a.id < b.id; });
  SparseVector result;
  auto& out = result.entries_;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    if (!out.empty() && out.back().id == e.id) {
      out.back().value += e.value;
    } else {
      out.push_back(e);
    }
  }
  std::erase_if(out, [](const FeatureEntry& e) { return e.value == 0.0; });
  for (const auto& e : out) {
    if (!std::isfinite(e.value)) throw FormatError("feature value overflow while merging");
  }
  return result;
}

SparseVector Sum(const SparseVector& a, const SparseVector& b) {
  std::vector<FeatureEntry> all(a.entries().begin(), a.entries().end());
  all.insert(all.end(), b.entries().begin(), b.entries().end());
  return Canonicalize(std::move(all));
}

double SparseDot(const WeightMap& weights, const SparseVector& features) {
  double total = 0.0;
  for (const auto& e : features.entries()) {
    const auto it = weights.find(e.id);
    if (it != weights.end()) total += it->second * e.value;
  }
  return total;
}

FeatureId HashToken(std::string_view token) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : token) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

FeatureId CrossId(FeatureId page, FeatureId ad) { return SplitMix64(SplitMix64(page) + ad); }

SparseVector CrossFeatures(const SparseVector& page, const SparseVector& ad) {
  std::vector<FeatureEntry> crossed;
  crossed.reserve(page.size() * ad.size());
  for (const auto& p : page.entries()) {
    for (const auto& a : ad.entries()) {
      crossed.push_back({CrossId(p.id, a.id), p.value * a.value});
    }
  }
  return Canonicalize(std::move(crossed));
}

namespace {

void CheckId(const std::string& id, const char* what) {
  if (id.empty()) throw FormatError(std::string("empty ") + what);
  if (id.front() == '#') throw FormatError(std::string(what) + " may not start with '#': " + id);
  if (id.find_first_of("\t\r\n") != std::string::npos) {
    throw FormatError(std::string(what) + " contains a tab or newline");
  }
}

}  // namespace

LoggedEvent::LoggedEvent(std::string context_id, std::string action_id, double reward,
                         SparseVector context_features, SparseVector action_features)
    : context_id_(std::move(context_id)),
      action_id_(std::move(action_id)),
      reward_(reward),
      context_features_(std::move(context_features)),
      action_features_(std::move(action_features)) {
  CheckId(context_id_, "context id");
  CheckId(action_id_, "action id");
  if (!(reward_ >= 0.0 && reward_ <= 1.0)) {
    throw FormatError("reward outside [0,1]: " + FormatReal(reward_));
  }
}

Dataset::Dataset(std::vector<LoggedEvent> events, std::optional<std::size_t> split_index)
    : events_(std::move(events)), split_index_(split_index) {
  if (split_index_ && *split_index_ > events_.size()) {
    throw FormatError("split index past the end of the log");
  }
}

Dataset Dataset::TrainingPortion() const {
  if (!split_index_) throw UsageError("events carry no " + std::string(kSplitMarker) + " marker");
  return Dataset({events_.begin(), events_.begin() + static_cast<std::ptrdiff_t>(*split_index_)});
}

Dataset Dataset::TestPortion() const {
  if (!split_index_) throw UsageError("events carry no " + std::string(kSplitMarker) + " marker");
  return Dataset({events_.begin() + static_cast<std::ptrdiff_t>(*split_index_), events_.end()});
}

void EstimatorConfig::Validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0,1], got " + FormatReal(tau));
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ConfigError("delta must lie in (0,1), got " + FormatReal(delta));
  }
}

ActionCatalog ActionCatalog::FromDataset(const Dataset& data) {
  ActionCatalog catalog;
  for (const auto& e : data.events()) catalog.AddIfAbsent(e.action_id(), e.action_features());
  return catalog;
}

void ActionCatalog::Set(const std::string& action_id, SparseVector features) {
  actions_[action_id] = std::move(features);
}

void ActionCatalog::AddIfAbsent(const std::string& action_id, const SparseVector& features) {
  actions_.try_emplace(action_id, features);
}

void ActionCatalog::MergeFrom(const ActionCatalog& other) {
  for (const auto& [id, features] : other.actions_) actions_[id] = features;
}

const SparseVector* ActionCatalog::Find(const std::string& action_id) const {
  const auto it = actions_.find(action_id);
  return it == actions_.end() ? nullptr : &it->second;
}

SparseVector ParseFeatures(std::string_view text) {
  std::vector<FeatureEntry> entries;
  std::size_t pos = 0;
  const auto skip_space = [&] {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\r')) ++pos;
  };
  skip_space();
  if (pos == text.size()) return {};
  while (true) {
    skip_space();
    FeatureId id = 0;
    if (pos < text.size() && text[pos] == '"') {
      const std::size_t close = text.find('"', pos + 1);
      if (close == std::string_view::npos) throw FormatError("unterminated quoted feature token");
      id = HashToken(text.substr(pos + 1, close - pos - 1));
      pos = close + 1;
      skip_space();
      if (pos >= text.size() || text[pos] != ':') {
        throw FormatError("expected ':' after feature token");
      }
    } else {
      const std::size_t colon = text.find(':', pos);
      if (colon == std::string_view::npos) {
        throw FormatError("feature without ':' in '" + std::string(text) + "'");
      }
      id = ParseUnsigned(text.substr(pos, colon - pos));
      pos = colon;
    }
    ++pos;  // ':'
    const std::size_t comma = text.find(',', pos);
    const std::size_t value_end = comma == std::string_view::npos ? text.size() : comma;
    entries.push_back({id, ParseReal(text.substr(pos, value_end - pos))});
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return Canonicalize(std::move(entries));
}

std::string FormatFeatures(const SparseVector& features) {
  std::string out;
  for (const auto& e : features.entries()) {
    if (!out.empty()) out.push_back(',');
    out += std::to_string(e.id);
    out.push_back(':');
    out += FormatReal(e.value);
  }
  return out;
}

namespace {

template <typename LineFn>
void ForEachLine(std::string_view text, LineFn&& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    if (!(end == text.size() && line.empty())) {
      try {
        fn(line);
      } catch (const FormatError& e) {
        throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    start = end + 1;
  }
}

}  // namespace

Dataset ParseEvents(std::string_view text, const ActionCatalog* catalog) {
  std::vector<LoggedEvent> events;
  std::optional<std::size_t> split;
  ForEachLine(text, [&](std::string_view line) {
    if (line == kSplitMarker) {
      if (split) throw FormatError("more than one split marker");
      split = events.size();
      return;
    }
    if (Trim(line).empty() || line.front() == '#') return;
    const auto fields = Split(line, '\t');
    if (fields.size() != 4 && fields.size() != 5) {
      throw FormatError("expected 4 or 5 TAB-separated fields, got " +
                        std::to_string(fields.size()));
    }
    SparseVector action_features;
    if (fields.size() == 5 && !Trim(fields[4]).empty()) {
      action_features = ParseFeatures(fields[4]);
    } else if (catalog != nullptr) {
      if (const auto* found = catalog->Find(std::string(fields[1]))) action_features = *found;
    }
    events.emplace_back(std::string(fields[0]), std::string(fields[1]), ParseReal(fields[2]),
                        ParseFeatures(fields[3]), std::move(action_features));
  });
  return Dataset(std::move(events), split);
}

std::string SerializeEvents(const Dataset& data) {
  std::string out;
  const auto events = data.events();
  for (std::size_t i = 0; i <= events.size(); ++i) {
    if (data.split_index() && *data.split_index() == i) {
      out += kSplitMarker;
      out.push_back('\n');
    }
    if (i == events.size()) break;
    const auto& e = events[i];
    out += e.context_id();
    out.push_back('\t');
    out += e.action_id();
    out.push_back('\t');
    out += FormatReal(e.reward());
    out.push_back('\t');
    out += FormatFeatures(e.context_features());
    out.push_back('\t');
    out += FormatFeatures(e.action_features());
    out.push_back('\n');
  }
  return out;
}

Dataset ReadEvents(const std::string& path, const ActionCatalog* catalog) {
  try {
    return ParseEvents(ReadFile(path), catalog);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

ActionCatalog ParseCatalog(std::string_view text) {
  ActionCatalog catalog;
  ForEachLine(text, [&](std::string_view line) {
    if (Trim(line).empty() || line.front() == '#') return;
    const auto fields = Split(line, '\t');
    if (fields.size() > 2) throw FormatError("catalog lines hold action_id TAB features");
    const std::string id(Trim(fields[0]));
    if (id.empty()) throw FormatError("empty action id");
    catalog.Set(id, fields.size() == 2 ? ParseFeatures(fields[1]) : SparseVector{});
  });
  return catalog;
}

std::string SerializeCatalog(const ActionCatalog& catalog) {
  std::string out;
  for (const auto& [id, features] : catalog.actions()) {
    out += id;
    out.push_back('\t');
    out += FormatFeatures(features);
    out.push_back('\n');
  }
  return out;
}

ActionCatalog ReadCatalog(const std::string& path) {
  try {
    return ParseCatalog(ReadFile(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace logex
