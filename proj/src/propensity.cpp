#include "logex/propensity.hpp"

#include "logex/errors.hpp"
#include "logex/util.hpp"

namespace logex {

double PropensityTable::Prob(const std::string& context, const std::string& action) const {
  const auto ctx = context_counts_.find(context);
  if (ctx == context_counts_.end() || ctx->second == 0) return 0.0;
  const auto pair = pair_counts_.find({context, action});
  if (pair == pair_counts_.end()) return 0.0;
  return static_cast<double>(pair->second) / static_cast<double>(ctx->second);
}

std::set<std::string> PropensityTable::FeasibleSet(const std::string& context) const {
  std::set<std::string> actions;
  for (auto it = pair_counts_.lower_bound({context, std::string()});
       it != pair_counts_.end() && it->first.first == context; ++it) {
    if (it->second > 0) actions.insert(it->first.second);
  }
  return actions;
}

void PropensityTable::Count(const std::string& context, const std::string& action,
                            std::uint64_t times) {
  pair_counts_[{context, action}] += times;
  context_counts_[context] += times;
}

void PropensityTable::Merge(const PropensityTable& other) {
  for (const auto& [key, n] : other.pair_counts_) pair_counts_[key] += n;
  for (const auto& [ctx, n] : other.context_counts_) context_counts_[ctx] += n;
}

std::uint64_t PropensityTable::PairCount(const std::string& context,
                                         const std::string& action) const {
  const auto it = pair_counts_.find({context, action});
  return it == pair_counts_.end() ? 0 : it->second;
}

std::uint64_t PropensityTable::ContextCount(const std::string& context) const {
  const auto it = context_counts_.find(context);
  return it == context_counts_.end() ? 0 : it->second;
}

PropensityTable FitEmpirical(const Dataset& data) {
  if (data.empty()) throw EstimationError("cannot fit propensities on an empty dataset");
  PropensityTable table;
  for (const auto& e : data.events()) table.Count(e.context_id(), e.action_id());
  return table;
}

FitScope ParseFitScope(std::string_view name) {
  if (name == "all") return FitScope::kAll;
  if (name == "train") return FitScope::kTrain;
  if (name == "split") return FitScope::kSplit;
  throw UsageError("unknown scope '" + std::string(name) + "' (expected all, train or split)");
}

std::string_view FitScopeName(FitScope scope) {
  switch (scope) {
    case FitScope::kAll:
      return "all";
    case FitScope::kTrain:
      return "train";
    case FitScope::kSplit:
      return "split";
  }
  return "all";
}

ScopedTables FitScoped(const Dataset& data, FitScope scope) {
  switch (scope) {
    case FitScope::kAll: {
      auto table = FitEmpirical(data);
      return {table, table};
    }
    case FitScope::kTrain: {
      auto table = FitEmpirical(data.TrainingPortion());
      return {table, table};
    }
    case FitScope::kSplit:
      return {FitEmpirical(data.TrainingPortion()), FitEmpirical(data.TestPortion())};
  }
  throw UsageError("unknown scope");
}

std::string SerializeTable(const PropensityTable& table) {
  std::string out = "#context_id\taction_id\tpair_count\tcontext_count\n";
  for (const auto& [key, n] : table.pair_counts()) {
    out += key.first;
    out.push_back('\t');
    out += key.second;
    out.push_back('\t');
    out += std::to_string(n);
    out.push_back('\t');
    out += std::to_string(table.ContextCount(key.first));
    out.push_back('\n');
  }
  return out;
}

PropensityTable ParseTable(std::string_view text) {
  PropensityTable table;
  std::map<std::string, std::uint64_t> declared;
  std::size_t line_no = 0;
  for (auto line : Split(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (Trim(line).empty() || line.front() == '#') continue;
    const auto fields = Split(line, '\t');
    try {
      if (fields.size() != 4) throw FormatError("expected 4 TAB-separated fields");
      const std::string context(fields[0]);
      const std::uint64_t pair = ParseUnsigned(fields[2]);
      const std::uint64_t total = ParseUnsigned(fields[3]);
      if (pair == 0 || pair > total) throw FormatError("pair count outside [1, context count]");
      const auto [it, inserted] = declared.emplace(context, total);
      if (!inserted && it->second != total) {
        throw FormatError("inconsistent context count for '" + context + "'");
      }
      if (table.PairCount(context, std::string(fields[1])) != 0) {
        throw FormatError("duplicate row for (" + context + ", " + std::string(fields[1]) + ")");
      }
      table.Count(context, std::string(fields[1]), pair);
    } catch (const FormatError& e) {
      throw FormatError("table line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  for (const auto& [context, total] : declared) {
    if (table.ContextCount(context) != total) {
      throw FormatError("pair counts for '" + context + "' do not sum to its context count");
    }
  }
  return table;
}

PropensityTable ReadTable(const std::string& path) {
  try {
    return ParseTable(ReadFile(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace logex
