#include "logex/simworld.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>

#include "logex/errors.hpp"
#include "logex/util.hpp"

namespace logex::sim {

void CheckStochastic(const Matrix& m, std::string_view what) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const double p = m(r, c);
      if (!(p >= 0.0 && p <= 1.0)) {
        throw DomainError(std::string(what) + ": entry outside [0,1] in row " + std::to_string(r));
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw DomainError(std::string(what) + ": row " + std::to_string(r) + " sums to " +
                        FormatReal(sum));
    }
  }
}

void SyntheticWorld::Validate() const {
  if (contexts.empty() || actions.empty()) throw DomainError("world needs contexts and actions");
  if (context_probs.size() != contexts.size()) throw DomainError("one probability per context");
  if (reward_means.rows() != contexts.size() || reward_means.cols() != actions.size()) {
    throw DomainError("reward matrix must be contexts x actions");
  }
  Matrix probs(1, contexts.size());
  for (std::size_t x = 0; x < contexts.size(); ++x) probs(0, x) = context_probs[x];
  CheckStochastic(probs, "context distribution");
  for (std::size_t x = 0; x < contexts.size(); ++x) {
    for (std::size_t a = 0; a < actions.size(); ++a) {
      const double r = reward_means(x, a);
      if (!(r >= 0.0 && r <= 1.0)) throw DomainError("reward mean outside [0,1]");
    }
  }
  if (!context_features.empty() && context_features.size() != contexts.size()) {
    throw DomainError("context features must cover every context");
  }
  if (!action_features.empty() && action_features.size() != actions.size()) {
    throw DomainError("action features must cover every action");
  }
}

std::size_t SyntheticWorld::ContextIndex(const std::string& id) const {
  const auto it = std::find(contexts.begin(), contexts.end(), id);
  if (it == contexts.end()) throw DomainError("unknown context '" + id + "'");
  return static_cast<std::size_t>(it - contexts.begin());
}

std::size_t SyntheticWorld::ActionIndex(const std::string& id) const {
  const auto it = std::find(actions.begin(), actions.end(), id);
  if (it == actions.end()) throw DomainError("unknown action '" + id + "'");
  return static_cast<std::size_t>(it - actions.begin());
}

const SparseVector& SyntheticWorld::ContextFeatures(std::size_t x) const {
  return context_features.at(x);
}

const SparseVector& SyntheticWorld::ActionFeatures(std::size_t a) const {
  return action_features.at(a);
}

SparseVector DefaultContextFeatures(const std::string& id) {
  return Canonicalize({{HashToken("context=" + id), 1.0}});
}

SparseVector DefaultActionFeatures(const std::string& id) {
  return Canonicalize({{HashToken("action=" + id), 1.0}});
}

namespace {

void FillDefaultFeatures(SyntheticWorld& world) {
  if (world.context_features.empty()) {
    for (const auto& id : world.contexts) world.context_features.push_back(DefaultContextFeatures(id));
  }
  if (world.action_features.empty()) {
    for (const auto& id : world.actions) world.action_features.push_back(DefaultActionFeatures(id));
  }
}

}  // namespace

SyntheticWorld MakeWorld(std::vector<double> context_probs, Matrix reward_means, RewardKind kind) {
  SyntheticWorld world;
  for (std::size_t x = 0; x < reward_means.rows(); ++x) world.contexts.push_back("x" + std::to_string(x));
  for (std::size_t a = 0; a < reward_means.cols(); ++a) world.actions.push_back("a" + std::to_string(a));
  world.context_probs = std::move(context_probs);
  world.reward_means = std::move(reward_means);
  world.reward_kind = kind;
  FillDefaultFeatures(world);
  world.Validate();
  return world;
}

PolicySequence::PolicySequence(std::vector<Matrix> policies) {
  for (auto& p : policies) segments_.push_back({std::move(p), 1});
  for (const auto& s : segments_) {
    total_ += s.rounds;
    ends_.push_back(total_);
  }
}

PolicySequence::PolicySequence(std::vector<Segment> segments) : segments_(std::move(segments)) {
  for (const auto& s : segments_) {
    if (s.rounds == 0) throw DomainError("policy segment with zero rounds");
    total_ += s.rounds;
    ends_.push_back(total_);
  }
}

const Matrix& PolicySequence::At(std::size_t t) const {
  if (t >= total_) throw DomainError("round index past the end of the policy sequence");
  const auto it = std::upper_bound(ends_.begin(), ends_.end(), t);
  return segments_[static_cast<std::size_t>(it - ends_.begin())].policy;
}

PolicySequence PolicySequence::Tiled(std::size_t rounds) const {
  if (total_ == 0) throw DomainError("cannot tile an empty policy sequence");
  std::vector<Segment> tiled;
  std::size_t produced = 0;
  while (produced < rounds) {
    for (const auto& s : segments_) {
      const std::size_t take = std::min(s.rounds, rounds - produced);
      if (take == 0) break;
      if (!tiled.empty() && tiled.back().policy == s.policy) {
        tiled.back().rounds += take;
      } else {
        tiled.push_back({s.policy, take});
      }
      produced += take;
    }
  }
  return PolicySequence(std::move(tiled));
}

void PolicySequence::Validate(std::size_t contexts, std::size_t actions) const {
  if (total_ == 0) throw DomainError("policy sequence is empty");
  for (const auto& s : segments_) {
    if (s.policy.rows() != contexts || s.policy.cols() != actions) {
      throw DomainError("policy matrix must be contexts x actions");
    }
    CheckStochastic(s.policy, "logging policy");
  }
}

Matrix MixturePolicy(const PolicySequence& sequence) {
  if (sequence.size() == 0) throw DomainError("mixture of an empty policy sequence");
  const auto& first = sequence.segments().front().policy;
  Matrix mixture(first.rows(), first.cols());
  const double total = static_cast<double>(sequence.size());
  for (std::size_t x = 0; x < first.rows(); ++x) {
    for (std::size_t a = 0; a < first.cols(); ++a) {
      double sum = 0.0;
      for (const auto& s : sequence.segments()) sum += static_cast<double>(s.rounds) * s.policy(x, a);
      mixture(x, a) = sum / total;
    }
  }
  return mixture;
}

namespace {

// Inverse-CDF draw; falls back to the last positive entry when rounding
// leaves the cumulative sum just below u.
std::size_t SampleIndex(double u, std::size_t n, const auto& prob_of) {
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = prob_of(i);
    if (p > 0.0) last_positive = i;
    cumulative += p;
    if (u < cumulative) return i;
  }
  return last_positive;
}

}  // namespace

Dataset LogEvents(const SyntheticWorld& world, const PolicySequence& sequence, std::uint64_t seed,
                  std::optional<std::size_t> split_index) {
  world.Validate();
  sequence.Validate(world.contexts.size(), world.actions.size());
  SyntheticWorld featured = world;
  FillDefaultFeatures(featured);

  std::mt19937_64 rng(seed);
  const std::size_t num_actions = world.actions.size();
  std::vector<double> rewards(num_actions);
  std::vector<LoggedEvent> events;
  events.reserve(sequence.size());
  for (std::size_t t = 0; t < sequence.size(); ++t) {
    const std::size_t x = SampleIndex(UnitInterval(rng()), world.contexts.size(),
                                      [&](std::size_t i) { return world.context_probs[i]; });
    for (std::size_t a = 0; a < num_actions; ++a) {
      const double mean = world.reward_means(x, a);
      rewards[a] = world.reward_kind == RewardKind::kDeterministic
                       ? mean
                       : (UnitInterval(rng()) < mean ? 1.0 : 0.0);
    }
    const Matrix& policy = sequence.At(t);
    const std::size_t a = SampleIndex(UnitInterval(rng()), num_actions,
                                      [&](std::size_t i) { return policy(x, i); });
    events.emplace_back(world.contexts[x], world.actions[a], rewards[a],
                        featured.ContextFeatures(x), featured.ActionFeatures(a));
  }
  return Dataset(std::move(events), split_index);
}

double ExactPolicyValue(const SyntheticWorld& world, const DeterministicPolicy& h) {
  if (h.size() != world.contexts.size()) throw DomainError("policy must cover every context");
  double value = 0.0;
  for (std::size_t x = 0; x < h.size(); ++x) value += world.context_probs[x] * world.reward_means(x, h[x]);
  return value;
}

double ExactStochasticValue(const SyntheticWorld& world, const Matrix& policy) {
  double value = 0.0;
  for (std::size_t x = 0; x < world.contexts.size(); ++x) {
    double row = 0.0;
    for (std::size_t a = 0; a < world.actions.size(); ++a) row += policy(x, a) * world.reward_means(x, a);
    value += world.context_probs[x] * row;
  }
  return value;
}

double ExactEstimatorExpectation(const SyntheticWorld& world, const Matrix& pi,
                                 const DeterministicPolicy& h, const Matrix& pi_hat, double tau) {
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (h.size() != world.contexts.size()) throw DomainError("policy must cover every context");
  double value = 0.0;
  for (std::size_t x = 0; x < h.size(); ++x) {
    const std::size_t a = h[x];
    // Only the a = h(x) term of the inner sum survives the indicator.
    const double ratio = pi(x, a) / std::max(pi_hat(x, a), tau);
    value += world.context_probs[x] * (ratio * world.reward_means(x, a));
  }
  return value;
}

double ExactEstimatorExpectation(const SyntheticWorld& world, const PolicySequence& sequence,
                                 const DeterministicPolicy& h, const Matrix& pi_hat, double tau) {
  return ExactEstimatorExpectation(world, MixturePolicy(sequence), h, pi_hat, tau);
}

double EnumerateEstimatorMean(const SyntheticWorld& world, const PolicySequence& sequence,
                              const DeterministicPolicy& h, const Matrix& pi_hat, double tau,
                              std::uint64_t budget) {
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  const std::size_t rounds = sequence.size();
  if (rounds == 0) throw DomainError("enumeration needs T >= 1");
  const std::uint64_t outcomes_per_round = world.contexts.size() * world.actions.size();
  std::uint64_t terms = 1;
  for (std::size_t t = 0; t < rounds; ++t) {
    if (outcomes_per_round != 0 && terms > budget / outcomes_per_round) {
      throw CapacityError("enumeration of (|X||A|)^T = " + std::to_string(outcomes_per_round) + "^" +
                          std::to_string(rounds) + " terms exceeds the budget of " +
                          std::to_string(budget));
    }
    terms *= outcomes_per_round;
  }

  // term(x, a) of the estimator sum for one round.
  Matrix term(world.contexts.size(), world.actions.size());
  for (std::size_t x = 0; x < world.contexts.size(); ++x) {
    term(x, h[x]) = world.reward_means(x, h[x]) / std::max(pi_hat(x, h[x]), tau);
  }

  double total = 0.0;
  const double inv_rounds = 1.0 / static_cast<double>(rounds);
  auto recurse = [&](auto&& self, std::size_t t, double prob, double partial) -> void {
    if (t == rounds) {
      total += prob * (partial * inv_rounds);
      return;
    }
    const Matrix& policy = sequence.At(t);
    for (std::size_t x = 0; x < world.contexts.size(); ++x) {
      const double px = world.context_probs[x];
      if (px == 0.0) continue;
      for (std::size_t a = 0; a < world.actions.size(); ++a) {
        const double pa = policy(x, a);
        if (pa == 0.0) continue;
        self(self, t + 1, prob * px * pa, partial + term(x, a));
      }
    }
  };
  recurse(recurse, 0, 1.0, 0.0);
  return total;
}

double RegretProfile::Mean(const SyntheticWorld& world) const {
  double mean = 0.0;
  for (std::size_t x = 0; x < reg.size(); ++x) mean += world.context_probs[x] * reg[x];
  return mean;
}

RegretProfile ComputeRegret(const Matrix& pi, const Matrix& pi_hat) {
  if (pi.rows() != pi_hat.rows() || pi.cols() != pi_hat.cols()) {
    throw DomainError("pi and pi_hat must have the same shape");
  }
  RegretProfile profile;
  profile.reg.assign(pi.rows(), 0.0);
  for (std::size_t x = 0; x < pi.rows(); ++x) {
    for (std::size_t a = 0; a < pi.cols(); ++a) {
      const double diff = pi(x, a) - pi_hat(x, a);
      profile.reg[x] = std::max(profile.reg[x], diff * diff);
    }
  }
  return profile;
}

BiasBounds CheckBiasBounds(const SyntheticWorld& world, const Matrix& pi, const Matrix& pi_hat,
                         double tau, const DeterministicPolicy& h) {
  const auto regret = ComputeRegret(pi, pi_hat);
  BiasBounds bounds;
  double slack_mass = 0.0;
  for (std::size_t x = 0; x < world.contexts.size(); ++x) {
    if (pi(x, h[x]) < tau) continue;
    const double px = world.context_probs[x];
    const double spread = std::sqrt(regret.reg[x]) / tau;
    bounds.lower += px * (world.reward_means(x, h[x]) - spread);
    slack_mass += px * spread;
  }
  bounds.upper = ExactPolicyValue(world, h) + slack_mass;
  bounds.mean = ExactEstimatorExpectation(world, pi, h, pi_hat, tau);
  bounds.ok = bounds.lower <= bounds.mean + kBoundSlack && bounds.mean <= bounds.upper + kBoundSlack;
  return bounds;
}

DeviationCheck CheckDeviationBound(const SyntheticWorld& world, const Matrix& pi, const Matrix& pi_hat,
                                double tau, const DeterministicPolicy& h) {
  DeviationCheck check;
  check.applicable = true;
  for (std::size_t x = 0; x < world.contexts.size(); ++x) {
    if (pi(x, h[x]) < tau) check.applicable = false;
  }
  const double mean = ExactEstimatorExpectation(world, pi, h, pi_hat, tau);
  check.deviation = std::abs(mean - ExactPolicyValue(world, h));
  check.bound = std::sqrt(ComputeRegret(pi, pi_hat).Mean(world)) / tau;
  check.ok = !check.applicable || check.deviation <= check.bound + kBoundSlack;
  return check;
}

double HoeffdingRadius(double tau, double delta, std::size_t rounds) {
  EstimatorConfig{tau, delta}.Validate();
  if (rounds == 0) throw ConfigError("Hoeffding radius needs T >= 1");
  return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(rounds))) / tau;
}

namespace {

template <typename Predicate>
double SimulatedFraction(const SyntheticWorld& world, const PolicySequence& sequence,
                         const DeterministicPolicy& h, const Matrix& pi_hat, double tau, double delta,
                         std::size_t trials, std::uint64_t seed, std::size_t threads,
                         Predicate&& hit) {
  if (trials == 0) throw ConfigError("at least one trial is required");
  const EstimatorConfig config{tau, delta};
  config.Validate();
  const MatrixPropensity propensity(world, pi_hat);
  const TablePolicy policy(world, h);
  const double exact = ExactEstimatorExpectation(world, sequence, h, pi_hat, tau);
  std::vector<unsigned char> hits(trials, 0);
  ParallelFor(trials, threads == 0 ? DefaultThreadCount() : threads, [&](std::size_t i) {
    const auto data = LogEvents(world, sequence, SplitMix64(seed + i));
    hits[i] = hit(EvaluatePolicy(data, policy, propensity, config, 1), exact) ? 1 : 0;
  });
  std::size_t count = 0;
  for (auto v : hits) count += v;
  return static_cast<double>(count) / static_cast<double>(trials);
}

}  // namespace

double HoeffdingViolationRate(const SyntheticWorld& world, const PolicySequence& sequence,
                              const DeterministicPolicy& h, const Matrix& pi_hat, double tau,
                              double delta, std::size_t trials, std::uint64_t seed,
                              std::size_t threads) {
  const double radius = HoeffdingRadius(tau, delta, sequence.size());
  return SimulatedFraction(world, sequence, h, pi_hat, tau, delta, trials, seed, threads,
                           [radius](const ValueEstimate& e, double exact) {
                             return std::abs(e.point - exact) > radius;
                           });
}

double IntervalCoverage(const SyntheticWorld& world, const PolicySequence& sequence,
                        const DeterministicPolicy& h, const Matrix& pi_hat, double tau,
                        double delta, std::size_t trials, std::uint64_t seed,
                        std::size_t threads) {
  return SimulatedFraction(world, sequence, h, pi_hat, tau, delta, trials, seed, threads,
                           [](const ValueEstimate& e, double exact) {
                             return e.ci_low <= exact && exact <= e.ci_high;
                           });
}

MatrixPropensity::MatrixPropensity(const SyntheticWorld& world, Matrix pi_hat)
    : world_(world), pi_hat_(std::move(pi_hat)) {
  if (pi_hat_.rows() != world.contexts.size() || pi_hat_.cols() != world.actions.size()) {
    throw DomainError("pi_hat must be contexts x actions");
  }
}

double MatrixPropensity::Prob(const std::string& context, const std::string& action) const {
  const auto x = std::find(world_.contexts.begin(), world_.contexts.end(), context);
  const auto a = std::find(world_.actions.begin(), world_.actions.end(), action);
  if (x == world_.contexts.end() || a == world_.actions.end()) return 0.0;
  return pi_hat_(static_cast<std::size_t>(x - world_.contexts.begin()),
                 static_cast<std::size_t>(a - world_.actions.begin()));
}

std::set<std::string> MatrixPropensity::FeasibleSet(const std::string& context) const {
  std::set<std::string> feasible;
  const auto x = std::find(world_.contexts.begin(), world_.contexts.end(), context);
  if (x == world_.contexts.end()) return feasible;
  const auto row = static_cast<std::size_t>(x - world_.contexts.begin());
  for (std::size_t a = 0; a < world_.actions.size(); ++a) {
    if (pi_hat_(row, a) > 0.0) feasible.insert(world_.actions[a]);
  }
  return feasible;
}

TablePolicy::TablePolicy(const SyntheticWorld& world, DeterministicPolicy h)
    : world_(world), h_(std::move(h)) {
  if (h_.size() != world.contexts.size()) throw DomainError("policy must cover every context");
}

std::string TablePolicy::Choose(const std::string& context_id, const SparseVector&) const {
  return world_.actions[h_[world_.ContextIndex(context_id)]];
}

DeterministicPolicy Tabulate(const SyntheticWorld& world, const Policy& policy) {
  SyntheticWorld featured = world;
  FillDefaultFeatures(featured);
  DeterministicPolicy h;
  for (std::size_t x = 0; x < world.contexts.size(); ++x) {
    h.push_back(world.ActionIndex(policy.Choose(world.contexts[x], featured.ContextFeatures(x))));
  }
  return h;
}

namespace {

std::vector<double> NormalizedUniform(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> v(n);
  double sum = 0.0;
  for (auto& x : v) {
    x = UnitInterval(rng()) + 1e-3;
    sum += x;
  }
  for (auto& x : v) x /= sum;
  return v;
}

Matrix RandomStochastic(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                        double deterministic_share) {
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (UnitInterval(rng()) < deterministic_share) {
      m(r, rng() % cols) = 1.0;
    } else {
      const auto row = NormalizedUniform(rng, cols);
      for (std::size_t c = 0; c < cols; ++c) m(r, c) = row[c];
    }
  }
  return m;
}

}  // namespace

Instance RandomInstance(std::uint64_t seed, const InstanceShape& shape) {
  std::mt19937_64 rng(seed);
  const std::size_t contexts = 1 + rng() % shape.max_contexts;
  const std::size_t actions = 1 + rng() % shape.max_actions;
  const std::size_t rounds = 1 + rng() % shape.max_rounds;

  Matrix rewards(contexts, actions);
  for (std::size_t x = 0; x < contexts; ++x) {
    for (std::size_t a = 0; a < actions; ++a) rewards(x, a) = UnitInterval(rng());
  }
  Instance instance;
  instance.world = MakeWorld(NormalizedUniform(rng, contexts), std::move(rewards));
  std::vector<Matrix> policies;
  for (std::size_t t = 0; t < rounds; ++t) policies.push_back(RandomStochastic(rng, contexts, actions, 0.5));
  instance.sequence = PolicySequence(std::move(policies));
  instance.pi_hat = RandomStochastic(rng, contexts, actions, 0.0);
  for (std::size_t x = 0; x < contexts; ++x) instance.h.push_back(rng() % actions);
  instance.tau = 0.05 + 0.55 * UnitInterval(rng());
  return instance;
}

Instance TightnessInstance(double tau, double epsilon) {
  if (!(tau > 0.0) || !(epsilon > 0.0) || tau + epsilon > 1.0) {
    throw DomainError("tightness instance needs tau > 0, epsilon > 0, tau + epsilon <= 1");
  }
  Matrix rewards(1, 2, 1.0);
  Instance instance;
  instance.world = MakeWorld({1.0}, rewards);
  instance.world.actions = {"a1", "a2"};
  instance.world.action_features = {DefaultActionFeatures("a1"), DefaultActionFeatures("a2")};
  Matrix pi(1, 2);
  pi(0, 0) = tau + epsilon;
  pi(0, 1) = 1.0 - pi(0, 0);
  instance.sequence = PolicySequence(std::vector<Matrix>{pi});
  instance.pi_hat = Matrix(1, 2);
  instance.pi_hat(0, 0) = tau;
  instance.pi_hat(0, 1) = 1.0 - tau;
  instance.h = {0};
  instance.tau = tau;
  return instance;
}

namespace {

struct SectionLine {
  std::size_t number;
  std::vector<std::string_view> fields;
};

std::string_view SectionName(std::string_view header, std::vector<std::string_view>& args) {
  if (header.size() < 2 || header.back() != ']') throw FormatError("malformed section header");
  const auto inner = header.substr(1, header.size() - 2);
  auto parts = Split(inner, '\t');
  for (std::size_t i = 1; i < parts.size(); ++i) args.push_back(Trim(parts[i]));
  return Trim(parts[0]);
}

template <typename Fn>
void ForEachContentLine(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  for (auto line : Split(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (Trim(line).empty() || line.front() == '#') continue;
    try {
      fn(line);
    } catch (const FormatError& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DomainError& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

}  // namespace

SyntheticWorld ParseWorld(std::string_view text) {
  SyntheticWorld world;
  std::string section;
  std::vector<std::pair<std::string, std::vector<double>>> reward_rows;
  std::vector<std::optional<SparseVector>> context_features;
  std::vector<std::optional<SparseVector>> action_features;
  ForEachContentLine(text, [&](std::string_view line) {
    if (line.front() == '[') {
      std::vector<std::string_view> args;
      section = SectionName(line, args);
      if (section != "contexts" && section != "actions" && section != "rewards") {
        throw FormatError("unknown world section [" + section + "]");
      }
      return;
    }
    const auto fields = Split(line, '\t');
    if (section.empty()) {
      if (fields.size() != 2 || Trim(fields[0]) != "reward_kind") {
        throw FormatError("expected 'reward_kind<TAB>deterministic|bernoulli'");
      }
      const auto kind = Trim(fields[1]);
      if (kind == "deterministic") {
        world.reward_kind = RewardKind::kDeterministic;
      } else if (kind == "bernoulli") {
        world.reward_kind = RewardKind::kBernoulli;
      } else {
        throw FormatError("unknown reward kind '" + std::string(kind) + "'");
      }
    } else if (section == "contexts") {
      if (fields.size() < 2 || fields.size() > 3) throw FormatError("context rows: id, probability[, features]");
      world.contexts.emplace_back(Trim(fields[0]));
      world.context_probs.push_back(ParseReal(fields[1]));
      context_features.push_back(fields.size() == 3 ? std::optional(ParseFeatures(fields[2])) : std::nullopt);
    } else if (section == "actions") {
      if (fields.size() > 2) throw FormatError("action rows: id[, features]");
      world.actions.emplace_back(Trim(fields[0]));
      action_features.push_back(fields.size() == 2 ? std::optional(ParseFeatures(fields[1])) : std::nullopt);
    } else {
      std::vector<double> row;
      for (std::size_t i = 1; i < fields.size(); ++i) row.push_back(ParseReal(fields[i]));
      reward_rows.emplace_back(std::string(Trim(fields[0])), std::move(row));
    }
  });

  world.reward_means = Matrix(world.contexts.size(), world.actions.size(), -1.0);
  for (const auto& [context, row] : reward_rows) {
    std::size_t x = 0;
    try {
      x = world.ContextIndex(context);
    } catch (const DomainError& e) {
      throw FormatError(std::string("[rewards]: ") + e.what());
    }
    if (row.size() != world.actions.size()) {
      throw FormatError("[rewards] row for '" + context + "' needs one mean per action");
    }
    if (world.reward_means(x, 0) != -1.0) throw FormatError("duplicate reward row for '" + context + "'");
    for (std::size_t a = 0; a < row.size(); ++a) world.reward_means(x, a) = row[a];
  }
  if (reward_rows.size() != world.contexts.size()) {
    throw FormatError("[rewards] must hold exactly one row per context");
  }
  for (std::size_t x = 0; x < world.contexts.size(); ++x) {
    world.context_features.push_back(context_features[x] ? *context_features[x]
                                                          : DefaultContextFeatures(world.contexts[x]));
  }
  for (std::size_t a = 0; a < world.actions.size(); ++a) {
    world.action_features.push_back(action_features[a] ? *action_features[a]
                                                        : DefaultActionFeatures(world.actions[a]));
  }
  try {
    world.Validate();
  } catch (const DomainError& e) {
    throw FormatError(std::string("invalid world: ") + e.what());
  }
  return world;
}

std::string SerializeWorld(const SyntheticWorld& world) {
  SyntheticWorld featured = world;
  FillDefaultFeatures(featured);
  std::string out = "reward_kind\t";
  out += world.reward_kind == RewardKind::kDeterministic ? "deterministic" : "bernoulli";
  out += "\n[contexts]\n";
  for (std::size_t x = 0; x < world.contexts.size(); ++x) {
    out += world.contexts[x] + '\t' + FormatReal(world.context_probs[x]) + '\t' +
           FormatFeatures(featured.ContextFeatures(x)) + '\n';
  }
  out += "[actions]\n";
  for (std::size_t a = 0; a < world.actions.size(); ++a) {
    out += world.actions[a] + '\t' + FormatFeatures(featured.ActionFeatures(a)) + '\n';
  }
  out += "[rewards]\n";
  for (std::size_t x = 0; x < world.contexts.size(); ++x) {
    out += world.contexts[x];
    for (std::size_t a = 0; a < world.actions.size(); ++a) out += '\t' + FormatReal(world.reward_means(x, a));
    out += '\n';
  }
  return out;
}

PolicySequence ParsePolicySequence(std::string_view text, const SyntheticWorld& world) {
  std::vector<PolicySequence::Segment> segments;
  std::vector<bool> seen;
  const auto close_segment = [&] {
    if (segments.empty()) return;
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
      throw FormatError("policy " + std::to_string(segments.size()) + " does not cover every context");
    }
  };
  ForEachContentLine(text, [&](std::string_view line) {
    if (line.front() == '[') {
      std::vector<std::string_view> args;
      if (SectionName(line, args) != "policy" || args.size() > 1) {
        throw FormatError("expected [policy] or [policy<TAB>rounds]");
      }
      close_segment();
      const std::size_t rounds = args.empty() ? 1 : static_cast<std::size_t>(ParseUnsigned(args[0]));
      if (rounds == 0) throw FormatError("policy segment with zero rounds");
      segments.push_back({Matrix(world.contexts.size(), world.actions.size()), rounds});
      seen.assign(world.contexts.size(), false);
      return;
    }
    if (segments.empty()) throw FormatError("policy row outside a [policy] section");
    const auto fields = Split(line, '\t');
    if (fields.size() != world.actions.size() + 1) {
      throw FormatError("policy rows need a context id and one probability per action");
    }
    const std::size_t x = world.ContextIndex(std::string(Trim(fields[0])));
    if (seen[x]) throw FormatError("duplicate row for context '" + world.contexts[x] + "'");
    seen[x] = true;
    for (std::size_t a = 0; a < world.actions.size(); ++a) segments.back().policy(x, a) = ParseReal(fields[a + 1]);
  });
  close_segment();
  PolicySequence sequence(std::move(segments));
  try {
    sequence.Validate(world.contexts.size(), world.actions.size());
  } catch (const DomainError& e) {
    throw FormatError(std::string("invalid policy sequence: ") + e.what());
  }
  return sequence;
}

std::string SerializePolicySequence(const PolicySequence& sequence, const SyntheticWorld& world) {
  std::string out;
  for (const auto& s : sequence.segments()) {
    out += "[policy\t" + std::to_string(s.rounds) + "]\n";
    for (std::size_t x = 0; x < world.contexts.size(); ++x) {
      out += world.contexts[x];
      for (std::size_t a = 0; a < world.actions.size(); ++a) out += '\t' + FormatReal(s.policy(x, a));
      out += '\n';
    }
  }
  return out;
}

ActionCatalog WorldCatalog(const SyntheticWorld& world) {
  SyntheticWorld featured = world;
  FillDefaultFeatures(featured);
  ActionCatalog catalog;
  for (std::size_t a = 0; a < world.actions.size(); ++a) catalog.Set(world.actions[a], featured.ActionFeatures(a));
  return catalog;
}

}  // namespace logex::sim
