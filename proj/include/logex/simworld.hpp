#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "logex/core.hpp"
#include "logex/estimator.hpp"
#include "logex/propensity.hpp"

namespace logex::sim {

// Dense row-major matrix, rows = contexts, columns = actions.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline constexpr double kRowSumTolerance = 1e-12;

// Throws DomainError unless every row is a distribution (entries in [0,1],
// sum 1 within kRowSumTolerance).
void CheckStochastic(const Matrix& m, std::string_view what);

enum class RewardKind { kDeterministic, kBernoulli };

// Finite contextual-bandit instance. With deterministic rewards the reward
// vector is a function of the context; with Bernoulli rewards each r_a is an
// independent coin with the given mean.
struct SyntheticWorld {
  std::vector<std::string> contexts;
  std::vector<double> context_probs;
  std::vector<std::string> actions;
  Matrix reward_means;
  RewardKind reward_kind = RewardKind::kDeterministic;
  // Empty means one-hot defaults (see DefaultContextFeatures).
  std::vector<SparseVector> context_features;
  std::vector<SparseVector> action_features;

  void Validate() const;
  std::size_t ContextIndex(const std::string& id) const;
  std::size_t ActionIndex(const std::string& id) const;
  const SparseVector& ContextFeatures(std::size_t x) const;
  const SparseVector& ActionFeatures(std::size_t a) const;
};

// Feature "context=<id>" / "action=<id>" with value 1.
SparseVector DefaultContextFeatures(const std::string& id);
SparseVector DefaultActionFeatures(const std::string& id);

// Builds a world with the given sizes, ids "x0.." / "a0..", and default features.
SyntheticWorld MakeWorld(std::vector<double> context_probs, Matrix reward_means,
                         RewardKind kind = RewardKind::kDeterministic);

// pi_1..pi_T stored as runs of identical matrices.
class PolicySequence {
 public:
  struct Segment {
    Matrix policy;
    std::size_t rounds = 1;
  };

  PolicySequence() = default;
  explicit PolicySequence(std::vector<Matrix> policies);
  explicit PolicySequence(std::vector<Segment> segments);

  std::size_t size() const { return total_; }  // T
  const Matrix& At(std::size_t t) const;
  const std::vector<Segment>& segments() const { return segments_; }
  // Round t of the result uses policy (t mod T) of this sequence.
  PolicySequence Tiled(std::size_t rounds) const;
  void Validate(std::size_t contexts, std::size_t actions) const;

 private:
  std::vector<Segment> segments_;
  std::vector<std::size_t> ends_;  // cumulative round counts
  std::size_t total_ = 0;
};

// Deterministic target policy: action index per context index.
using DeterministicPolicy = std::vector<std::size_t>;

// pi(a|x) = (1/T) sum_t pi_t(a|x).
Matrix MixturePolicy(const PolicySequence& sequence);

// Round t: x_t ~ D, reward vector drawn (Bernoulli) or read off, a_t ~ pi_t(.|x_t).
// The RNG is std::mt19937_64(seed); the whole log is a function of the seed.
Dataset LogEvents(const SyntheticWorld& world, const PolicySequence& sequence, std::uint64_t seed,
                  std::optional<std::size_t> split_index = std::nullopt);

// V^h = sum_x P(x) rbar(x, h(x)).
double ExactPolicyValue(const SyntheticWorld& world, const DeterministicPolicy& h);
// sum_x P(x) sum_a policy(a|x) rbar(x,a).
double ExactStochasticValue(const SyntheticWorld& world, const Matrix& policy);

// E_x sum_a pi(a|x) rbar(x,a) I(h(x)=a) / max(pi_hat(a|x), tau), with pi the
// mixture of the sequence (or the given single policy).
double ExactEstimatorExpectation(const SyntheticWorld& world, const PolicySequence& sequence,
                                 const DeterministicPolicy& h, const Matrix& pi_hat, double tau);
double ExactEstimatorExpectation(const SyntheticWorld& world, const Matrix& pi,
                                 const DeterministicPolicy& h, const Matrix& pi_hat, double tau);

inline constexpr std::uint64_t kEnumerationBudget = 10'000'000;

// Expectation of the estimator over every length-T sequence of (x_t, a_t),
// each weighted by prod_t P(x_t) pi_t(a_t|x_t). Zero-probability branches are
// pruned. Throws CapacityError when (|X||A|)^T exceeds `budget`.
double EnumerateEstimatorMean(const SyntheticWorld& world, const PolicySequence& sequence,
                              const DeterministicPolicy& h, const Matrix& pi_hat, double tau,
                              std::uint64_t budget = kEnumerationBudget);

// reg(x) = max_a (pi(a|x) - pi_hat(a|x))^2.
struct RegretProfile {
  std::vector<double> reg;
  double Mean(const SyntheticWorld& world) const;  // E_x reg(x)
};
RegretProfile ComputeRegret(const Matrix& pi, const Matrix& pi_hat);

// Bias sandwich for a fixed logging policy pi:
//   lower = E_x[I(pi(h(x)|x) >= tau) (V^h(x) - sqrt(reg(x))/tau)]
//   upper = V^h + E_x[I(pi(h(x)|x) >= tau) sqrt(reg(x))/tau]
// mean is the exact estimator expectation; ok means lower <= mean <= upper up
// to kBoundSlack of floating-point rounding.
struct BiasBounds {
  double lower = 0.0;
  double upper = 0.0;
  double mean = 0.0;
  bool ok = false;
};
inline constexpr double kBoundSlack = 1e-12;
BiasBounds CheckBiasBounds(const SyntheticWorld& world, const Matrix& pi, const Matrix& pi_hat,
                         double tau, const DeterministicPolicy& h);

// |mean - V^h| <= sqrt(E_x reg(x)) / tau, applicable when pi(h(x)|x) >= tau
// for every x.
struct DeviationCheck {
  bool applicable = false;
  double deviation = 0.0;
  double bound = 0.0;
  bool ok = false;
};
DeviationCheck CheckDeviationBound(const SyntheticWorld& world, const Matrix& pi, const Matrix& pi_hat,
                                double tau, const DeterministicPolicy& h);

// (1/tau) sqrt(ln(2/delta) / (2T)).
double HoeffdingRadius(double tau, double delta, std::size_t rounds);

// Fraction of `trials` simulated logs whose estimate deviates from the exact
// expectation by more than HoeffdingRadius. Trial i uses seed
// SplitMix64(seed + i); trials run over `threads` workers (0 = LOGEX_THREADS).
double HoeffdingViolationRate(const SyntheticWorld& world, const PolicySequence& sequence,
                              const DeterministicPolicy& h, const Matrix& pi_hat, double tau,
                              double delta, std::size_t trials, std::uint64_t seed,
                              std::size_t threads = 0);

// Fraction of simulated logs whose confidence interval contains the exact
// estimator expectation.
double IntervalCoverage(const SyntheticWorld& world, const PolicySequence& sequence,
                        const DeterministicPolicy& h, const Matrix& pi_hat, double tau,
                        double delta, std::size_t trials, std::uint64_t seed,
                        std::size_t threads = 0);

// Adapters so the estimator can run against world-indexed quantities.
class MatrixPropensity final : public PropensityModel {
 public:
  MatrixPropensity(const SyntheticWorld& world, Matrix pi_hat);
  double Prob(const std::string& context, const std::string& action) const override;
  std::set<std::string> FeasibleSet(const std::string& context) const override;

 private:
  const SyntheticWorld& world_;
  Matrix pi_hat_;
};

class TablePolicy final : public Policy {
 public:
  TablePolicy(const SyntheticWorld& world, DeterministicPolicy h);
  std::string Choose(const std::string& context_id, const SparseVector&) const override;

 private:
  const SyntheticWorld& world_;
  DeterministicPolicy h_;
};

// Evaluates an arbitrary policy on every context of the world.
DeterministicPolicy Tabulate(const SyntheticWorld& world, const Policy& policy);

struct Instance {
  SyntheticWorld world;
  PolicySequence sequence;
  Matrix pi_hat;
  DeterministicPolicy h;
  double tau = 0.1;
};

struct InstanceShape {
  std::size_t max_contexts = 3;
  std::size_t max_actions = 3;
  std::size_t max_rounds = 4;
};

// Random small instance from a recorded seed: context distribution and
// policy rows are normalized uniforms (half the logging rows deterministic),
// rewards uniform in [0,1], tau uniform in [0.05, 0.6].
Instance RandomInstance(std::uint64_t seed, const InstanceShape& shape = {});

// One context, two actions, rewards identically 1, pi(a1|x) = tau + epsilon,
// pi_hat(a1|x) = tau, h -> a1. The estimator mean is (tau+epsilon)/tau.
Instance TightnessInstance(double tau, double epsilon);

// ---------------------------------------------------------------------------
// World file: "reward_kind<TAB>deterministic|bernoulli" then sections
//   [contexts]  id<TAB>probability[<TAB>features]
//   [actions]   id[<TAB>features]
//   [rewards]   context_id<TAB>mean for each action, in [actions] order
// Policy-sequence file: one "[policy]" or "[policy<TAB>N]" section per
// policy (N = consecutive rounds it covers), each holding a row
//   context_id<TAB>probability for each action
// per context. Lines starting with '#' are comments.

SyntheticWorld ParseWorld(std::string_view text);
std::string SerializeWorld(const SyntheticWorld& world);
PolicySequence ParsePolicySequence(std::string_view text, const SyntheticWorld& world);
std::string SerializePolicySequence(const PolicySequence& sequence, const SyntheticWorld& world);

// Every world action with its features.
ActionCatalog WorldCatalog(const SyntheticWorld& world);

}  // namespace logex::sim
