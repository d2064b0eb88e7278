#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

#include "logex/core.hpp"
#include "logex/propensity.hpp"

namespace logex {

// Deterministic target policy h: context -> action.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string Choose(const std::string& context_id,
                             const SparseVector& context_features) const = 0;
};

// Adapts any callable to Policy. Handy for tests and synthetic worlds.
class FunctionPolicy final : public Policy {
 public:
  using Fn = std::function<std::string(const std::string&, const SparseVector&)>;
  explicit FunctionPolicy(Fn fn) : fn_(std::move(fn)) {}
  std::string Choose(const std::string& context_id,
                     const SparseVector& context_features) const override {
    return fn_(context_id, context_features);
  }

 private:
  Fn fn_;
};

struct ValueEstimate {
  double point = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t count = 0;  // T
  double tau = 0.0;
  double delta = 0.0;
};

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

// 1 / max(p, tau). Throws ConfigError when tau <= 0.
double ClippedWeight(double propensity, double tau);

// Bernoulli relative entropy KL(p || q) with 0 ln 0 = 0; +inf when q leaves
// the support of p.
double BernoulliKl(double p, double q);

// Relative-entropy Chernoff interval for a mean of T variables in [0, 1/tau].
// The point is rescaled to m = tau * point in [0,1], the interval
//   {q : KL(m || q) <= ln(2/delta) / T}
// is located by bisection to 1e-10 on each side, and both ends are scaled
// back by 1/tau. Throws DomainError when point is outside [0, 1/tau] and
// ConfigError for a bad tau, delta or T.
Interval ConfidenceInterval(double point, std::size_t count, double tau, double delta);

inline constexpr double kKlBisectionTolerance = 1e-10;

// Clipped inverse-propensity value estimate of h on `data`:
//   (1/T) sum_t r_t I(h(x_t) = a_t) / max(pi_hat(a_t|x_t), tau)
// with the interval from ConfidenceInterval. Terms are computed over
// `threads` workers (0 = LOGEX_THREADS) and summed with PairwiseSum, so the
// result does not depend on the thread count.
ValueEstimate EvaluatePolicy(const Dataset& data, const Policy& policy,
                             const PropensityModel& propensity, const EstimatorConfig& config,
                             std::size_t threads = 0);

enum class RandomBaselineMode {
  kExact,    // indicator replaced by the probability 1/|C(x)| of the logged action
  kSampled,  // one uniform draw from C(x) per event, keyed by (seed, event index)
};

// Value of the policy that picks uniformly from C(x). Events whose logged
// action is outside C(x) contribute zero.
ValueEstimate EvaluateRandomBaseline(const Dataset& data, const PropensityModel& propensity,
                                     const EstimatorConfig& config,
                                     RandomBaselineMode mode = RandomBaselineMode::kExact,
                                     std::uint64_t seed = 0);

// Report rows: Method, tau, delta, T, Estimate, Interval ("[lo,hi]").
std::string ReportHeader();
std::string ReportRow(std::string_view method, const ValueEstimate& estimate);

}  // namespace logex
