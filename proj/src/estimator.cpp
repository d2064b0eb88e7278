#include "logex/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

#include "logex/errors.hpp"
#include "logex/util.hpp"

namespace logex {

double ClippedWeight(double propensity, double tau) {
  if (!(tau > 0.0)) throw ConfigError("tau must be positive, got " + FormatReal(tau));
  return 1.0 / std::max(propensity, tau);
}

double BernoulliKl(double p, double q) {
  const auto term = [](double a, double b) {
    if (a == 0.0) return 0.0;
    if (b == 0.0) return std::numeric_limits<double>::infinity();
    return a * std::log(a / b);
  };
  return term(p, q) + term(1.0 - p, 1.0 - q);
}

Interval ConfidenceInterval(double point, std::size_t count, double tau, double delta) {
  EstimatorConfig{tau, delta}.Validate();
  if (count == 0) throw ConfigError("confidence interval needs T >= 1");
  const double max_value = 1.0 / tau;
  // A few ulps of slack for points produced by floating-point sums.
  if (!(point >= 0.0) || point > max_value * (1.0 + 1e-12)) {
    throw DomainError("point " + FormatReal(point) + " outside [0, 1/tau]");
  }
  const double m = std::clamp(tau * point, 0.0, 1.0);
  const double budget = std::log(2.0 / delta) / static_cast<double>(count);

  double upper = 1.0;
  if (m < 1.0) {
    double lo = m;
    double hi = 1.0;
    while (hi - lo > kKlBisectionTolerance) {
      const double mid = 0.5 * (lo + hi);
      if (BernoulliKl(m, mid) <= budget) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    upper = lo;
  }

  double lower = 0.0;
  if (m > 0.0) {
    double lo = 0.0;
    double hi = m;
    while (hi - lo > kKlBisectionTolerance) {
      const double mid = 0.5 * (lo + hi);
      if (BernoulliKl(m, mid) <= budget) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    lower = hi;
  }

  Interval interval{lower / tau, upper / tau};
  interval.low = std::min(interval.low, point);
  interval.high = std::clamp(interval.high, std::min(point, max_value), max_value);
  return interval;
}

namespace {

ValueEstimate Finish(const std::vector<double>& terms, const EstimatorConfig& config) {
  ValueEstimate estimate;
  estimate.count = terms.size();
  estimate.tau = config.tau;
  estimate.delta = config.delta;
  estimate.point = PairwiseSum(terms) / static_cast<double>(terms.size());
  const auto interval = ConfidenceInterval(estimate.point, estimate.count, config.tau, config.delta);
  estimate.ci_low = interval.low;
  estimate.ci_high = interval.high;
  return estimate;
}

}  // namespace

ValueEstimate EvaluatePolicy(const Dataset& data, const Policy& policy,
                             const PropensityModel& propensity, const EstimatorConfig& config,
                             std::size_t threads) {
  config.Validate();
  if (data.empty()) throw EstimationError("cannot evaluate a policy on an empty dataset");
  const auto events = data.events();
  std::vector<double> terms(events.size(), 0.0);
  ParallelFor(events.size(), threads == 0 ? DefaultThreadCount() : threads, [&](std::size_t t) {
    const auto& e = events[t];
    if (e.reward() == 0.0) return;
    if (policy.Choose(e.context_id(), e.context_features()) != e.action_id()) return;
    terms[t] = e.reward() * ClippedWeight(propensity.Prob(e.context_id(), e.action_id()), config.tau);
  });
  return Finish(terms, config);
}

ValueEstimate EvaluateRandomBaseline(const Dataset& data, const PropensityModel& propensity,
                                     const EstimatorConfig& config, RandomBaselineMode mode,
                                     std::uint64_t seed) {
  config.Validate();
  if (data.empty()) throw EstimationError("cannot evaluate a policy on an empty dataset");
  const auto events = data.events();
  std::vector<double> terms(events.size(), 0.0);
  for (std::size_t t = 0; t < events.size(); ++t) {
    const auto& e = events[t];
    const auto feasible = propensity.FeasibleSet(e.context_id());
    if (!feasible.contains(e.action_id())) continue;
    const double weight = ClippedWeight(propensity.Prob(e.context_id(), e.action_id()), config.tau);
    if (mode == RandomBaselineMode::kExact) {
      terms[t] = e.reward() * weight / static_cast<double>(feasible.size());
    } else {
      const double u = UnitInterval(SplitMix64(seed ^ SplitMix64(t)));
      auto pick = feasible.begin();
      std::advance(pick, std::min(feasible.size() - 1,
                                  static_cast<std::size_t>(u * static_cast<double>(feasible.size()))));
      if (*pick == e.action_id()) terms[t] = e.reward() * weight;
    }
  }
  return Finish(terms, config);
}

std::string ReportHeader() { return "Method\ttau\tdelta\tT\tEstimate\tInterval\n"; }

std::string ReportRow(std::string_view method, const ValueEstimate& estimate) {
  char numbers[128];
  std::snprintf(numbers, sizeof(numbers), "%.6f\t[%.6f,%.6f]", estimate.point, estimate.ci_low,
                estimate.ci_high);
  std::string row(method);
  row += '\t' + FormatReal(estimate.tau) + '\t' + FormatReal(estimate.delta) + '\t' +
         std::to_string(estimate.count) + '\t' + numbers + '\n';
  return row;
}

}  // namespace logex
