#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>

#include "logex/errors.hpp"
#include "logex/estimator.hpp"
#include "test_support.hpp"

using namespace logex;
using logex::testing::Ev;
using logex::testing::Gen;

namespace {

// Propensities given explicitly per (context, action).
class FixedPropensity final : public PropensityModel {
 public:
  explicit FixedPropensity(std::map<std::pair<std::string, std::string>, double> probs)
      : probs_(std::move(probs)) {}
  double Prob(const std::string& x, const std::string& a) const override {
    const auto it = probs_.find({x, a});
    return it == probs_.end() ? 0.0 : it->second;
  }
  std::set<std::string> FeasibleSet(const std::string& x) const override {
    std::set<std::string> out;
    for (const auto& [key, p] : probs_) {
      if (key.first == x && p > 0.0) out.insert(key.second);
    }
    return out;
  }

 private:
  std::map<std::pair<std::string, std::string>, double> probs_;
};

FunctionPolicy Always(std::string action) {
  return FunctionPolicy([action](const std::string&, const SparseVector&) { return action; });
}

// Policy choosing, per context, an action drawn once from the generator.
FunctionPolicy RandomTable(Gen& gen, std::size_t contexts, std::size_t actions) {
  std::map<std::string, std::string> table;
  for (std::size_t x = 0; x < contexts; ++x) {
    table["x" + std::to_string(x)] = "a" + std::to_string(gen.Index(actions));
  }
  return FunctionPolicy([table](const std::string& x, const SparseVector&) { return table.at(x); });
}

}  // namespace

TEST_CASE("clipped weight") {
  CHECK(ClippedWeight(0.5, 0.05) == 2.0);
  CHECK(ClippedWeight(0.0, 0.05) == 20.0);
  CHECK(ClippedWeight(0.05, 0.05) == 20.0);
  CHECK(ClippedWeight(1.0, 1.0) == 1.0);
  CHECK_THROWS_AS(ClippedWeight(0.5, 0.0), ConfigError);
  CHECK_THROWS_AS(ClippedWeight(0.5, -1.0), ConfigError);
}

TEST_CASE("bernoulli relative entropy") {
  CHECK(BernoulliKl(0.3, 0.3) == 0.0);
  CHECK(BernoulliKl(0.0, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(std::isinf(BernoulliKl(0.5, 0.0)));
  CHECK(std::isinf(BernoulliKl(0.5, 1.0)));
  CHECK(BernoulliKl(1.0, 1.0) == 0.0);
  CHECK(BernoulliKl(0.0, 0.0) == 0.0);
}

TEST_CASE("policy value estimates") {
  const EstimatorConfig config{0.05, 0.05};
  const FixedPropensity certain({{{"x", "a"}, 1.0}});
  const auto one = EvaluatePolicy(Dataset({Ev("x", "a", 1.0)}), Always("a"), certain, config);
  CHECK(one.point == 1.0);
  CHECK(one.count == 1);

  const auto never = EvaluatePolicy(Dataset({Ev("x", "a", 1.0), Ev("x", "a", 0.7)}), Always("b"), certain, config);
  CHECK(never.point == 0.0);

  const FixedPropensity halves({{{"x", "a"}, 0.5}, {{"y", "a"}, 0.25}});
  const auto two = EvaluatePolicy(Dataset({Ev("x", "a", 1.0), Ev("y", "a", 0.0)}), Always("a"), halves,
                                  EstimatorConfig{0.1, 0.05});
  CHECK(two.point == 1.0);

  CHECK_THROWS_AS(EvaluatePolicy(Dataset{}, Always("a"), certain, config), EstimationError);
  CHECK_THROWS_AS(EvaluatePolicy(Dataset({Ev("x", "a", 1.0)}), Always("a"), certain, EstimatorConfig{0.0, 0.05}),
                  ConfigError);
}

TEST_CASE("confidence interval against high-precision reference") {
  struct Case {
    double point;
    std::size_t count;
    double tau;
    double delta;
    double low;
    double high;
  };
  // Reference ends from 50-digit bisection of the same relative-entropy set.
  const Case cases[] = {
      {0.5, 100, 1.0, 0.05, 0.36665670577022099, 0.63334329422977901},
      {3.0, 50, 0.2, 0.1, 2.1378640030357263, 3.7850794498984097},
      {10.0, 1000, 0.05, 0.05, 9.1426430118143443, 10.857356988185656},
      {0.02, 20000, 0.05, 0.05, 0.010179666612068809, 0.034708522816706475},
      {0.0, 1000, 1.0, 0.05, 0.0, 0.003682083896865672},
      {0.0, 100, 0.1, 0.05, 0.0, 0.36216692645176416},
  };
  for (const auto& c : cases) {
    CAPTURE(c.point);
    CAPTURE(c.count);
    const auto interval = ConfidenceInterval(c.point, c.count, c.tau, c.delta);
    const double tolerance = 2.0 * kKlBisectionTolerance / c.tau;
    CHECK(std::abs(interval.low - c.low) <= tolerance);
    CHECK(std::abs(interval.high - c.high) <= tolerance);
  }
}

TEST_CASE("confidence interval boundaries and errors") {
  const auto zero = ConfidenceInterval(0.0, 1000, 1.0, 0.05);
  CHECK(zero.low == 0.0);
  CHECK(std::abs(zero.high - (1.0 - std::pow(0.025, 1.0 / 1000.0))) <= 1e-9);

  const auto top = ConfidenceInterval(20.0, 10, 0.05, 0.05);
  CHECK(top.high == 20.0);
  CHECK(top.low < 20.0);

  CHECK_THROWS_AS(ConfidenceInterval(-0.1, 10, 0.5, 0.05), DomainError);
  CHECK_THROWS_AS(ConfidenceInterval(2.5, 10, 0.5, 0.05), DomainError);
  CHECK_THROWS_AS(ConfidenceInterval(0.5, 0, 0.5, 0.05), ConfigError);
  CHECK_THROWS_AS(ConfidenceInterval(0.5, 10, 0.5, 1.0), ConfigError);
}

TEST_CASE("random baseline") {
  const EstimatorConfig config{0.1, 0.05};
  const FixedPropensity two_way({{{"x", "a"}, 0.5}, {{"x", "b"}, 0.5}});
  CHECK(EvaluateRandomBaseline(Dataset({Ev("x", "a", 1.0)}), two_way, config).point == 1.0);

  // |C(x)| = 1: same as evaluating the logging action itself.
  Gen gen(31);
  std::vector<LoggedEvent> events;
  for (int i = 0; i < 50; ++i) events.push_back(Ev(i % 2 ? "x" : "y", i % 2 ? "a" : "b", gen.Uniform(0, 1)));
  const Dataset data(events);
  const FixedPropensity single({{{"x", "a"}, 1.0}, {{"y", "b"}, 1.0}});
  const FunctionPolicy logging([](const std::string& x, const SparseVector&) {
    return std::string(x == "x" ? "a" : "b");
  });
  const auto random = EvaluateRandomBaseline(data, single, config);
  const auto direct = EvaluatePolicy(data, logging, single, config);
  CHECK(random.point == direct.point);
  CHECK(random.ci_low == direct.ci_low);
  CHECK(random.ci_high == direct.ci_high);

  CHECK(EvaluateRandomBaseline(Dataset({Ev("x", "a", 0.0), Ev("x", "b", 0.0)}), two_way, config).point == 0.0);
  // Logged action outside C(x) contributes nothing.
  CHECK(EvaluateRandomBaseline(Dataset({Ev("x", "c", 1.0)}), two_way, config).point == 0.0);
}

TEST_CASE("sampled random baseline is keyed by seed") {
  Gen gen(32);
  const auto data = gen.Events(400, 3, 3);
  std::map<std::pair<std::string, std::string>, double> probs;
  for (int x = 0; x < 3; ++x) {
    for (int a = 0; a < 3; ++a) probs[{"x" + std::to_string(x), "a" + std::to_string(a)}] = 1.0 / 3.0;
  }
  const FixedPropensity uniform(probs);
  const EstimatorConfig config{0.05, 0.05};
  const auto first = EvaluateRandomBaseline(data, uniform, config, RandomBaselineMode::kSampled, 9);
  const auto again = EvaluateRandomBaseline(data, uniform, config, RandomBaselineMode::kSampled, 9);
  CHECK(first.point == again.point);
  double mean = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    mean += EvaluateRandomBaseline(data, uniform, config, RandomBaselineMode::kSampled, seed).point / 200.0;
  }
  const auto exact = EvaluateRandomBaseline(data, uniform, config);
  CHECK(std::abs(mean - exact.point) < 0.05 * exact.point + 0.01);
}

TEST_CASE("report rows") {
  ValueEstimate e;
  e.point = 0.0193;
  e.ci_low = 0.0187;
  e.ci_high = 0.0206;
  e.count = 19000000;
  e.tau = 0.01;
  e.delta = 0.05;
  CHECK(ReportHeader() == "Method\ttau\tdelta\tT\tEstimate\tInterval\n");
  CHECK(ReportRow("Learned", e) == "Learned\t0.01\t0.05\t19000000\t0.019300\t[0.018700,0.020600]\n");
}

TEST_CASE("property: estimator ranges, monotonicity and duplication") {
  Gen gen(33);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t contexts = 1 + gen.Index(4);
    const std::size_t actions = 1 + gen.Index(4);
    const auto data = gen.Events(1 + gen.Index(60), contexts, actions);
    std::map<std::pair<std::string, std::string>, double> probs;
    for (std::size_t x = 0; x < contexts; ++x) {
      for (std::size_t a = 0; a < actions; ++a) {
        probs[{"x" + std::to_string(x), "a" + std::to_string(a)}] = gen.Coin() ? gen.Uniform(0, 0.2) : gen.Uniform(0, 1);
      }
    }
    const FixedPropensity propensity(probs);
    const auto policy = RandomTable(gen, contexts, actions);
    const double tau_small = gen.Uniform(0.01, 1.0);
    const double tau_large = gen.Uniform(tau_small, 1.0);
    const auto small = EvaluatePolicy(data, policy, propensity, {tau_small, 0.05});
    const auto large = EvaluatePolicy(data, policy, propensity, {tau_large, 0.05});

    CHECK(small.point >= 0.0);
    CHECK(small.point <= 1.0 / tau_small);
    CHECK(small.point >= large.point);
    CHECK(small.ci_low <= small.point);
    CHECK(small.point <= small.ci_high);
    CHECK(small.ci_high <= 1.0 / tau_small);

    // tau = 1: plain average of r * I(h(x) = a).
    double plain = 0.0;
    for (const auto& e : data.events()) {
      if (policy.Choose(e.context_id(), e.context_features()) == e.action_id()) plain += e.reward();
    }
    plain /= static_cast<double>(data.size());
    CHECK(std::abs(EvaluatePolicy(data, policy, propensity, {1.0, 0.05}).point - plain) <= 1e-12);

    std::vector<LoggedEvent> doubled(data.events().begin(), data.events().end());
    doubled.insert(doubled.end(), data.events().begin(), data.events().end());
    const auto twice = EvaluatePolicy(Dataset(doubled), policy, propensity, {tau_small, 0.05});
    CHECK(std::abs(twice.point - small.point) <= 1e-12 * (1.0 + small.point));
    CHECK(twice.ci_high - twice.ci_low <= small.ci_high - small.ci_low + 1e-12);
  }
}

TEST_CASE("property: estimate does not depend on the thread count") {
  Gen gen(34);
  const auto data = gen.Events(5000, 5, 4);
  std::map<std::pair<std::string, std::string>, double> probs;
  for (int x = 0; x < 5; ++x) {
    for (int a = 0; a < 4; ++a) probs[{"x" + std::to_string(x), "a" + std::to_string(a)}] = gen.Uniform(0, 1);
  }
  const FixedPropensity propensity(probs);
  const auto policy = RandomTable(gen, 5, 4);
  const auto reference = EvaluatePolicy(data, policy, propensity, {0.05, 0.05}, 1);
  for (std::size_t threads : {2, 3, 8}) {
    const auto other = EvaluatePolicy(data, policy, propensity, {0.05, 0.05}, threads);
    CHECK(other.point == reference.point);
    CHECK(other.ci_low == reference.ci_low);
    CHECK(other.ci_high == reference.ci_high);
  }
}
