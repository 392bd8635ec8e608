#include "oracles.hpp"

#include "stratsense/errors.hpp"
#include "stratsense/model.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <string>

using namespace stratsense;

namespace {

std::string config_with(const std::string& key, const std::string& value) {
  std::string base = R"({
    "A": [[0.7, 0.0], [0.7, 0.7]], "B": [[1.0], [0.0]],
    "Cr": [[1.0, 0.0]], "Cs": [[0.0, 1.0]],
    "SigmaX0": [[1, 0], [0, 1]], "SigmaW": [[1, 0], [0, 1]], "SigmaVr": [[1]],
    "Q": [[1, 0], [0, 1]], "R": [[1]], "N": 300,
    "effort_mapping": {"kind": "reciprocal", "params": {"scale": 1.0}}
  })";
  if (key.empty()) return base;
  const auto at = base.find("\"" + key + "\"");
  REQUIRE(at != std::string::npos);
  const auto colon = base.find(':', at);
  int depth = 0;
  std::size_t end = colon + 1;
  for (; end < base.size(); ++end) {
    const char ch = base[end];
    if (ch == '[' || ch == '{') ++depth;
    if (ch == ']' || ch == '}') {
      if (depth == 0) break;
      --depth;
    }
    if (ch == ',' && depth == 0) break;
  }
  return base.substr(0, colon + 1) + " " + value + base.substr(end);
}

}  // namespace

TEST_CASE("config: the reference example parses and validates") {
  const LoadedConfig cfg = parse_config(config_with("", ""));
  CHECK(cfg.spec.n() == 2);
  CHECK(cfg.spec.p() == 2);
  CHECK(cfg.spec.N == 300);
  CHECK(cfg.mapping.kind_name() == "reciprocal");
  CHECK(cfg.spec.C().row(1).isApprox(cfg.spec.Cs));
  const Eigen::MatrixXd V = cfg.spec.measurement_cov(0.25);
  CHECK(V(0, 0) == 1.0);
  CHECK(V(1, 1) == 0.25);
  CHECK(V(0, 1) == 0.0);
}

TEST_CASE("config: error paths name the field") {
  CHECK_THROWS_WITH_AS(parse_config(config_with("Q", "[[0, 0], [0, 0]]")),
                       "Q not positive definite", ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(config_with("Cr", "[[1, 0, 0]]")),
                       "dimension mismatch: Cr", ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(config_with("SigmaW", "[[1, 0.5], [0, 1]]")),
                       "SigmaW not symmetric", ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(config_with("SigmaX0", "[[1, 0], [0, -1]]")),
                       "SigmaX0 not positive semidefinite", ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(config_with("N", "-1")), "N must be nonnegative",
                       ConfigError);
  CHECK_THROWS_AS(parse_config("{ not json"), ConfigError);
  CHECK_THROWS_AS(parse_config(config_with("effort_mapping", R"({"kind": "linear"})")),
                  ConfigError);
  try {
    parse_config(R"({"B": [[1]]})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).rfind("missing key: ", 0) == 0);
  }
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("config: an empty regular sensor is allowed") {
  const LoadedConfig cfg = parse_config(R"({
    "A": [[0.7, 0.0], [0.7, 0.7]], "B": [[1.0], [0.0]], "Cr": [], "Cs": [[0.0, 1.0]],
    "SigmaX0": [[1, 0], [0, 1]], "SigmaW": [[1, 0], [0, 1]], "SigmaVr": [],
    "Q": [[1, 0], [0, 1]], "R": [[1]], "N": 3,
    "effort_mapping": {"kind": "reciprocal", "params": {"scale": 1.0}}
  })");
  CHECK(cfg.spec.p_r() == 0);
  CHECK(cfg.spec.Cr.cols() == 2);
  CHECK(cfg.spec.p() == 1);
}

TEST_CASE("mapping: reciprocal values, derivatives and domain") {
  const EffortMapping m = EffortMapping::reciprocal(2.0, 1e-6);
  CHECK(m.sigma2(4.0) == doctest::Approx(0.5));
  const auto [d1, d2] = m.derivs(2.0);
  CHECK(d1 == doctest::Approx(-0.5));
  CHECK(d2 == doctest::Approx(0.5));
  CHECK_FALSE(m.in_domain(0.0));
  CHECK_FALSE(m.in_domain(1e-6));
  CHECK(m.in_domain(1e-5));
  CHECK_THROWS_AS(m.sigma2(-1.0), DomainError);
  CHECK_THROWS_AS(EffortMapping::reciprocal(0.0), ConfigError);
}

TEST_CASE("mapping: exponential decay") {
  const EffortMapping m = EffortMapping::exponential_decay(3.0, 0.5, 0.1);
  CHECK(m.sigma2(2.0) == doctest::Approx(0.1 + 3.0 * std::exp(-1.0)));
  const auto [d1, d2] = m.derivs(2.0);
  CHECK(d1 == doctest::Approx(-1.5 * std::exp(-1.0)));
  CHECK(d2 == doctest::Approx(0.75 * std::exp(-1.0)));
  CHECK(m.kind_name() == "exponential-decay");
}

TEST_CASE("mapping: custom table interpolates its nodes and rejects bad shapes") {
  const std::vector<double> e{0.5, 1.0, 2.0, 4.0};
  const std::vector<double> s{2.0, 1.0, 0.5, 0.25};
  const EffortMapping m = EffortMapping::custom_table(e, s);
  for (std::size_t i = 0; i < e.size(); ++i) CHECK(m.sigma2(e[i]) == doctest::Approx(s[i]));
  CHECK(m.sigma2(1.5) < 1.0);
  CHECK(m.sigma2(1.5) > 0.5);
  CHECK_THROWS_AS(m.sigma2(5.0), DomainError);
  CHECK_THROWS_AS(EffortMapping::custom_table(e, {2.0, 1.0, 1.5, 0.25}), ConfigError);
  CHECK_THROWS_AS(EffortMapping::custom_table({1.0, 0.5, 2.0}, {2.0, 1.0, 0.5}), ConfigError);
}

TEST_CASE("mapping: each kind is strictly decreasing and convex at random points") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.3, 3.5);
  const EffortMapping maps[] = {
      EffortMapping::reciprocal(1.0),
      EffortMapping::exponential_decay(1.0, 1.3, 0.05),
      EffortMapping::custom_table({0.2, 0.5, 1.0, 2.0, 4.0}, {5.0, 2.0, 1.0, 0.5, 0.25}),
  };
  for (const auto& m : maps) {
    for (int t = 0; t < 200; ++t) {
      double a = u(rng), b = u(rng);
      if (a > b) std::swap(a, b);
      if (b - a < 1e-3) continue;
      const double mid = 0.5 * (a + b);
      CHECK(m.sigma2(a) > m.sigma2(b));
      CHECK(m.sigma2(mid) <= 0.5 * (m.sigma2(a) + m.sigma2(b)) + 1e-12);
    }
  }
}

TEST_CASE("spec: validation symmetrizes and accepts the oracle example") {
  SystemSpec s = oracle::example_spec(5);
  s.Q(0, 1) = 1e-14;
  validate(s);
  CHECK(s.Q(0, 1) == s.Q(1, 0));
}

TEST_CASE("mapping: tables sampled from convex decreasing curves are accepted") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 40; ++t) {
    const int k = 3 + t % 6;
    std::vector<double> e{0.1 + u(rng)};
    for (int i = 1; i < k; ++i) e.push_back(e.back() + 0.05 + 2.0 * u(rng));
    const double power = 0.5 + 2.0 * u(rng), rate = 0.2 + u(rng);
    std::vector<double> s2;
    for (double x : e) s2.push_back(t % 2 ? std::pow(x, -power) : std::exp(-rate * x) + 0.01);
    INFO("trial " << t);
    REQUIRE_NOTHROW(EffortMapping::custom_table(e, s2));
    const EffortMapping m = EffortMapping::custom_table(e, s2);
    for (int j = 0; j < 50; ++j) {
      const double a = e.front() + (e.back() - e.front()) * u(rng);
      const double b = e.front() + (e.back() - e.front()) * u(rng);
      CHECK(m.sigma2(0.5 * (a + b)) <= 0.5 * (m.sigma2(a) + m.sigma2(b)) + 1e-12);
    }
  }
}
