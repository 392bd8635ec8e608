#include "oracles.hpp"

#include "stratsense/costlab.hpp"
#include "stratsense/errors.hpp"
#include "stratsense/incentives.hpp"

#include <doctest.h>

#include <cmath>

using namespace stratsense;

namespace {

const EffortMapping& reciprocal() {
  static const EffortMapping m = EffortMapping::reciprocal(1.0);
  return m;
}

SystemSpec strategic_blind(int N) {
  SystemSpec s = oracle::example_spec(N);
  s.Cs.setZero();
  return s;
}

}  // namespace

TEST_CASE("payments: arithmetic on hand-picked values") {
  const PaymentScheme p0 = PaymentScheme::static_p0(10.0, 2.0, 1.0);
  CHECK(payment_p0(p0, 5.0, 3.0) == doctest::Approx(10.0 - 2.0 * 4.0 - 5.0));
  CHECK(p0.kind_name() == "p0");
  CHECK(p0.bj(7.0) == 2.0);

  const PaymentScheme p = PaymentScheme::corrected_p(10.0, 1.0, {1.0, 2.0, 0.0, 0.0});
  // (J - J*)/f2 = 1, sigma2(e_hat) = 0.5.
  CHECK(payment_p(p, 5.0, 3.0, 2.0, 0.5, 1.0) == doctest::Approx(10.0 - 2.0 - 1.5));
  CHECK(p.kind_name() == "p");
  CHECK_THROWS_AS(payment_p(p, 5.0, 3.0, 0.0, 0.5, 1.0), DomainError);
  CHECK_THROWS_AS(PaymentScheme::static_p0(-1.0, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(PaymentScheme::corrected_p(1.0, 1.0, {1.0, 0.0, 0.0, 0.0}), DomainError);
}

TEST_CASE("payments: quadratic b_J and its window minimum") {
  const QuadraticBj b{1.0, 2.0, -1.0, 4.0};
  CHECK(b(1.0) == 2.0);
  CHECK(b(1.5) == doctest::Approx(2.0 - 0.5 + 0.5));
  // vertex at t = 0.25, value 2 - 0.25 + 0.125
  CHECK(b.min_on_window(0.5) == doctest::Approx(1.875));
  CHECK(b.min_on_window(0.1) == doctest::Approx(b(1.1)));
  const QuadraticBj linear{0.0, 1.0, 3.0, 0.0};
  CHECK(linear.min_on_window(0.2) == doctest::Approx(0.4));
}

TEST_CASE("expected payment: corrected scheme equals p* minus the normalized variance") {
  const SystemSpec s = oracle::example_spec(30);
  const PaymentScheme p = PaymentScheme::corrected_p(100.0, 0.5, {1.0, 1.5, 0.3, 2.0});
  for (auto [e, r] : {std::pair{0.5, 0.7}, {1.0, 1.0}, {2.0, 1.2}, {0.9, 1.4}}) {
    const CostTerms t = cost_terms(s, reciprocal(), {e}, {r});
    const double identity = p_star(p, t, r) - p.bj(r) * t.variance / (t.f2 * t.f2);
    CHECK(expected_payment(p, t, r) == doctest::Approx(identity).epsilon(1e-12));
  }
}

TEST_CASE("expected payment: corrected scheme does not depend on f1") {
  const SystemSpec s = oracle::example_spec(20);
  const PaymentScheme p = PaymentScheme::corrected_p(50.0, 1.0, {1.0, 1.0, 0.2, 0.0});
  CostTerms t = cost_terms(s, reciprocal(), {0.8}, {1.1});
  const double base = expected_payment(p, t, 1.1);
  t.f1 += 1e3;
  CHECK(expected_payment(p, t, 1.1) == doctest::Approx(base).epsilon(1e-12));
  // The static scheme does see f1 through b_e E[J].
  const PaymentScheme p0 = PaymentScheme::static_p0(50.0, 1.0, 1.0);
  CHECK(expected_payment(p0, t, 1.1) != doctest::Approx(expected_payment(
                                            p0, cost_terms(s, reciprocal(), {0.8}, {1.1}), 1.1)));
}

TEST_CASE("expected payment: static scheme expands the second moment") {
  const SystemSpec s = oracle::example_spec(10);
  const PaymentScheme p0 = PaymentScheme::static_p0(20.0, 0.5, 2.0);
  const CostTerms t = cost_terms(s, reciprocal(), {0.6}, {1.3});
  const double bias = t.expected_cost() - t.j_star();
  CHECK(expected_payment(p0, t, 1.3) ==
        doctest::Approx(20.0 - 0.5 * (t.variance + bias * bias) - 2.0 * t.expected_cost()));
  CHECK(sensor_utility(s, reciprocal(), p0, {0.6}, {1.3}) ==
        doctest::Approx(expected_payment(p0, t, 1.3) - 0.6));
}

TEST_CASE("expected payment: sampled payments agree with the analytic mean") {
  const SystemSpec s = oracle::example_spec(15);
  const PaymentScheme p = PaymentScheme::corrected_p(100.0, 1.0, {1.0, 1.0, 0.5, 1.0});
  const double e = 0.8, r = 1.2;
  const double exact = expected_payment(s, reciprocal(), p, {e}, {r});
  const MCReport mc = mc_payment(s, reciprocal(), p, {e}, {r}, 30000, 3);
  CHECK(std::abs(mc.mean_cost - exact) <= 4.0 * mc.std_error_mean);
  const PaymentScheme p0 = PaymentScheme::static_p0(1e3, 0.01, 1.0);
  const MCReport mc0 = mc_payment(s, reciprocal(), p0, {e}, {r}, 30000, 3);
  CHECK(std::abs(mc0.mean_cost - expected_payment(s, reciprocal(), p0, {e}, {r})) <=
        4.0 * mc0.std_error_mean);
}

TEST_CASE("audit: classification rules") {
  const PaymentScheme p0 = PaymentScheme::static_p0(1000.0, 1.0, 1.0);
  const double h = 1e-2;
  // Concave parabola peaked at the anchor.
  auto f = [](double x) { return -(x - 1.0) * (x - 1.0); };
  auto au = classify(p0, 1.0, h, f(1 - h), f(1), f(1 + h), AuditTarget::expected_payment);
  CHECK(au.verdict == Verdict::local_max);
  CHECK(au.second_deriv == doctest::Approx(-2.0));
  CHECK(au.tol_grad == doctest::Approx(0.100001));
  // Steep slope.
  au = classify(p0, 1.0, h, 0.0, 1.0, 2.0, AuditTarget::expected_payment);
  CHECK(au.verdict == Verdict::not_local_max);
  // Flat.
  au = classify(p0, 1.0, h, 1.0, 1.0, 1.0, AuditTarget::expected_payment);
  CHECK(au.verdict == Verdict::inconclusive);
  // Convex minimum.
  au = classify(p0, 1.0, h, -f(1 - h), -f(1), -f(1 + h), AuditTarget::expected_payment);
  CHECK(au.verdict == Verdict::not_local_max);
  CHECK(verdict_name(Verdict::local_max) == "local_max");
}

TEST_CASE("audit: static payment rewards misreporting on the reference example") {
  const SystemSpec s = oracle::example_spec(50);
  const PaymentScheme p0 = PaymentScheme::static_p0(1e3, 1.0, 1.0);
  const TruthfulnessAudit au = audit_truthfulness(s, reciprocal(), p0, {1.0});
  CHECK(au.verdict == Verdict::not_local_max);
  CHECK(std::abs(au.first_deriv) > 10.0 * au.tol_grad);
}

TEST_CASE("design: first-order residual helper") {
  // b' V / f2^2 = 2 b V f2' / f2^3 - b V' / f2^2 holds for these numbers.
  const double b = 1.0, V = 4.0, Vs = -2.0, f2 = 2.0, f2s = 0.5;
  const double bs = b * (2 * f2s / f2 - Vs / V);
  CHECK(first_order_residual(b, bs, V, Vs, f2, f2s) <= 1e-15);
  CHECK(first_order_residual(b, bs + 0.1, V, Vs, f2, f2s) > 1e-3);
}

TEST_CASE("design: designed b_J makes truthful reporting a local maximum") {
  const SystemSpec s = oracle::example_spec(50);
  const BjDesign d = design_bj(s, reciprocal(), {1.0}, 1e3, 1.0, 1e-3);
  CHECK_FALSE(d.strategic_channel_unused);
  CHECK(d.residual <= 1e-6);
  CHECK(d.curvature <= -1e-3);
  CHECK(d.scheme.b_j.min_on_window(0.2) >= 0.0);
  // The slope condition, checked against an independent difference of variances.
  const double h = default_fd_step(1.0);
  const double Vp = oracle::quad_form(s, 1.0 / (1.0 + h)).variance(1.0);
  const double Vm = oracle::quad_form(s, 1.0 / (1.0 - h)).variance(1.0);
  CHECK(d.variance_slope == doctest::Approx((Vp - Vm) / (2 * h)).epsilon(1e-6));
  const TruthfulnessAudit au = audit_truthfulness(s, reciprocal(), d.scheme, {1.0});
  CHECK(au.verdict == Verdict::local_max);
}

TEST_CASE("design: failure to reach the curvature margin raises DesignError") {
  const SystemSpec s = oracle::example_spec(10);
  DesignOptions opts;
  opts.max_doublings = 2;
  CHECK_THROWS_AS(design_bj(s, reciprocal(), {1.0}, 1e3, 1.0, 1e12, opts), DesignError);
}

TEST_CASE("blind strategic sensor: p* alone is maximized at the truthful report") {
  const SystemSpec s = strategic_blind(20);
  const PaymentScheme p = PaymentScheme::corrected_p(1e3, 1.0, {1.0, 1.0, 0.0, 0.0});
  for (double e : {0.5, 1.0, 2.0}) {
    const CostTerms t = cost_terms(s, reciprocal(), {e}, {e});
    CHECK(t.f2 == 0.0);
    const TruthfulnessAudit au =
        audit_truthfulness(s, reciprocal(), p, {e}, 0.0, AuditTarget::p_star);
    CHECK(std::abs(au.first_deriv) <= 1e-6 * 1e3);
    CHECK(au.second_deriv < 0.0);
  }
  const BjDesign d = design_bj(s, reciprocal(), {1.0}, 1e3, 1.0, 1e-3);
  CHECK(d.strategic_channel_unused);
  CHECK(d.scheme.b_j.beta1 == 0.0);
  CHECK_THROWS_AS(expected_payment(s, reciprocal(), p, {1.0}, {1.0}), DomainError);
}

TEST_CASE("best-response scan: picks the truthful point for the designed scheme") {
  const SystemSpec s = oracle::example_spec(30);
  const BjDesign d = design_bj(s, reciprocal(), {1.0}, 1e3, 1.0, 1e-3);
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(0.9 + 0.02 * i);
  const BestResponseScan scan = best_response_scan(s, reciprocal(), d.scheme, {1.0}, grid);
  CHECK(scan.rows.size() == grid.size());
  CHECK(scan.rows[scan.argmax].reported == doctest::Approx(1.0));
}
