#include "stratsense/incentives.hpp"

#include "stratsense/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stratsense {

double QuadraticBj::min_on_window(double half_width) const {
  const double lo = (*this)(anchor - half_width);
  const double hi = (*this)(anchor + half_width);
  double best = std::min(lo, hi);
  if (beta2 > 0.0) {
    const double vertex = -beta1 / beta2;
    if (std::abs(vertex) <= half_width) best = std::min(best, (*this)(anchor + vertex));
  }
  return best;
}

PaymentScheme PaymentScheme::static_p0(double a, double b_j, double b_e) {
  if (a < 0.0 || b_j < 0.0 || b_e < 0.0) {
    throw DomainError("payment constants a, b_J, b_e must be nonnegative");
  }
  PaymentScheme s;
  s.kind = Kind::static_p0;
  s.a = a;
  s.b_j_const = b_j;
  s.b_e = b_e;
  return s;
}

PaymentScheme PaymentScheme::corrected_p(double a, double b_e, QuadraticBj b_j) {
  if (a < 0.0 || b_e < 0.0) throw DomainError("payment constants a, b_e must be nonnegative");
  if (!(b_j.beta0 > 0.0)) throw DomainError("b_J(anchor) must be positive");
  PaymentScheme s;
  s.kind = Kind::corrected_p;
  s.a = a;
  s.b_e = b_e;
  s.b_j = b_j;
  return s;
}

std::string_view PaymentScheme::kind_name() const {
  return kind == Kind::static_p0 ? "p0" : "p";
}

double payment_p0(const PaymentScheme& scheme, double realized_cost, double j_star) {
  const double dev = realized_cost - j_star;
  return scheme.a - scheme.b_j_const * dev * dev - scheme.b_e * realized_cost;
}

double payment_p(const PaymentScheme& scheme, double realized_cost, double j_star, double f2,
                 double sigma2_reported, double reported) {
  if (!(f2 > 0.0)) throw DomainError("f2 must be positive to normalize the payment");
  const double dev = (realized_cost - j_star) / f2;
  return scheme.a - scheme.bj(reported) * dev * dev - scheme.b_e * (dev + sigma2_reported);
}

CostTerms cost_terms(const CostProfile& profile, const EffortMapping& mapping, TrueEffort e) {
  CostTerms t;
  t.f1 = profile.decomposition.f1;
  t.f2 = profile.decomposition.f2;
  t.sigma2_true = mapping.sigma2(e.value);
  t.sigma2_reported = profile.reported_sigma2;
  t.variance = variance_of_cost_sigma2(profile.stacked, t.sigma2_true);
  return t;
}

CostTerms cost_terms(const SystemSpec& spec, const EffortMapping& mapping, TrueEffort e,
                     ReportedEffort reported) {
  return cost_terms(analyze(spec, mapping, reported), mapping, e);
}

double p_star(const PaymentScheme& scheme, const CostTerms& t, double reported) {
  const double gap = t.sigma2_true - t.sigma2_reported;
  return scheme.a - scheme.bj(reported) * gap * gap - scheme.b_e * t.sigma2_true;
}

double expected_payment(const PaymentScheme& scheme, const CostTerms& t, double reported) {
  const double bias = t.expected_cost() - t.j_star();
  if (scheme.kind == PaymentScheme::Kind::static_p0) {
    return scheme.a - scheme.b_j_const * (t.variance + bias * bias) -
           scheme.b_e * t.expected_cost();
  }
  if (!(t.f2 > 0.0)) throw DomainError("f2 must be positive to normalize the payment");
  const double mean_dev = bias / t.f2;
  const double second_moment = t.variance / (t.f2 * t.f2) + mean_dev * mean_dev;
  return scheme.a - scheme.bj(reported) * second_moment -
         scheme.b_e * (mean_dev + t.sigma2_reported);
}

double expected_payment(const SystemSpec& spec, const EffortMapping& mapping,
                        const PaymentScheme& scheme, TrueEffort e, ReportedEffort reported) {
  return expected_payment(scheme, cost_terms(spec, mapping, e, reported), reported.value);
}

double sensor_utility(const SystemSpec& spec, const EffortMapping& mapping,
                      const PaymentScheme& scheme, TrueEffort e, ReportedEffort reported) {
  return expected_payment(spec, mapping, scheme, e, reported) - e.value;
}

// ---------------------------------------------------------------- auditing

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::local_max: return "local_max";
    case Verdict::not_local_max: return "not_local_max";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

double gradient_tolerance(const PaymentScheme& scheme) {
  return 1e-4 * std::abs(scheme.a) + 1e-6;
}

TruthfulnessAudit classify(const PaymentScheme& scheme, double anchor, double h, double lo,
                           double mid, double hi, AuditTarget target) {
  TruthfulnessAudit out;
  out.anchor_e = anchor;
  out.fd_step = h;
  out.target = target;
  out.first_deriv = (hi - lo) / (2.0 * h);
  out.second_deriv = (hi - 2.0 * mid + lo) / (h * h);
  // e is fixed, so the utility E[p] - e has the same e_hat derivative.
  out.utility_first_deriv = out.first_deriv;
  out.tol_grad = gradient_tolerance(scheme);
  out.tol_curv = kCurvatureTolerance;
  if (std::abs(out.first_deriv) <= out.tol_grad && out.second_deriv <= -out.tol_curv) {
    out.verdict = Verdict::local_max;
  } else if (std::abs(out.first_deriv) > out.tol_grad || out.second_deriv >= out.tol_curv) {
    out.verdict = Verdict::not_local_max;
  } else {
    out.verdict = Verdict::inconclusive;
  }
  return out;
}

namespace {

struct Stencil {
  double h;
  double points[3];
  CostTerms terms[3];
};

Stencil evaluate_stencil(const SystemSpec& spec, const EffortMapping& mapping, double anchor,
                         double fd_step) {
  Stencil s;
  s.h = fd_step > 0.0 ? fd_step : default_fd_step(anchor);
  s.points[0] = anchor - s.h;
  s.points[1] = anchor;
  s.points[2] = anchor + s.h;
  if (!mapping.in_domain(s.points[0]) || !mapping.in_domain(s.points[2])) {
    throw DomainError("finite-difference stencil leaves the effort domain");
  }
  for (int i = 0; i < 3; ++i) {
    s.terms[i] = cost_terms(spec, mapping, {anchor}, {s.points[i]});
  }
  return s;
}

double target_value(const PaymentScheme& scheme, const CostTerms& t, double reported,
                    AuditTarget target) {
  return target == AuditTarget::p_star ? p_star(scheme, t, reported)
                                       : expected_payment(scheme, t, reported);
}

TruthfulnessAudit classify_stencil(const PaymentScheme& scheme, const Stencil& s,
                                   AuditTarget target) {
  double v[3];
  for (int i = 0; i < 3; ++i) v[i] = target_value(scheme, s.terms[i], s.points[i], target);
  return classify(scheme, s.points[1], s.h, v[0], v[1], v[2], target);
}

}  // namespace

TruthfulnessAudit audit_truthfulness(const SystemSpec& spec, const EffortMapping& mapping,
                                     const PaymentScheme& scheme, TrueEffort anchor,
                                     double fd_step, AuditTarget target) {
  return classify_stencil(scheme, evaluate_stencil(spec, mapping, anchor.value, fd_step),
                          target);
}

// ---------------------------------------------------------------- design

double first_order_residual(double bj, double bj_slope, double variance,
                            double variance_slope, double f2, double f2_slope) {
  const double t1 = bj_slope * variance / (f2 * f2);
  const double t2 = -2.0 * bj * variance * f2_slope / (f2 * f2 * f2);
  const double t3 = bj * variance_slope / (f2 * f2);
  const double scale = std::max({std::abs(t1), std::abs(t2), std::abs(t3)});
  return scale == 0.0 ? 0.0 : std::abs(t1 + t2 + t3) / scale;
}

BjDesign design_bj(const SystemSpec& spec, const EffortMapping& mapping, TrueEffort anchor,
                   double a, double b_e, double curvature_margin, const DesignOptions& opts) {
  const Stencil s = evaluate_stencil(spec, mapping, anchor.value, opts.fd_step);
  const CostTerms& mid = s.terms[1];

  BjDesign out;
  out.variance = mid.variance;
  out.f2 = mid.f2;
  out.variance_slope = (s.terms[2].variance - s.terms[0].variance) / (2.0 * s.h);
  out.f2_slope = (s.terms[2].f2 - s.terms[0].f2) / (2.0 * s.h);

  const double f2_floor = 1e-14 * std::max(1.0, std::abs(mid.f1));
  const bool f2_vanishes = std::abs(s.terms[0].f2) <= f2_floor &&
                           std::abs(mid.f2) <= f2_floor && std::abs(s.terms[2].f2) <= f2_floor;
  if (!(mid.f2 > f2_floor) && !f2_vanishes) {
    throw DomainError("f2 must be positive at the anchor");
  }
  out.strategic_channel_unused = f2_vanishes;

  QuadraticBj bj{anchor.value, opts.beta0, 0.0, opts.initial_beta2};
  if (!f2_vanishes && mid.variance > 0.0) {
    // beta1 V / f2^2 = 2 beta0 V f2' / f2^3 - beta0 V' / f2^2
    bj.beta1 = bj.beta0 * (2.0 * out.f2_slope / mid.f2 - out.variance_slope / mid.variance);
    out.residual = first_order_residual(bj.beta0, bj.beta1, mid.variance, out.variance_slope,
                                        mid.f2, out.f2_slope);
  }

  const AuditTarget target = f2_vanishes ? AuditTarget::p_star : AuditTarget::expected_payment;
  for (int i = 0;; ++i) {
    out.scheme = PaymentScheme::corrected_p(a, b_e, bj);
    out.curvature = classify_stencil(out.scheme, s, target).second_deriv;
    out.doublings = i;
    if (out.curvature <= -curvature_margin &&
        bj.min_on_window(opts.window_half_width) >= 0.0) {
      return out;
    }
    if (i >= opts.max_doublings) break;
    bj.beta2 *= 2.0;
  }
  std::ostringstream os;
  os.precision(6);
  os << "b_J design did not reach curvature " << -curvature_margin << " after "
     << opts.max_doublings << " doublings (final curvature " << out.curvature << ")";
  throw DesignError(os.str(), out.curvature);
}

BestResponseScan best_response_scan(const SystemSpec& spec, const EffortMapping& mapping,
                                    const PaymentScheme& scheme, TrueEffort e,
                                    const std::vector<double>& reported_grid) {
  BestResponseScan scan;
  scan.rows.reserve(reported_grid.size());
  for (double r : reported_grid) {
    const double pay = expected_payment(spec, mapping, scheme, e, {r});
    scan.rows.push_back({r, pay, pay - e.value});
  }
  for (std::size_t i = 1; i < scan.rows.size(); ++i) {
    if (scan.rows[i].utility > scan.rows[scan.argmax].utility) scan.argmax = i;
  }
  return scan;
}

MCReport mc_payment(const SystemSpec& spec, const EffortMapping& mapping,
                    const PaymentScheme& scheme, TrueEffort e, ReportedEffort reported,
                    std::uint64_t sample_count, std::uint64_t seed, unsigned workers) {
  const CostProfile prof = analyze(spec, mapping, reported);
  std::vector<double> values =
      sample_costs(spec, mapping, e, reported, sample_count, seed, workers);
  for (double& v : values) {
    v = scheme.kind == PaymentScheme::Kind::static_p0
            ? payment_p0(scheme, v, prof.j_star)
            : payment_p(scheme, v, prof.j_star, prof.decomposition.f2, prof.reported_sigma2,
                        reported.value);
  }
  return summarize(values, seed);
}

}  // namespace stratsense
