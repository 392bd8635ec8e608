#pragma once

#include "stratsense/costlab.hpp"
#include "stratsense/model.hpp"
#include "stratsense/montecarlo.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace stratsense {

/// b_J(e_hat) = beta0 + beta1 (e_hat - anchor) + beta2 (e_hat - anchor)^2 / 2.
struct QuadraticBj {
  double anchor = 1.0;
  double beta0 = 1.0;
  double beta1 = 0.0;
  double beta2 = 0.0;

  double operator()(double reported) const {
    const double t = reported - anchor;
    return beta0 + beta1 * t + 0.5 * beta2 * t * t;
  }
  /// Minimum over [anchor - half_width, anchor + half_width].
  double min_on_window(double half_width) const;
};

struct PaymentScheme {
  enum class Kind { static_p0, corrected_p };

  Kind kind = Kind::static_p0;
  double a = 0.0;
  double b_e = 0.0;
  double b_j_const = 0.0;  // static_p0
  QuadraticBj b_j;         // corrected_p

  static PaymentScheme static_p0(double a, double b_j, double b_e);
  static PaymentScheme corrected_p(double a, double b_e, QuadraticBj b_j);

  double bj(double reported) const {
    return kind == Kind::static_p0 ? b_j_const : b_j(reported);
  }
  std::string_view kind_name() const;
};

/// a - b_J (J - J*)^2 - b_e J.
double payment_p0(const PaymentScheme& scheme, double realized_cost, double j_star);

/// a - b_J(e_hat) ((J - J*)/f2)^2 - b_e ((J - J*)/f2 + sigma2(e_hat)).
/// Throws DomainError when f2 <= 0.
double payment_p(const PaymentScheme& scheme, double realized_cost, double j_star, double f2,
                 double sigma2_reported, double reported);

/// Cost quantities at one (e, e_hat) pair that the expected payment needs.
struct CostTerms {
  double f1 = 0.0;
  double f2 = 0.0;
  double variance = 0.0;
  double sigma2_true = 0.0;
  double sigma2_reported = 0.0;

  double expected_cost() const { return f1 + sigma2_true * f2; }
  double j_star() const { return f1 + sigma2_reported * f2; }
};

CostTerms cost_terms(const SystemSpec& spec, const EffortMapping& mapping, TrueEffort e,
                     ReportedEffort reported);
CostTerms cost_terms(const CostProfile& profile, const EffortMapping& mapping, TrueEffort e);

/// p*(e, e_hat) = a - b_J(e_hat) (sigma2(e) - sigma2(e_hat))^2 - b_e sigma2(e).
double p_star(const PaymentScheme& scheme, const CostTerms& t, double reported);

/// Expected payment from the cost terms. For corrected_p the mean and second
/// moment of (J - J*)/f2 are formed from E[J] and J* separately, so f1 enters
/// only through their difference.
double expected_payment(const PaymentScheme& scheme, const CostTerms& t, double reported);

double expected_payment(const SystemSpec& spec, const EffortMapping& mapping,
                        const PaymentScheme& scheme, TrueEffort e, ReportedEffort reported);

/// E[p] - e.
double sensor_utility(const SystemSpec& spec, const EffortMapping& mapping,
                      const PaymentScheme& scheme, TrueEffort e, ReportedEffort reported);

// ---------------------------------------------------------------- auditing

enum class Verdict { local_max, not_local_max, inconclusive };
std::string_view verdict_name(Verdict v);

/// Which function of e_hat the audit differentiates.
enum class AuditTarget {
  expected_payment,  // E[p](e, .)
  p_star,            // p*(e, .) alone
};

struct TruthfulnessAudit {
  double anchor_e = 0.0;
  double first_deriv = 0.0;
  double second_deriv = 0.0;
  double utility_first_deriv = 0.0;
  Verdict verdict = Verdict::inconclusive;
  double fd_step = 0.0;
  double tol_grad = 0.0;
  double tol_curv = 0.0;
  AuditTarget target = AuditTarget::expected_payment;
};

/// Gradient tolerance 1e-4 |a| + 1e-6.
double gradient_tolerance(const PaymentScheme& scheme);
inline constexpr double kCurvatureTolerance = 1e-8;

/// Central differences of e_hat -> target at e_hat = anchor. fd_step <= 0
/// selects default_fd_step(anchor).
TruthfulnessAudit audit_truthfulness(const SystemSpec& spec, const EffortMapping& mapping,
                                     const PaymentScheme& scheme, TrueEffort anchor,
                                     double fd_step = 0.0,
                                     AuditTarget target = AuditTarget::expected_payment);

/// Derivatives from already-evaluated target values at anchor - h, anchor, anchor + h.
TruthfulnessAudit classify(const PaymentScheme& scheme, double anchor, double h, double lo,
                           double mid, double hi, AuditTarget target);

// ---------------------------------------------------------------- design

struct DesignOptions {
  double beta0 = 1.0;
  double initial_beta2 = 1.0;
  double window_half_width = 0.2;  // b_J must stay >= 0 here
  double fd_step = 0.0;            // <= 0: default_fd_step(anchor)
  int max_doublings = 60;
};

struct BjDesign {
  PaymentScheme scheme;
  double variance = 0.0;        // Var[J(e, e)]
  double variance_slope = 0.0;  // dVar/de_hat at e_hat = e
  double f2 = 0.0;
  double f2_slope = 0.0;
  double residual = 0.0;        // first-order condition, relative
  double curvature = 0.0;       // FD d^2 E[p]/de_hat^2 at the anchor
  int doublings = 0;
  bool strategic_channel_unused = false;
};

/// Relative residual of the first-order truthfulness condition
///   b_J' V / f2^2 - 2 b_J V f2' / f2^3 + b_J V' / f2^2 = 0,
/// normalized by the largest of the three terms.
double first_order_residual(double bj, double bj_slope, double variance,
                            double variance_slope, double f2, double f2_slope);

/// Fits b_J around the anchor: beta0 fixed, beta1 solves the first-order
/// condition, beta2 doubles until the curvature is <= -curvature_margin and
/// b_J >= 0 on the window. When f2 vanishes around the anchor (strategic
/// channel unobservable) beta1 = 0 and the curvature is taken on p*.
/// Throws DesignError on non-convergence and DomainError when f2 <= 0 with a
/// nonzero slope.
BjDesign design_bj(const SystemSpec& spec, const EffortMapping& mapping, TrueEffort anchor,
                   double a, double b_e, double curvature_margin, const DesignOptions& opts = {});

struct ScanRow {
  double reported = 0.0;
  double expected_payment = 0.0;
  double utility = 0.0;
};

struct BestResponseScan {
  std::vector<ScanRow> rows;
  std::size_t argmax = 0;
};

BestResponseScan best_response_scan(const SystemSpec& spec, const EffortMapping& mapping,
                                    const PaymentScheme& scheme, TrueEffort e,
                                    const std::vector<double>& reported_grid);

/// Sample payments from simulated trajectories at (e, e_hat).
MCReport mc_payment(const SystemSpec& spec, const EffortMapping& mapping,
                    const PaymentScheme& scheme, TrueEffort e, ReportedEffort reported,
                    std::uint64_t sample_count, std::uint64_t seed, unsigned workers = 0);

}  // namespace stratsense
