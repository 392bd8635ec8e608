#pragma once

#include "stratsense/lqg.hpp"
#include "stratsense/model.hpp"

#include <Eigen/Dense>

#include <vector>

namespace stratsense {

/// Augmented closed loop x_bar_k = [x_k; x_hat_k] under gains designed at the
/// reported effort:
///
///   x_bar_{k+1} = Abar[k] x_bar_k + Bbar[k] [w_k; v_{k+1}],
///   x_bar_0     = initial_map [x_0; v_0],
///   J           = sum_k x_bar_k' Qbar[k] x_bar_k.
///
/// The primitive-noise covariance is affine in the true variance:
/// Cov([w; v]) = SigmaVbar1 + sigma2(e) SigmaVbar2, and likewise
/// Cov(x_bar_0) = initial_cov1 + sigma2(e) initial_cov2.
struct ClosedLoopModel {
  double reported_effort = 0.0;
  double reported_sigma2 = 0.0;
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  std::vector<Eigen::MatrixXd> Abar;  // k = 0..N-1, 2n x 2n
  std::vector<Eigen::MatrixXd> Bbar;  // k = 0..N-1, 2n x (n+p)
  std::vector<Eigen::MatrixXd> Qbar;  // k = 0..N,   2n x 2n
  Eigen::MatrixXd initial_map;        // 2n x (n+p): [[I, 0], [L_0 C, L_0]]
  Eigen::MatrixXd SigmaVbar1;         // diag(SigmaW, SigmaVr, 0)
  Eigen::MatrixXd SigmaVbar2;         // diag(0, 0, I_{p_s})
  Eigen::MatrixXd initial_cov1;
  Eigen::MatrixXd initial_cov2;

  int horizon() const { return static_cast<int>(Qbar.size()) - 1; }
};

ClosedLoopModel build_closed_loop(const SystemSpec& spec, const LqrSolution& lqr,
                                  const KalmanSolution& kal);

/// Block-diagonal covariance stored block by block.
struct BlockDiagonal {
  std::vector<Eigen::Index> offsets;
  std::vector<Eigen::MatrixXd> blocks;
  Eigen::Index dim = 0;

  Eigen::MatrixXd dense() const;
  /// this + scale * other; both must share the block layout.
  BlockDiagonal plus_scaled(const BlockDiagonal& other, double scale) const;
};

/// The whole horizon written as one quadratic form in the stacked primitive
/// noise z = (x_0, w_0..w_{N-1}, v_0..v_N): x_bar_k = selection[k] z and
/// J = z' Mquad z, with Cov(z) = SigmaZ1 + sigma2(e) SigmaZ2.
struct StackedForm {
  double reported_effort = 0.0;
  Eigen::Index dim = 0;
  std::vector<Eigen::MatrixXd> selection;
  BlockDiagonal SigmaZ1;
  BlockDiagonal SigmaZ2;
  Eigen::MatrixXd Mquad;
};

/// Mquad is accumulated by a backward sweep over time blocks rather than by
/// summing selection[k]' Qbar[k] selection[k] directly.
StackedForm build_stacked_form(const ClosedLoopModel& cl);

struct CostDecomposition {
  double f1 = 0.0;
  double f2 = 0.0;

  double expected_cost(double sigma2_true) const { return f1 + sigma2_true * f2; }
};

/// f_i = tr(Mquad SigmaZi).
CostDecomposition decompose_cost(const StackedForm& sf);

/// Same decomposition from the stage-wise covariance recursion of the closed
/// loop, without the stacked form.
CostDecomposition decompose_cost_recursive(const ClosedLoopModel& cl);

/// E[J(e, e_hat)] = f1(e_hat) + sigma2(e) f2(e_hat).
double expected_cost(const StackedForm& sf, const EffortMapping& mapping, TrueEffort e);

/// 2 tr(Mquad Sz Mquad Sz) with Sz = SigmaZ1 + sigma2 SigmaZ2.
double variance_of_cost(const StackedForm& sf, const EffortMapping& mapping, TrueEffort e);
double variance_of_cost_sigma2(const StackedForm& sf, double sigma2_true);

/// Variance through the cross-covariances Cov(x_bar_j, x_bar_k) propagated in
/// time; never materializes Mquad. O(N^2) small products.
double variance_of_cost_streamed(const ClosedLoopModel& cl, double sigma2_true);

/// Truthful-reporting cost from the Riccati and filter covariances:
/// sum_k tr(Q Sigma_k) + sum_k tr(P_k (Sigma_{k|k-1} - Sigma_k)).
double j_star_trace_formula(const SystemSpec& spec, const LqrSolution& lqr,
                            const KalmanSolution& kal);

/// Everything the cost analysis needs at one reported effort.
struct CostProfile {
  double reported_effort = 0.0;
  double reported_sigma2 = 0.0;
  LqrSolution lqr;
  KalmanSolution kal;
  ClosedLoopModel closed_loop;
  StackedForm stacked;
  CostDecomposition decomposition;
  double j_star = 0.0;
};

/// Builds the profile and cross-checks J* between the decomposition and the
/// trace formula (relative 1e-8); throws InternalError on disagreement.
CostProfile analyze(const SystemSpec& spec, const EffortMapping& mapping,
                    ReportedEffort reported);

struct CostMoments {
  double expected_cost = 0.0;
  double variance = 0.0;
  double f1 = 0.0;
  double f2 = 0.0;
  double j_star = 0.0;
};

CostMoments cost_moments(const CostProfile& profile, const EffortMapping& mapping,
                         TrueEffort e);

/// J*(e_hat), returned from the decomposition after the trace-formula check.
double j_star(const SystemSpec& spec, const EffortMapping& mapping, ReportedEffort reported);

/// Default central-difference step: 1e-4 * max(1, e_hat).
double default_fd_step(double reported);

/// Central difference of Var[J(e, .)] at e_hat, rebuilding the closed loop at
/// e_hat +/- step. step <= 0 selects default_fd_step.
double var_cost_partial_ehat(const SystemSpec& spec, const EffortMapping& mapping,
                             TrueEffort e, ReportedEffort reported, double step = 0.0);

}  // namespace stratsense
