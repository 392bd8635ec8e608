#pragma once

#include "stratsense/model.hpp"

#include <Eigen/Dense>

#include <vector>

namespace stratsense {

/// Finite-horizon LQR solution. u_k = K[k] x_hat_k, with the minus sign
/// carried by the gain. K[N] is the zero matrix and P[N] = Q.
struct LqrSolution {
  std::vector<Eigen::MatrixXd> K;
  std::vector<Eigen::MatrixXd> P;
};

/// Kalman filter designed for the reported effort.
///
/// The filter consumes y_0..y_N. `predicted[k]` is the prior covariance
/// Sigma_{k|k-1}, with predicted[0] = SigmaX0 (zero-mean prior at time 0);
/// `filtered[k]` is the posterior Sigma_k and `L[k]` the gain used at time k.
struct KalmanSolution {
  double reported_effort = 0.0;
  double reported_sigma2 = 0.0;
  std::vector<Eigen::MatrixXd> L;
  std::vector<Eigen::MatrixXd> filtered;
  std::vector<Eigen::MatrixXd> predicted;
};

LqrSolution solve_lqr(const SystemSpec& spec);

/// Throws DomainError when the reported effort is outside the mapping domain.
KalmanSolution solve_kalman(const SystemSpec& spec, const EffortMapping& mapping,
                            ReportedEffort reported);

/// Same recursion for an explicit strategic-sensor variance.
KalmanSolution solve_kalman_sigma2(const SystemSpec& spec, double sigma2);

}  // namespace stratsense
