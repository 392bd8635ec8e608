#include "stratsense/lqg.hpp"

#include "stratsense/errors.hpp"
#include "stratsense/linalg.hpp"

namespace stratsense {

LqrSolution solve_lqr(const SystemSpec& spec) {
  const auto N = static_cast<std::size_t>(spec.N);
  LqrSolution sol;
  sol.K.resize(N + 1);
  sol.P.resize(N + 1);
  sol.P[N] = spec.Q;
  sol.K[N] = Eigen::MatrixXd::Zero(spec.m(), spec.n());

  for (std::size_t k = N; k-- > 0;) {
    const Eigen::MatrixXd& next = sol.P[k + 1];
    const Eigen::MatrixXd btp = spec.B.transpose() * next;
    const Eigen::MatrixXd gram = spec.R + btp * spec.B;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) {
      throw InternalError("R + B'PB not positive definite at step " + std::to_string(k));
    }
    sol.K[k] = -llt.solve(btp * spec.A);
    const Eigen::MatrixXd atp = spec.A.transpose() * next;
    sol.P[k] = linalg::symmetrize(spec.Q + atp * spec.A + atp * spec.B * sol.K[k]);
  }
  return sol;
}

KalmanSolution solve_kalman_sigma2(const SystemSpec& spec, double sigma2) {
  const auto N = static_cast<std::size_t>(spec.N);
  const Eigen::MatrixXd C = spec.C();
  const Eigen::MatrixXd meas_cov = spec.measurement_cov(sigma2);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(spec.n(), spec.n());

  KalmanSolution sol;
  sol.reported_sigma2 = sigma2;
  sol.L.reserve(N + 1);
  sol.filtered.reserve(N + 1);
  sol.predicted.reserve(N + 1);

  Eigen::MatrixXd prior = spec.SigmaX0;
  for (std::size_t k = 0; k <= N; ++k) {
    if (k > 0) {
      prior = linalg::symmetrize(spec.A * sol.filtered.back() * spec.A.transpose() +
                                 spec.SigmaW);
    }
    const Eigen::MatrixXd c_prior = C * prior;
    Eigen::LLT<Eigen::MatrixXd> llt(c_prior * C.transpose() + meas_cov);
    if (llt.info() != Eigen::Success) {
      throw InternalError("innovation covariance not positive definite at step " +
                          std::to_string(k));
    }
    // L = prior C' S^{-1}, solved as S L' = C prior.
    Eigen::MatrixXd gain = llt.solve(c_prior).transpose();
    sol.filtered.push_back(linalg::symmetrize((I - gain * C) * prior));
    sol.L.push_back(std::move(gain));
    sol.predicted.push_back(prior);
  }
  return sol;
}

KalmanSolution solve_kalman(const SystemSpec& spec, const EffortMapping& mapping,
                            ReportedEffort reported) {
  KalmanSolution sol = solve_kalman_sigma2(spec, mapping.sigma2(reported.value));
  sol.reported_effort = reported.value;
  return sol;
}

}  // namespace stratsense
