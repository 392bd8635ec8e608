// Reference implementations used only by the tests. They follow the textbook
// forms directly (explicit inverses, Joseph-form covariance update, forward
// propagation of the filter equations as linear maps of the noise), so they
// share no code with the library beyond the SystemSpec container.
#pragma once

#include "stratsense/model.hpp"

#include <Eigen/Dense>

#include <random>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;

inline stratsense::SystemSpec example_spec(int N) {
  stratsense::SystemSpec s;
  s.A = (MatrixXd(2, 2) << 0.7, 0.0, 0.7, 0.7).finished();
  s.B = (MatrixXd(2, 1) << 1.0, 0.0).finished();
  s.Cr = (MatrixXd(1, 2) << 1.0, 0.0).finished();
  s.Cs = (MatrixXd(1, 2) << 0.0, 1.0).finished();
  s.SigmaX0 = MatrixXd::Identity(2, 2);
  s.SigmaW = MatrixXd::Identity(2, 2);
  s.SigmaVr = MatrixXd::Identity(1, 1);
  s.Q = MatrixXd::Identity(2, 2);
  s.R = MatrixXd::Identity(1, 1);
  s.N = N;
  stratsense::validate(s);
  return s;
}

/// Scalar plant with a single (strategic) sensor and every coefficient 1.
inline stratsense::SystemSpec scalar_spec(int N) {
  stratsense::SystemSpec s;
  s.A = MatrixXd::Ones(1, 1);
  s.B = MatrixXd::Ones(1, 1);
  s.Cr = MatrixXd(0, 1);
  s.Cs = MatrixXd::Ones(1, 1);
  s.SigmaX0 = MatrixXd::Ones(1, 1);
  s.SigmaW = MatrixXd::Ones(1, 1);
  s.SigmaVr = MatrixXd(0, 0);
  s.Q = MatrixXd::Ones(1, 1);
  s.R = MatrixXd::Ones(1, 1);
  s.N = N;
  stratsense::validate(s);
  return s;
}

inline MatrixXd random_psd(std::mt19937_64& rng, Eigen::Index n, double ridge) {
  std::normal_distribution<double> g;
  MatrixXd F(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) F(i, j) = g(rng);
  return F * F.transpose() / static_cast<double>(n) + ridge * MatrixXd::Identity(n, n);
}

inline MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c,
                              double scale) {
  std::normal_distribution<double> g(0.0, scale);
  MatrixXd M(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) M(i, j) = g(rng);
  return M;
}

inline stratsense::SystemSpec random_spec(std::mt19937_64& rng, int n, int m, int pr, int ps,
                                          int N) {
  stratsense::SystemSpec s;
  s.A = random_matrix(rng, n, n, 0.5);
  s.B = random_matrix(rng, n, m, 1.0);
  s.Cr = random_matrix(rng, pr, n, 1.0);
  s.Cs = random_matrix(rng, ps, n, 1.0);
  s.SigmaX0 = random_psd(rng, n, 0.1);
  s.SigmaW = random_psd(rng, n, 0.1);
  s.SigmaVr = random_psd(rng, pr, 0.5);
  s.Q = random_psd(rng, n, 0.5);
  s.R = random_psd(rng, m, 0.5);
  s.N = N;
  if (pr == 0) s.Cr.resize(0, n);
  stratsense::validate(s);
  return s;
}

struct Gains {
  std::vector<MatrixXd> K;  // u = K x_hat
  std::vector<MatrixXd> P;
  std::vector<MatrixXd> L;
  std::vector<MatrixXd> Sigma;      // posterior
  std::vector<MatrixXd> SigmaPred;  // prior, [0] = SigmaX0
};

inline MatrixXd C_of(const stratsense::SystemSpec& s) {
  MatrixXd C(s.Cr.rows() + s.Cs.rows(), s.A.cols());
  C << s.Cr, s.Cs;
  return C;
}

inline MatrixXd V_of(const stratsense::SystemSpec& s, double sigma2) {
  const auto pr = s.Cr.rows(), ps = s.Cs.rows();
  MatrixXd V = MatrixXd::Zero(pr + ps, pr + ps);
  if (pr > 0) V.topLeftCorner(pr, pr) = s.SigmaVr;
  V.bottomRightCorner(ps, ps) = sigma2 * MatrixXd::Identity(ps, ps);
  return V;
}

inline Gains gains(const stratsense::SystemSpec& s, double sigma2_reported) {
  const int N = s.N;
  const auto n = s.A.rows();
  Gains g;
  g.K.assign(N + 1, MatrixXd::Zero(s.B.cols(), n));
  g.P.assign(N + 1, s.Q);
  for (int k = N - 1; k >= 0; --k) {
    const MatrixXd& P1 = g.P[k + 1];
    g.K[k] = -(s.R + s.B.transpose() * P1 * s.B).inverse() * s.B.transpose() * P1 * s.A;
    const MatrixXd Acl = s.A + s.B * g.K[k];
    g.P[k] = s.Q + g.K[k].transpose() * s.R * g.K[k] + Acl.transpose() * P1 * Acl;
  }
  const MatrixXd C = C_of(s);
  const MatrixXd V = V_of(s, sigma2_reported);
  const MatrixXd I = MatrixXd::Identity(n, n);
  MatrixXd pred = s.SigmaX0;
  for (int k = 0; k <= N; ++k) {
    g.SigmaPred.push_back(pred);
    const MatrixXd L = pred * C.transpose() * (C * pred * C.transpose() + V).inverse();
    const MatrixXd post = (I - L * C) * pred * (I - L * C).transpose() + L * V * L.transpose();
    g.L.push_back(L);
    g.Sigma.push_back(post);
    pred = s.A * post * s.A.transpose() + s.SigmaW;
  }
  return g;
}

/// J = z' M z with z = (x_0, w_0..w_{N-1}, v_0..v_N), Cov(z) = S1 + sigma2(e) S2.
struct QuadForm {
  MatrixXd M;
  MatrixXd S1;
  MatrixXd S2;

  double mean(double sigma2) const { return (M * (S1 + sigma2 * S2)).trace(); }
  double variance(double sigma2) const {
    const MatrixXd MS = M * (S1 + sigma2 * S2);
    return 2.0 * (MS * MS).trace();
  }
};

/// Propagates x_k and x_hat_k as explicit linear maps of z through the plant
/// and the predict/update filter, then sums the stage costs.
inline QuadForm quad_form(const stratsense::SystemSpec& s, double sigma2_reported) {
  const Gains g = gains(s, sigma2_reported);
  const int N = s.N;
  const auto n = s.A.rows();
  const auto p = s.Cr.rows() + s.Cs.rows();
  const auto d = n + N * n + (N + 1) * p;
  auto w_col = [&](int k) { return n + k * n; };
  auto v_col = [&](int k) { return n + N * n + k * p; };
  const MatrixXd C = C_of(s);

  QuadForm q;
  q.M = MatrixXd::Zero(d, d);
  q.S1 = MatrixXd::Zero(d, d);
  q.S2 = MatrixXd::Zero(d, d);
  q.S1.topLeftCorner(n, n) = s.SigmaX0;
  for (int k = 0; k < N; ++k) q.S1.block(w_col(k), w_col(k), n, n) = s.SigmaW;
  const MatrixXd V1 = V_of(s, 0.0);
  const MatrixXd V2 = V_of(s, 1.0) - V1;
  for (int k = 0; k <= N; ++k) {
    q.S1.block(v_col(k), v_col(k), p, p) = V1;
    q.S2.block(v_col(k), v_col(k), p, p) = V2;
  }

  MatrixXd X = MatrixXd::Zero(n, d);  // x_k = X z
  X.leftCols(n).setIdentity();
  MatrixXd Xpred = MatrixXd::Zero(n, d);  // x_hat_{k|k-1}
  for (int k = 0; k <= N; ++k) {
    MatrixXd Y = C * X;
    Y.middleCols(v_col(k), p) += MatrixXd::Identity(p, p);
    const MatrixXd Xhat = Xpred + g.L[k] * (Y - C * Xpred);
    const MatrixXd U = g.K[k] * Xhat;
    q.M += X.transpose() * s.Q * X;
    if (k == N) break;
    q.M += U.transpose() * s.R * U;
    MatrixXd Xn = s.A * X + s.B * U;
    Xn.middleCols(w_col(k), n) += MatrixXd::Identity(n, n);
    X = Xn;
    Xpred = s.A * Xhat + s.B * U;
  }
  q.M = 0.5 * (q.M + q.M.transpose());
  return q;
}

}  // namespace oracle
