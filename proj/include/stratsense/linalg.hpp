#pragma once

#include <Eigen/Dense>

namespace stratsense::linalg {

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

/// Smallest eigenvalue of the symmetric part of `m`.
double min_eigenvalue(const Eigen::MatrixXd& m);

/// Largest absolute eigenvalue of the symmetric part of `m`.
double spectral_norm_sym(const Eigen::MatrixXd& m);

/// lambda_min(sym(m)) >= -rel_tol * ||m||.
bool is_psd(const Eigen::MatrixXd& m, double rel_tol = 1e-10);

/// Symmetric square root factor F with F F' = sym(m); negative round-off
/// eigenvalues are clamped to zero.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& m);

/// Sum of elementwise products: tr(a' b).
inline double frobenius_inner(const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b) {
  return a.cwiseProduct(b).sum();
}

}  // namespace stratsense::linalg
