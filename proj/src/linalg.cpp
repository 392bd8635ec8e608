#include "stratsense/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace stratsense::linalg {

namespace {

Eigen::VectorXd sym_eigenvalues(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return Eigen::VectorXd();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace

double min_eigenvalue(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd ev = sym_eigenvalues(m);
  return ev.size() == 0 ? 0.0 : ev.minCoeff();
}

double spectral_norm_sym(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd ev = sym_eigenvalues(m);
  return ev.size() == 0 ? 0.0 : ev.cwiseAbs().maxCoeff();
}

bool is_psd(const Eigen::MatrixXd& m, double rel_tol) {
  const Eigen::VectorXd ev = sym_eigenvalues(m);
  if (ev.size() == 0) return true;
  const double norm = ev.cwiseAbs().maxCoeff();
  return ev.minCoeff() >= -rel_tol * norm;
}

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return Eigen::MatrixXd(m.rows(), m.cols());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m));
  const Eigen::VectorXd root =
      es.eigenvalues().unaryExpr([](double l) { return std::sqrt(std::max(l, 0.0)); });
  return es.eigenvectors() * root.asDiagonal();
}

}  // namespace stratsense::linalg
