#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace stratsense {

/// Effort the strategic sensor actually exerts. Sets the realized noise.
struct TrueEffort {
  double value;
};

/// Effort the strategic sensor reports. Sets the observer gains.
struct ReportedEffort {
  double value;
};

/// Linear time-invariant plant, noise model, horizon and cost weights.
///
/// x_{k+1} = A x_k + B u_k + w_k,  y_k = [Cr; Cs] x_k + v_k,
/// J = sum_{k<N} (x'Qx + u'Ru) + x_N' Q x_N.
struct SystemSpec {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd Cr;
  Eigen::MatrixXd Cs;
  Eigen::MatrixXd SigmaX0;
  Eigen::MatrixXd SigmaW;
  Eigen::MatrixXd SigmaVr;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  int N = 0;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index p_r() const { return Cr.rows(); }
  Eigen::Index p_s() const { return Cs.rows(); }
  Eigen::Index p() const { return Cr.rows() + Cs.rows(); }

  /// Stacked output matrix [Cr; Cs].
  Eigen::MatrixXd C() const;

  /// diag(SigmaVr, sigma2 * I_{p_s}).
  Eigen::MatrixXd measurement_cov(double sigma2) const;
};

/// Checks shapes, symmetry and definiteness, then symmetrizes the covariance
/// and weight matrices in place. Throws ConfigError naming the field.
void validate(SystemSpec& spec);

/// The common-knowledge map from effort to strategic-sensor variance.
///
/// Must be strictly decreasing, convex and C^2 on its domain; the
/// constructors verify the shape on a grid.
class EffortMapping {
 public:
  enum class Kind { reciprocal, exponential_decay, custom_table };

  /// sigma2(e) = scale / e on (e_min, inf).
  static EffortMapping reciprocal(double scale = 1.0, double e_min = 1e-6);

  /// sigma2(e) = offset + scale * exp(-rate * e) on (e_min, inf).
  static EffortMapping exponential_decay(double scale, double rate,
                                         double offset = 0.0,
                                         double e_min = 0.0);

  /// Cubic Hermite interpolation through (effort[i], sigma2[i]) using
  /// central-difference node slopes; domain is [effort.front(), effort.back()].
  static EffortMapping custom_table(std::vector<double> effort,
                                    std::vector<double> sigma2);

  Kind kind() const { return kind_; }
  std::string_view kind_name() const;

  bool in_domain(double e) const;
  double domain_lower() const { return lower_; }
  double domain_upper() const { return upper_; }

  /// sigma^2(e). Throws DomainError outside the domain.
  double sigma2(double e) const;

  /// (d sigma^2/de, d^2 sigma^2/de^2). Throws DomainError outside the domain.
  std::pair<double, double> derivs(double e) const;

 private:
  EffortMapping() = default;
  void check_shape() const;
  void require_domain(double e) const;
  double table_value(double e) const;
  std::pair<double, double> table_derivs(double e) const;

  Kind kind_ = Kind::reciprocal;
  double scale_ = 1.0;
  double rate_ = 0.0;
  double offset_ = 0.0;
  double lower_ = 0.0;
  double upper_ = 0.0;
  bool lower_open_ = true;
  std::vector<double> table_e_;
  std::vector<double> table_s2_;
  std::vector<double> table_d1_;
  std::vector<double> table_d2_;
  std::vector<double> table_slope_;  // Hermite node slopes
};

inline double sigma2(const EffortMapping& mapping, double e) {
  return mapping.sigma2(e);
}

inline std::pair<double, double> sigma2_derivs(const EffortMapping& mapping,
                                               double e) {
  return mapping.derivs(e);
}

struct LoadedConfig {
  SystemSpec spec;
  EffortMapping mapping;
};

/// Parses the JSON config schema (keys A, B, Cr, Cs, SigmaX0, SigmaW, SigmaVr,
/// Q, R, N, effort_mapping{kind, params}) and validates it.
LoadedConfig parse_config(std::string_view json_text);

/// Reads `path` and forwards to parse_config. I/O failures raise ConfigError
/// with field "path".
LoadedConfig load_config(const std::filesystem::path& path);

}  // namespace stratsense
