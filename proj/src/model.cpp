#include "stratsense/model.hpp"

#include "stratsense/errors.hpp"
#include "stratsense/linalg.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace stratsense {

using nlohmann::json;

Eigen::MatrixXd SystemSpec::C() const {
  Eigen::MatrixXd c(p(), n());
  c << Cr, Cs;
  return c;
}

Eigen::MatrixXd SystemSpec::measurement_cov(double sigma2) const {
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p(), p());
  cov.topLeftCorner(p_r(), p_r()) = SigmaVr;
  cov.bottomRightCorner(p_s(), p_s()).diagonal().setConstant(sigma2);
  return cov;
}

namespace {

void require_shape(const Eigen::MatrixXd& m, Eigen::Index rows,
                   Eigen::Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ConfigError(name, std::string("dimension mismatch: ") + name);
  }
}

// Symmetry check relative to the largest entry; symmetrizes on success.
void require_symmetric(Eigen::MatrixXd& m, const char* name) {
  if (m.size() == 0) return;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw ConfigError(name, std::string(name) + " not symmetric");
  }
  m = linalg::symmetrize(m);
}

void require_psd(Eigen::MatrixXd& m, const char* name) {
  require_symmetric(m, name);
  if (!linalg::is_psd(m, 1e-10)) {
    throw ConfigError(name, std::string(name) + " not positive semidefinite");
  }
}

void require_pd(Eigen::MatrixXd& m, const char* name) {
  require_symmetric(m, name);
  if (m.size() == 0) return;
  const double lmin = linalg::min_eigenvalue(m);
  const double norm = linalg::spectral_norm_sym(m);
  if (!(lmin > 1e-12 * norm) || norm == 0.0) {
    throw ConfigError(name, std::string(name) + " not positive definite");
  }
}

}  // namespace

void validate(SystemSpec& spec) {
  const Eigen::Index n = spec.A.rows();
  if (n < 1 || spec.A.cols() != n) throw ConfigError("A", "dimension mismatch: A");
  if (spec.B.rows() != n || spec.B.cols() < 1) throw ConfigError("B", "dimension mismatch: B");
  if (spec.Cr.rows() == 0 && spec.Cr.cols() == 0) spec.Cr.resize(0, n);
  require_shape(spec.Cr, spec.Cr.rows(), n, "Cr");
  if (spec.Cs.rows() < 1 || spec.Cs.cols() != n) throw ConfigError("Cs", "dimension mismatch: Cs");
  require_shape(spec.SigmaX0, n, n, "SigmaX0");
  require_shape(spec.SigmaW, n, n, "SigmaW");
  require_shape(spec.SigmaVr, spec.p_r(), spec.p_r(), "SigmaVr");
  require_shape(spec.Q, n, n, "Q");
  require_shape(spec.R, spec.m(), spec.m(), "R");
  if (spec.N < 0) throw ConfigError("N", "N must be nonnegative");

  require_psd(spec.SigmaX0, "SigmaX0");
  require_psd(spec.SigmaW, "SigmaW");
  require_pd(spec.SigmaVr, "SigmaVr");
  require_pd(spec.Q, "Q");
  require_pd(spec.R, "R");
}

// ---------------------------------------------------------------- mapping

EffortMapping EffortMapping::reciprocal(double scale, double e_min) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw ConfigError("effort_mapping", "reciprocal scale must be positive");
  }
  if (!(e_min >= 0.0)) throw ConfigError("effort_mapping", "e_min must be nonnegative");
  EffortMapping m;
  m.kind_ = Kind::reciprocal;
  m.scale_ = scale;
  m.lower_ = std::max(e_min, 0.0);
  m.upper_ = std::numeric_limits<double>::infinity();
  m.check_shape();
  return m;
}

EffortMapping EffortMapping::exponential_decay(double scale, double rate,
                                               double offset, double e_min) {
  if (!(scale > 0.0) || !(rate > 0.0) || !(offset >= 0.0)) {
    throw ConfigError("effort_mapping",
                      "exponential-decay needs scale > 0, rate > 0, offset >= 0");
  }
  EffortMapping m;
  m.kind_ = Kind::exponential_decay;
  m.scale_ = scale;
  m.rate_ = rate;
  m.offset_ = offset;
  m.lower_ = std::max(e_min, 0.0);
  m.upper_ = std::numeric_limits<double>::infinity();
  m.check_shape();
  return m;
}

namespace {

// Node slopes for the cubic Hermite interpolant of a table. A cubic piece with
// secant s and end slopes m0, m1 is convex iff a/2 <= b <= 2a, where
// a = s - m0 and b = m1 - s. Slopes are chosen as close as possible to the
// difference estimates `fd` subject to that on every piece: a backward pass
// finds the admissible range of a on each piece, a forward pass picks b.
std::vector<double> convex_hermite_slopes(const std::vector<double>& x,
                                          const std::vector<double>& y,
                                          const std::vector<double>& fd) {
  const std::size_t k = x.size();
  const std::size_t pieces = k - 1;
  std::vector<double> sec(pieces);
  for (std::size_t i = 0; i < pieces; ++i) sec[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);

  // One-sided quadratic estimates at the ends; the stored derivative table
  // keeps its two-point ends.
  auto end_slope = [&](std::size_t a, std::size_t b, std::size_t c, double at) {
    const double d01 = (y[b] - y[a]) / (x[b] - x[a]);
    const double d12 = (y[c] - y[b]) / (x[c] - x[b]);
    const double d012 = (d12 - d01) / (x[c] - x[a]);
    return d01 + d012 * ((at - x[a]) + (at - x[b]));
  };
  std::vector<double> target = fd;
  target.front() = end_slope(0, 1, 2, x[0]);
  target.back() = end_slope(k - 3, k - 2, k - 1, x[k - 1]);

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> lo(pieces, 0.0), hi(pieces, inf);
  hi.back() = std::max(0.0, -2.0 * sec.back());  // last slope must stay <= 0
  for (std::size_t i = pieces - 1; i-- > 0;) {
    const double gap = sec[i + 1] - sec[i];
    lo[i] = std::max(0.0, 0.5 * (gap - hi[i + 1]));
    hi[i] = 2.0 * (gap - lo[i + 1]);
  }

  std::vector<double> m(k);
  double a = std::clamp(sec[0] - target[0], lo[0], std::max(lo[0], hi[0]));
  m[0] = sec[0] - a;
  for (std::size_t i = 0; i < pieces; ++i) {
    double b_lo = 0.5 * a, b_hi = 2.0 * a;
    if (i + 1 < pieces) {
      const double gap = sec[i + 1] - sec[i];
      b_lo = std::max(b_lo, gap - hi[i + 1]);
      b_hi = std::min(b_hi, gap - lo[i + 1]);
    } else {
      b_hi = std::min(b_hi, -sec[i]);
    }
    const double b = std::clamp(target[i + 1] - sec[i], b_lo, std::max(b_lo, b_hi));
    m[i + 1] = sec[i] + b;
    if (i + 1 < pieces) a = sec[i + 1] - m[i + 1];
  }
  return m;
}

}  // namespace

EffortMapping EffortMapping::custom_table(std::vector<double> effort,
                                          std::vector<double> sigma2) {
  if (effort.size() != sigma2.size() || effort.size() < 3) {
    throw ConfigError("effort_mapping",
                      "custom-table needs matching effort/sigma2 arrays of length >= 3");
  }
  for (std::size_t i = 1; i < effort.size(); ++i) {
    if (!(effort[i] > effort[i - 1])) {
      throw ConfigError("effort_mapping", "custom-table effort grid must be increasing");
    }
  }
  EffortMapping m;
  m.kind_ = Kind::custom_table;
  m.lower_ = effort.front();
  m.upper_ = effort.back();
  m.lower_open_ = false;

  const std::size_t k = effort.size();
  m.table_d1_.resize(k);
  m.table_d2_.resize(k);
  for (std::size_t i = 1; i + 1 < k; ++i) {
    const double h0 = effort[i] - effort[i - 1];
    const double h1 = effort[i + 1] - effort[i];
    m.table_d1_[i] = (h0 * h0 * sigma2[i + 1] - h1 * h1 * sigma2[i - 1] +
                      (h1 * h1 - h0 * h0) * sigma2[i]) /
                     (h0 * h1 * (h0 + h1));
    m.table_d2_[i] = 2.0 *
                     ((sigma2[i + 1] - sigma2[i]) / h1 - (sigma2[i] - sigma2[i - 1]) / h0) /
                     (h0 + h1);
  }
  m.table_d1_.front() = (sigma2[1] - sigma2[0]) / (effort[1] - effort[0]);
  m.table_d1_.back() = (sigma2[k - 1] - sigma2[k - 2]) / (effort[k - 1] - effort[k - 2]);
  m.table_d2_.front() = m.table_d2_[1];
  m.table_d2_.back() = m.table_d2_[k - 2];
  m.table_slope_ = convex_hermite_slopes(effort, sigma2, m.table_d1_);
  m.table_e_ = std::move(effort);
  m.table_s2_ = std::move(sigma2);
  m.check_shape();
  return m;
}

std::string_view EffortMapping::kind_name() const {
  switch (kind_) {
    case Kind::reciprocal: return "reciprocal";
    case Kind::exponential_decay: return "exponential-decay";
    case Kind::custom_table: return "custom-table";
  }
  return "unknown";
}

bool EffortMapping::in_domain(double e) const {
  if (!std::isfinite(e)) return false;
  const bool above = lower_open_ ? e > lower_ : e >= lower_;
  return above && e <= upper_;
}

void EffortMapping::require_domain(double e) const {
  if (!in_domain(e)) {
    std::ostringstream os;
    os << "effort " << e << " outside the domain of the " << kind_name() << " map";
    throw DomainError(os.str());
  }
}

double EffortMapping::sigma2(double e) const {
  require_domain(e);
  switch (kind_) {
    case Kind::reciprocal: return scale_ / e;
    case Kind::exponential_decay: return offset_ + scale_ * std::exp(-rate_ * e);
    case Kind::custom_table: return table_value(e);
  }
  return 0.0;
}

std::pair<double, double> EffortMapping::derivs(double e) const {
  require_domain(e);
  switch (kind_) {
    case Kind::reciprocal: return {-scale_ / (e * e), 2.0 * scale_ / (e * e * e)};
    case Kind::exponential_decay: {
      const double t = scale_ * std::exp(-rate_ * e);
      return {-rate_ * t, rate_ * rate_ * t};
    }
    case Kind::custom_table: return table_derivs(e);
  }
  return {0.0, 0.0};
}

namespace {

std::size_t interval_of(const std::vector<double>& grid, double e) {
  auto it = std::upper_bound(grid.begin(), grid.end(), e);
  std::size_t i = static_cast<std::size_t>(it - grid.begin());
  return std::clamp<std::size_t>(i, 1, grid.size() - 1) - 1;
}

}  // namespace

double EffortMapping::table_value(double e) const {
  const std::size_t i = interval_of(table_e_, e);
  const double h = table_e_[i + 1] - table_e_[i];
  const double t = (e - table_e_[i]) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * table_s2_[i] + (t3 - 2 * t2 + t) * h * table_slope_[i] +
         (-2 * t3 + 3 * t2) * table_s2_[i + 1] + (t3 - t2) * h * table_slope_[i + 1];
}

std::pair<double, double> EffortMapping::table_derivs(double e) const {
  const std::size_t i = interval_of(table_e_, e);
  const double t = (e - table_e_[i]) / (table_e_[i + 1] - table_e_[i]);
  return {(1 - t) * table_d1_[i] + t * table_d1_[i + 1],
          (1 - t) * table_d2_[i] + t * table_d2_[i + 1]};
}

// Load-time shape check: positive, strictly decreasing and discretely convex
// on a grid spanning the domain.
void EffortMapping::check_shape() const {
  std::vector<double> grid;
  if (kind_ == Kind::custom_table) {
    for (std::size_t i = 0; i + 1 < table_e_.size(); ++i) {
      for (int j = 0; j < 8; ++j) {
        grid.push_back(table_e_[i] + (table_e_[i + 1] - table_e_[i]) * j / 8.0);
      }
    }
    grid.push_back(table_e_.back());
  } else if (kind_ == Kind::exponential_decay) {
    constexpr int kPoints = 257;
    const double lo = lower_ + 1e-3 / rate_;
    const double span = 20.0 / rate_;
    for (int i = 0; i < kPoints; ++i) grid.push_back(lo + span * i / (kPoints - 1));
  } else {
    const double lo = std::max(2.0 * lower_, 1e-3);
    const double hi = std::max(lo * 1e4, 1e3);
    constexpr int kPoints = 257;
    for (int i = 0; i < kPoints; ++i) {
      grid.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (kPoints - 1)));
    }
  }

  std::vector<double> values;
  values.reserve(grid.size());
  for (double e : grid) {
    const double s = sigma2(e);
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw ConfigError("effort_mapping", "sigma2 not positive on its domain");
    }
    values.push_back(s);
  }
  std::vector<double> slopes;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    if (!(values[i + 1] < values[i])) {
      throw ConfigError("effort_mapping", "sigma2 not strictly decreasing");
    }
    slopes.push_back((values[i + 1] - values[i]) / (grid[i + 1] - grid[i]));
  }
  for (std::size_t i = 0; i + 1 < slopes.size(); ++i) {
    if (slopes[i + 1] - slopes[i] < -1e-9 * std::max(1.0, std::abs(slopes[i]))) {
      throw ConfigError("effort_mapping", "sigma2 not convex");
    }
  }
}

// ---------------------------------------------------------------- loading

namespace {

const json& require_key(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(key, std::string("missing key: ") + key);
  return *it;
}

Eigen::MatrixXd parse_matrix(const json& j, const char* name) {
  if (!j.is_array()) throw ConfigError(name, std::string(name) + " must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  if (!j[0].is_array()) throw ConfigError(name, std::string(name) + " must be an array of rows");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError(name, std::string("dimension mismatch: ") + name + " (ragged rows)");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw ConfigError(name, std::string(name) + " entries must be numbers");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

double param_or(const json& params, const char* key, double fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  if (!it->is_number()) throw ConfigError("effort_mapping", std::string("param ") + key + " must be a number");
  return it->get<double>();
}

std::vector<double> param_array(const json& params, const char* key) {
  auto it = params.find(key);
  if (it == params.end() || !it->is_array()) {
    throw ConfigError("effort_mapping", std::string("custom-table needs array param ") + key);
  }
  std::vector<double> out;
  for (const json& v : *it) {
    if (!v.is_number()) throw ConfigError("effort_mapping", std::string(key) + " entries must be numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

EffortMapping parse_mapping(const json& j) {
  if (!j.is_object()) throw ConfigError("effort_mapping", "effort_mapping must be an object");
  const json& kind_j = require_key(j, "kind");
  if (!kind_j.is_string()) throw ConfigError("effort_mapping", "effort_mapping.kind must be a string");
  const std::string kind = kind_j.get<std::string>();
  const json params = j.value("params", json::object());
  if (kind == "reciprocal") {
    return EffortMapping::reciprocal(param_or(params, "scale", 1.0),
                                     param_or(params, "e_min", 1e-6));
  }
  if (kind == "exponential-decay") {
    return EffortMapping::exponential_decay(
        param_or(params, "scale", 1.0), param_or(params, "rate", 1.0),
        param_or(params, "offset", 0.0), param_or(params, "e_min", 0.0));
  }
  if (kind == "custom-table") {
    return EffortMapping::custom_table(param_array(params, "effort"),
                                       param_array(params, "sigma2"));
  }
  throw ConfigError("effort_mapping", "unknown effort_mapping.kind: " + kind);
}

}  // namespace

LoadedConfig parse_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("json", std::string("parse failure: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("json", "parse failure: top level must be an object");

  SystemSpec spec;
  spec.A = parse_matrix(require_key(j, "A"), "A");
  spec.B = parse_matrix(require_key(j, "B"), "B");
  spec.Cr = parse_matrix(require_key(j, "Cr"), "Cr");
  spec.Cs = parse_matrix(require_key(j, "Cs"), "Cs");
  spec.SigmaX0 = parse_matrix(require_key(j, "SigmaX0"), "SigmaX0");
  spec.SigmaW = parse_matrix(require_key(j, "SigmaW"), "SigmaW");
  spec.SigmaVr = parse_matrix(require_key(j, "SigmaVr"), "SigmaVr");
  spec.Q = parse_matrix(require_key(j, "Q"), "Q");
  spec.R = parse_matrix(require_key(j, "R"), "R");
  const json& horizon = require_key(j, "N");
  if (!horizon.is_number_integer()) throw ConfigError("N", "N must be an integer");
  spec.N = horizon.get<int>();
  validate(spec);

  return LoadedConfig{std::move(spec), parse_mapping(require_key(j, "effort_mapping"))};
}

LoadedConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("path", "cannot open config: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace stratsense
