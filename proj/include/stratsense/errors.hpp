#pragma once

#include <stdexcept>
#include <string>

namespace stratsense {

/// Malformed or invalid configuration. `field()` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// An effort value (or finite-difference stencil) outside the admissible domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical cross-check between two independent routes disagreed.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// b_J design search failed to reach the requested curvature.
class DesignError : public std::runtime_error {
 public:
  DesignError(const std::string& what, double final_curvature)
      : std::runtime_error(what), final_curvature_(final_curvature) {}

  double final_curvature() const noexcept { return final_curvature_; }

 private:
  double final_curvature_;
};

}  // namespace stratsense
