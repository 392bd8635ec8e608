#pragma once

#include "stratsense/model.hpp"

#include <string>
#include <vector>

namespace stratsense {

struct PropertyResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct PropertyOptions {
  std::vector<double> true_grid;      // sweep over e at fixed_reported
  std::vector<double> reported_grid;  // sweep over e_hat
  double fixed_reported = 1.0;
  std::vector<double> hessian_grid;   // both axes of the Hessian search
  std::vector<std::pair<double, double>> ordered_pairs{{0.5, 1.0}, {1.0, 2.0}, {0.2, 5.0}};
  std::vector<int> filter_steps{1, 10, 50};
};

std::vector<double> linear_grid(double lo, double hi, int count);
std::vector<double> log_grid(double lo, double hi, int count);

/// Default sweeps: e in [0.2, 5] (32 linear points), e_hat in [0.1, 10]
/// (64 log points), Hessian search on an 8x8 log grid over [0.2, 5].
PropertyOptions default_property_options();

/// Structural checks on E[J(e, e_hat)]:
///   cost_decreasing_convex_in_e  E[J] strictly decreasing and discretely convex
///                                in e at fixed e_hat;
///   cost_not_jointly_convex      the (e, e_hat) Hessian is indefinite somewhere,
///                                or convex at one grid point and concave at another;
///   jstar_decreasing             J* strictly decreasing over the e_hat grid;
///   filter_covariance_ordered    Sigma_k(e_hat') <= Sigma_k(e_hat) in PSD order
///                                for e_hat < e_hat'.
std::vector<PropertyResult> run_property_suite(const SystemSpec& spec,
                                               const EffortMapping& mapping,
                                               const PropertyOptions& opts);

}  // namespace stratsense
