#include "stratsense/properties.hpp"

#include "stratsense/costlab.hpp"
#include "stratsense/linalg.hpp"
#include "stratsense/lqg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace stratsense {

std::vector<double> linear_grid(double lo, double hi, int count) {
  std::vector<double> g;
  if (count == 1) return {lo};
  for (int i = 0; i < count; ++i) g.push_back(lo + (hi - lo) * i / (count - 1));
  return g;
}

std::vector<double> log_grid(double lo, double hi, int count) {
  std::vector<double> g;
  if (count == 1) return {lo};
  for (int i = 0; i < count; ++i) {
    g.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
  }
  return g;
}

PropertyOptions default_property_options() {
  PropertyOptions o;
  o.true_grid = linear_grid(0.2, 5.0, 32);
  o.reported_grid = log_grid(0.1, 10.0, 64);
  o.hessian_grid = log_grid(0.2, 5.0, 8);
  return o;
}

namespace {

class DecompositionCache {
 public:
  DecompositionCache(const SystemSpec& spec, const EffortMapping& mapping)
      : spec_(spec), mapping_(mapping) {}

  const CostProfile& at(double reported) {
    auto it = cache_.find(reported);
    if (it == cache_.end()) {
      it = cache_.emplace(reported, analyze(spec_, mapping_, {reported})).first;
    }
    return it->second;
  }

  double expected_cost(double e, double reported) {
    return at(reported).decomposition.expected_cost(mapping_.sigma2(e));
  }

 private:
  const SystemSpec& spec_;
  const EffortMapping& mapping_;
  std::map<double, CostProfile> cache_;
};

PropertyResult check_prop1(DecompositionCache& cache, const PropertyOptions& o) {
  PropertyResult r{"cost_decreasing_convex_in_e", true, ""};
  std::vector<double> vals;
  for (double e : o.true_grid) vals.push_back(cache.expected_cost(e, o.fixed_reported));
  double worst_second = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
    if (!(vals[i + 1] < vals[i])) r.pass = false;
  }
  for (std::size_t i = 1; i + 1 < vals.size(); ++i) {
    const double h0 = o.true_grid[i] - o.true_grid[i - 1];
    const double h1 = o.true_grid[i + 1] - o.true_grid[i];
    // Divided second difference scaled to the uniform-grid convention.
    const double second = 2.0 * h0 * h1 / (h0 + h1) *
                          ((vals[i + 1] - vals[i]) / h1 - (vals[i] - vals[i - 1]) / h0);
    worst_second = std::min(worst_second, second);
    if (second < -1e-9) r.pass = false;
  }
  std::ostringstream os;
  os << "points=" << vals.size() << " e_hat=" << o.fixed_reported
     << " min_second_difference=" << worst_second;
  r.detail = os.str();
  return r;
}

PropertyResult check_prop2(DecompositionCache& cache, const PropertyOptions& o) {
  PropertyResult r{"cost_not_jointly_convex", false, ""};
  int indefinite = 0, convex = 0, concave = 0;
  for (double e : o.hessian_grid) {
    for (double rep : o.hessian_grid) {
      const double he = 1e-2 * e;
      const double hr = 1e-2 * rep;
      auto E = [&](double a, double b) { return cache.expected_cost(a, b); };
      const double c = E(e, rep);
      const double hee = (E(e + he, rep) - 2 * c + E(e - he, rep)) / (he * he);
      const double hrr = (E(e, rep + hr) - 2 * c + E(e, rep - hr)) / (hr * hr);
      const double her = (E(e + he, rep + hr) - E(e + he, rep - hr) - E(e - he, rep + hr) +
                          E(e - he, rep - hr)) /
                         (4 * he * hr);
      const double det = hee * hrr - her * her;
      if (det < 0) {
        ++indefinite;
      } else if (det > 0) {
        (hee + hrr > 0 ? convex : concave) += 1;
      }
    }
  }
  r.pass = indefinite > 0 || (convex > 0 && concave > 0);
  std::ostringstream os;
  os << "indefinite=" << indefinite << " convex=" << convex << " concave=" << concave;
  r.detail = os.str();
  return r;
}

PropertyResult check_prop3(DecompositionCache& cache, const PropertyOptions& o) {
  PropertyResult r{"jstar_decreasing", true, ""};
  double prev = 0.0;
  for (std::size_t i = 0; i < o.reported_grid.size(); ++i) {
    const double js = cache.at(o.reported_grid[i]).j_star;
    if (i > 0 && !(js < prev)) r.pass = false;
    prev = js;
  }
  std::ostringstream os;
  os.precision(10);
  os << "points=" << o.reported_grid.size() << " first=" << cache.at(o.reported_grid.front()).j_star
     << " last=" << prev;
  r.detail = os.str();
  return r;
}

PropertyResult check_prop3_filter(const SystemSpec& spec, const EffortMapping& mapping,
                                  const PropertyOptions& o) {
  PropertyResult r{"filter_covariance_ordered", true, ""};
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& [lo, hi] : o.ordered_pairs) {
    const KalmanSolution a = solve_kalman(spec, mapping, {lo});
    const KalmanSolution b = solve_kalman(spec, mapping, {hi});
    for (int k : o.filter_steps) {
      const auto idx = static_cast<std::size_t>(std::min(k, spec.N));
      const double lmin = linalg::min_eigenvalue(a.filtered[idx] - b.filtered[idx]);
      worst = std::min(worst, lmin);
      if (lmin < -1e-9) r.pass = false;
    }
  }
  std::ostringstream os;
  os << "pairs=" << o.ordered_pairs.size() << " min_eigenvalue=" << worst;
  r.detail = os.str();
  return r;
}

}  // namespace

std::vector<PropertyResult> run_property_suite(const SystemSpec& spec,
                                               const EffortMapping& mapping,
                                               const PropertyOptions& opts) {
  DecompositionCache cache(spec, mapping);
  return {check_prop1(cache, opts), check_prop2(cache, opts), check_prop3(cache, opts),
          check_prop3_filter(spec, mapping, opts)};
}

}  // namespace stratsense
