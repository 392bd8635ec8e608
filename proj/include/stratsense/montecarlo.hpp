#pragma once

#include "stratsense/lqg.hpp"
#include "stratsense/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace stratsense {

/// Counter-based standard normal draws. Each value is a pure function of
/// (seed, sample, time, channel, component): the key is folded through the
/// SplitMix64 finalizer, two 53-bit uniforms are taken from the result and
/// mapped by Box-Muller (cosine branch).
namespace noise {

enum class Channel : std::uint64_t { initial_state = 0, process = 1, regular = 2, strategic = 3 };

std::uint64_t mix64(std::uint64_t x);

double standard_normal(std::uint64_t seed, std::uint64_t sample, std::uint64_t time,
                       Channel channel, std::uint64_t component);

}  // namespace noise

struct TrajectorySample {
  std::vector<Eigen::VectorXd> x;     // x_0..x_N
  std::vector<Eigen::VectorXd> xhat;  // x_hat_0..x_hat_N
  std::vector<Eigen::VectorXd> u;     // u_0..u_{N-1}
  std::vector<Eigen::VectorXd> y;     // y_0..y_N, stacked [y_r; y_s]
  std::vector<Eigen::VectorXd> w;     // w_0..w_{N-1}
  std::vector<Eigen::VectorXd> v;     // v_0..v_N
  double cost = 0.0;
};

/// Runs the closed loop with gains designed at the reported effort and noise
/// drawn at the true effort. Holds scratch buffers, so one instance per thread.
class TrajectorySimulator {
 public:
  TrajectorySimulator(const SystemSpec& spec, const EffortMapping& mapping, TrueEffort e,
                      const LqrSolution& lqr, const KalmanSolution& kal);

  TrajectorySample sample(std::uint64_t seed, std::uint64_t sample_index);

  /// Realized J only; no trajectory storage.
  double cost(std::uint64_t seed, std::uint64_t sample_index);

 private:
  template <class Recorder>
  double run(std::uint64_t seed, std::uint64_t sample_index, Recorder&& rec);

  void draw(Eigen::VectorXd& out, const Eigen::MatrixXd& factor, std::uint64_t seed,
            std::uint64_t sample, std::uint64_t time, noise::Channel channel);

  const SystemSpec* spec_;
  const LqrSolution* lqr_;
  const KalmanSolution* kal_;
  Eigen::MatrixXd C_;
  Eigen::MatrixXd x0_factor_;
  Eigen::MatrixXd w_factor_;
  Eigen::MatrixXd vr_factor_;
  double vs_scale_;
  Eigen::VectorXd z_, x_, xhat_, u_, ru_, y_, w_, v_, vr_, pred_, innov_, tmp_;
};

TrajectorySample simulate_trajectory(const SystemSpec& spec, const EffortMapping& mapping,
                                     TrueEffort e, const LqrSolution& lqr,
                                     const KalmanSolution& kal, std::uint64_t seed,
                                     std::uint64_t sample_index);

struct MCReport {
  std::uint64_t sample_count = 0;
  double mean_cost = 0.0;
  double var_cost = 0.0;
  double std_error_mean = 0.0;
  double std_error_var = 0.0;
  std::uint64_t seed = 0;
};

/// Realized costs for sample indices 0..count-1, in index order. The result
/// does not depend on `workers` (0 selects the hardware concurrency).
std::vector<double> sample_costs(const SystemSpec& spec, const EffortMapping& mapping,
                                 TrueEffort e, ReportedEffort reported, std::uint64_t count,
                                 std::uint64_t seed, unsigned workers = 0);

/// Mean, unbiased variance and their standard errors (the variance error uses
/// the fourth central moment). Sums are pairwise over index order.
MCReport summarize(const std::vector<double>& values, std::uint64_t seed);

MCReport mc_moments(const SystemSpec& spec, const EffortMapping& mapping, TrueEffort e,
                    ReportedEffort reported, std::uint64_t sample_count, std::uint64_t seed,
                    unsigned workers = 0);

/// Pairwise (cascade) summation; result depends only on the value order.
double pairwise_sum(const double* data, std::size_t count);

}  // namespace stratsense
