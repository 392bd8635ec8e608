#include "stratsense/montecarlo.hpp"

#include "stratsense/errors.hpp"
#include "stratsense/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

namespace stratsense {

namespace noise {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double standard_normal(std::uint64_t seed, std::uint64_t sample, std::uint64_t time,
                       Channel channel, std::uint64_t component) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ sample);
  h = mix64(h ^ time);
  h = mix64(h ^ static_cast<std::uint64_t>(channel));
  h = mix64(h ^ component);
  const std::uint64_t a = mix64(h);
  const std::uint64_t b = mix64(h ^ 0xd1b54a32d192ed03ULL);
  constexpr double kUnit = 0x1.0p-53;
  const double u1 = static_cast<double>((a >> 11) + 1) * kUnit;  // (0, 1]
  const double u2 = static_cast<double>(b >> 11) * kUnit;        // [0, 1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace noise

TrajectorySimulator::TrajectorySimulator(const SystemSpec& spec, const EffortMapping& mapping,
                                         TrueEffort e, const LqrSolution& lqr,
                                         const KalmanSolution& kal)
    : spec_(&spec),
      lqr_(&lqr),
      kal_(&kal),
      C_(spec.C()),
      x0_factor_(linalg::psd_factor(spec.SigmaX0)),
      w_factor_(linalg::psd_factor(spec.SigmaW)),
      vr_factor_(linalg::psd_factor(spec.SigmaVr)),
      vs_scale_(std::sqrt(mapping.sigma2(e.value))) {
  if (lqr.K.size() != static_cast<std::size_t>(spec.N) + 1 ||
      kal.L.size() != static_cast<std::size_t>(spec.N) + 1) {
    throw InternalError("LQR/Kalman solutions do not match the horizon");
  }
  const auto n = spec.n();
  const auto p = spec.p();
  z_.resize(std::max(n, p));
  x_.resize(n);
  xhat_.resize(n);
  u_.resize(spec.m());
  ru_.resize(spec.m());
  vr_.resize(spec.p_r());
  y_.resize(p);
  w_.resize(n);
  v_.resize(p);
  pred_.resize(n);
  innov_.resize(p);
  tmp_.resize(n);
}

void TrajectorySimulator::draw(Eigen::VectorXd& out, const Eigen::MatrixXd& factor,
                               std::uint64_t seed, std::uint64_t sample, std::uint64_t time,
                               noise::Channel channel) {
  const auto dim = factor.cols();
  for (Eigen::Index i = 0; i < dim; ++i) {
    z_[i] = noise::standard_normal(seed, sample, time, channel, static_cast<std::uint64_t>(i));
  }
  out.noalias() = factor * z_.head(dim);
}

template <class Recorder>
double TrajectorySimulator::run(std::uint64_t seed, std::uint64_t idx, Recorder&& rec) {
  const SystemSpec& s = *spec_;
  const auto N = static_cast<std::size_t>(s.N);
  const auto pr = s.p_r();
  const auto ps = s.p_s();

  auto draw_measurement_noise = [&](std::uint64_t k) {
    if (pr > 0) {
      draw(vr_, vr_factor_, seed, idx, k, noise::Channel::regular);
      v_.head(pr) = vr_;
    }
    for (Eigen::Index i = 0; i < ps; ++i) {
      v_[pr + i] = vs_scale_ * noise::standard_normal(seed, idx, k, noise::Channel::strategic,
                                                      static_cast<std::uint64_t>(i));
    }
  };

  draw(x_, x0_factor_, seed, idx, 0, noise::Channel::initial_state);
  draw_measurement_noise(0);
  y_.noalias() = C_ * x_;
  y_ += v_;
  xhat_.noalias() = kal_->L[0] * y_;
  rec.initial(x_, xhat_, y_, v_);

  double cost = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    u_.noalias() = lqr_->K[k] * xhat_;
    tmp_.noalias() = s.Q * x_;
    ru_.noalias() = s.R * u_;
    cost += x_.dot(tmp_) + u_.dot(ru_);

    draw(w_, w_factor_, seed, idx, k, noise::Channel::process);
    draw_measurement_noise(k + 1);

    tmp_.noalias() = s.A * x_;
    tmp_.noalias() += s.B * u_;
    x_ = tmp_ + w_;
    y_.noalias() = C_ * x_;
    y_ += v_;

    pred_.noalias() = s.A * xhat_;
    pred_.noalias() += s.B * u_;
    innov_ = y_;
    innov_.noalias() -= C_ * pred_;
    xhat_ = pred_;
    xhat_.noalias() += kal_->L[k + 1] * innov_;
    rec.step(u_, w_, x_, xhat_, y_, v_);
  }
  tmp_.noalias() = s.Q * x_;
  cost += x_.dot(tmp_);
  return cost;
}

namespace {

struct NullRecorder {
  template <class... T>
  void initial(const T&...) {}
  template <class... T>
  void step(const T&...) {}
};

struct FullRecorder {
  TrajectorySample* out;
  void initial(const Eigen::VectorXd& x, const Eigen::VectorXd& xhat, const Eigen::VectorXd& y,
               const Eigen::VectorXd& v) {
    out->x.push_back(x);
    out->xhat.push_back(xhat);
    out->y.push_back(y);
    out->v.push_back(v);
  }
  void step(const Eigen::VectorXd& u, const Eigen::VectorXd& w, const Eigen::VectorXd& x,
            const Eigen::VectorXd& xhat, const Eigen::VectorXd& y, const Eigen::VectorXd& v) {
    out->u.push_back(u);
    out->w.push_back(w);
    initial(x, xhat, y, v);
  }
};

}  // namespace

TrajectorySample TrajectorySimulator::sample(std::uint64_t seed, std::uint64_t sample_index) {
  TrajectorySample out;
  out.cost = run(seed, sample_index, FullRecorder{&out});
  return out;
}

double TrajectorySimulator::cost(std::uint64_t seed, std::uint64_t sample_index) {
  return run(seed, sample_index, NullRecorder{});
}

TrajectorySample simulate_trajectory(const SystemSpec& spec, const EffortMapping& mapping,
                                     TrueEffort e, const LqrSolution& lqr,
                                     const KalmanSolution& kal, std::uint64_t seed,
                                     std::uint64_t sample_index) {
  TrajectorySimulator sim(spec, mapping, e, lqr, kal);
  return sim.sample(seed, sample_index);
}

std::vector<double> sample_costs(const SystemSpec& spec, const EffortMapping& mapping,
                                 TrueEffort e, ReportedEffort reported, std::uint64_t count,
                                 std::uint64_t seed, unsigned workers) {
  const LqrSolution lqr = solve_lqr(spec);
  const KalmanSolution kal = solve_kalman(spec, mapping, reported);
  mapping.sigma2(e.value);  // domain check before spawning workers

  std::vector<double> costs(count);
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, std::max<std::uint64_t>(count, 1)));

  auto work = [&](std::uint64_t begin, std::uint64_t end) {
    TrajectorySimulator sim(spec, mapping, e, lqr, kal);
    for (std::uint64_t i = begin; i < end; ++i) costs[i] = sim.cost(seed, i);
  };
  if (workers <= 1) {
    work(0, count);
    return costs;
  }
  std::vector<std::thread> pool;
  const std::uint64_t chunk = (count + workers - 1) / workers;
  for (unsigned t = 0; t < workers; ++t) {
    const std::uint64_t begin = std::min<std::uint64_t>(count, t * chunk);
    const std::uint64_t end = std::min<std::uint64_t>(count, begin + chunk);
    pool.emplace_back(work, begin, end);
  }
  for (auto& th : pool) th.join();
  return costs;
}

double pairwise_sum(const double* data, std::size_t count) {
  if (count <= 8) {
    double acc = 0.0;
    for (std::size_t i = 0; i < count; ++i) acc += data[i];
    return acc;
  }
  const std::size_t half = count / 2;
  return pairwise_sum(data, half) + pairwise_sum(data + half, count - half);
}

MCReport summarize(const std::vector<double>& values, std::uint64_t seed) {
  const std::size_t n = values.size();
  if (n < 2) throw DomainError("Monte Carlo summary needs at least two samples");
  const double nd = static_cast<double>(n);
  const double mean = pairwise_sum(values.data(), n) / nd;

  std::vector<double> sq(n), quad(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = values[i] - mean;
    sq[i] = d * d;
    quad[i] = sq[i] * sq[i];
  }
  const double ss = pairwise_sum(sq.data(), n);
  const double var = ss / (nd - 1.0);
  const double m4 = pairwise_sum(quad.data(), n) / nd;

  MCReport rep;
  rep.sample_count = n;
  rep.mean_cost = mean;
  rep.var_cost = var;
  rep.std_error_mean = std::sqrt(var / nd);
  // Var(s^2) = (mu4 - sigma^4 (n-3)/(n-1)) / n
  rep.std_error_var =
      std::sqrt(std::max(0.0, (m4 - var * var * (nd - 3.0) / (nd - 1.0)) / nd));
  rep.seed = seed;
  return rep;
}

MCReport mc_moments(const SystemSpec& spec, const EffortMapping& mapping, TrueEffort e,
                    ReportedEffort reported, std::uint64_t sample_count, std::uint64_t seed,
                    unsigned workers) {
  return summarize(sample_costs(spec, mapping, e, reported, sample_count, seed, workers), seed);
}

}  // namespace stratsense
