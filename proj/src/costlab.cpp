#include "stratsense/costlab.hpp"

#include "stratsense/errors.hpp"
#include "stratsense/linalg.hpp"

#include <cmath>
#include <sstream>

namespace stratsense {

using Eigen::Index;
using Eigen::MatrixXd;

ClosedLoopModel build_closed_loop(const SystemSpec& spec, const LqrSolution& lqr,
                                  const KalmanSolution& kal) {
  const auto N = static_cast<std::size_t>(spec.N);
  if (lqr.K.size() != N + 1 || kal.L.size() != N + 1) {
    throw InternalError("LQR/Kalman solutions do not match the horizon");
  }
  const Index n = spec.n();
  const Index p = spec.p();
  const Index ps = spec.p_s();
  const MatrixXd C = spec.C();
  const MatrixXd CA = C * spec.A;

  ClosedLoopModel cl;
  cl.reported_effort = kal.reported_effort;
  cl.reported_sigma2 = kal.reported_sigma2;
  cl.n = n;
  cl.p = p;
  cl.Abar.reserve(N);
  cl.Bbar.reserve(N);
  cl.Qbar.reserve(N + 1);

  for (std::size_t k = 0; k < N; ++k) {
    const MatrixXd BK = spec.B * lqr.K[k];
    const MatrixXd& L = kal.L[k + 1];
    const MatrixXd LCA = L * CA;

    MatrixXd a(2 * n, 2 * n);
    a << spec.A, BK, LCA, spec.A + BK - LCA;
    cl.Abar.push_back(std::move(a));

    MatrixXd b = MatrixXd::Zero(2 * n, n + p);
    b.topLeftCorner(n, n).setIdentity();
    b.bottomLeftCorner(n, n) = L * C;
    b.bottomRightCorner(n, p) = L;
    cl.Bbar.push_back(std::move(b));
  }
  for (std::size_t k = 0; k <= N; ++k) {
    MatrixXd q = MatrixXd::Zero(2 * n, 2 * n);
    q.topLeftCorner(n, n) = spec.Q;
    q.bottomRightCorner(n, n) = lqr.K[k].transpose() * spec.R * lqr.K[k];
    cl.Qbar.push_back(std::move(q));
  }

  cl.initial_map = MatrixXd::Zero(2 * n, n + p);
  cl.initial_map.topLeftCorner(n, n).setIdentity();
  cl.initial_map.bottomLeftCorner(n, n) = kal.L[0] * C;
  cl.initial_map.bottomRightCorner(n, p) = kal.L[0];

  cl.SigmaVbar1 = MatrixXd::Zero(n + p, n + p);
  cl.SigmaVbar1.topLeftCorner(n, n) = spec.SigmaW;
  cl.SigmaVbar1.block(n, n, spec.p_r(), spec.p_r()) = spec.SigmaVr;
  cl.SigmaVbar2 = MatrixXd::Zero(n + p, n + p);
  cl.SigmaVbar2.bottomRightCorner(ps, ps).setIdentity();

  // (x_0, v_0) has the same layout as (w_k, v_{k+1}) with SigmaX0 in front.
  MatrixXd init1 = cl.SigmaVbar1;
  init1.topLeftCorner(n, n) = spec.SigmaX0;
  cl.initial_cov1 = linalg::symmetrize(cl.initial_map * init1 * cl.initial_map.transpose());
  cl.initial_cov2 =
      linalg::symmetrize(cl.initial_map * cl.SigmaVbar2 * cl.initial_map.transpose());
  return cl;
}

// ---------------------------------------------------------------- stacked form

MatrixXd BlockDiagonal::dense() const {
  MatrixXd out = MatrixXd::Zero(dim, dim);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    out.block(offsets[b], offsets[b], blocks[b].rows(), blocks[b].cols()) = blocks[b];
  }
  return out;
}

BlockDiagonal BlockDiagonal::plus_scaled(const BlockDiagonal& other, double scale) const {
  if (other.offsets != offsets) throw InternalError("block layouts differ");
  BlockDiagonal out = *this;
  for (std::size_t b = 0; b < blocks.size(); ++b) out.blocks[b] += scale * other.blocks[b];
  return out;
}

namespace {

// z indices of the noise group feeding x_bar_g: g = 0 is (x_0, v_0),
// g = k+1 is (w_k, v_{k+1}).
std::vector<Index> group_indices(Index n, Index p, Index N, Index g) {
  std::vector<Index> idx;
  idx.reserve(static_cast<std::size_t>(n + p));
  const Index state_off = g == 0 ? 0 : n + (g - 1) * n;
  const Index v_off = n + N * n + g * p;
  for (Index i = 0; i < n; ++i) idx.push_back(state_off + i);
  for (Index i = 0; i < p; ++i) idx.push_back(v_off + i);
  return idx;
}

}  // namespace

StackedForm build_stacked_form(const ClosedLoopModel& cl) {
  const Index n = cl.n;
  const Index p = cl.p;
  const Index N = cl.horizon();
  const Index d = n + N * n + (N + 1) * p;
  const Index np = n + p;

  StackedForm sf;
  sf.reported_effort = cl.reported_effort;
  sf.dim = d;

  // Cov(z): SigmaX0 | SigmaW x N | Sigma_v x (N+1).
  const MatrixXd& v1 = cl.SigmaVbar1;
  const MatrixXd& v2 = cl.SigmaVbar2;
  sf.SigmaZ1.dim = sf.SigmaZ2.dim = d;
  auto push = [&](Index off, MatrixXd b1, MatrixXd b2) {
    sf.SigmaZ1.offsets.push_back(off);
    sf.SigmaZ1.blocks.push_back(std::move(b1));
    sf.SigmaZ2.offsets.push_back(off);
    sf.SigmaZ2.blocks.push_back(std::move(b2));
  };
  // initial_cov1 = T0 diag(SigmaX0, Sigma_v1) T0'; recover SigmaX0 from the
  // top-left corner since T0's top row block is [I 0].
  push(0, cl.initial_cov1.topLeftCorner(n, n), MatrixXd::Zero(n, n));
  for (Index k = 0; k < N; ++k) {
    push(n + k * n, v1.topLeftCorner(n, n), MatrixXd::Zero(n, n));
  }
  for (Index k = 0; k <= N; ++k) {
    push(n + N * n + k * p, v1.bottomRightCorner(p, p), v2.bottomRightCorner(p, p));
  }

  std::vector<std::vector<Index>> groups;
  groups.reserve(static_cast<std::size_t>(N + 1));
  for (Index g = 0; g <= N; ++g) groups.push_back(group_indices(n, p, N, g));

  auto group_map = [&](Index g) -> const MatrixXd& {
    return g == 0 ? cl.initial_map : cl.Bbar[static_cast<std::size_t>(g - 1)];
  };

  // Selection: S_0 = T0 E_0, S_{k+1} = Abar_k S_k + Bbar_k E_{k+1}.
  sf.selection.reserve(static_cast<std::size_t>(N + 1));
  for (Index k = 0; k <= N; ++k) {
    MatrixXd s = k == 0 ? MatrixXd::Zero(2 * n, d)
                        : MatrixXd(cl.Abar[static_cast<std::size_t>(k - 1)] * sf.selection.back());
    const MatrixXd& g = group_map(k);
    const auto& idx = groups[static_cast<std::size_t>(k)];
    for (Index c = 0; c < np; ++c) s.col(idx[static_cast<std::size_t>(c)]) += g.col(c);
    sf.selection.push_back(std::move(s));
  }

  // Pi_j = sum_{k>=j} Phi(k,j)' Qbar_k Phi(k,j), swept backwards. For i <= j
  // the (i, j) noise-group block of Mquad is G_i' Phi(j,i)' Pi_j G_j.
  sf.Mquad = MatrixXd::Zero(d, d);
  MatrixXd pi = cl.Qbar.back();
  for (Index j = N; j >= 0; --j) {
    if (j < N) {
      const MatrixXd& a = cl.Abar[static_cast<std::size_t>(j)];
      pi = linalg::symmetrize(cl.Qbar[static_cast<std::size_t>(j)] + a.transpose() * pi * a);
    }
    const auto& idx_j = groups[static_cast<std::size_t>(j)];
    MatrixXd w = pi * group_map(j);
    for (Index i = j; i >= 0; --i) {
      if (i < j) w = cl.Abar[static_cast<std::size_t>(i)].transpose() * w;
      const MatrixXd block = group_map(i).transpose() * w;
      const auto& idx_i = groups[static_cast<std::size_t>(i)];
      for (Index c = 0; c < np; ++c) {
        for (Index r = 0; r < np; ++r) {
          const double v = block(r, c);
          sf.Mquad(idx_i[static_cast<std::size_t>(r)], idx_j[static_cast<std::size_t>(c)]) = v;
          sf.Mquad(idx_j[static_cast<std::size_t>(c)], idx_i[static_cast<std::size_t>(r)]) = v;
        }
      }
    }
  }
  return sf;
}

namespace {

double trace_with_blocks(const MatrixXd& m, const BlockDiagonal& cov) {
  double acc = 0.0;
  for (std::size_t b = 0; b < cov.blocks.size(); ++b) {
    const Index off = cov.offsets[b];
    const Index sz = cov.blocks[b].rows();
    acc += linalg::frobenius_inner(m.block(off, off, sz, sz), cov.blocks[b]);
  }
  return acc;
}

}  // namespace

CostDecomposition decompose_cost(const StackedForm& sf) {
  return {trace_with_blocks(sf.Mquad, sf.SigmaZ1), trace_with_blocks(sf.Mquad, sf.SigmaZ2)};
}

CostDecomposition decompose_cost_recursive(const ClosedLoopModel& cl) {
  MatrixXd cov1 = cl.initial_cov1;
  MatrixXd cov2 = cl.initial_cov2;
  CostDecomposition out;
  const auto N = static_cast<std::size_t>(cl.horizon());
  for (std::size_t k = 0; k <= N; ++k) {
    if (k > 0) {
      const MatrixXd& a = cl.Abar[k - 1];
      const MatrixXd& b = cl.Bbar[k - 1];
      cov1 = a * cov1 * a.transpose() + b * cl.SigmaVbar1 * b.transpose();
      cov2 = a * cov2 * a.transpose() + b * cl.SigmaVbar2 * b.transpose();
    }
    out.f1 += linalg::frobenius_inner(cl.Qbar[k], cov1);
    out.f2 += linalg::frobenius_inner(cl.Qbar[k], cov2);
  }
  return out;
}

double expected_cost(const StackedForm& sf, const EffortMapping& mapping, TrueEffort e) {
  return decompose_cost(sf).expected_cost(mapping.sigma2(e.value));
}

double variance_of_cost_sigma2(const StackedForm& sf, double sigma2_true) {
  const BlockDiagonal cov = sf.SigmaZ1.plus_scaled(sf.SigmaZ2, sigma2_true);
  MatrixXd x(sf.dim, sf.dim);
  for (std::size_t b = 0; b < cov.blocks.size(); ++b) {
    const Index off = cov.offsets[b];
    const Index sz = cov.blocks[b].rows();
    x.middleCols(off, sz).noalias() = sf.Mquad.middleCols(off, sz) * cov.blocks[b];
  }
  // tr(X X) = sum_ij X_ij X_ji
  double acc = 0.0;
  for (Index j = 0; j < sf.dim; ++j) {
    acc += x.col(j).dot(x.row(j).transpose());
  }
  return 2.0 * acc;
}

double variance_of_cost(const StackedForm& sf, const EffortMapping& mapping, TrueEffort e) {
  return variance_of_cost_sigma2(sf, mapping.sigma2(e.value));
}

double variance_of_cost_streamed(const ClosedLoopModel& cl, double sigma2_true) {
  const auto N = static_cast<std::size_t>(cl.horizon());
  const MatrixXd noise = cl.SigmaVbar1 + sigma2_true * cl.SigmaVbar2;
  MatrixXd diag_cov = cl.initial_cov1 + sigma2_true * cl.initial_cov2;

  // Var = sum_{j,k} 2 tr(Qbar_j C_jk Qbar_k C_kj), C_jk = Phi(j,k) C_kk.
  double acc = 0.0;
  for (std::size_t k = 0; k <= N; ++k) {
    if (k > 0) {
      const MatrixXd& a = cl.Abar[k - 1];
      const MatrixXd& b = cl.Bbar[k - 1];
      diag_cov = linalg::symmetrize(a * diag_cov * a.transpose() + b * noise * b.transpose());
    }
    const MatrixXd qc = cl.Qbar[k] * diag_cov;
    acc += 2.0 * linalg::frobenius_inner(qc, qc.transpose());
    MatrixXd cross = diag_cov;
    for (std::size_t j = k + 1; j <= N; ++j) {
      cross = cl.Abar[j - 1] * cross;
      const MatrixXd left = cl.Qbar[j] * cross;
      const MatrixXd right = cl.Qbar[k] * cross.transpose();
      acc += 4.0 * linalg::frobenius_inner(left, right.transpose());
    }
  }
  return acc;
}

double j_star_trace_formula(const SystemSpec& spec, const LqrSolution& lqr,
                            const KalmanSolution& kal) {
  double acc = 0.0;
  for (std::size_t k = 0; k < kal.filtered.size(); ++k) {
    acc += (spec.Q * kal.filtered[k]).trace();
    acc += (lqr.P[k] * (kal.predicted[k] - kal.filtered[k])).trace();
  }
  return acc;
}

CostProfile analyze(const SystemSpec& spec, const EffortMapping& mapping,
                    ReportedEffort reported) {
  CostProfile prof;
  prof.reported_effort = reported.value;
  prof.reported_sigma2 = mapping.sigma2(reported.value);
  prof.lqr = solve_lqr(spec);
  prof.kal = solve_kalman(spec, mapping, reported);
  prof.closed_loop = build_closed_loop(spec, prof.lqr, prof.kal);
  prof.stacked = build_stacked_form(prof.closed_loop);
  prof.decomposition = decompose_cost(prof.stacked);

  const double via_decomposition = prof.decomposition.expected_cost(prof.reported_sigma2);
  const double via_traces = j_star_trace_formula(spec, prof.lqr, prof.kal);
  const double scale = std::max(std::abs(via_decomposition), 1e-300);
  if (std::abs(via_decomposition - via_traces) > 1e-8 * scale) {
    std::ostringstream os;
    os.precision(17);
    os << "J* cross-check failed at e_hat=" << reported.value << ": decomposition "
       << via_decomposition << " vs trace formula " << via_traces;
    throw InternalError(os.str());
  }
  prof.j_star = via_decomposition;
  return prof;
}

CostMoments cost_moments(const CostProfile& profile, const EffortMapping& mapping,
                         TrueEffort e) {
  const double s2 = mapping.sigma2(e.value);
  CostMoments out;
  out.f1 = profile.decomposition.f1;
  out.f2 = profile.decomposition.f2;
  out.expected_cost = profile.decomposition.expected_cost(s2);
  out.variance = variance_of_cost_sigma2(profile.stacked, s2);
  out.j_star = profile.j_star;
  return out;
}

double j_star(const SystemSpec& spec, const EffortMapping& mapping, ReportedEffort reported) {
  return analyze(spec, mapping, reported).j_star;
}

double default_fd_step(double reported) { return 1e-4 * std::max(1.0, reported); }

double var_cost_partial_ehat(const SystemSpec& spec, const EffortMapping& mapping,
                             TrueEffort e, ReportedEffort reported, double step) {
  const double h = step > 0.0 ? step : default_fd_step(reported.value);
  const double lo = reported.value - h;
  const double hi = reported.value + h;
  if (!mapping.in_domain(lo) || !mapping.in_domain(hi)) {
    throw DomainError("finite-difference stencil leaves the effort domain");
  }
  const double s2 = mapping.sigma2(e.value);
  const double v_hi = variance_of_cost_sigma2(analyze(spec, mapping, {hi}).stacked, s2);
  const double v_lo = variance_of_cost_sigma2(analyze(spec, mapping, {lo}).stacked, s2);
  return (v_hi - v_lo) / (2.0 * h);
}

}  // namespace stratsense
