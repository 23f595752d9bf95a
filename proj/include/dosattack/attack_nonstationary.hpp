#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dosattack/attack_iid.hpp"
#include "dosattack/rng.hpp"

namespace dosattack {

/// Which horizon step and actuator a decision entry belongs to. Entries in the
/// same `group` are tied together when the schedule is forced to be IID.
struct DecisionIndex {
  int step = 0;
  Eigen::Index channel = 0;
  int group = 0;
};

/// maximize z'Hz + c'z subject to lo <= z <= hi.
struct BoxQP {
  MatrixXd H;
  VectorXd c;
  VectorXd lo;
  VectorXd hi;
  VectorXd nominal;  // operator's means, used to break ties
  std::vector<DecisionIndex> index;
  int groups = 1;
  Eigen::Index channels = 1;

  Eigen::Index size() const { return c.size(); }

  double objective(const VectorXd& z) const { return z.dot(H * z) + c.dot(z); }
  VectorXd gradient(const VectorXd& z) const { return 2.0 * (H * z) + c; }
  VectorXd project(const VectorXd& z) const { return z.cwiseMax(lo).cwiseMin(hi); }

  void validate() const {
    const auto d = size();
    require_dims(H.rows() == d && H.cols() == d, "H", "must be d x d");
    require_dims(lo.size() == d && hi.size() == d, "bounds", "must have d entries");
    require_dims(nominal.size() == d, "nominal", "must have d entries");
    require_dims(static_cast<Eigen::Index>(index.size()) == d, "index", "must have d entries");
    if ((lo.array() > hi.array()).any()) fail(ErrorKind::InfeasibleRegion, "box has lo > hi");
    const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
    if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) fail(ErrorKind::Numerical, "H is not symmetric");
  }
};

/// Per-step attack means over the horizon.
struct AttackSchedule {
  VectorXd z;                    // stacked diagonal of nu_bar^alpha
  std::vector<VectorXd> means;   // one m-vector per horizon step
  double objective = 0.0;
  std::string winner;            // which candidate produced the result
  double stationarity_residual = 0.0;
};

struct BoxQPSettings {
  int multistart = 32;
  int max_iterations = 500;
  double backtrack = 0.5;
  double stationarity_rel_tol = 1e-8;
  int vertex_cap = 16;
  int exact_face_cap = 6;
  std::uint64_t seed = 0x5eedULL;
  std::optional<VectorXd> hint;  // extra start, typically the IID optimum
};

namespace detail {

inline BoxQP qp_skeleton(const AttackContext& ctx) {
  const auto& ens = ctx.ens();
  const Eigen::Index m = ens.m;
  const int N = ens.horizon;
  const bool shared = ctx.shared();
  BoxQP qp;
  qp.channels = m;
  qp.groups = shared ? 1 : static_cast<int>(m);
  qp.lo = horizon_means(ctx.region_lo(), N);
  qp.hi = horizon_means(ctx.region_hi(), N);
  qp.nominal = horizon_means(ctx.channel_mu(), N).cwiseMax(qp.lo).cwiseMin(qp.hi);
  qp.index.reserve(static_cast<std::size_t>(N * m));
  for (int k = 0; k < N; ++k) {
    for (Eigen::Index i = 0; i < m; ++i) qp.index.push_back({k, i, shared ? 0 : static_cast<int>(i)});
  }
  return qp;
}

/// tr(diag(z) Q diag(z) u u') = z'(Q (.) u u')z and tr(diag(z) C u u') = ((C u) (.) u)'z.
inline void fill_objective(BoxQP& qp, const MatrixXd& quad, const MatrixXd& lin, const VectorXd& u) {
  qp.H = quad.cwiseProduct(u * u.transpose());
  qp.H = 0.5 * (qp.H + qp.H.transpose());
  qp.c = (lin * u).cwiseProduct(u);
}

}  // namespace detail

/// UDP-like schedule problem, quadratic in delta_h and linear in D + Psi - 2G.
inline BoxQP build_qp_udp(const AttackContext& ctx) {
  detail::require_protocol(ctx, Protocol::UdpLike, "build_qp_udp");
  BoxQP qp = detail::qp_skeleton(ctx);
  MatrixXd lin = -2.0 * ctx.gain().G;
  lin.diagonal() += ctx.ens().delta_gamma_diag + ctx.model().psi_diag;
  detail::fill_objective(qp, ctx.ens().delta_h, lin, ctx.u_star());
  return qp;
}

/// TCP-like schedule problem, quadratic in delta_gamma and linear in Psi - 2G.
inline BoxQP build_qp_tcp(const AttackContext& ctx) {
  detail::require_protocol(ctx, Protocol::TcpLike, "build_qp_tcp");
  BoxQP qp = detail::qp_skeleton(ctx);
  MatrixXd lin = -2.0 * ctx.gain().G;
  lin.diagonal() += ctx.model().psi_diag;
  detail::fill_objective(qp, ctx.ens().delta_gamma, lin, ctx.u_star());
  return qp;
}

inline BoxQP build_qp(const AttackContext& ctx) {
  return ctx.protocol() == Protocol::UdpLike ? build_qp_udp(ctx) : build_qp_tcp(ctx);
}

namespace detail {

inline AttackSchedule to_schedule(const BoxQP& qp, const VectorXd& z, std::string winner) {
  AttackSchedule s;
  s.z = z;
  s.objective = qp.objective(z);
  s.winner = std::move(winner);
  const Eigen::Index m = qp.channels;
  const Eigen::Index steps = qp.size() / m;
  for (Eigen::Index k = 0; k < steps; ++k) s.means.push_back(z.segment(k * m, m));
  s.stationarity_residual = (qp.project(z + qp.gradient(z)) - z).cwiseAbs().maxCoeff();
  return s;
}

struct Best {
  VectorXd z;
  double value = -std::numeric_limits<double>::infinity();
  std::string label;

  void offer(const BoxQP& qp, const VectorXd& cand, const std::string& what) {
    const double v = qp.objective(cand);
    if (z.size() == 0) {
      z = cand;
      value = v;
      label = what;
      return;
    }
    const double tol = 1e-12 * (1.0 + std::abs(value));
    if (v > value + tol) {
      z = cand;
      value = v;
      label = what;
    } else if (v >= value - tol && (cand - qp.nominal).norm() < (z - qp.nominal).norm()) {
      z = cand;
      value = std::max(v, value);
      label = what;
    }
  }
};

/// All 2^d box vertices, visited in Gray-code order with O(d) updates.
inline VectorXd best_vertex(const BoxQP& qp) {
  const auto d = qp.size();
  VectorXd z = qp.lo;
  VectorXd hz = qp.H * z;
  double value = qp.objective(z);
  VectorXd best = z;
  double best_value = value;
  std::vector<bool> at_hi(static_cast<std::size_t>(d), false);
  const std::uint64_t count = std::uint64_t{1} << d;
  for (std::uint64_t i = 1; i < count; ++i) {
    const int j = std::countr_zero(i);
    const bool up = !at_hi[static_cast<std::size_t>(j)];
    at_hi[static_cast<std::size_t>(j)] = up;
    const double target = up ? qp.hi(j) : qp.lo(j);
    const double delta = target - z(j);
    value += delta * (2.0 * hz(j) + delta * qp.H(j, j) + qp.c(j));
    hz += delta * qp.H.col(j);
    z(j) = target;
    if (value > best_value) {
      best_value = value;
      best = z;
    }
  }
  return best;
}

/// Exact global maximum by enumerating every face of the box and solving the
/// stationarity system on its free coordinates. 3^d faces.
inline std::vector<VectorXd> face_stationary_points(const BoxQP& qp) {
  const auto d = qp.size();
  std::vector<VectorXd> points;
  std::uint64_t total = 1;
  for (Eigen::Index i = 0; i < d; ++i) total *= 3;
  std::vector<int> state(static_cast<std::size_t>(d), 0);
  for (std::uint64_t code = 0; code < total; ++code) {
    std::uint64_t rest = code;
    std::vector<Eigen::Index> free;
    VectorXd z(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      state[static_cast<std::size_t>(i)] = static_cast<int>(rest % 3);
      rest /= 3;
      if (state[static_cast<std::size_t>(i)] == 0) z(i) = qp.lo(i);
      else if (state[static_cast<std::size_t>(i)] == 1) z(i) = qp.hi(i);
      else free.push_back(i);
    }
    if (!free.empty()) {
      const auto f = static_cast<Eigen::Index>(free.size());
      MatrixXd hff(f, f);
      VectorXd rhs(f);
      for (Eigen::Index a = 0; a < f; ++a) {
        double acc = qp.c(free[a]);
        for (Eigen::Index j = 0; j < d; ++j) {
          if (state[static_cast<std::size_t>(j)] != 2) acc += 2.0 * qp.H(free[a], j) * z(j);
        }
        rhs(a) = -acc;
        for (Eigen::Index b = 0; b < f; ++b) hff(a, b) = 2.0 * qp.H(free[a], free[b]);
      }
      Eigen::FullPivLU<MatrixXd> lu(hff);
      if (!lu.isInvertible()) continue;
      const VectorXd sol = lu.solve(rhs);
      bool inside = true;
      for (Eigen::Index a = 0; a < f; ++a) {
        const auto i = free[a];
        if (sol(a) < qp.lo(i) || sol(a) > qp.hi(i)) {
          inside = false;
          break;
        }
        z(i) = sol(a);
      }
      if (!inside) continue;
    }
    points.push_back(z);
  }
  return points;
}

struct AscentResult {
  VectorXd z;
  double value = 0.0;
  int iterations = 0;
};

/// Projected gradient ascent with Armijo backtracking; the objective never
/// decreases between accepted iterates.
inline AscentResult projected_ascent(const BoxQP& qp, const VectorXd& start, const BoxQPSettings& settings,
                                     std::vector<double>* trace = nullptr) {
  const double lipschitz = 2.0 * qp.H.norm();
  const double tol = settings.stationarity_rel_tol * (1.0 + qp.c.norm());
  const double step0 = 1.0 / std::max(lipschitz, 1e-12 * (1.0 + qp.c.norm()));
  AscentResult r;
  r.z = qp.project(start);
  r.value = qp.objective(r.z);
  if (trace) trace->push_back(r.value);
  for (; r.iterations < settings.max_iterations; ++r.iterations) {
    const VectorXd g = qp.gradient(r.z);
    if ((qp.project(r.z + g) - r.z).cwiseAbs().maxCoeff() <= tol) break;
    double step = step0;
    bool accepted = false;
    while (step > 1e-18 * step0 + 1e-300) {
      const VectorXd cand = qp.project(r.z + step * g);
      const double v = qp.objective(cand);
      if (v >= r.value + 1e-4 * g.dot(cand - r.z)) {
        accepted = v >= r.value;
        if (accepted) {
          r.z = cand;
          r.value = v;
        }
        break;
      }
      step *= settings.backtrack;
    }
    if (trace) trace->push_back(r.value);
    if (!accepted) break;
  }
  return r;
}

/// Ascent from the box corners, its centre, any extra starts, then random
/// points until `settings.multistart` starts have been run.
inline void multistart_ascent(const BoxQP& qp, const BoxQPSettings& settings, std::vector<VectorXd> extra,
                              Best& best) {
  const auto d = qp.size();
  std::vector<VectorXd> starts{qp.lo, qp.hi, 0.5 * (qp.lo + qp.hi)};
  const std::size_t first_extra = starts.size();
  for (auto& e : extra) {
    if (e.size() == d) starts.push_back(std::move(e));
  }
  const std::size_t last_extra = starts.size();
  auto rng = make_stream(settings.seed, 0, StreamTag::Solver);
  while (static_cast<int>(starts.size()) < settings.multistart) {
    VectorXd z(d);
    for (Eigen::Index i = 0; i < d; ++i) z(i) = qp.lo(i) + rng.uniform() * (qp.hi(i) - qp.lo(i));
    starts.push_back(z);
  }
  for (std::size_t s = 0; s < starts.size(); ++s) {
    const auto r = projected_ascent(qp, starts[s], settings);
    best.offer(qp, r.z, (s >= first_extra && s < last_extra) ? "ascent-from-hint" : "ascent");
  }
}

/// Reduced problem over one scalar per group: z = P beta.
struct GroupReduction {
  BoxQP reduced;
  MatrixXd P;
};

inline GroupReduction reduce_to_groups(const BoxQP& qp) {
  const auto d = qp.size();
  const int g = qp.groups;
  GroupReduction out;
  out.P = MatrixXd::Zero(d, g);
  for (Eigen::Index i = 0; i < d; ++i) out.P(i, qp.index[static_cast<std::size_t>(i)].group) = 1.0;
  BoxQP& r = out.reduced;
  r.H = out.P.transpose() * qp.H * out.P;
  r.H = 0.5 * (r.H + r.H.transpose());
  r.c = out.P.transpose() * qp.c;
  r.lo = VectorXd::Constant(g, -std::numeric_limits<double>::infinity());
  r.hi = VectorXd::Constant(g, std::numeric_limits<double>::infinity());
  r.nominal = VectorXd::Zero(g);
  VectorXd members = VectorXd::Zero(g);
  for (Eigen::Index i = 0; i < d; ++i) {
    const int grp = qp.index[static_cast<std::size_t>(i)].group;
    r.lo(grp) = std::max(r.lo(grp), qp.lo(i));
    r.hi(grp) = std::min(r.hi(grp), qp.hi(i));
    r.nominal(grp) += qp.nominal(i);
    members(grp) += 1.0;
  }
  r.nominal = r.nominal.cwiseQuotient(members).cwiseMax(r.lo).cwiseMin(r.hi);
  r.channels = g;
  r.groups = g;
  for (int k = 0; k < g; ++k) r.index.push_back({0, k, k});
  if ((r.lo.array() > r.hi.array()).any()) fail(ErrorKind::InfeasibleRegion, "no constant schedule fits every step's box");
  return out;
}

inline VectorXd exact_or_multistart(const BoxQP& qp, const BoxQPSettings& settings, std::string* label) {
  Best best;
  best.offer(qp, qp.nominal, "nominal");
  if (qp.size() <= 10) {
    for (const auto& p : face_stationary_points(qp)) best.offer(qp, p, "exact");
  } else {
    if (qp.size() <= settings.vertex_cap) best.offer(qp, best_vertex(qp), "vertex");
    multistart_ascent(qp, settings, {qp.nominal}, best);
  }
  if (label) *label = best.label;
  return best.z;
}

}  // namespace detail

/// Best constant-per-group schedule (the IID attack expressed in QP form).
inline AttackSchedule solve_iid_constrained(const BoxQP& qp, const BoxQPSettings& settings = {}) {
  qp.validate();
  const auto red = detail::reduce_to_groups(qp);
  std::string label;
  const VectorXd beta = detail::exact_or_multistart(red.reduced, settings, &label);
  return detail::to_schedule(qp, red.P * beta, "iid:" + label);
}

/// Global search over the full per-step box: vertex enumeration (d <= 16,
/// exact when diag(H) >= 0), exact face enumeration (small d),
/// projected-gradient multistart, and the IID optimum as a constant
/// schedule. Returns the best feasible point found.
inline AttackSchedule solve_box_qp_max(const BoxQP& qp, const BoxQPSettings& settings = {}) {
  qp.validate();
  const auto d = qp.size();
  detail::Best best;

  const AttackSchedule iid = solve_iid_constrained(qp, settings);
  best.offer(qp, iid.z, "iid");

  if (d <= settings.vertex_cap) {
    best.offer(qp, detail::best_vertex(qp), "vertex");
    // With H_ii >= 0 the objective is convex along every coordinate, so
    // pushing each coordinate to a bound never lowers it and some vertex is
    // a global maximizer. Both schedule problems have this structure.
    if (qp.H.diagonal().minCoeff() >= 0.0) return detail::to_schedule(qp, best.z, best.label);
  }
  if (d <= settings.exact_face_cap) {
    for (const auto& p : detail::face_stationary_points(qp)) best.offer(qp, p, "face");
  }

  std::vector<VectorXd> extra{iid.z};
  if (settings.hint) extra.push_back(*settings.hint);
  detail::multistart_ascent(qp, settings, std::move(extra), best);
  return detail::to_schedule(qp, best.z, best.label);
}


}  // namespace dosattack
