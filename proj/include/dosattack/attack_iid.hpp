#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "dosattack/channel.hpp"
#include "dosattack/controller.hpp"
#include "dosattack/core_model.hpp"

namespace dosattack {

/// Everything the attacker needs at one decision instant: the model, the
/// operator's gain (built with the operator's assumed means), the current
/// state, the per-channel admissible region, and the cached optimal input
/// sequence u* = -G^{-1} F x.
///
/// Holds non-owning references; the ensemble, model and gain must outlive it.
class AttackContext {
 public:
  AttackContext(const PredictionEnsemble& ens, const SystemModel& model, const ControllerGain& gain,
                const VectorXd& x, const VectorXd& channel_mu, const VectorXd& region_lo, const VectorXd& region_hi)
      : ens_(&ens), model_(&model), gain_(&gain), x_(x), mu_(channel_mu), lo_(region_lo), hi_(region_hi) {
    require_dims(x.size() == ens.n, "x", "state has wrong size");
    require_dims(channel_mu.size() == ens.m, "M", "must have one mean per actuator");
    require_dims(region_lo.size() == ens.m && region_hi.size() == ens.m, "region", "needs one interval per actuator");
    if ((region_lo.array() > region_hi.array()).any()) fail(ErrorKind::InfeasibleRegion, "attack region is empty");
    fx_ = ens.f * x;
    u_star_ = optimal_input_sequence(gain, ens, x);
  }

  /// Shared scalar channel: every actuator has mean `mu` and region `region`.
  AttackContext(const PredictionEnsemble& ens, const SystemModel& model, const ControllerGain& gain,
                const VectorXd& x, double mu, Interval region)
      : AttackContext(ens, model, gain, x, VectorXd::Constant(ens.m, mu), VectorXd::Constant(ens.m, region.lo),
                      VectorXd::Constant(ens.m, region.hi)) {}

  const PredictionEnsemble& ens() const { return *ens_; }
  const SystemModel& model() const { return *model_; }
  const ControllerGain& gain() const { return *gain_; }
  Protocol protocol() const { return gain_->protocol; }
  const VectorXd& x() const { return x_; }
  const VectorXd& fx() const { return fx_; }
  const VectorXd& u_star() const { return u_star_; }
  const VectorXd& nu_bar() const { return gain_->nu_bar; }
  const VectorXd& channel_mu() const { return mu_; }
  const VectorXd& region_lo() const { return lo_; }
  const VectorXd& region_hi() const { return hi_; }

  bool shared() const {
    return (mu_.array() == mu_(0)).all() && (lo_.array() == lo_(0)).all() && (hi_.array() == hi_(0)).all();
  }

  /// Scalar region of a shared channel.
  Interval region() const {
    if (!shared()) fail(ErrorKind::Config, "scalar attack region requested for independent channels");
    return Interval{lo_(0), hi_(0)};
  }
  double mu() const {
    if (!shared()) fail(ErrorKind::Config, "scalar channel mean requested for independent channels");
    return mu_(0);
  }

  /// ||G u* + F x||, zero up to rounding.
  double u_star_residual() const { return (gain_->G * u_star_ + fx_).norm(); }

  /// u*' M u* for a dense matrix M.
  double form(const MatrixXd& M) const { return u_star_.dot(M * u_star_); }
  /// u*' diag(d) u*.
  double diag_form(const VectorXd& d) const { return u_star_.cwiseAbs2().dot(d); }

  /// Scale for "numerically zero" curvature: ||delta_gamma||_F ||u*||^2.
  double curvature_scale() const { return ens_->delta_gamma.norm() * u_star_.squaredNorm(); }

 private:
  const PredictionEnsemble* ens_;
  const SystemModel* model_;
  const ControllerGain* gain_;
  VectorXd x_;
  VectorXd mu_;
  VectorXd lo_;
  VectorXd hi_;
  VectorXd fx_;
  VectorXd u_star_;
};

enum class Convexity { Concave, Convex, Linear };

inline std::string_view to_string(Convexity c) {
  switch (c) {
    case Convexity::Concave: return "concave";
    case Convexity::Convex: return "convex";
    case Convexity::Linear: return "linear";
  }
  return "unknown";
}

inline constexpr double kCurvatureRelTol = 1e-12;

inline Convexity classify_curvature(double h, double scale) {
  const double tol = kCurvatureRelTol * scale;
  if (h < -tol) return Convexity::Concave;
  if (h > tol) return Convexity::Convex;
  return Convexity::Linear;
}

/// Derivative data of a quadratic attacker objective:
/// obj'(alpha) = slope_at_zero + second * alpha, obj'' = second.
struct ObjectiveDerivatives {
  double slope_at_zero = 0.0;
  double second = 0.0;
  double h = 0.0;  // h_UDP or h_TCP
  Convexity convexity = Convexity::Linear;

  double first(double alpha) const { return slope_at_zero + second * alpha; }
};

struct Candidate {
  double alpha = 0.0;
  double value = 0.0;
  std::string label;
};

struct AttackCharacterization {
  Protocol protocol = Protocol::UdpLike;
  Convexity convexity = Convexity::Linear;
  double h = 0.0;
  std::optional<double> alpha_max;  // UDP, concave only
  std::optional<double> alpha_min;  // TCP, strictly convex only
  std::vector<Candidate> candidates;
  double alpha_star = 0.0;
  double objective_star = 0.0;
  bool zero_slope = false;  // linear with no slope: alpha* = mu, no effect
};

namespace detail {

inline void require_protocol(const AttackContext& ctx, Protocol p, const char* op) {
  if (ctx.protocol() != p) {
    fail(ErrorKind::Config, std::string(op) + " requires a " + std::string(to_string(p)) + "-like context");
  }
}

/// Picks the best candidate; near-ties go to the one closest to mu.
inline void select_candidate(AttackCharacterization& out, double mu) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& c : out.candidates) best = std::max(best, c.value);
  const double tol = 1e-12 * (1.0 + std::abs(best));
  const Candidate* chosen = nullptr;
  for (const auto& c : out.candidates) {
    if (c.value < best - tol) continue;
    if (!chosen || std::abs(c.alpha - mu) < std::abs(chosen->alpha - mu)) chosen = &c;
  }
  out.alpha_star = chosen->alpha;
  out.objective_star = chosen->value;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// UDP-like objective
// ---------------------------------------------------------------------------

/// f(alpha) = u*' alpha (alpha delta_gamma + (1 - alpha)(I (.) delta_gamma) + Psi - 2G) u*
inline double f_udp(const AttackContext& ctx, double alpha) {
  detail::require_protocol(ctx, Protocol::UdpLike, "f_udp");
  const auto& ens = ctx.ens();
  MatrixXd M = alpha * ens.delta_gamma - 2.0 * ctx.gain().G;
  M.diagonal() += (1.0 - alpha) * ens.delta_gamma_diag + ctx.model().psi_diag;
  return alpha * ctx.form(M);
}

/// f'(alpha) = u*'(2 alpha delta_gamma + (1 - 2 alpha) D + Psi - 2G) u*, f'' = 2 h_UDP.
inline ObjectiveDerivatives f_udp_derivs(const AttackContext& ctx) {
  detail::require_protocol(ctx, Protocol::UdpLike, "f_udp_derivs");
  const auto& ens = ctx.ens();
  ObjectiveDerivatives d;
  d.h = ctx.form(ens.delta_h);
  d.second = 2.0 * d.h;
  d.slope_at_zero = ctx.diag_form(ens.delta_gamma_diag + ctx.model().psi_diag) - 2.0 * ctx.form(ctx.gain().G);
  d.convexity = classify_curvature(d.h, ctx.curvature_scale());
  return d;
}

/// Stationary point of a concave f:
/// alpha_max = (1/2) h^{-1} u*'(2G - Psi - D) u*.
inline double alpha_max_udp(const AttackContext& ctx) {
  const auto d = f_udp_derivs(ctx);
  if (d.convexity == Convexity::Linear) {
    fail(ErrorKind::DegenerateCurvature, "f is linear in alpha; no interior maximizer exists");
  }
  if (d.convexity == Convexity::Convex) {
    fail(ErrorKind::RegimeInapplicable, "f is convex in alpha; its stationary point is a minimizer");
  }
  const double numerator =
      2.0 * ctx.form(ctx.gain().G) - ctx.diag_form(ctx.model().psi_diag + ctx.ens().delta_gamma_diag);
  return 0.5 * numerator / d.h;
}

inline AttackCharacterization optimal_alpha_udp(const AttackContext& ctx) {
  detail::require_protocol(ctx, Protocol::UdpLike, "optimal_alpha_udp");
  const Interval region = ctx.region();
  const double mu = ctx.mu();
  const auto d = f_udp_derivs(ctx);

  AttackCharacterization out;
  out.protocol = Protocol::UdpLike;
  out.convexity = d.convexity;
  out.h = d.h;
  out.candidates.push_back({region.lo, f_udp(ctx, region.lo), "min C"});
  if (region.hi != region.lo) out.candidates.push_back({region.hi, f_udp(ctx, region.hi), "max C"});
  if (d.convexity == Convexity::Concave) {
    out.alpha_max = alpha_max_udp(ctx);
    if (region.contains(*out.alpha_max)) {
      out.candidates.push_back({*out.alpha_max, f_udp(ctx, *out.alpha_max), "alpha_max"});
    }
  }
  if (d.convexity == Convexity::Linear && std::abs(d.slope_at_zero) <= kCurvatureRelTol * (1.0 + ctx.curvature_scale())) {
    out.zero_slope = true;
    const double alpha = std::clamp(mu, region.lo, region.hi);
    out.alpha_star = alpha;
    out.objective_star = f_udp(ctx, alpha);
    return out;
  }
  detail::select_candidate(out, mu);
  return out;
}

// ---------------------------------------------------------------------------
// TCP-like objective
// ---------------------------------------------------------------------------

/// g(alpha) = -u*' alpha (delta_gamma (2 nu_bar - alpha I) + Psi) u*
inline double g_tcp(const AttackContext& ctx, double alpha) {
  detail::require_protocol(ctx, Protocol::TcpLike, "g_tcp");
  const auto& ens = ctx.ens();
  MatrixXd M = ens.delta_gamma * (2.0 * ctx.nu_bar().array() - alpha).matrix().asDiagonal();
  M.diagonal() += ctx.model().psi_diag;
  return -alpha * ctx.form(M);
}

/// g'(alpha) = -u*'(delta_gamma (2 nu_bar - 2 alpha I) + Psi) u*, g'' = 2 u*' delta_gamma u*.
inline ObjectiveDerivatives g_tcp_derivs(const AttackContext& ctx) {
  detail::require_protocol(ctx, Protocol::TcpLike, "g_tcp_derivs");
  const auto& ens = ctx.ens();
  ObjectiveDerivatives d;
  d.h = ctx.form(ens.delta_gamma);
  d.second = 2.0 * d.h;
  MatrixXd M = ens.delta_gamma * (2.0 * ctx.nu_bar()).asDiagonal();
  M.diagonal() += ctx.model().psi_diag;
  d.slope_at_zero = -ctx.form(M);
  d.convexity = classify_curvature(d.h, ctx.curvature_scale());
  return d;
}

/// Minimizer of the convex g:
/// alpha_min = (1/2) h_TCP^{-1} u*'(2 delta_gamma nu_bar + Psi) u*.
/// Returned even when it falls outside [0, 1].
inline double alpha_min_tcp(const AttackContext& ctx) {
  const auto d = g_tcp_derivs(ctx);
  if (d.convexity != Convexity::Convex) {
    fail(ErrorKind::DegenerateCurvature, "g has no positive curvature; no unique minimizer");
  }
  MatrixXd M = ctx.ens().delta_gamma * (2.0 * ctx.nu_bar()).asDiagonal();
  M.diagonal() += ctx.model().psi_diag;
  return 0.5 * ctx.form(M) / d.h;
}

inline AttackCharacterization optimal_alpha_tcp(const AttackContext& ctx) {
  detail::require_protocol(ctx, Protocol::TcpLike, "optimal_alpha_tcp");
  const Interval region = ctx.region();
  const double mu = ctx.mu();
  const auto d = g_tcp_derivs(ctx);

  AttackCharacterization out;
  out.protocol = Protocol::TcpLike;
  out.convexity = d.convexity;
  out.h = d.h;
  if (d.convexity == Convexity::Convex) out.alpha_min = alpha_min_tcp(ctx);
  out.candidates.push_back({region.lo, g_tcp(ctx, region.lo), "min C"});
  if (region.hi != region.lo) out.candidates.push_back({region.hi, g_tcp(ctx, region.hi), "max C"});
  if (d.convexity == Convexity::Linear && std::abs(d.slope_at_zero) <= kCurvatureRelTol * (1.0 + ctx.curvature_scale())) {
    out.zero_slope = true;
    const double alpha = std::clamp(mu, region.lo, region.hi);
    out.alpha_star = alpha;
    out.objective_star = g_tcp(ctx, alpha);
    return out;
  }
  detail::select_candidate(out, mu);
  return out;
}

/// Dispatches on the context protocol.
inline AttackCharacterization optimal_alpha(const AttackContext& ctx) {
  return ctx.protocol() == Protocol::UdpLike ? optimal_alpha_udp(ctx) : optimal_alpha_tcp(ctx);
}

inline double iid_objective(const AttackContext& ctx, double alpha) {
  return ctx.protocol() == Protocol::UdpLike ? f_udp(ctx, alpha) : g_tcp(ctx, alpha);
}

struct PerfectChannelCondition {
  bool state_condition = false;   // g(1) > 0 at this state
  bool matrix_condition = false;  // delta_gamma (I - 2 nu_bar) - Psi > 0
  double g_at_one = 0.0;
  double min_eigenvalue = 0.0;  // of the symmetric part of the matrix test
};

inline PerfectChannelCondition perfect_channel_condition_tcp(const AttackContext& ctx) {
  detail::require_protocol(ctx, Protocol::TcpLike, "perfect_channel_condition_tcp");
  PerfectChannelCondition out;
  out.g_at_one = g_tcp(ctx, 1.0);
  out.state_condition = out.g_at_one > 0.0;
  const auto& ens = ctx.ens();
  MatrixXd T = ens.delta_gamma * (1.0 - 2.0 * ctx.nu_bar().array()).matrix().asDiagonal();
  T.diagonal() -= ctx.model().psi_diag;
  const MatrixXd sym = 0.5 * (T + T.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
  out.min_eigenvalue = eig.eigenvalues().minCoeff();
  out.matrix_condition = out.min_eigenvalue > 0.0;
  return out;
}

}  // namespace dosattack
