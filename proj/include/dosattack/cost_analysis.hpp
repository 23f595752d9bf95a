#pragma once

#include <cmath>
#include <optional>
#include <string_view>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "dosattack/attack_iid.hpp"
#include "dosattack/controller.hpp"

namespace dosattack {

enum class Regime { AlphaToZero, AlphaOne, AlphaMax, GeneralAlpha };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::AlphaToZero: return "alpha->0";
    case Regime::AlphaOne: return "alpha=1";
    case Regime::AlphaMax: return "alpha=alpha_max";
    case Regime::GeneralAlpha: return "general";
  }
  return "unknown";
}

struct CostReport {
  double baseline = 0.0;
  double attacked = 0.0;
  double increase = 0.0;
  Regime regime = Regime::GeneralAlpha;
  Protocol protocol = Protocol::UdpLike;
  /// Regime-specific side condition: the alpha=1 positivity test for UDP, the
  /// sign of the first term for TCP. Unset for the other regimes.
  std::optional<bool> condition;
  std::optional<double> alpha;
};

/// Channel statistics imposed by the attacker, in any of the forms the
/// analysis accepts. `None` reproduces the operator's assumption.
struct AttackPlan {
  enum class Kind { None, IidScalar, IidMeans, Schedule };
  Kind kind = Kind::None;
  double alpha = 0.0;   // IidScalar
  VectorXd means;       // IidMeans: one per actuator
  VectorXd schedule;    // Schedule: N*m stacked per-step means

  static AttackPlan none() { return {}; }
  static AttackPlan iid(double a) { return {Kind::IidScalar, a, {}, {}}; }
  static AttackPlan iid_means(VectorXd m) { return {Kind::IidMeans, 0.0, std::move(m), {}}; }
  static AttackPlan per_step(VectorXd z) { return {Kind::Schedule, 0.0, {}, std::move(z)}; }

  /// N*m diagonal of nu_bar^alpha.
  VectorXd horizon_diagonal(const ControllerGain& gain, int horizon, Eigen::Index m) const {
    switch (kind) {
      case Kind::None: return gain.nu_bar;
      case Kind::IidScalar: return VectorXd::Constant(horizon * m, alpha);
      case Kind::IidMeans:
        require_dims(means.size() == m, "attack means", "must have m entries");
        return horizon_means(means, horizon);
      case Kind::Schedule:
        require_dims(schedule.size() == horizon * m, "attack schedule", "must have N*m entries");
        return schedule;
    }
    return gain.nu_bar;
  }
};

namespace detail {

/// (F x)' G^{-1} diag(d) (F x), evaluated literally (one solve against G).
inline double fgf(const ControllerGain& gain, const VectorXd& fx, const VectorXd& d) {
  const VectorXd rhs = d.cwiseProduct(fx);
  return fx.dot(gain.solver.solve(rhs).col(0));
}

inline CostReport finish(double baseline, double closed_form_increase, Regime regime, Protocol protocol) {
  CostReport r;
  r.baseline = baseline;
  r.attacked = baseline + closed_form_increase;
  r.increase = r.attacked - r.baseline;
  r.regime = regime;
  r.protocol = protocol;
  return r;
}

}  // namespace detail

/// Expected cost under `plan` at state x: the attack-independent part plus
/// the loss-dependent term with nu_bar^alpha in place of nu_bar.
inline double expected_attacked_cost(const PredictionEnsemble& ens, const SystemModel& model,
                                     const ControllerGain& gain, const VectorXd& x, const AttackPlan& plan) {
  const VectorXd u = optimal_input_sequence(gain, ens, x);
  const VectorXd fx = ens.f * x;
  const VectorXd nu = plan.horizon_diagonal(gain, ens.horizon, ens.m);
  return attack_independent_cost(ens, model, x) + expected_cost_term(ens, model, gain.protocol, u, fx, nu);
}

/// Same cost averaged over X ~ N(X_bar, Sigma_X). Uses E[x'Kx] = X_bar'K X_bar
/// + sum_j l_j'K l_j with Sigma_X = L L'.
inline double expected_attacked_cost_aggregate(const PredictionEnsemble& ens, const SystemModel& model,
                                               const ControllerGain& gain, const AttackPlan& plan) {
  const double constant = ens.noise_cost();
  double total = expected_attacked_cost(ens, model, gain, model.x_bar, plan);
  const MatrixXd L = model.sigma_x.llt().matrixL();
  for (Eigen::Index j = 0; j < L.cols(); ++j) {
    total += expected_attacked_cost(ens, model, gain, L.col(j), plan) - constant;
  }
  return total;
}

/// sum_i D_ii p_i (1 - p_i) u_i^2: the delivery-variance contribution to the
/// realized horizon cost when actuators are dropped independently. Present in
/// the UDP-like expression, absent from the TCP-like one.
inline double delivery_variance_term(const PredictionEnsemble& ens, const VectorXd& u, const VectorXd& nu_alpha) {
  const VectorXd var = nu_alpha.cwiseProduct(VectorXd::Ones(nu_alpha.size()) - nu_alpha);
  return u.cwiseAbs2().cwiseProduct(ens.delta_gamma_diag).dot(var);
}

/// Expectation of the realized horizon cost x'Qx + chi'Omega chi + u'nu Psi nu u
/// when the plan u* is executed open loop over the horizon and actuator i at
/// step k is delivered independently with probability nu_alpha.
inline double realized_horizon_cost_expectation(const PredictionEnsemble& ens, const SystemModel& model,
                                                const ControllerGain& gain, const VectorXd& x,
                                                const VectorXd& nu_alpha) {
  const VectorXd u = optimal_input_sequence(gain, ens, x);
  const VectorXd fx = ens.f * x;
  return attack_independent_cost(ens, model, x) +
         expected_cost_term(ens, model, Protocol::TcpLike, u, fx, nu_alpha) +
         delivery_variance_term(ens, u, nu_alpha);
}

/// All packets dropped: increase = x'F'G^{-1} nu_bar F x.
inline CostReport cost_increase_alpha0(const PredictionEnsemble& ens, const SystemModel& model,
                                       const ControllerGain& gain, const VectorXd& x) {
  const VectorXd fx = ens.f * x;
  auto r = detail::finish(nominal_expected_cost(ens, model, gain, x), detail::fgf(gain, fx, gain.nu_bar),
                          Regime::AlphaToZero, gain.protocol);
  r.alpha = 0.0;
  return r;
}

/// All packets delivered, UDP-like:
/// increase = u*'(delta_gamma + Psi)u* + x'F'G^{-1}(nu_bar - 2I)F x.
/// `condition` reports u*'(I - 2 nu_bar) delta_h u* >= u*'(D + Psi) u*.
inline CostReport cost_increase_alpha1_udp(const PredictionEnsemble& ens, const SystemModel& model,
                                           const ControllerGain& gain, const VectorXd& x) {
  if (gain.protocol != Protocol::UdpLike) fail(ErrorKind::Config, "cost_increase_alpha1_udp needs a UDP-like gain");
  const VectorXd fx = ens.f * x;
  const VectorXd u = optimal_input_sequence(gain, ens, x);
  const VectorXd ones = VectorXd::Ones(u.size());
  const double first = u.dot(ens.delta_gamma * u) + u.cwiseAbs2().dot(model.psi_diag);
  const double second = detail::fgf(gain, fx, gain.nu_bar - 2.0 * ones);
  auto r = detail::finish(nominal_expected_cost(ens, model, gain, x), first + second, Regime::AlphaOne,
                          gain.protocol);
  const double lhs = u.dot((ones - 2.0 * gain.nu_bar).asDiagonal() * (ens.delta_h * u));
  const double rhs = u.cwiseAbs2().dot(ens.delta_gamma_diag + model.psi_diag);
  r.condition = lhs >= rhs;
  r.alpha = 1.0;
  return r;
}

/// Interior optimum of a concave UDP-like objective:
/// increase = x'F'G^{-1} nu_bar F x - (1/4) h^{-1} (u*'(2G - Psi - D)u*)^2.
/// Throws RegimeInapplicable unless f is concave with alpha_max in `region`.
inline CostReport cost_increase_alphamax_udp(const PredictionEnsemble& ens, const SystemModel& model,
                                             const ControllerGain& gain, const VectorXd& x,
                                             Interval region = Interval{0.0, 1.0}) {
  if (gain.protocol != Protocol::UdpLike) fail(ErrorKind::Config, "cost_increase_alphamax_udp needs a UDP-like gain");
  const AttackContext ctx(ens, model, gain, x, gain.nu_bar(0), region);
  const auto d = f_udp_derivs(ctx);
  if (d.convexity != Convexity::Concave) {
    fail(ErrorKind::RegimeInapplicable, "alpha_max regime needs a concave objective (f is " +
                                            std::string(to_string(d.convexity)) + ")");
  }
  const double alpha_max = alpha_max_udp(ctx);
  if (!region.contains(alpha_max)) {
    fail(ErrorKind::RegimeInapplicable, "alpha_max = " + std::to_string(alpha_max) + " lies outside the region");
  }
  const VectorXd fx = ens.f * x;
  const double q = 2.0 * ctx.form(gain.G) - ctx.diag_form(model.psi_diag + ens.delta_gamma_diag);
  const double bonus = -0.25 * q * q / d.h;
  auto r = detail::finish(nominal_expected_cost(ens, model, gain, x), detail::fgf(gain, fx, gain.nu_bar) + bonus,
                          Regime::AlphaMax, gain.protocol);
  r.alpha = alpha_max;
  return r;
}

/// All packets delivered, TCP-like:
/// increase = u*'(delta_gamma (I - 2 nu_bar) - Psi)u* + x'F'G^{-1} nu_bar F x.
/// `condition` is the sign of the first term.
inline CostReport cost_increase_alpha1_tcp(const PredictionEnsemble& ens, const SystemModel& model,
                                           const ControllerGain& gain, const VectorXd& x) {
  if (gain.protocol != Protocol::TcpLike) fail(ErrorKind::Config, "cost_increase_alpha1_tcp needs a TCP-like gain");
  const VectorXd fx = ens.f * x;
  const VectorXd u = optimal_input_sequence(gain, ens, x);
  const VectorXd ones = VectorXd::Ones(u.size());
  const double first =
      u.dot(ens.delta_gamma * (ones - 2.0 * gain.nu_bar).cwiseProduct(u)) - u.cwiseAbs2().dot(model.psi_diag);
  auto r = detail::finish(nominal_expected_cost(ens, model, gain, x), first + detail::fgf(gain, fx, gain.nu_bar),
                          Regime::AlphaOne, gain.protocol);
  r.condition = first > 0.0;
  r.alpha = 1.0;
  return r;
}

/// General plan: increase = expected_attacked_cost(plan) - expected cost with
/// the operator's means.
inline CostReport cost_report(const PredictionEnsemble& ens, const SystemModel& model, const ControllerGain& gain,
                              const VectorXd& x, const AttackPlan& plan) {
  CostReport r;
  r.baseline = nominal_expected_cost(ens, model, gain, x);
  r.attacked = expected_attacked_cost(ens, model, gain, x, plan);
  r.increase = r.attacked - r.baseline;
  r.regime = Regime::GeneralAlpha;
  r.protocol = gain.protocol;
  if (plan.kind == AttackPlan::Kind::IidScalar) r.alpha = plan.alpha;
  return r;
}

}  // namespace dosattack
