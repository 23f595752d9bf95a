#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/LU>

#include "dosattack/core_model.hpp"

namespace dosattack {

/// TCP-like controllers see past loss realizations, UDP-like ones only states.
enum class Protocol { TcpLike, UdpLike };

inline std::string_view to_string(Protocol p) { return p == Protocol::TcpLike ? "TCP" : "UDP"; }

/// Repeats the per-actuator means along the N-step horizon diagonal.
inline VectorXd horizon_means(const VectorXd& channel_means, int horizon) {
  return channel_means.replicate(horizon, 1);
}

/// Factorization of the gain kernel G. Symmetric kernels (scalar channel
/// means) go through Cholesky; otherwise G = Psi + delta_gamma * diag(nu) is
/// not symmetric and a pivoted LU is used.
class GainSolver {
 public:
  GainSolver() = default;

  explicit GainSolver(const MatrixXd& g) {
    const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
    symmetric_ = (g - g.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
    if (symmetric_) {
      llt_.compute(g);
      if (llt_.info() != Eigen::Success) {
        fail(ErrorKind::Numerical, "gain kernel G is not positive definite (Cholesky failed)");
      }
      rcond_ = llt_.rcond();
    } else {
      lu_.compute(g);
      rcond_ = lu_.rcond();
    }
    if (!(rcond_ > std::numeric_limits<double>::epsilon())) {
      fail(ErrorKind::Numerical,
           "gain kernel G is numerically singular (rcond=" + std::to_string(rcond_) + ")");
    }
  }

  template <typename Rhs>
  MatrixXd solve(const Eigen::MatrixBase<Rhs>& rhs) const {
    return symmetric_ ? MatrixXd(llt_.solve(rhs)) : MatrixXd(lu_.solve(rhs));
  }

  bool symmetric() const { return symmetric_; }
  double condition_estimate() const { return 1.0 / rcond_; }

 private:
  bool symmetric_ = true;
  double rcond_ = 0.0;
  Eigen::LLT<MatrixXd> llt_;
  Eigen::PartialPivLU<MatrixXd> lu_;
};

struct ControllerGain {
  MatrixXd G;
  Protocol protocol = Protocol::TcpLike;
  VectorXd nu_bar;  // Nm diagonal of the operator's assumed mean
  GainSolver solver;

  double condition_number() const { return solver.condition_estimate(); }
};

/// G = Psi + delta_gamma nu_bar (TCP-like), plus (I (.) delta_gamma)(I - nu_bar)
/// for UDP-like. `nu_bar` is the full Nm horizon diagonal.
inline ControllerGain control_gain_horizon(const PredictionEnsemble& ens, const SystemModel& model,
                                           const VectorXd& nu_bar, Protocol protocol) {
  require_dims(nu_bar.size() == ens.horizon * ens.m, "nu_bar", "must have N*m entries");
  require_dims(model.psi_diag.size() == nu_bar.size(), "Psi", "must have N*m diagonal entries");
  if ((nu_bar.array() < 0.0).any() || (nu_bar.array() > 1.0).any()) {
    fail(ErrorKind::Config, "channel means must lie in [0, 1]");
  }
  ControllerGain gain;
  gain.protocol = protocol;
  gain.nu_bar = nu_bar;
  gain.G = ens.delta_gamma * nu_bar.asDiagonal();
  gain.G.diagonal() += model.psi_diag;
  if (protocol == Protocol::UdpLike) {
    gain.G.diagonal() += ens.delta_gamma_diag.cwiseProduct(VectorXd::Ones(nu_bar.size()) - nu_bar);
  }
  gain.solver = GainSolver(gain.G);
  return gain;
}

/// Gain from per-actuator channel means M (m entries).
inline ControllerGain control_gain(const PredictionEnsemble& ens, const SystemModel& model,
                                   const VectorXd& channel_means, Protocol protocol) {
  require_dims(channel_means.size() == ens.m, "M", "must have m diagonal entries");
  return control_gain_horizon(ens, model, horizon_means(channel_means, ens.horizon), protocol);
}

/// Upsilon* = -G^{-1} F x.
inline VectorXd optimal_input_sequence(const ControllerGain& gain, const PredictionEnsemble& ens,
                                       const VectorXd& x) {
  require_dims(x.size() == ens.n, "x", "state has wrong size");
  require_dims(gain.G.rows() == ens.f.rows(), "G", "gain and ensemble come from different models");
  const VectorXd fx = ens.f * x;
  return -gain.solver.solve(fx).col(0);
}

/// First m entries of the horizon input sequence.
inline VectorXd apply_receding_horizon(const VectorXd& sequence, Eigen::Index m) {
  require_dims(m > 0 && sequence.size() >= m && sequence.size() % m == 0, "sequence",
               "length must be a positive multiple of m");
  return sequence.head(m);
}

/// Loss-dependent part of the expected horizon cost when the channel
/// delivers with horizon means `nu_alpha` while the controller plays
/// `u_star`:
///   u' diag(nu_alpha) (2 F x + (delta_gamma diag(nu_alpha) + Psi [+ D (I - diag(nu_alpha))]) u)
/// The bracketed Hadamard term is present for the UDP-like protocol only.
inline double expected_cost_term(const PredictionEnsemble& ens, const SystemModel& model, Protocol protocol,
                                 const VectorXd& u_star, const VectorXd& fx, const VectorXd& nu_alpha) {
  VectorXd inner = ens.delta_gamma * nu_alpha.cwiseProduct(u_star);
  inner += model.psi_diag.cwiseProduct(u_star);
  if (protocol == Protocol::UdpLike) {
    inner += ens.delta_gamma_diag.cwiseProduct(VectorXd::Ones(nu_alpha.size()) - nu_alpha).cwiseProduct(u_star);
  }
  inner += 2.0 * fx;
  return nu_alpha.cwiseProduct(u_star).dot(inner);
}

/// x'(Q + delta_phi)x + tr(delta_lambda Sigma_Xi): the part of the expected
/// cost no choice of channel statistics can change.
inline double attack_independent_cost(const PredictionEnsemble& ens, const SystemModel& model, const VectorXd& x) {
  return x.dot(ens.delta_phi * x) + x.dot(model.q_diag.cwiseProduct(x)) + ens.noise_cost();
}

/// Operator's expected cost with the channel behaving as assumed.
inline double nominal_expected_cost(const PredictionEnsemble& ens, const SystemModel& model,
                                    const ControllerGain& gain, const VectorXd& x) {
  const VectorXd u_star = optimal_input_sequence(gain, ens, x);
  const VectorXd fx = ens.f * x;
  return attack_independent_cost(ens, model, x) +
         expected_cost_term(ens, model, gain.protocol, u_star, fx, gain.nu_bar);
}

}  // namespace dosattack
