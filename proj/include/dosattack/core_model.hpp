#pragma once

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/SVD>

#include "dosattack/errors.hpp"

namespace dosattack {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Plant, noise and penalty description of a lossy-actuation LQG/MPC loop.
///
/// The diagonal penalties are stored as their diagonals: `q_diag` has n
/// entries, `omega_diag` has N*n (one n-block per predicted step) and
/// `psi_diag` has N*m.
struct SystemModel {
  MatrixXd A;
  MatrixXd B;
  MatrixXd sigma_w;
  MatrixXd sigma_x;
  VectorXd x_bar;
  VectorXd q_diag;
  VectorXd omega_diag;
  VectorXd psi_diag;
  int horizon = 1;

  Eigen::Index state_dim() const { return A.rows(); }
  Eigen::Index input_dim() const { return B.cols(); }
  Eigen::Index horizon_states() const { return horizon * state_dim(); }
  Eigen::Index horizon_inputs() const { return horizon * input_dim(); }

  /// Throws `Error` (Dimension or Config) naming the offending field.
  void validate() const;

  /// Diagonal penalty blocks for one predicted step.
  VectorXd omega_block(Eigen::Index step) const { return omega_diag.segment(step * state_dim(), state_dim()); }
  VectorXd psi_block(Eigen::Index step) const { return psi_diag.segment(step * input_dim(), input_dim()); }
};

namespace detail {

inline bool is_spd(const MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  if (!m.isApprox(m.transpose(), 1e-12)) return false;
  Eigen::LLT<MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

inline MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

}  // namespace detail

inline void SystemModel::validate() const {
  const auto n = A.rows();
  const auto m = B.cols();
  require_dims(n > 0 && A.cols() == n, "A", "must be square and non-empty");
  require_dims(B.rows() == n && m > 0, "B", "must have n rows and at least one column");
  if (horizon < 1) fail(ErrorKind::Config, "horizon N must be a positive integer");
  require_dims(sigma_w.rows() == n && sigma_w.cols() == n, "Sigma_W", "must be n x n");
  require_dims(sigma_x.rows() == n && sigma_x.cols() == n, "Sigma_X", "must be n x n");
  require_dims(x_bar.size() == n, "X_bar", "must have n entries");
  require_dims(q_diag.size() == n, "Q", "must have n diagonal entries");
  require_dims(omega_diag.size() == horizon * n, "Omega", "must have N*n diagonal entries");
  require_dims(psi_diag.size() == horizon * m, "Psi", "must have N*m diagonal entries");
  if (!detail::is_spd(sigma_w)) fail(ErrorKind::Config, "Sigma_W must be symmetric positive definite");
  if (!detail::is_spd(sigma_x)) fail(ErrorKind::Config, "Sigma_X must be symmetric positive definite");
  if ((q_diag.array() <= 0.0).any()) fail(ErrorKind::Config, "Q must have strictly positive diagonal entries");
  if ((omega_diag.array() <= 0.0).any()) fail(ErrorKind::Config, "Omega must have strictly positive diagonal entries");
  if ((psi_diag.array() <= 0.0).any()) fail(ErrorKind::Config, "Psi must have strictly positive diagonal entries");
}

/// Stacked horizon matrices and their Omega-weighted Gramians.
struct PredictionEnsemble {
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  int horizon = 0;

  MatrixXd phi;     // Nn x n
  MatrixXd gamma;   // Nn x Nm, block lower triangular
  MatrixXd lambda;  // Nn x Nn, block lower triangular, identity diagonal blocks

  MatrixXd delta_phi;     // phi' Omega phi
  MatrixXd delta_gamma;   // gamma' Omega gamma
  MatrixXd delta_lambda;  // lambda' Omega lambda
  MatrixXd f;             // gamma' Omega phi

  VectorXd delta_gamma_diag;  // diagonal of I (.) delta_gamma
  MatrixXd delta_h;           // delta_gamma - (I (.) delta_gamma)

  MatrixXd sigma_w;  // one diagonal block of the horizon noise covariance

  /// Dense block-diagonal horizon noise covariance (N copies of Sigma_W).
  MatrixXd horizon_noise_covariance() const {
    MatrixXd out = MatrixXd::Zero(horizon * n, horizon * n);
    for (int i = 0; i < horizon; ++i) out.block(i * n, i * n, n, n) = sigma_w;
    return out;
  }

  /// tr(delta_lambda * Sigma_Xi), using only the diagonal blocks.
  double noise_cost() const {
    double acc = 0.0;
    for (int i = 0; i < horizon; ++i) {
      acc += (delta_lambda.block(i * n, i * n, n, n) * sigma_w).trace();
    }
    return acc;
  }
};

/// Powers A^0..A^count by repeated multiplication.
inline std::vector<MatrixXd> matrix_powers(const MatrixXd& A, int count) {
  std::vector<MatrixXd> powers;
  powers.reserve(static_cast<std::size_t>(count) + 1);
  powers.push_back(MatrixXd::Identity(A.rows(), A.cols()));
  for (int i = 1; i <= count; ++i) powers.push_back(A * powers.back());
  return powers;
}

inline PredictionEnsemble build_prediction_ensemble(const SystemModel& model) {
  model.validate();
  const auto n = model.state_dim();
  const auto m = model.input_dim();
  const int N = model.horizon;

  PredictionEnsemble ens;
  ens.n = n;
  ens.m = m;
  ens.horizon = N;
  ens.sigma_w = model.sigma_w;

  const auto powers = matrix_powers(model.A, N);
  ens.phi = MatrixXd::Zero(N * n, n);
  ens.gamma = MatrixXd::Zero(N * n, N * m);
  ens.lambda = MatrixXd::Zero(N * n, N * n);
  for (int i = 0; i < N; ++i) {
    ens.phi.block(i * n, 0, n, n) = powers[i + 1];
    for (int j = 0; j <= i; ++j) {
      ens.gamma.block(i * n, j * m, n, m) = powers[i - j] * model.B;
      ens.lambda.block(i * n, j * n, n, n) = powers[i - j];
    }
  }

  const auto omega = model.omega_diag.asDiagonal();
  const MatrixXd omega_phi = omega * ens.phi;
  const MatrixXd omega_gamma = omega * ens.gamma;
  ens.delta_phi = detail::symmetrize(ens.phi.transpose() * omega_phi);
  ens.delta_gamma = detail::symmetrize(ens.gamma.transpose() * omega_gamma);
  ens.delta_lambda = detail::symmetrize(ens.lambda.transpose() * (omega * ens.lambda));
  ens.f = ens.gamma.transpose() * omega_phi;

  ens.delta_gamma_diag = ens.delta_gamma.diagonal();
  ens.delta_h = ens.delta_gamma;
  ens.delta_h.diagonal().setZero();
  return ens;
}

/// x_{k+1} = A x + B diag(v) u + w. `v` holds the 0/1 diagonal of the loss
/// realization.
inline VectorXd step_plant(const SystemModel& model, const VectorXd& x, const VectorXd& u, const VectorXd& v,
                           const VectorXd& w) {
  require_dims(x.size() == model.state_dim(), "x", "state has wrong size");
  require_dims(u.size() == model.input_dim(), "u", "input has wrong size");
  require_dims(v.size() == model.input_dim(), "v", "loss realization has wrong size");
  require_dims(w.size() == model.state_dim(), "w", "noise has wrong size");
  VectorXd delivered = v.cwiseProduct(u);
  VectorXd next = model.A * x;
  next.noalias() += model.B * delivered;
  next += w;
  return next;
}

struct ReachabilityReport {
  bool reachable = false;
  Eigen::Index rank = 0;
  Eigen::Index max_rank = 0;
  double tolerance = 0.0;
  VectorXd singular_values;
};

/// Rank test on [B, AB, ..., A^{N-1}B]. The attainable rank of an
/// n x Nm matrix is min(n, Nm).
inline ReachabilityReport check_reachable(const SystemModel& model) {
  const auto n = model.state_dim();
  const auto m = model.input_dim();
  const int N = std::max(model.horizon, 1);
  MatrixXd ctrb(n, N * m);
  MatrixXd block = model.B;
  for (int i = 0; i < N; ++i) {
    ctrb.block(0, i * m, n, m) = block;
    block = model.A * block;
  }
  Eigen::JacobiSVD<MatrixXd> svd(ctrb);
  ReachabilityReport report;
  report.singular_values = svd.singularValues();
  const double largest = report.singular_values.size() ? report.singular_values(0) : 0.0;
  report.tolerance = static_cast<double>(std::max(ctrb.rows(), ctrb.cols())) *
                     std::numeric_limits<double>::epsilon() * largest;
  report.rank = (report.singular_values.array() > report.tolerance).count();
  if (largest == 0.0) report.rank = 0;
  report.max_rank = std::min<Eigen::Index>(n, N * m);
  report.reachable = report.rank == report.max_rank;
  return report;
}

}  // namespace dosattack
