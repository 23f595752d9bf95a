#pragma once

// Instance generators and brute-force oracles shared by the unit tests and
// the acceptance binary. Nothing here calls the closed forms under test.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "dosattack/channel.hpp"
#include "dosattack/controller.hpp"
#include "dosattack/core_model.hpp"
#include "dosattack/rng.hpp"

namespace testsupport {

using dosattack::MatrixXd;
using dosattack::Protocol;
using dosattack::SystemModel;
using dosattack::VectorXd;

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed, 0xA5A5u, 0x5A5Au) {}

  double uniform(double lo, double hi) { return lo + (hi - lo) * rng_.uniform(); }
  double normal() { return normal_(rng_); }
  int integer(int lo, int hi) { return lo + static_cast<int>(rng_.uniform() * (hi - lo + 1)); }

  MatrixXd gaussian(Eigen::Index r, Eigen::Index c, double scale) {
    MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = scale * normal();
    return m;
  }
  VectorXd uniform_vector(Eigen::Index n, double lo, double hi) {
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(lo, hi);
    return v;
  }
  MatrixXd spd(Eigen::Index n, double floor) {
    const MatrixXd g = gaussian(n, n, 0.3);
    return g * g.transpose() + floor * MatrixXd::Identity(n, n);
  }

 private:
  dosattack::Philox4x32 rng_;
  std::normal_distribution<double> normal_;
};

inline SystemModel random_model(Sampler& s, Eigen::Index n, Eigen::Index m, int N, bool diagonal_a = false) {
  SystemModel model;
  model.A = s.gaussian(n, n, 0.45);
  if (diagonal_a) model.A = MatrixXd(model.A.diagonal().asDiagonal());
  model.B = s.gaussian(n, m, 0.8);
  model.sigma_w = 0.05 * s.spd(n, 0.2);
  model.sigma_x = 0.1 * s.spd(n, 0.2);
  model.x_bar = s.uniform_vector(n, -1.5, 1.5);
  model.q_diag = s.uniform_vector(n, 0.5, 2.0);
  model.omega_diag = s.uniform_vector(N * n, 0.5, 2.0);
  model.psi_diag = s.uniform_vector(N * m, 0.2, 2.0);
  model.horizon = N;
  return model;
}

/// The two-state plant used for the reference experiments, with the
/// artifact-default penalties (identity) and noise (0.01 I).
inline SystemModel reference_plant(int N) {
  SystemModel model;
  model.A.resize(2, 2);
  model.A << 1.03, 0.005, 0.35, 0.5;
  model.B = MatrixXd::Identity(2, 2);
  model.sigma_w = 0.01 * MatrixXd::Identity(2, 2);
  model.sigma_x = 0.01 * MatrixXd::Identity(2, 2);
  model.x_bar = VectorXd::Ones(2);
  model.q_diag = VectorXd::Ones(2);
  model.omega_diag = VectorXd::Ones(2 * N);
  model.psi_diag = VectorXd::Ones(2 * N);
  model.horizon = N;
  return model;
}

/// x_{k+1} = A x_k + B u_k + w_k iterated step by step.
inline VectorXd iterate_trajectory(const SystemModel& model, const VectorXd& x0, const VectorXd& u_stack,
                                   const VectorXd& w_stack) {
  const auto n = model.state_dim();
  const auto m = model.input_dim();
  VectorXd out(model.horizon * n);
  VectorXd x = x0;
  for (int k = 0; k < model.horizon; ++k) {
    x = model.A * x + model.B * u_stack.segment(k * m, m) + w_stack.segment(k * n, n);
    out.segment(k * n, n) = x;
  }
  return out;
}

/// Exact expectation, by enumerating every delivery pattern, of the horizon
/// cost x'Qx + chi'Omega chi + (v u)'Psi(v u) where chi is the predicted
/// state stack and entry j of the horizon is delivered with probability p_j.
/// Noise enters only through its covariance, so that term is added in
/// closed form as sum_k tr(Lambda_k' Omega Lambda_k Sigma_W) using the
/// stacked Lambda built here by repeated multiplication.
inline double enumerated_expected_cost(const SystemModel& model, const VectorXd& x, const VectorXd& u,
                                       const VectorXd& p) {
  const auto n = model.state_dim();
  const auto m = model.input_dim();
  const int N = model.horizon;
  const auto d = N * m;
  double total = 0.0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << d); ++mask) {
    double prob = 1.0;
    VectorXd delivered(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      const bool on = (mask >> j) & 1u;
      prob *= on ? p(j) : 1.0 - p(j);
      delivered(j) = on ? u(j) : 0.0;
    }
    if (prob == 0.0) continue;
    double cost = x.dot(model.q_diag.cwiseProduct(x));
    VectorXd state = x;
    for (int k = 0; k < N; ++k) {
      const VectorXd uk = delivered.segment(k * m, m);
      state = model.A * state + model.B * uk;
      cost += state.cwiseAbs2().dot(model.omega_diag.segment(k * n, n));
      cost += uk.cwiseAbs2().dot(model.psi_diag.segment(k * m, m));
    }
    total += prob * cost;
  }
  // Noise: w_j enters the state at steps k >= j through A^{k-j}.
  double noise = 0.0;
  for (int k = 0; k < N; ++k) {
    MatrixXd power = MatrixXd::Identity(n, n);
    for (int j = k; j >= 0; --j) {
      const MatrixXd weighted = power.transpose() * model.omega_diag.segment(k * n, n).asDiagonal() * power;
      noise += (weighted * model.sigma_w).trace();
      power = model.A * power;
    }
  }
  return total + noise;
}

/// Dense grid argmax of a scalar function over [lo, hi] with the given step.
struct GridMax {
  double alpha = 0.0;
  double value = -INFINITY;
};

inline GridMax grid_argmax(const std::function<double(double)>& fn, double lo, double hi, double step) {
  GridMax best;
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long i = 0; i <= count + 1; ++i) {
    const double a = std::min(hi, lo + static_cast<double>(i) * step);
    const double v = fn(a);
    if (v > best.value) {
      best.value = v;
      best.alpha = a;
    }
    if (a == hi) break;
  }
  return best;
}

}  // namespace testsupport
