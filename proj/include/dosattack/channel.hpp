#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Dense>

#include "dosattack/errors.hpp"
#include "dosattack/rng.hpp"

namespace dosattack {

using Eigen::VectorXd;

/// Closed interval of admissible channel means.
struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
  double width() const { return hi - lo; }
};

/// Slack applied to the inclusive region test so that an estimate sitting on
/// the boundary (e.g. 0.8 against 0.7 + 0.1) is not rejected by rounding.
inline constexpr double kBoundarySlack = 64.0 * std::numeric_limits<double>::epsilon();

/// [mu - eps, mu + eps] intersected with the probability range [0, 1].
inline Interval safe_interval(double mu, double eps) {
  return Interval{std::max(0.0, mu - eps), std::min(1.0, mu + eps)};
}

/// Per-actuator delivery means. `shared` marks a single channel carrying all
/// actuators: every actuator then has the same mean and the attacker controls
/// one scalar. Deliveries are still drawn independently per actuator.
struct ChannelSpec {
  VectorXd means;
  bool shared = false;

  void validate() const {
    if (means.size() == 0) fail(ErrorKind::Config, "channel means must not be empty");
    if ((means.array() < 0.0).any() || (means.array() >= 1.0).any()) {
      fail(ErrorKind::Config, "channel means must lie in [0, 1)");
    }
    if (shared && (means.array() != means(0)).any()) {
      fail(ErrorKind::Config, "a shared channel needs identical means on every actuator");
    }
  }
};

struct DetectionSpec {
  VectorXd means;        // nominal M
  VectorXd half_widths;  // diagonal of L
  long k_min = 1;        // first step at which the detector is armed

  void validate() const {
    require_dims(means.size() == half_widths.size(), "L", "must match the number of channel means");
    if ((half_widths.array() < 0.0).any() || (half_widths.array() > 1.0).any()) {
      fail(ErrorKind::Config, "detection half-widths must lie in [0, 1]");
    }
    if (k_min < 1) fail(ErrorKind::Config, "detector arming step must be >= 1");
  }

  Interval region(Eigen::Index channel) const { return safe_interval(means(channel), half_widths(channel)); }
};

/// Running per-channel delivery counts and the resulting mean estimate.
struct MonitorState {
  long k = 0;
  VectorXd counts;

  static MonitorState empty(Eigen::Index channels) { return MonitorState{0, VectorXd::Zero(channels)}; }

  /// count_i / k; empty before the first observation.
  std::optional<VectorXd> estimate() const {
    if (k == 0) return std::nullopt;
    return counts / static_cast<double>(k);
  }
};

/// Independent Bernoulli draws, entry i delivered with probability means(i).
template <typename Rng>
VectorXd sample_losses(const VectorXd& means, Rng& rng) {
  VectorXd v(means.size());
  for (Eigen::Index i = 0; i < means.size(); ++i) v(i) = rng.uniform() < means(i) ? 1.0 : 0.0;
  return v;
}

/// Same as `sample_losses` but from pre-drawn uniforms, so two scenarios can
/// share loss randomness.
inline VectorXd losses_from_uniforms(const VectorXd& means, const VectorXd& uniforms) {
  require_dims(means.size() == uniforms.size(), "uniforms", "must match the number of channels");
  return (uniforms.array() < means.array()).cast<double>().matrix();
}

inline MonitorState update_monitor(MonitorState state, const VectorXd& v) {
  require_dims(state.counts.size() == v.size(), "v", "loss realization does not match monitor width");
  state.counts += v;
  state.k += 1;
  return state;
}

/// |M_hat_ii - M_ii| <= eps_i for every channel (closed region).
inline bool in_safe_region(const VectorXd& m_hat, const VectorXd& nominal, const VectorXd& half_widths) {
  require_dims(m_hat.size() == nominal.size() && nominal.size() == half_widths.size(), "M_hat",
               "estimate, nominal means and half-widths must have equal length");
  for (Eigen::Index i = 0; i < m_hat.size(); ++i) {
    if (std::abs(m_hat(i) - nominal(i)) > half_widths(i) + kBoundarySlack) return false;
  }
  return true;
}

/// Two-sided Hoeffding bound on P(|mean_k - mu| >= margin) for k IID
/// Bernoulli draws.
inline double hoeffding_bound(long k, double margin) {
  return 2.0 * std::exp(-2.0 * static_cast<double>(k) * margin * margin);
}

}  // namespace dosattack
