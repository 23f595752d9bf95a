#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string_view>
#include <thread>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "dosattack/attack_iid.hpp"
#include "dosattack/attack_nonstationary.hpp"
#include "dosattack/channel.hpp"
#include "dosattack/controller.hpp"
#include "dosattack/core_model.hpp"
#include "dosattack/rng.hpp"

namespace dosattack {

/// Immutable loop description shared by every episode of an experiment:
/// the model with its horizon matrices, the operator's gain, the channel and
/// the detector.
struct LoopSetup {
  SystemModel model;
  PredictionEnsemble ens;
  ChannelSpec channel;
  DetectionSpec detection;
  Protocol protocol = Protocol::UdpLike;
  ControllerGain gain;
  MatrixXd noise_factor;    // chol(Sigma_W)
  MatrixXd initial_factor;  // chol(Sigma_X)

  static std::shared_ptr<const LoopSetup> make(SystemModel model, ChannelSpec channel, DetectionSpec detection,
                                               Protocol protocol) {
    auto s = std::make_shared<LoopSetup>();
    s->ens = build_prediction_ensemble(model);
    channel.validate();
    detection.validate();
    require_dims(channel.means.size() == model.input_dim(), "M", "must have one mean per actuator");
    require_dims(detection.means.size() == model.input_dim(), "L", "must have one half-width per actuator");
    s->gain = control_gain(s->ens, model, channel.means, protocol);
    s->noise_factor = model.sigma_w.llt().matrixL();
    s->initial_factor = model.sigma_x.llt().matrixL();
    s->model = std::move(model);
    s->channel = std::move(channel);
    s->detection = std::move(detection);
    s->protocol = protocol;
    return s;
  }

  VectorXd region_lo() const {
    VectorXd lo(detection.means.size());
    for (Eigen::Index i = 0; i < lo.size(); ++i) lo(i) = detection.region(i).lo;
    return lo;
  }
  VectorXd region_hi() const {
    VectorXd hi(detection.means.size());
    for (Eigen::Index i = 0; i < hi.size(); ++i) hi(i) = detection.region(i).hi;
    return hi;
  }

  AttackContext attack_context(const VectorXd& x) const {
    return AttackContext(ens, model, gain, x, channel.means, region_lo(), region_hi());
  }
};

enum class AttackKind { None, Iid, NonStationary };
/// Non-stationary attacker: re-solve the schedule every step and apply its
/// first block, or solve once at onset and cycle through the schedule.
enum class AttackReplan { Receding, Tiled };
/// Controller: receding horizon (re-solve every step), hold the plan for N
/// steps before re-solving, or send nothing.
enum class ControlPolicy { RecedingHorizon, HoldPlan, ZeroInput };
enum class InitialState { Mean, Sampled };

inline std::string_view to_string(AttackKind k) {
  switch (k) {
    case AttackKind::None: return "none";
    case AttackKind::Iid: return "iid";
    case AttackKind::NonStationary: return "nonstationary";
  }
  return "unknown";
}

struct AttackSpec {
  AttackKind kind = AttackKind::None;
  /// IID only: use these per-actuator means instead of synthesizing.
  std::optional<VectorXd> fixed_means;
  /// Synthesize from X_bar instead of the state at onset.
  bool state_free = false;
  AttackReplan replan = AttackReplan::Receding;
  long onset = 0;
  BoxQPSettings solver;
};

struct EpisodeConfig {
  std::shared_ptr<const LoopSetup> setup;
  AttackSpec attack;
  long steps = 50;
  std::uint64_t seed = 1;
  std::uint64_t realization = 0;
  ControlPolicy control = ControlPolicy::RecedingHorizon;
  InitialState initial = InitialState::Sampled;
  bool halt_on_detect = false;

  void validate() const {
    if (!setup) fail(ErrorKind::Config, "episode has no loop setup");
    if (steps < 1) fail(ErrorKind::Config, "episode length T must be >= 1");
    if (attack.onset < 0 || attack.onset > steps) fail(ErrorKind::Config, "attack onset must lie in [0, T]");
    if (attack.fixed_means) {
      const auto& m = *attack.fixed_means;
      require_dims(m.size() == setup->model.input_dim(), "attack means", "must have one mean per actuator");
      if ((m.array() < 0.0).any() || (m.array() > 1.0).any()) {
        fail(ErrorKind::InfeasibleRegion, "fixed attack means must lie in [0, 1]");
      }
    }
  }
};

struct SimulationTrace {
  std::vector<VectorXd> states;       // x_0 .. x_T
  std::vector<VectorXd> inputs;       // commanded u_k
  std::vector<VectorXd> losses;       // v_k (1 = delivered)
  std::vector<VectorXd> noises;       // w_k
  std::vector<VectorXd> means;        // delivery means in force at step k
  std::vector<double> stage_costs;
  std::vector<double> cumulative;     // running sum of stage costs
  std::vector<VectorXd> estimates;    // M_hat after step k
  std::optional<long> first_detection;  // number of observations at first alarm
  bool final_in_region = true;
  double terminal_cost = 0.0;           // cumulative cost at the last step
};

/// Realized per-step cost: x'Qx + (v u)' Psi_1 (v u) + x_next' Omega_1 x_next.
inline double stage_cost(const SystemModel& model, const VectorXd& x, const VectorXd& u, const VectorXd& v,
                         const VectorXd& x_next) {
  const VectorXd delivered = v.cwiseProduct(u);
  return x.cwiseAbs2().dot(model.q_diag) + delivered.cwiseAbs2().dot(model.psi_block(0)) +
         x_next.cwiseAbs2().dot(model.omega_block(0));
}

namespace detail {

/// Horizon-cost ledger for a plan held over N steps: Q on the state where
/// the plan was made, then the step-i blocks of Omega and Psi.
inline double plan_stage_cost(const SystemModel& model, int plan_step, const VectorXd& x, const VectorXd& u,
                              const VectorXd& v, const VectorXd& x_next) {
  const VectorXd delivered = v.cwiseProduct(u);
  double cost = delivered.cwiseAbs2().dot(model.psi_block(plan_step)) +
                x_next.cwiseAbs2().dot(model.omega_block(plan_step));
  if (plan_step == 0) cost += x.cwiseAbs2().dot(model.q_diag);
  return cost;
}

/// Per-actuator delivery means chosen by the attacker, one call per step.
class Attacker {
 public:
  Attacker(const LoopSetup& setup, const AttackSpec& spec) : setup_(setup), spec_(spec) {}

  VectorXd means_at(long k, const VectorXd& x) {
    if (spec_.kind == AttackKind::None || k < spec_.onset) return setup_.channel.means;
    if (spec_.kind == AttackKind::Iid) {
      if (!iid_means_) iid_means_ = synthesize_iid(spec_.state_free ? setup_.model.x_bar : x);
      return *iid_means_;
    }
    if (spec_.replan == AttackReplan::Receding) return synthesize_schedule(x).means.front();
    if (!tiled_) tiled_ = synthesize_schedule(spec_.state_free ? setup_.model.x_bar : x);
    const auto idx = static_cast<std::size_t>((k - spec_.onset) % static_cast<long>(tiled_->means.size()));
    return tiled_->means[idx];
  }

 private:
  VectorXd synthesize_iid(const VectorXd& x) const {
    if (spec_.fixed_means) return *spec_.fixed_means;
    const auto ctx = setup_.attack_context(x);
    if (ctx.shared()) return VectorXd::Constant(setup_.ens.m, optimal_alpha(ctx).alpha_star);
    const auto schedule = solve_iid_constrained(build_qp(ctx), spec_.solver);
    return schedule.means.front();
  }

  AttackSchedule synthesize_schedule(const VectorXd& x) const {
    const auto ctx = setup_.attack_context(x);
    return solve_box_qp_max(build_qp(ctx), spec_.solver);
  }

  const LoopSetup& setup_;
  const AttackSpec& spec_;
  std::optional<VectorXd> iid_means_;
  std::optional<AttackSchedule> tiled_;
};

template <typename Rng>
VectorXd standard_normal(Eigen::Index n, Rng& rng, std::normal_distribution<double>& dist) {
  VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = dist(rng);
  return z;
}

}  // namespace detail

/// One closed-loop episode. Random streams are derived from (seed,
/// realization) only, so two configs that differ in attack or controller
/// still see identical noise and identical loss uniforms.
inline SimulationTrace run_episode(const EpisodeConfig& cfg) {
  cfg.validate();
  const LoopSetup& s = *cfg.setup;
  const auto& model = s.model;
  const auto n = model.state_dim();
  const auto m = model.input_dim();

  auto noise_rng = make_stream(cfg.seed, cfg.realization, StreamTag::ProcessNoise);
  auto init_rng = make_stream(cfg.seed, cfg.realization, StreamTag::InitialState);
  std::vector<Philox4x32> loss_rngs;
  loss_rngs.reserve(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    loss_rngs.push_back(make_stream(cfg.seed, cfg.realization, StreamTag::Losses, static_cast<std::uint32_t>(i)));
  }
  std::normal_distribution<double> noise_dist;
  std::normal_distribution<double> init_dist;

  SimulationTrace trace;
  VectorXd x = model.x_bar;
  if (cfg.initial == InitialState::Sampled) x += s.initial_factor * detail::standard_normal(n, init_rng, init_dist);
  trace.states.push_back(x);

  detail::Attacker attacker(s, cfg.attack);
  MonitorState monitor = MonitorState::empty(m);
  VectorXd plan;
  double running = 0.0;

  for (long k = 0; k < cfg.steps; ++k) {
    int plan_step = 0;
    VectorXd u;
    switch (cfg.control) {
      case ControlPolicy::RecedingHorizon:
        u = apply_receding_horizon(optimal_input_sequence(s.gain, s.ens, x), m);
        break;
      case ControlPolicy::HoldPlan:
        plan_step = static_cast<int>(k % model.horizon);
        if (plan_step == 0) plan = optimal_input_sequence(s.gain, s.ens, x);
        u = plan.segment(plan_step * m, m);
        break;
      case ControlPolicy::ZeroInput:
        u = VectorXd::Zero(m);
        break;
    }

    const VectorXd means = attacker.means_at(k, x);
    VectorXd uniforms(m);
    for (Eigen::Index i = 0; i < m; ++i) uniforms(i) = loss_rngs[static_cast<std::size_t>(i)].uniform();
    const VectorXd v = losses_from_uniforms(means, uniforms);
    const VectorXd w = s.noise_factor * detail::standard_normal(n, noise_rng, noise_dist);
    const VectorXd next = step_plant(model, x, u, v, w);

    const double cost = cfg.control == ControlPolicy::HoldPlan ? detail::plan_stage_cost(model, plan_step, x, u, v, next)
                                                                : stage_cost(model, x, u, v, next);
    running += cost;

    monitor = update_monitor(std::move(monitor), v);
    const VectorXd estimate = *monitor.estimate();
    const bool inside = in_safe_region(estimate, s.detection.means, s.detection.half_widths);
    if (monitor.k >= s.detection.k_min && !inside && !trace.first_detection) trace.first_detection = monitor.k;
    trace.final_in_region = inside;

    trace.inputs.push_back(u);
    trace.losses.push_back(v);
    trace.noises.push_back(w);
    trace.means.push_back(means);
    trace.stage_costs.push_back(cost);
    trace.cumulative.push_back(running);
    trace.estimates.push_back(estimate);
    trace.states.push_back(next);
    x = next;

    if (cfg.halt_on_detect && trace.first_detection) break;
  }
  trace.terminal_cost = running;
  return trace;
}

struct RealizationSummary {
  double terminal_cost = 0.0;
  bool detected = false;
  long first_detection = 0;
  bool final_in_region = true;
  double delivered_fraction = 0.0;  // mean of all v entries
};

struct AggregateReport {
  std::size_t realizations = 0;
  long steps = 0;
  std::vector<VectorXd> mean_states;      // x_0 .. x_T averaged
  std::vector<double> mean_cumulative;    // running cost averaged (index k = after step k)
  double mean_terminal_cost = 0.0;
  double se_terminal_cost = 0.0;
  double detection_rate = 0.0;
  double mean_first_detection = 0.0;      // over detected realizations; 0 when none
  double final_out_of_region_rate = 0.0;
  std::vector<RealizationSummary> per_realization;
};

struct PairedDifference {
  double mean = 0.0;
  double se = 0.0;
};

inline double standard_error(const std::vector<double>& values) {
  const auto n = static_cast<double>(values.size());
  if (values.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (n - 1.0) / n);
}

/// Mean and standard error of the per-realization differences a_r - b_r.
inline PairedDifference paired_difference(const AggregateReport& a, const AggregateReport& b) {
  if (a.per_realization.size() != b.per_realization.size()) {
    fail(ErrorKind::Config, "paired comparison needs equal realization counts");
  }
  std::vector<double> diffs;
  diffs.reserve(a.per_realization.size());
  for (std::size_t r = 0; r < a.per_realization.size(); ++r) {
    diffs.push_back(a.per_realization[r].terminal_cost - b.per_realization[r].terminal_cost);
  }
  PairedDifference out;
  for (double d : diffs) out.mean += d;
  out.mean /= static_cast<double>(diffs.size());
  out.se = standard_error(diffs);
  return out;
}

namespace detail {

struct EpisodeDigest {
  RealizationSummary summary;
  std::vector<VectorXd> states;
  std::vector<double> cumulative;
};

inline EpisodeDigest digest(const SimulationTrace& t) {
  EpisodeDigest d;
  d.summary.terminal_cost = t.terminal_cost;
  d.summary.detected = t.first_detection.has_value();
  d.summary.first_detection = t.first_detection.value_or(0);
  d.summary.final_in_region = t.final_in_region;
  double delivered = 0.0;
  double count = 0.0;
  for (const auto& v : t.losses) {
    delivered += v.sum();
    count += static_cast<double>(v.size());
  }
  d.summary.delivered_fraction = count > 0 ? delivered / count : 0.0;
  d.states = t.states;
  d.cumulative = t.cumulative;
  return d;
}

}  // namespace detail

/// R independent realizations (realization index r uses streams derived from
/// (seed, r)). Workers only fill per-index slots; the reduction runs in index
/// order afterwards, so results do not depend on the worker count.
inline AggregateReport monte_carlo(const EpisodeConfig& base, std::size_t realizations, unsigned workers = 0) {
  base.validate();
  if (realizations < 1) fail(ErrorKind::Config, "realization count R must be >= 1");
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, realizations));

  std::vector<detail::EpisodeDigest> digests(realizations);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      EpisodeConfig cfg = base;
      cfg.realization = base.realization + r;
      digests[r] = detail::digest(run_episode(cfg));
    }
  };
  if (workers == 1) {
    work(0, realizations);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (realizations + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(realizations, begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
  }

  AggregateReport rep;
  rep.realizations = realizations;
  rep.steps = base.steps;
  std::vector<double> terminal;
  terminal.reserve(realizations);
  std::size_t longest = 0;
  for (const auto& d : digests) longest = std::max(longest, d.states.size());
  std::vector<double> state_counts(longest, 0.0);
  std::vector<double> cost_counts(longest > 0 ? longest - 1 : 0, 0.0);
  rep.mean_states.assign(longest, VectorXd::Zero(base.setup->model.state_dim()));
  rep.mean_cumulative.assign(cost_counts.size(), 0.0);
  double detections = 0.0;
  double detection_steps = 0.0;
  double out_of_region = 0.0;
  for (const auto& d : digests) {
    for (std::size_t k = 0; k < d.states.size(); ++k) {
      rep.mean_states[k] += d.states[k];
      state_counts[k] += 1.0;
    }
    for (std::size_t k = 0; k < d.cumulative.size(); ++k) {
      rep.mean_cumulative[k] += d.cumulative[k];
      cost_counts[k] += 1.0;
    }
    terminal.push_back(d.summary.terminal_cost);
    rep.mean_terminal_cost += d.summary.terminal_cost;
    if (d.summary.detected) {
      detections += 1.0;
      detection_steps += static_cast<double>(d.summary.first_detection);
    }
    if (!d.summary.final_in_region) out_of_region += 1.0;
    rep.per_realization.push_back(d.summary);
  }
  for (std::size_t k = 0; k < longest; ++k) rep.mean_states[k] /= state_counts[k];
  for (std::size_t k = 0; k < cost_counts.size(); ++k) rep.mean_cumulative[k] /= cost_counts[k];
  const auto R = static_cast<double>(realizations);
  rep.mean_terminal_cost /= R;
  rep.se_terminal_cost = standard_error(terminal);
  rep.detection_rate = detections / R;
  rep.mean_first_detection = detections > 0 ? detection_steps / detections : 0.0;
  rep.final_out_of_region_rate = out_of_region / R;
  return rep;
}

}  // namespace dosattack
