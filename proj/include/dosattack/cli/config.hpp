#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dosattack/sim_harness.hpp"

namespace dosattack::cli {

using nlohmann::json;

struct AttackBlock {
  AttackKind kind = AttackKind::None;
  std::optional<VectorXd> means;  // per-actuator fixed IID means
  bool state_free = false;
  AttackReplan replan = AttackReplan::Receding;
  long onset = 0;
};

struct SimulationBlock {
  long T = 50;
  std::size_t R = 1000;
  std::uint64_t seed = 1;
  ControlPolicy control = ControlPolicy::RecedingHorizon;
  InitialState initial = InitialState::Sampled;
  bool halt_on_detect = false;
  unsigned workers = 0;
};

struct OutputBlock {
  std::string directory = "out";
};

/// Everything one experiment needs. Diagonals are stored at full length
/// (Omega N*n, Psi N*m, M and L m) regardless of how they were written.
struct ExperimentConfig {
  SystemModel model;
  ChannelSpec channel;
  DetectionSpec detection;
  Protocol protocol = Protocol::UdpLike;
  std::optional<AttackBlock> attack;
  SimulationBlock simulation;
  OutputBlock output;

  bool operator==(const ExperimentConfig& o) const;
};

/// Schema violations collected over the whole document.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(ErrorKind::Config, join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string out = "invalid configuration:";
    for (const auto& s : p) out += "\n  - " + s;
    return out;
  }
  std::vector<std::string> problems_;
};

namespace detail {

class Reader {
 public:
  explicit Reader(std::vector<std::string>& problems) : problems_(problems) {}

  const json* field(const json& obj, const std::string& path, const char* key, bool required) {
    if (!obj.is_object()) return nullptr;
    const auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) problems_.push_back(path + "." + key + ": required field missing");
      return nullptr;
    }
    return &*it;
  }

  std::optional<double> number(const json& obj, const std::string& path, const char* key, bool required) {
    const json* v = field(obj, path, key, required);
    if (!v) return std::nullopt;
    if (!v->is_number()) {
      problems_.push_back(path + "." + key + ": expected a number");
      return std::nullopt;
    }
    return v->get<double>();
  }

  std::optional<long long> integer(const json& obj, const std::string& path, const char* key, bool required) {
    const json* v = field(obj, path, key, required);
    if (!v) return std::nullopt;
    if (!v->is_number_integer()) {
      problems_.push_back(path + "." + key + ": expected an integer");
      return std::nullopt;
    }
    return v->get<long long>();
  }

  std::optional<bool> boolean(const json& obj, const std::string& path, const char* key) {
    const json* v = field(obj, path, key, false);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) {
      problems_.push_back(path + "." + key + ": expected true or false");
      return std::nullopt;
    }
    return v->get<bool>();
  }

  std::optional<std::string> string(const json& obj, const std::string& path, const char* key, bool required) {
    const json* v = field(obj, path, key, required);
    if (!v) return std::nullopt;
    if (!v->is_string()) {
      problems_.push_back(path + "." + key + ": expected a string");
      return std::nullopt;
    }
    return v->get<std::string>();
  }

  std::optional<VectorXd> vector(const json& obj, const std::string& path, const char* key, bool required) {
    const json* v = field(obj, path, key, required);
    if (!v) return std::nullopt;
    if (!v->is_array() || v->empty()) {
      problems_.push_back(path + "." + key + ": expected a non-empty array of numbers");
      return std::nullopt;
    }
    VectorXd out(static_cast<Eigen::Index>(v->size()));
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number()) {
        problems_.push_back(path + "." + key + "[" + std::to_string(i) + "]: expected a number");
        return std::nullopt;
      }
      out(static_cast<Eigen::Index>(i)) = (*v)[i].get<double>();
    }
    return out;
  }

  std::optional<MatrixXd> matrix(const json& obj, const std::string& path, const char* key, bool required) {
    const json* v = field(obj, path, key, required);
    if (!v) return std::nullopt;
    const std::string where = path + "." + key;
    if (!v->is_array() || v->empty() || !(*v)[0].is_array() || (*v)[0].empty()) {
      problems_.push_back(where + ": expected a non-empty array of rows");
      return std::nullopt;
    }
    const auto rows = v->size();
    const auto cols = (*v)[0].size();
    MatrixXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      const auto& row = (*v)[r];
      if (!row.is_array() || row.size() != cols) {
        problems_.push_back(where + ": row " + std::to_string(r) + " has a different length");
        return std::nullopt;
      }
      for (std::size_t c = 0; c < cols; ++c) {
        if (!row[c].is_number()) {
          problems_.push_back(where + "[" + std::to_string(r) + "][" + std::to_string(c) + "]: expected a number");
          return std::nullopt;
        }
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c].get<double>();
      }
    }
    return out;
  }

  void problem(std::string p) { problems_.push_back(std::move(p)); }

 private:
  std::vector<std::string>& problems_;
};

/// Accepts one entry per block (repeated `blocks` times) or the full length.
inline std::optional<VectorXd> expand(Reader& rd, const std::optional<VectorXd>& v, Eigen::Index block, int blocks,
                                      const std::string& where) {
  if (!v) return std::nullopt;
  if (v->size() == block) return VectorXd(v->replicate(blocks, 1));
  if (v->size() == block * blocks) return v;
  if (v->size() == 1) return VectorXd::Constant(block * blocks, (*v)(0));
  rd.problem(where + ": expected 1, " + std::to_string(block) + " or " + std::to_string(block * blocks) +
             " entries, got " + std::to_string(v->size()));
  return std::nullopt;
}

inline json to_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline json to_json(const MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    a.push_back(row);
  }
  return a;
}

inline const char* kind_name(AttackKind k) {
  switch (k) {
    case AttackKind::None: return "none";
    case AttackKind::Iid: return "iid";
    case AttackKind::NonStationary: return "nonstationary";
  }
  return "none";
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& doc) {
  std::vector<std::string> problems;
  detail::Reader rd(problems);
  ExperimentConfig cfg;
  if (!doc.is_object()) throw ConfigError({"top level: expected a JSON object"});

  const json* sys = rd.field(doc, "", "system", true);
  const json* chan = rd.field(doc, "", "channel", true);
  if (!sys || !chan) throw ConfigError(problems);
  if (!sys->is_object()) rd.problem(".system: expected an object");
  if (!chan->is_object()) rd.problem(".channel: expected an object");
  if (!problems.empty()) throw ConfigError(problems);

  const auto A = rd.matrix(*sys, ".system", "A", true);
  const auto B = rd.matrix(*sys, ".system", "B", true);
  const auto sw = rd.matrix(*sys, ".system", "Sigma_W", true);
  const auto sx = rd.matrix(*sys, ".system", "Sigma_X", true);
  const auto xb = rd.vector(*sys, ".system", "X_bar", true);
  const auto q = rd.vector(*sys, ".system", "Q_diag", true);
  const auto om = rd.vector(*sys, ".system", "Omega_diag", true);
  const auto ps = rd.vector(*sys, ".system", "Psi_diag", true);
  const auto N = rd.integer(*sys, ".system", "N", true);
  if (N && *N < 1) rd.problem(".system.N: must be >= 1");

  // Dimension checks need A, B and N. When those are broken the remaining
  // blocks are still checked so that one run lists every problem.
  const bool dims = A && B && N && *N >= 1;
  const Eigen::Index n = dims ? A->rows() : 0;
  const Eigen::Index m = dims ? B->cols() : 0;
  const int horizon = dims ? static_cast<int>(*N) : 0;
  std::optional<VectorXd> qd, omd, psd;
  if (dims) {
    if (A->cols() != n) rd.problem(".system.A: must be square");
    if (B->rows() != n) rd.problem(".system.B: must have " + std::to_string(n) + " rows");
    const std::string nn = std::to_string(n) + "x" + std::to_string(n);
    if (sw && (sw->rows() != n || sw->cols() != n)) rd.problem(".system.Sigma_W: must be " + nn);
    if (sx && (sx->rows() != n || sx->cols() != n)) rd.problem(".system.Sigma_X: must be " + nn);
    if (xb && xb->size() != n) rd.problem(".system.X_bar: must have " + std::to_string(n) + " entries");
    qd = detail::expand(rd, q, n, 1, ".system.Q_diag");
    omd = detail::expand(rd, om, n, horizon, ".system.Omega_diag");
    psd = detail::expand(rd, ps, m, horizon, ".system.Psi_diag");
  }

  const auto M = rd.vector(*chan, ".channel", "M_diag", true);
  const auto L = rd.vector(*chan, ".channel", "L_diag", true);
  const auto shared = rd.boolean(*chan, ".channel", "shared");
  const auto arm = rd.integer(*chan, ".channel", "arm_step", false);
  if (arm && *arm < 1) rd.problem(".channel.arm_step: must be >= 1");
  if (M && ((M->array() < 0.0).any() || (M->array() >= 1.0).any())) {
    rd.problem(".channel.M_diag: means must lie in [0, 1)");
  }
  if (L && ((L->array() < 0.0).any() || (L->array() > 1.0).any())) {
    rd.problem(".channel.L_diag: half-widths must lie in [0, 1]");
  }
  const auto Md = dims ? detail::expand(rd, M, m, 1, ".channel.M_diag") : std::nullopt;
  const auto Ld = dims ? detail::expand(rd, L, m, 1, ".channel.L_diag") : std::nullopt;

  const auto proto = rd.string(doc, "", "protocol", true);
  if (proto && *proto != "UDP" && *proto != "TCP") rd.problem(".protocol: expected \"UDP\" or \"TCP\"");

  if (const json* atk = rd.field(doc, "", "attack", false); atk && !atk->is_null()) {
    AttackBlock a;
    if (!atk->is_object()) {
      rd.problem(".attack: expected an object");
    } else {
      const auto kind = rd.string(*atk, ".attack", "kind", true);
      if (kind) {
        if (*kind == "none") a.kind = AttackKind::None;
        else if (*kind == "iid") a.kind = AttackKind::Iid;
        else if (*kind == "nonstationary") a.kind = AttackKind::NonStationary;
        else rd.problem(".attack.kind: expected \"none\", \"iid\" or \"nonstationary\"");
      }
      const auto means = rd.vector(*atk, ".attack", "means", false);
      if (dims) a.means = detail::expand(rd, means, m, 1, ".attack.means");
      if (a.means && ((a.means->array() < 0.0).any() || (a.means->array() > 1.0).any())) {
        rd.problem(".attack.means: must lie in [0, 1]");
      }
      a.state_free = rd.boolean(*atk, ".attack", "state_free").value_or(false);
      if (const auto r = rd.string(*atk, ".attack", "replan", false)) {
        if (*r == "receding") a.replan = AttackReplan::Receding;
        else if (*r == "tiled") a.replan = AttackReplan::Tiled;
        else rd.problem(".attack.replan: expected \"receding\" or \"tiled\"");
      }
      if (const auto o = rd.integer(*atk, ".attack", "onset", false)) {
        if (*o < 0) rd.problem(".attack.onset: must be >= 0");
        a.onset = static_cast<long>(*o);
      }
    }
    cfg.attack = a;
  }

  if (const json* sim = rd.field(doc, "", "simulation", false)) {
    if (!sim->is_object()) rd.problem(".simulation: expected an object");
    if (const auto T = rd.integer(*sim, ".simulation", "T", false)) {
      if (*T < 1) rd.problem(".simulation.T: must be >= 1");
      cfg.simulation.T = static_cast<long>(*T);
    }
    if (const auto R = rd.integer(*sim, ".simulation", "R", false)) {
      if (*R < 1) rd.problem(".simulation.R: must be >= 1");
      else cfg.simulation.R = static_cast<std::size_t>(*R);
    }
    if (const json* s = rd.field(*sim, ".simulation", "seed", false)) {
      if (!s->is_number_unsigned()) rd.problem(".simulation.seed: expected a non-negative integer");
      else cfg.simulation.seed = s->get<std::uint64_t>();
    }
    if (const auto c = rd.string(*sim, ".simulation", "control", false)) {
      if (*c == "receding") cfg.simulation.control = ControlPolicy::RecedingHorizon;
      else if (*c == "hold") cfg.simulation.control = ControlPolicy::HoldPlan;
      else if (*c == "zero") cfg.simulation.control = ControlPolicy::ZeroInput;
      else rd.problem(".simulation.control: expected \"receding\", \"hold\" or \"zero\"");
    }
    if (const auto i = rd.string(*sim, ".simulation", "initial", false)) {
      if (*i == "sampled") cfg.simulation.initial = InitialState::Sampled;
      else if (*i == "mean") cfg.simulation.initial = InitialState::Mean;
      else rd.problem(".simulation.initial: expected \"sampled\" or \"mean\"");
    }
    cfg.simulation.halt_on_detect = rd.boolean(*sim, ".simulation", "halt_on_detect").value_or(false);
    if (const auto w = rd.integer(*sim, ".simulation", "workers", false)) {
      if (*w < 0) rd.problem(".simulation.workers: must be >= 0");
      else cfg.simulation.workers = static_cast<unsigned>(*w);
    }
  }
  if (const json* out = rd.field(doc, "", "output", false)) {
    if (!out->is_object()) rd.problem(".output: expected an object");
    if (const auto d = rd.string(*out, ".output", "directory", false)) cfg.output.directory = *d;
  }
  if (cfg.attack && cfg.attack->onset > cfg.simulation.T) rd.problem(".attack.onset: must lie in [0, T]");
  if (!problems.empty()) throw ConfigError(problems);

  cfg.model.A = *A;
  cfg.model.B = *B;
  cfg.model.sigma_w = *sw;
  cfg.model.sigma_x = *sx;
  cfg.model.x_bar = *xb;
  cfg.model.q_diag = *qd;
  cfg.model.omega_diag = *omd;
  cfg.model.psi_diag = *psd;
  cfg.model.horizon = horizon;
  try {
    cfg.model.validate();
  } catch (const Error& e) {
    throw ConfigError({std::string(".system: ") + e.what()});
  }
  cfg.channel.means = *Md;
  cfg.channel.shared = shared.value_or(M->size() == 1 || (Md->array() == (*Md)(0)).all());
  cfg.detection.means = *Md;
  cfg.detection.half_widths = *Ld;
  if (arm) cfg.detection.k_min = static_cast<long>(*arm);
  try {
    cfg.channel.validate();
  } catch (const Error& e) {
    throw ConfigError({std::string(".channel: ") + e.what()});
  }
  cfg.protocol = *proto == "TCP" ? Protocol::TcpLike : Protocol::UdpLike;
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file '" + path + "'"});
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError({"'" + path + "' is not valid JSON: " + e.what()});
  }
  return parse_config(doc);
}

/// Full-length, explicit form. Loading the result gives an equal config.
inline json dump_config(const ExperimentConfig& c) {
  json doc;
  doc["system"] = {{"A", detail::to_json(c.model.A)},
                   {"B", detail::to_json(c.model.B)},
                   {"Sigma_W", detail::to_json(c.model.sigma_w)},
                   {"Sigma_X", detail::to_json(c.model.sigma_x)},
                   {"X_bar", detail::to_json(c.model.x_bar)},
                   {"Q_diag", detail::to_json(c.model.q_diag)},
                   {"Omega_diag", detail::to_json(c.model.omega_diag)},
                   {"Psi_diag", detail::to_json(c.model.psi_diag)},
                   {"N", c.model.horizon}};
  doc["channel"] = {{"M_diag", detail::to_json(c.channel.means)},
                    {"L_diag", detail::to_json(c.detection.half_widths)},
                    {"shared", c.channel.shared},
                    {"arm_step", c.detection.k_min}};
  doc["protocol"] = c.protocol == Protocol::TcpLike ? "TCP" : "UDP";
  if (c.attack) {
    json a = {{"kind", detail::kind_name(c.attack->kind)},
              {"state_free", c.attack->state_free},
              {"replan", c.attack->replan == AttackReplan::Tiled ? "tiled" : "receding"},
              {"onset", c.attack->onset}};
    if (c.attack->means) a["means"] = detail::to_json(*c.attack->means);
    doc["attack"] = a;
  }
  const char* control = c.simulation.control == ControlPolicy::HoldPlan   ? "hold"
                        : c.simulation.control == ControlPolicy::ZeroInput ? "zero"
                                                                           : "receding";
  doc["simulation"] = {{"T", c.simulation.T},
                       {"R", c.simulation.R},
                       {"seed", c.simulation.seed},
                       {"control", control},
                       {"initial", c.simulation.initial == InitialState::Mean ? "mean" : "sampled"},
                       {"halt_on_detect", c.simulation.halt_on_detect},
                       {"workers", c.simulation.workers}};
  doc["output"] = {{"directory", c.output.directory}};
  return doc;
}

inline bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  auto same_model = [](const SystemModel& a, const SystemModel& b) {
    return a.A == b.A && a.B == b.B && a.sigma_w == b.sigma_w && a.sigma_x == b.sigma_x && a.x_bar == b.x_bar &&
           a.q_diag == b.q_diag && a.omega_diag == b.omega_diag && a.psi_diag == b.psi_diag && a.horizon == b.horizon;
  };
  auto same_attack = [](const std::optional<AttackBlock>& a, const std::optional<AttackBlock>& b) {
    if (a.has_value() != b.has_value()) return false;
    if (!a) return true;
    return a->kind == b->kind && a->means.has_value() == b->means.has_value() &&
           (!a->means || *a->means == *b->means) && a->state_free == b->state_free && a->replan == b->replan &&
           a->onset == b->onset;
  };
  const auto& s = simulation;
  const auto& t = o.simulation;
  return same_model(model, o.model) && channel.means == o.channel.means && channel.shared == o.channel.shared &&
         detection.means == o.detection.means && detection.half_widths == o.detection.half_widths &&
         detection.k_min == o.detection.k_min &&
         protocol == o.protocol && same_attack(attack, o.attack) && s.T == t.T && s.R == t.R && s.seed == t.seed &&
         s.control == t.control && s.initial == t.initial && s.halt_on_detect == t.halt_on_detect &&
         s.workers == t.workers && output.directory == o.output.directory;
}

/// Loop setup plus an episode template built from the config.
inline std::shared_ptr<const LoopSetup> make_setup(const ExperimentConfig& c) {
  return LoopSetup::make(c.model, c.channel, c.detection, c.protocol);
}

inline EpisodeConfig make_episode(const ExperimentConfig& c, std::shared_ptr<const LoopSetup> setup,
                                  AttackKind kind) {
  EpisodeConfig e;
  e.setup = std::move(setup);
  e.steps = c.simulation.T;
  e.seed = c.simulation.seed;
  e.control = c.simulation.control;
  e.initial = c.simulation.initial;
  e.halt_on_detect = c.simulation.halt_on_detect;
  e.attack.kind = kind;
  if (c.attack) {
    e.attack.state_free = c.attack->state_free;
    e.attack.replan = c.attack->replan;
    e.attack.onset = c.attack->onset;
    if (kind == AttackKind::Iid) e.attack.fixed_means = c.attack->means;
  }
  return e;
}

}  // namespace dosattack::cli
