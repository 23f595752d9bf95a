#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dosattack/cli/commands.hpp"

namespace {

using namespace dosattack;
using namespace dosattack::cli;

void setup_logging() {
  // Diagnostics go to stderr so stdout stays clean for scripting.
  auto logger = spdlog::stderr_color_mt("dosattack");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("DOSATTACK_LOG_LEVEL")) {
    // Unknown names map to "off" in spdlog; keep the default instead.
    const auto parsed = spdlog::level::from_str(level);
    if (parsed != spdlog::level::off || std::string(level) == "off") spdlog::set_level(parsed);
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Denial-of-service attack synthesis and analysis for networked control loops"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory (defaults to output.directory in the config)");
  };

  auto* synth = app.add_subcommand("synthesize", "Optimal IID and per-step attacks at X_bar");
  add_common(synth);

  std::optional<std::size_t> realizations;
  std::optional<std::uint64_t> seed;
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo run of the configured attack");
  add_common(sim);
  sim->add_option("--realizations", realizations, "Override simulation.R")->check(CLI::PositiveNumber);
  sim->add_option("--seed", seed, "Override simulation.seed");

  bool empirical = false;
  auto* analyze = app.add_subcommand("analyze", "Closed-form cost increase per attack regime");
  add_common(analyze);
  analyze->add_flag("--empirical", empirical, "Also measure each row by paired Monte-Carlo");

  std::string attack_list = "iid,nonstat,none";
  auto* compare = app.add_subcommand("compare", "Side-by-side Monte-Carlo of several attacks");
  add_common(compare);
  compare->add_option("--attacks", attack_list, "Comma-separated list of iid, nonstat, none")
      ->capture_default_str();
  compare->add_option("--realizations", realizations, "Override simulation.R")->check(CLI::PositiveNumber);
  compare->add_option("--seed", seed, "Override simulation.seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    ExperimentConfig cfg = load_config(config_path);
    if (realizations) cfg.simulation.R = *realizations;
    if (seed) cfg.simulation.seed = *seed;
    const std::string dir = out_dir.empty() ? cfg.output.directory : out_dir;
    spdlog::debug("loaded {} (n={}, m={}, N={}, protocol {})", config_path, cfg.model.state_dim(),
                  cfg.model.input_dim(), cfg.model.horizon, to_string(cfg.protocol));

    if (synth->parsed()) {
      const auto rep = cmd_synthesize(cfg, dir);
      if (rep["iid"].contains("alpha_star")) {
        spdlog::info("alpha* = {:.17g} ({})", rep["iid"]["alpha_star"].get<double>(),
                     rep["iid"]["convexity"].get<std::string>());
      }
      spdlog::info("wrote {}/synthesis.json", dir);
    } else if (sim->parsed()) {
      spdlog::info("simulating {} realizations of {} steps", cfg.simulation.R, cfg.simulation.T);
      const auto rep = cmd_simulate(cfg, dir);
      spdlog::info("mean terminal cost {:.6g} +/- {:.2g}; detection rate {:.4g}",
                   rep["mean_terminal_cost"].get<double>(), rep["se_terminal_cost"].get<double>(),
                   rep["detection_rate"].get<double>());
      spdlog::info("wrote mean_trajectory.csv, realizations.csv and summary.json to {}", dir);
    } else if (analyze->parsed()) {
      const auto rep = cmd_analyze(cfg, dir, AnalyzeOptions{empirical});
      for (const auto& row : rep["rows"]) {
        if (row.contains("skipped")) {
          spdlog::warn("{}: skipped ({})", row["regime"].get<std::string>(), row["skipped"].get<std::string>());
        } else if (row.contains("empirical")) {
          spdlog::info("{}: increase {:.6g}, empirical {:.6g} +/- {:.2g} ({})", row["regime"].get<std::string>(),
                       row["increase"].get<double>(), row["empirical"]["increase"].get<double>(),
                       row["empirical"]["se"].get<double>(), row["empirical"]["pass"].get<bool>() ? "pass" : "FAIL");
        } else {
          spdlog::info("{}: increase {:.6g}", row["regime"].get<std::string>(), row["increase"].get<double>());
        }
      }
      spdlog::info("wrote {}/analysis.json", dir);
    } else if (compare->parsed()) {
      const auto kinds = parse_attack_list(attack_list);
      const auto table = cmd_compare(cfg, kinds, dir);
      for (const auto& row : table) {
        spdlog::info("{}: terminal cost {:.6g} +/- {:.2g}", row["attack"].get<std::string>(),
                     row["mean_terminal_cost"].get<double>(), row["se_terminal_cost"].get<double>());
      }
      spdlog::info("wrote {}/compare.csv", dir);
    }
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    const int code = exit_code(e.kind());
    if (code == kExitInfeasible) {
      std::cerr << "infeasible attack region: " << e.what() << "\n";
    } else {
      std::cerr << "error: " << e.what() << "\n";
    }
    return code;
  }
  return kExitOk;
}
