// swarmtrack: run, validate and compare coordination policies on a scenario.
//
//   swarmtrack run --scenario S --policy P [--trials K] [--epochs E] [--seed N] --out DIR
//   swarmtrack validate --scenario S
//   swarmtrack compare --scenario S --policies a,b,c [--trials K] [--epochs E] [--seed N] --out DIR
//
// Exit codes: 0 success, 2 invalid configuration, 3 runtime failure.

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "swarmtrack/swarmtrack.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Overrides {
  std::optional<int> trials;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<int> horizon;
  std::optional<int> mc_samples;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--trials", o.trials, "Number of trials (overrides experiment.trials)");
  cmd->add_option("--epochs", o.epochs, "Decision epochs per trial (overrides experiment.epochs)");
  cmd->add_option("--seed", o.seed, "Base seed; trial t uses seed + t");
  cmd->add_option("--horizon", o.horizon, "Rollout horizon N (overrides planning.horizon)");
  cmd->add_option("--mc-samples", o.mc_samples, "Monte Carlo samples per Q-value");
}

swarmtrack::ScenarioConfig load_with_overrides(const std::string& path, const Overrides& o) {
  auto cfg = swarmtrack::load_scenario(path);
  if (o.trials) cfg.experiment.trials = *o.trials;
  if (o.epochs) cfg.experiment.epochs = *o.epochs;
  if (o.seed) cfg.experiment.base_seed = *o.seed;
  if (o.horizon) cfg.planning.horizon = *o.horizon;
  if (o.mc_samples) cfg.planning.mc_samples = *o.mc_samples;
  swarmtrack::validate(cfg);
  return cfg;
}

swarmtrack::PolicyKind require_policy(const std::string& name) {
  const auto k = swarmtrack::parse_policy(name);
  if (!k) throw swarmtrack::ConfigError("policy", "unknown policy '" + name + "'");
  return *k;
}

void print_table(const std::vector<swarmtrack::ExperimentResult>& results) {
  for (const auto& r : results) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& t : r.trials)
      for (double v : t.ospa) {
        sum += v;
        ++n;
      }
    std::cout << swarmtrack::to_string(r.policy) << ": trials=" << r.trials.size()
              << " mean_ospa=" << (n ? sum / double(n) : 0.0) << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Information-driven multi-sensor target tracking simulator"};
  app.require_subcommand(1);

  std::string scenario;
  std::string policy = "rollout-seq";
  std::string policies = "greedy,rollout-joint,rollout-seq";
  std::string out_dir = "results";
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  Overrides overrides;

  auto* run = app.add_subcommand("run", "Run one policy for K trials");
  run->add_option("--scenario", scenario, "Scenario JSON file")->required();
  run->add_option("--policy", policy, "base | greedy | rollout-joint | rollout-seq");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--workers", workers, "Concurrent trial workers");
  add_overrides(run, overrides);

  auto* val = app.add_subcommand("validate", "Check a scenario file and exit");
  val->add_option("--scenario", scenario, "Scenario JSON file")->required();

  auto* cmp = app.add_subcommand("compare", "Run several policies on shared per-trial seeds");
  cmp->add_option("--scenario", scenario, "Scenario JSON file")->required();
  cmp->add_option("--policies", policies, "Comma-separated policy list");
  cmp->add_option("--out", out_dir, "Output directory");
  cmp->add_option("--workers", workers, "Concurrent trial workers");
  add_overrides(cmp, overrides);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  swarmtrack::ScenarioConfig cfg;
  std::vector<swarmtrack::PolicyKind> kinds;
  try {
    cfg = load_with_overrides(scenario, overrides);
    if (*val) {
      std::cout << "ok: " << cfg.name << " (" << cfg.agents.size() << " agents, "
                << cfg.targets.initial_positions.size() << " targets)\n";
      return 0;
    }
    if (*run) {
      kinds.push_back(require_policy(policy));
    } else {
      std::stringstream ss(policies);
      for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) kinds.push_back(require_policy(item));
      if (kinds.empty()) throw swarmtrack::ConfigError("policies", "no policy given");
    }
  } catch (const swarmtrack::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }

  try {
    const auto results = swarmtrack::run_comparison(cfg, kinds, workers);
    swarmtrack::emit_results(results, cfg, out_dir);
    print_table(results);
    if (cfg.experiment.trials < 2)
      std::cerr << "note: fewer than 2 trials, ospa_summary.csv not written\n";
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
