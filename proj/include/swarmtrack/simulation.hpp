#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <vector>

#include "swarmtrack/consensus.hpp"
#include "swarmtrack/metrics.hpp"
#include "swarmtrack/planning.hpp"
#include "swarmtrack/scenario.hpp"
#include "swarmtrack/sensing.hpp"
#include "swarmtrack/tracking.hpp"
#include "swarmtrack/world.hpp"

namespace swarmtrack {

/// Independent random streams for one trial. Target motion has its own
/// stream so paired trials see the same ground truth under every policy.
struct TrialStreams {
  Rng targets;
  Rng sensing;
  Rng planning;

  explicit TrialStreams(std::uint64_t seed)
      : targets(make_rng(seed, 1)), sensing(make_rng(seed, 2)), planning(make_rng(seed, 3)) {}
};

struct WorldState {
  std::vector<TargetState> targets;
  std::vector<AgentState> agents;
  std::vector<Tracker> trackers;
  std::shared_ptr<const SemanticMap> map;
  double time = 0.0;
  int epoch = 0;
};

struct EpochRecord {
  int epoch = 0;
  double ospa = 0.0;
  double phi = 0.0;
  std::size_t substeps = 0;
  std::size_t reported_tracks = 0;
  std::size_t de_evaluations = 0;
  std::size_t search_dimension = 0;
  JointControl control;
};

inline WorldState init_world(const ScenarioConfig& config, Rng& target_rng) {
  WorldState w;
  w.map = std::make_shared<const SemanticMap>(config.map);
  w.agents = config.agents;
  for (std::size_t k = 0; k < config.targets.initial_positions.size(); ++k)
    w.targets.push_back(
        start_levy_target(static_cast<int>(k), config.targets.initial_positions[k], config.targets.levy, target_rng));
  for (std::size_t i = 0; i < w.agents.size(); ++i)
    w.trackers.emplace_back(config.tracking.logic, config.tracking.jpda, config.tracking.init_cov());
  return w;
}

/// Associate confirmed tracks across agents, run L consensus rounds on the
/// proximity graph and return each agent's fused picture.
inline BeliefState fuse_beliefs(const WorldState& w, const ScenarioConfig& config) {
  std::vector<std::vector<Track>> confirmed;
  confirmed.reserve(w.trackers.size());
  for (const auto& t : w.trackers) confirmed.push_back(t.confirmed());
  const ProximityGraph graph = build_graph(w.agents, config.comm_range());
  const Correspondence corr = associate_tracks(confirmed, config.consensus.association_gate);
  FusedTrackSet fused = seed_fused_set(confirmed, corr, graph);
  if (fused.num_labels() > 0) fused = run_consensus(graph, std::move(fused), config.consensus.L);

  BeliefState b;
  b.agents = w.agents;
  b.map = w.map;
  b.time = w.time;
  b.fused.resize(w.agents.size());
  for (std::size_t i = 0; i < w.agents.size(); ++i)
    for (const auto& e : fused.for_agent(i)) b.fused[i].push_back(FusedTrack::from_info(e.label, e.info));
  return b;
}

inline double belief_ospa(const BeliefState& b, const std::vector<TargetState>& targets, const OspaConfig& cfg) {
  std::vector<Vec2> truth;
  for (const auto& t : targets) truth.push_back(t.pos);
  auto for_agent = [&](std::size_t i) {
    std::vector<Vec2> est;
    for (const auto& f : b.fused[i]) est.push_back(f.mean.head<2>());
    return ospa(est, truth, cfg.params);
  };
  if (cfg.report == "mean") {
    double s = 0.0;
    for (std::size_t i = 0; i < b.fused.size(); ++i) s += for_agent(i);
    return s / static_cast<double>(b.fused.size());
  }
  return for_agent(0);
}

inline double belief_utility(const BeliefState& b) {
  double phi = 0.0;
  for (const auto& f : b.fused.front()) phi += f.omega.trace();
  return phi;
}

/// One control period: obs_hz / control_hz sensing sub-steps (targets move,
/// every agent observes and updates its tracker), then consensus, scoring,
/// the policy decision and the agents' move.
inline EpochRecord run_epoch(WorldState& w, const ScenarioConfig& config, PolicyKind policy, TrialStreams& streams) {
  EpochRecord rec;
  rec.epoch = w.epoch;
  const MotionModel obs_model = MotionModel::ncv(config.obs_dt(), config.tracking.q);
  for (int s = 0; s < config.substeps(); ++s) {
    w.time += config.obs_dt();
    for (auto& t : w.targets)
      t = step_levy_target(t, config.obs_dt(), config.targets.levy, w.map->bounds, streams.targets);
    for (std::size_t i = 0; i < w.agents.size(); ++i) {
      const auto scan = generate_observations(w.agents[i], w.targets, *w.map, obs_model, config.tracking.r0, w.time,
                                              streams.sensing);
      w.trackers[i].step(scan, w.agents[i], obs_model, config.tracking.r0);
    }
    ++rec.substeps;
  }

  const BeliefState belief = fuse_beliefs(w, config);
  rec.ospa = belief_ospa(belief, w.targets, config.ospa);
  rec.phi = belief_utility(belief);
  rec.reported_tracks = belief.fused.front().size();

  const PlanResult decision = plan(policy, belief, config.rollout_params(), streams.planning);
  rec.de_evaluations = decision.evaluations;
  rec.search_dimension = decision.search_dimension;
  rec.control = decision.control;
  for (std::size_t i = 0; i < w.agents.size(); ++i)
    w.agents[i] = agent_transition(w.agents[i], decision.control[i], config.control_dt(), w.map->bounds);
  ++w.epoch;
  return rec;
}

struct TrialResult {
  std::uint64_t seed = 0;
  std::vector<double> ospa;
  std::vector<double> phi;
  std::vector<EpochRecord> epochs;
  double wall_seconds = 0.0;
  TrackerDiagnostics diagnostics;
  std::size_t de_evaluations = 0;
};

inline TrialResult run_trial(const ScenarioConfig& config, PolicyKind policy, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  TrialStreams streams(seed);
  WorldState w = init_world(config, streams.targets);
  TrialResult r;
  r.seed = seed;
  for (int e = 0; e < config.experiment.epochs; ++e) {
    EpochRecord rec = run_epoch(w, config, policy, streams);
    r.ospa.push_back(rec.ospa);
    r.phi.push_back(rec.phi);
    r.de_evaluations += rec.de_evaluations;
    r.epochs.push_back(std::move(rec));
  }
  for (const auto& t : w.trackers) r.diagnostics += t.diagnostics();
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace swarmtrack
