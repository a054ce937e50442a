#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "swarmtrack/sensing.hpp"
#include "swarmtrack/tracking.hpp"
#include "swarmtrack/types.hpp"
#include "swarmtrack/world.hpp"

namespace swarmtrack {

/// One fused track as seen by one agent after consensus.
struct FusedTrack {
  int label = 0;
  Vec4 mean = Vec4::Zero();
  Mat4 cov = Mat4::Identity();
  Mat4 omega = Mat4::Identity();

  static FusedTrack from_info(int label, const InfoForm& info) {
    Eigen::LLT<Mat4> llt(info.omega);
    if (llt.info() != Eigen::Success) throw FilterDivergence("fused information not positive definite");
    FusedTrack t;
    t.label = label;
    t.omega = info.omega;
    t.cov = llt.solve(Mat4::Identity());
    symmetrize(t.cov);
    t.mean = llt.solve(info.q);
    return t;
  }
};

/// Planning state: agent poses plus each agent's fused track picture.
struct BeliefState {
  std::vector<AgentState> agents;
  std::vector<std::vector<FusedTrack>> fused;  // per agent
  double time = 0.0;
  std::shared_ptr<const SemanticMap> map;
};

using JointControl = std::vector<Vec2>;

enum class PolicyKind { base, greedy, rollout_joint, rollout_sequential };

inline std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::base: return "base";
    case PolicyKind::greedy: return "greedy";
    case PolicyKind::rollout_joint: return "rollout-joint";
    case PolicyKind::rollout_sequential: return "rollout-seq";
  }
  return "?";
}

inline std::optional<PolicyKind> parse_policy(const std::string& s) {
  if (s == "base") return PolicyKind::base;
  if (s == "greedy") return PolicyKind::greedy;
  if (s == "rollout-joint") return PolicyKind::rollout_joint;
  if (s == "rollout-seq") return PolicyKind::rollout_sequential;
  return std::nullopt;
}

struct DeParams {
  std::size_t population = 16;
  std::size_t generations_agent = 30;
  std::size_t generations_joint = 60;
  double weight = 0.7;
  double crossover = 0.9;
};

struct RolloutParams {
  int horizon = 5;
  int mc_samples = 50;
  double control_dt = 1.0;
  double process_noise = 0.5;  // NCV intensity used inside the lookahead
  double r0 = 1.0;
  double v0 = 5.0;
  DeParams de;
  std::vector<std::size_t> agent_order;  // indices into belief.agents; empty means ascending
};

// ---------------------------------------------------------------------------
// Base policy

struct TrackSummary {
  int label = 0;
  Vec2 pos = Vec2::Zero();
  double info_trace = 0.0;
};

/// Head at speed v0 toward the least-informed track within d0. Ties go to the
/// nearest track, then the lowest label. No proximal track: hover.
inline Vec2 base_policy(const AgentState& agent, std::span<const TrackSummary> tracks, double v0) {
  const TrackSummary* best = nullptr;
  double best_dist = 0.0;
  for (const auto& t : tracks) {
    const double d = (t.pos - agent.pos).norm();
    if (d > agent.d0) continue;
    bool better = best == nullptr || t.info_trace < best->info_trace;
    if (!better && t.info_trace == best->info_trace)
      better = d < best_dist || (d == best_dist && t.label < best->label);
    if (better) {
      best = &t;
      best_dist = d;
    }
  }
  if (best == nullptr || best_dist == 0.0) return Vec2::Zero();
  return clamp_control(v0 * (best->pos - agent.pos) / best_dist, agent.v_max);
}

inline Vec2 base_policy(const AgentState& agent, const std::vector<FusedTrack>& tracks, double v0) {
  std::vector<TrackSummary> s;
  s.reserve(tracks.size());
  for (const auto& t : tracks) s.push_back({t.label, t.mean.head<2>(), t.omega.trace()});
  return base_policy(agent, std::span<const TrackSummary>(s), v0);
}

/// Every agent applies the base policy to its own fused tracks.
inline JointControl base_joint_control(const BeliefState& belief, double v0) {
  JointControl u(belief.agents.size(), Vec2::Zero());
  for (std::size_t i = 0; i < belief.agents.size(); ++i)
    if (i < belief.fused.size()) u[i] = base_policy(belief.agents[i], belief.fused[i], v0);
  return u;
}

// ---------------------------------------------------------------------------
// Lookahead model

/// A track inside the lookahead: one system-level Gaussian shared by its
/// holders, who fuse detections with an exact arithmetic mean.
struct SystemTrack {
  int label = 0;
  Vec4 mean = Vec4::Zero();
  Mat4 cov = Mat4::Identity();
  Mat4 omega = Mat4::Identity();
  Mat4 sample_factor = Mat4::Identity();  // cov = factor * factor^T at the root
  std::vector<char> holders;
  double num_holders = 0.0;
};

struct LookaheadState {
  std::vector<AgentState> agents;
  std::vector<SystemTrack> tracks;
};

/// Fixed ingredients shared by every lookahead simulation of one decision.
struct LookaheadModel {
  MotionModel model;
  GaussianSampler4 process_noise{Mat4::Zero()};
  std::shared_ptr<const SemanticMap> map;
  double r0 = 1.0;
  double v0 = 5.0;

  LookaheadModel(const RolloutParams& p, std::shared_ptr<const SemanticMap> m)
      : model(MotionModel::ncv(p.control_dt, p.process_noise)),
        process_noise(model.Q),
        map(std::move(m)),
        r0(p.r0),
        v0(p.v0) {
    if (!map) throw std::invalid_argument("LookaheadModel: belief has no map");
  }
};

/// Collapse per-agent fused pictures into system tracks: each label's
/// information is the arithmetic mean over the agents holding it.
inline LookaheadState make_lookahead(const BeliefState& belief) {
  LookaheadState s;
  s.agents = belief.agents;
  const std::size_t n = belief.agents.size();
  std::map<int, std::vector<std::pair<std::size_t, const FusedTrack*>>> by_label;
  for (std::size_t i = 0; i < belief.fused.size(); ++i)
    for (const auto& t : belief.fused[i]) by_label[t.label].push_back({i, &t});
  for (const auto& [label, members] : by_label) {
    SystemTrack st;
    st.label = label;
    st.holders.assign(n, 0);
    Mat4 omega = Mat4::Zero();
    Vec4 q = Vec4::Zero();
    for (const auto& [agent, t] : members) {
      st.holders[agent] = 1;
      omega += t->omega;
      q += t->omega * t->mean;
    }
    st.num_holders = static_cast<double>(members.size());
    omega /= st.num_holders;
    q /= st.num_holders;
    Eigen::LLT<Mat4> llt(omega);
    if (llt.info() != Eigen::Success) throw FilterDivergence("lookahead: fused information not positive definite");
    st.omega = omega;
    st.cov = llt.solve(Mat4::Identity());
    symmetrize(st.cov);
    st.mean = llt.solve(q);
    Eigen::LLT<Mat4> cov_llt(st.cov);
    st.sample_factor = cov_llt.matrixL();
    s.tracks.push_back(std::move(st));
  }
  return s;
}

inline JointControl base_joint_control(const LookaheadState& s, double v0) {
  JointControl u(s.agents.size(), Vec2::Zero());
  std::vector<TrackSummary> mine;
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    mine.clear();
    for (const auto& t : s.tracks)
      if (t.holders[i]) mine.push_back({t.label, t.mean.head<2>(), t.omega.trace()});
    u[i] = base_policy(s.agents[i], std::span<const TrackSummary>(mine), v0);
  }
  return u;
}

/// Advance the lookahead one decision stage in place and return the stage
/// reward (system-wide sum of fused information traces).
///
/// Agents move first, then the sampled targets advance under process noise.
/// A holder detects a track iff the sampled position is in its FoV and not
/// occluded; detections add H^T R^-1 H to the predicted information and the
/// holders' results are averaged. Only covariances evolve, so measurement
/// values are never drawn; the track mean follows the prediction.
inline double simulate_belief_step(LookaheadState& state, const JointControl& control,
                                   std::vector<Vec4>& sampled, const LookaheadModel& lm, Rng& rng) {
  const MotionModel& m = lm.model;
  for (std::size_t i = 0; i < state.agents.size(); ++i)
    state.agents[i] = agent_transition(state.agents[i], control[i], m.dt, lm.map->bounds);
  for (auto& x : sampled) x = m.F * x + lm.process_noise(rng);

  double reward = 0.0;
  for (std::size_t k = 0; k < state.tracks.size(); ++k) {
    SystemTrack& t = state.tracks[k];
    t.mean = m.F * t.mean;
    t.cov = m.F * t.cov * m.F.transpose() + m.Q;
    symmetrize(t.cov);
    t.omega = t.cov.inverse();
    symmetrize(t.omega);

    const Vec2 pos = sampled[k].head<2>();
    if (!lm.map->occluded(pos)) {
      Mat2 gain = Mat2::Zero();
      bool detected = false;
      for (std::size_t i = 0; i < state.agents.size(); ++i) {
        if (!t.holders[i] || !fov_contains(state.agents[i], pos)) continue;
        gain += measurement_covariance(state.agents[i], pos, lm.r0).inverse();
        detected = true;
      }
      if (detected) {
        t.omega.topLeftCorner<2, 2>() += gain / t.num_holders;
        t.cov = t.omega.inverse();
        symmetrize(t.cov);
      }
    }
    reward += t.omega.trace();
  }
  return reward;
}

/// Monte Carlo estimate of the N-stage reward when `control` is applied now
/// and every agent follows the base policy afterwards. The same `mc_seed`
/// gives the same target samples for any control (common random numbers).
inline double q_value(const LookaheadState& root, const JointControl& control, const RolloutParams& params,
                      const LookaheadModel& lm, std::uint64_t mc_seed) {
  Rng rng = make_rng(mc_seed, 0x51A7E);
  std::normal_distribution<double> n01;
  double total = 0.0;
  std::vector<Vec4> sampled(root.tracks.size());
  for (int s = 0; s < params.mc_samples; ++s) {
    for (std::size_t k = 0; k < root.tracks.size(); ++k) {
      Vec4 z;
      for (int d = 0; d < 4; ++d) z[d] = n01(rng);
      sampled[k] = root.tracks[k].mean + root.tracks[k].sample_factor * z;
    }
    LookaheadState state = root;
    double sum = simulate_belief_step(state, control, sampled, lm, rng);
    for (int stage = 2; stage <= params.horizon; ++stage)
      sum += simulate_belief_step(state, base_joint_control(state, lm.v0), sampled, lm, rng);
    total += sum;
  }
  return total / static_cast<double>(params.mc_samples);
}

inline double q_value(const BeliefState& belief, const JointControl& control, const RolloutParams& params,
                      std::uint64_t mc_seed) {
  const LookaheadModel lm(params, belief.map);
  return q_value(make_lookahead(belief), control, params, lm, mc_seed);
}

// ---------------------------------------------------------------------------
// Differential evolution

struct DeSettings {
  std::size_t population = 16;
  std::size_t generations = 30;
  double weight = 0.7;
  double crossover = 0.9;
};

struct DeResult {
  Eigen::VectorXd best;
  double value = -std::numeric_limits<double>::infinity();
  std::vector<double> seed_values;
  std::size_t evaluations = 0;
};

/// DE/rand/1/bin maximizer over a box. Seeds become the first population
/// members, so the result is never worse than any seed. Evaluations are
/// exactly population * (generations + 1).
inline DeResult optimize_de(const std::function<double(const Eigen::VectorXd&)>& objective,
                            const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                            const std::vector<Eigen::VectorXd>& seeds, const DeSettings& de, Rng& rng) {
  const std::size_t np = de.population;
  const auto dim = lo.size();
  if (np < 4) throw std::invalid_argument("optimize_de: population must be >= 4");
  if (hi.size() != dim) throw std::invalid_argument("optimize_de: bound dimensions differ");

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, np - 1);
  std::uniform_int_distribution<Eigen::Index> pick_dim(0, dim - 1);

  std::vector<Eigen::VectorXd> pop(np, Eigen::VectorXd(dim));
  std::vector<double> fit(np);
  DeResult res;
  for (std::size_t i = 0; i < np; ++i) {
    if (i < seeds.size()) {
      pop[i] = seeds[i].cwiseMax(lo).cwiseMin(hi);
    } else {
      for (Eigen::Index d = 0; d < dim; ++d) pop[i][d] = lo[d] + u01(rng) * (hi[d] - lo[d]);
    }
  }
  for (std::size_t i = 0; i < np; ++i) {
    fit[i] = objective(pop[i]);
    ++res.evaluations;
    if (i < seeds.size()) res.seed_values.push_back(fit[i]);
    if (fit[i] > res.value) {
      res.value = fit[i];
      res.best = pop[i];
    }
  }

  Eigen::VectorXd trial(dim);
  for (std::size_t g = 0; g < de.generations; ++g) {
    for (std::size_t i = 0; i < np; ++i) {
      std::size_t r1, r2, r3;
      do r1 = pick(rng); while (r1 == i);
      do r2 = pick(rng); while (r2 == i || r2 == r1);
      do r3 = pick(rng); while (r3 == i || r3 == r1 || r3 == r2);
      const Eigen::Index jrand = pick_dim(rng);
      for (Eigen::Index d = 0; d < dim; ++d) {
        if (d == jrand || u01(rng) < de.crossover) {
          const double v = pop[r1][d] + de.weight * (pop[r2][d] - pop[r3][d]);
          trial[d] = std::clamp(v, lo[d], hi[d]);
        } else {
          trial[d] = pop[i][d];
        }
      }
      const double f = objective(trial);
      ++res.evaluations;
      if (f >= fit[i]) {
        pop[i] = trial;
        fit[i] = f;
        if (f > res.value) {
          res.value = f;
          res.best = trial;
        }
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Policies

struct PlanResult {
  JointControl control;
  double value = 0.0;             // q_value of `control` under the decision's MC seed
  std::vector<double> q_trace;    // sequential: value before agent 1, then after each agent
  std::size_t evaluations = 0;    // objective evaluations spent by DE
  std::size_t search_dimension = 0;
  std::uint64_t mc_seed = 0;
};

namespace detail {

inline JointControl clamp_joint(const JointControl& u, const std::vector<AgentState>& agents) {
  JointControl out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = clamp_control(u[i], agents[i].v_max);
  return out;
}

inline std::vector<std::size_t> resolve_order(const RolloutParams& p, std::size_t n) {
  if (p.agent_order.empty()) {
    std::vector<std::size_t> o(n);
    for (std::size_t i = 0; i < n; ++i) o[i] = i;
    return o;
  }
  std::vector<std::size_t> sorted = p.agent_order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    if (sorted[i] != i || sorted.size() != n) throw std::invalid_argument("agent_order is not a permutation");
  return p.agent_order;
}

}  // namespace detail

/// All-agents-at-once: DE over the 2n-dimensional joint velocity box.
inline PlanResult rollout_joint(const BeliefState& belief, const RolloutParams& params, Rng& rng) {
  const std::size_t n = belief.agents.size();
  const LookaheadModel lm(params, belief.map);
  const LookaheadState root = make_lookahead(belief);
  PlanResult out;
  out.mc_seed = rng();
  out.search_dimension = 2 * n;

  const JointControl base = base_joint_control(belief, params.v0);
  Eigen::VectorXd lo(2 * n), hi(2 * n), seed(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = belief.agents[i].v_max;
    lo.segment<2>(2 * i).setConstant(-v);
    hi.segment<2>(2 * i).setConstant(v);
    seed.segment<2>(2 * i) = base[i];
  }
  auto unpack = [&](const Eigen::VectorXd& x) {
    JointControl u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = x.segment<2>(2 * i);
    return detail::clamp_joint(u, belief.agents);
  };
  const auto objective = [&](const Eigen::VectorXd& x) { return q_value(root, unpack(x), params, lm, out.mc_seed); };
  const DeSettings de{params.de.population, params.de.generations_joint, params.de.weight, params.de.crossover};
  const DeResult r = optimize_de(objective, lo, hi, {seed}, de, rng);
  out.control = unpack(r.best);
  out.value = r.value;
  out.q_trace = {r.seed_values.front(), r.value};
  out.evaluations = r.evaluations;
  return out;
}

/// Agent-by-agent: start from the base joint action, then optimize one agent's
/// velocity at a time (in `agent_order`) with the others held fixed.
inline PlanResult rollout_sequential(const BeliefState& belief, const RolloutParams& params, Rng& rng) {
  const std::size_t n = belief.agents.size();
  const LookaheadModel lm(params, belief.map);
  const LookaheadState root = make_lookahead(belief);
  PlanResult out;
  out.mc_seed = rng();
  out.search_dimension = 2;

  JointControl u = base_joint_control(belief, params.v0);
  const DeSettings de{params.de.population, params.de.generations_agent, params.de.weight, params.de.crossover};
  for (const std::size_t i : detail::resolve_order(params, n)) {
    const double v = belief.agents[i].v_max;
    const Eigen::VectorXd lo = Eigen::Vector2d(-v, -v);
    const Eigen::VectorXd hi = Eigen::Vector2d(v, v);
    const auto objective = [&](const Eigen::VectorXd& x) {
      JointControl trial = u;
      trial[i] = clamp_control(Vec2(x[0], x[1]), v);
      return q_value(root, trial, params, lm, out.mc_seed);
    };
    const DeResult r = optimize_de(objective, lo, hi, {Eigen::VectorXd(u[i])}, de, rng);
    if (out.q_trace.empty()) out.q_trace.push_back(r.seed_values.front());
    u[i] = clamp_control(Vec2(r.best[0], r.best[1]), v);
    out.q_trace.push_back(r.value);
    out.value = r.value;
    out.evaluations += r.evaluations;
  }
  out.control = u;
  return out;
}

/// One-step lookahead (horizon 1) run through the sequential optimizer.
inline PlanResult greedy_policy(const BeliefState& belief, RolloutParams params, Rng& rng) {
  params.horizon = 1;
  return rollout_sequential(belief, params, rng);
}

inline PlanResult plan(PolicyKind kind, const BeliefState& belief, const RolloutParams& params, Rng& rng) {
  switch (kind) {
    case PolicyKind::base: {
      PlanResult r;
      r.control = base_joint_control(belief, params.v0);
      return r;
    }
    case PolicyKind::greedy: return greedy_policy(belief, params, rng);
    case PolicyKind::rollout_joint: return rollout_joint(belief, params, rng);
    case PolicyKind::rollout_sequential: return rollout_sequential(belief, params, rng);
  }
  throw std::invalid_argument("plan: unknown policy");
}

}  // namespace swarmtrack
