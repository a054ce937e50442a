#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "swarmtrack/types.hpp"
#include "swarmtrack/world.hpp"

namespace swarmtrack {

/// A holonomic sensing agent with a ground-stabilized square footprint.
struct AgentState {
  int id = 0;
  Vec2 pos = Vec2::Zero();
  double heading = 0.0;
  Vec2 vel = Vec2::Zero();
  double fov_side = 20.0;  // m
  double alpha = 0.1;      // sensing quality, scales R
  double v_max = 5.0;      // m/s
  double d0 = 28.28;       // m, proximal-track radius
  double comm_range = 150.0;
};

/// Project a velocity command onto the disc of radius `v_max`.
inline Vec2 clamp_control(const Vec2& control, double v_max) {
  const double n = control.norm();
  if (n > v_max && n > 0.0) return control * (v_max / n);
  return control;
}

inline AgentState agent_transition(AgentState agent, const Vec2& control, double dt,
                                   const Rect& bounds) {
  const Vec2 u = clamp_control(control, agent.v_max);
  agent.pos = bounds.clamp(agent.pos + u * dt);
  agent.vel = u;
  if (u.squaredNorm() > 0.0) agent.heading = std::atan2(u.y(), u.x());
  return agent;
}

/// Closed square of side `fov_side` centered on the agent; never rotates.
inline bool fov_contains(const AgentState& agent, const Vec2& point) {
  const double h = 0.5 * agent.fov_side;
  const Vec2 d = (point - agent.pos).cwiseAbs();
  return d.x() <= h && d.y() <= h;
}

/// Range-bearing noise as a position-space covariance:
/// alpha * G(rho) * diag(0.1 r, 0.1 pi r) * G(rho)^T with r floored at r0.
inline Mat2 measurement_covariance(const AgentState& agent, const Vec2& target_pos, double r0) {
  const Vec2 d = target_pos - agent.pos;
  const double r = std::max(d.norm(), r0);
  const double rho = std::atan2(d.y(), d.x());
  const double c = std::cos(rho);
  const double s = std::sin(rho);
  Mat2 G;
  G << c, -s, s, c;
  const Vec2 diag(0.1 * r, 0.1 * std::numbers::pi * r);
  return agent.alpha * G * diag.asDiagonal() * G.transpose();
}

/// A square-root factor L with L L^T = measurement_covariance(...). Built from
/// the rotation directly so a zero alpha gives exactly zero noise.
inline Mat2 measurement_noise_factor(const AgentState& agent, const Vec2& target_pos, double r0) {
  const Vec2 d = target_pos - agent.pos;
  const double r = std::max(d.norm(), r0);
  const double rho = std::atan2(d.y(), d.x());
  const double c = std::cos(rho);
  const double s = std::sin(rho);
  Mat2 G;
  G << c, -s, s, c;
  const Vec2 sd(std::sqrt(agent.alpha * 0.1 * r), std::sqrt(agent.alpha * 0.1 * std::numbers::pi * r));
  return G * sd.asDiagonal();
}

/// Ideal perceiver: exactly one measurement per target inside the FoV and
/// outside every occlusion; no false alarms.
inline std::vector<Measurement> generate_observations(const AgentState& agent,
                                                      const std::vector<TargetState>& targets,
                                                      const SemanticMap& map,
                                                      const MotionModel& model, double r0,
                                                      double time, Rng& rng) {
  std::vector<Measurement> raw;
  std::normal_distribution<double> n01;
  for (const auto& t : targets) {
    if (!fov_contains(agent, t.pos)) continue;
    const Mat2 L = measurement_noise_factor(agent, t.pos, r0);
    const Vec2 noise = L * Vec2(n01(rng), n01(rng));
    Measurement m;
    m.value = model.H * t.state() + noise;
    m.source_pos = t.pos;
    m.agent_id = agent.id;
    m.time = time;
    raw.push_back(m);
  }
  return semantic_filter(raw, map);
}

}  // namespace swarmtrack
