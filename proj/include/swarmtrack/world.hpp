#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "swarmtrack/types.hpp"

namespace swarmtrack {

/// Linear-Gaussian nearly-constant-velocity model over (x, y, vx, vy).
struct MotionModel {
  double dt = 1.0;
  Mat4 F = Mat4::Identity();
  Mat4 Q = Mat4::Zero();
  Mat24 H = Mat24::Zero();

  /// Continuous white-noise-acceleration discretization with intensity `q`.
  static MotionModel ncv(double dt, double q) {
    MotionModel m;
    m.dt = dt;
    m.F = Mat4::Identity();
    m.F(0, 2) = dt;
    m.F(1, 3) = dt;
    const double d2 = dt * dt;
    const double d3 = d2 * dt;
    m.Q.setZero();
    m.Q(0, 0) = m.Q(1, 1) = q * d3 / 3.0;
    m.Q(0, 2) = m.Q(2, 0) = m.Q(1, 3) = m.Q(3, 1) = q * d2 / 2.0;
    m.Q(2, 2) = m.Q(3, 3) = q * dt;
    m.H.setZero();
    m.H(0, 0) = 1.0;
    m.H(1, 1) = 1.0;
    return m;
  }

  static MotionModel ncv_with_noise(double dt, const Mat4& Q) {
    MotionModel m = ncv(dt, 0.0);
    m.Q = Q;
    return m;
  }
};

/// Draws w ~ N(0, Q). Q may be singular (e.g. zero), so the factor comes from
/// an eigendecomposition rather than Cholesky.
class GaussianSampler4 {
 public:
  explicit GaussianSampler4(const Mat4& cov) {
    Eigen::SelfAdjointEigenSolver<Mat4> es(cov);
    const Vec4 ev = es.eigenvalues().cwiseMax(0.0);
    factor_ = es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
    zero_ = ev.maxCoeff() == 0.0;
  }

  Vec4 operator()(Rng& rng) const {
    if (zero_) return Vec4::Zero();
    std::normal_distribution<double> n01;
    Vec4 z;
    for (int i = 0; i < 4; ++i) z[i] = n01(rng);
    return factor_ * z;
  }

 private:
  Mat4 factor_ = Mat4::Zero();
  bool zero_ = true;
};

inline Vec4 propagate_model(const Vec4& state, const MotionModel& model, Rng& rng) {
  return model.F * state + GaussianSampler4(model.Q)(rng);
}

struct LevyParams {
  double alpha = 1.5;     // Pareto shape
  double x_min = 2.0;     // m
  double l_max = 40.0;    // m, truncation
  double speed_min = 1.0; // m/s
  double speed_max = 3.0; // m/s
};

struct LevySegment {
  double heading = 0.0;
  double speed = 0.0;
  double remaining = 0.0;
};

struct TargetState {
  int id = 0;
  Vec2 pos = Vec2::Zero();
  Vec2 vel = Vec2::Zero();
  LevySegment segment;
  std::size_t segments_drawn = 0;

  Vec4 state() const { return {pos.x(), pos.y(), vel.x(), vel.y()}; }
};

/// Truncated-Pareto step length by inverse CDF on [x_min, l_max].
inline double draw_levy_length(const LevyParams& p, Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double u = u01(rng);
  const double tail = std::pow(p.x_min / p.l_max, p.alpha);
  return p.x_min * std::pow(1.0 - u * (1.0 - tail), -1.0 / p.alpha);
}

inline LevySegment draw_levy_segment(const LevyParams& p, Rng& rng) {
  LevySegment s;
  std::uniform_real_distribution<double> heading(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> speed(p.speed_min, p.speed_max);
  s.heading = heading(rng);
  s.speed = speed(rng);
  s.remaining = draw_levy_length(p, rng);
  return s;
}

namespace detail {

// Mirror the position back inside `bounds`, flipping the matching velocity
// component on each wall contact.
inline void reflect(Vec2& pos, Vec2& dir, const Rect& bounds) {
  for (int guard = 0; guard < 64 && !bounds.contains(pos); ++guard) {
    if (pos.x() < bounds.xmin) {
      pos.x() = 2.0 * bounds.xmin - pos.x();
      dir.x() = -dir.x();
    } else if (pos.x() > bounds.xmax) {
      pos.x() = 2.0 * bounds.xmax - pos.x();
      dir.x() = -dir.x();
    }
    if (pos.y() < bounds.ymin) {
      pos.y() = 2.0 * bounds.ymin - pos.y();
      dir.y() = -dir.y();
    } else if (pos.y() > bounds.ymax) {
      pos.y() = 2.0 * bounds.ymax - pos.y();
      dir.y() = -dir.y();
    }
  }
  pos = bounds.clamp(pos);
}

}  // namespace detail

inline TargetState start_levy_target(int id, const Vec2& pos, const LevyParams& p, Rng& rng) {
  TargetState t;
  t.id = id;
  t.pos = pos;
  t.segment = draw_levy_segment(p, rng);
  t.segments_drawn = 1;
  t.vel = t.segment.speed * Vec2(std::cos(t.segment.heading), std::sin(t.segment.heading));
  return t;
}

/// Advance a Levy-walk target by `dt` seconds. A segment that runs out
/// mid-step is finished and the rest of the step continues on a fresh draw.
inline TargetState step_levy_target(TargetState target, double dt, const LevyParams& p,
                                    const Rect& bounds, Rng& rng) {
  double left = dt;
  while (left > 0.0) {
    if (target.segment.remaining <= 0.0 || target.segment.speed <= 0.0) {
      target.segment = draw_levy_segment(p, rng);
      ++target.segments_drawn;
    }
    LevySegment& seg = target.segment;
    const double seg_time = seg.remaining / seg.speed;
    const double tau = std::min(seg_time, left);
    Vec2 dir(std::cos(seg.heading), std::sin(seg.heading));
    target.pos += dir * seg.speed * tau;
    detail::reflect(target.pos, dir, bounds);
    seg.heading = std::atan2(dir.y(), dir.x());
    if (tau >= seg_time) {
      seg.remaining = 0.0;
    } else {
      seg.remaining -= seg.speed * tau;
    }
    target.vel = dir * seg.speed;
    left -= tau;
  }
  return target;
}

struct SemanticMap {
  Rect bounds;
  std::vector<Rect> occlusions;

  bool occluded(const Vec2& p) const {
    for (const auto& r : occlusions)
      if (r.contains(p)) return true;
    return false;
  }
};

/// Keeps measurements whose generating target lies outside every occlusion.
inline std::vector<Measurement> semantic_filter(const std::vector<Measurement>& measurements,
                                                const SemanticMap& map) {
  std::vector<Measurement> out;
  out.reserve(measurements.size());
  for (const auto& m : measurements)
    if (!map.occluded(m.source_pos)) out.push_back(m);
  return out;
}

}  // namespace swarmtrack
