#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

namespace swarmtrack {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;
using Mat24 = Eigen::Matrix<double, 2, 4>;

/// Every stochastic routine takes its stream explicitly; nothing global.
using Rng = std::mt19937_64;

/// Derive an independent stream from a seed and a stream tag.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

/// Closed axis-aligned rectangle.
struct Rect {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  bool contains(const Vec2& p) const {
    return p.x() >= xmin && p.x() <= xmax && p.y() >= ymin && p.y() <= ymax;
  }
  bool intersects(const Rect& o) const {
    return xmin <= o.xmax && o.xmin <= xmax && ymin <= o.ymax && o.ymin <= ymax;
  }
  bool valid() const { return xmax > xmin && ymax > ymin; }
  Vec2 clamp(const Vec2& p) const {
    return {std::min(std::max(p.x(), xmin), xmax), std::min(std::max(p.y(), ymin), ymax)};
  }
  double diagonal() const { return Vec2(xmax - xmin, ymax - ymin).norm(); }
};

/// One detection. `source_pos` is ground truth carried for the simulator
/// (occlusion test, bookkeeping); filters only ever read `value`.
struct Measurement {
  Vec2 value = Vec2::Zero();
  Vec2 source_pos = Vec2::Zero();
  int agent_id = 0;
  double time = 0.0;
};

inline void symmetrize(Mat4& m) { m = 0.5 * (m + m.transpose()).eval(); }

}  // namespace swarmtrack
