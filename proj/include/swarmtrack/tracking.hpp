#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "swarmtrack/sensing.hpp"
#include "swarmtrack/types.hpp"
#include "swarmtrack/world.hpp"

namespace swarmtrack {

/// Raised when a covariance or information matrix stops being invertible.
class FilterDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TrackStatus { tentative, confirmed };

/// Most-recent-last window of detection outcomes.
class HitHistory {
 public:
  explicit HitHistory(std::size_t capacity = 6) : capacity_(capacity) {}

  void push(bool hit) {
    bits_.push_back(hit);
    while (bits_.size() > capacity_) bits_.pop_front();
  }
  std::size_t size() const { return bits_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool back() const { return bits_.back(); }

  std::size_t hits_in_last(std::size_t n) const { return count_last(n, true); }
  std::size_t misses_in_last(std::size_t n) const { return count_last(n, false); }

 private:
  std::size_t count_last(std::size_t n, bool value) const {
    const std::size_t k = std::min(n, bits_.size());
    return static_cast<std::size_t>(std::count(bits_.end() - static_cast<std::ptrdiff_t>(k), bits_.end(), value));
  }

  std::size_t capacity_;
  std::deque<bool> bits_;
};

struct Track {
  int track_id = 0;
  Vec4 mean = Vec4::Zero();
  Mat4 cov = Mat4::Identity();
  TrackStatus status = TrackStatus::tentative;
  HitHistory hits;
  double last_update_time = 0.0;

  Vec2 position() const { return mean.head<2>(); }
  bool confirmed() const { return status == TrackStatus::confirmed; }
};

/// Canonical (information) parameterization: omega = P^-1, q = omega * x.
struct InfoForm {
  Mat4 omega = Mat4::Zero();
  Vec4 q = Vec4::Zero();

  Vec4 mean() const {
    Eigen::LLT<Mat4> llt(omega);
    if (llt.info() != Eigen::Success) throw FilterDivergence("information matrix not positive definite");
    return llt.solve(q);
  }
};

inline InfoForm to_info_form(const Track& track) {
  Eigen::LLT<Mat4> llt(track.cov);
  if (llt.info() != Eigen::Success)
    throw FilterDivergence("track " + std::to_string(track.track_id) + ": covariance not invertible");
  InfoForm info;
  info.omega = llt.solve(Mat4::Identity());
  symmetrize(info.omega);
  info.q = info.omega * track.mean;
  return info;
}

inline Track from_info_form(const InfoForm& info, const Track& templ) {
  Eigen::LLT<Mat4> llt(info.omega);
  if (llt.info() != Eigen::Success)
    throw FilterDivergence("track " + std::to_string(templ.track_id) + ": information matrix not invertible");
  Track t = templ;
  t.cov = llt.solve(Mat4::Identity());
  symmetrize(t.cov);
  t.mean = llt.solve(info.q);
  return t;
}

inline Track kf_predict(Track track, const MotionModel& model) {
  track.mean = model.F * track.mean;
  track.cov = model.F * track.cov * model.F.transpose() + model.Q;
  symmetrize(track.cov);
  return track;
}

using MeasurementCovFn = std::function<Mat2(const Measurement&)>;

/// R for a measurement taken by `agent`, evaluated at the measured position
/// (the filter never sees the true source).
inline MeasurementCovFn agent_measurement_cov(const AgentState& agent, double r0) {
  return [agent, r0](const Measurement& m) { return measurement_covariance(agent, m.value, r0); };
}

struct JpdaParams {
  double p_d = 0.95;
  double clutter_density = 0.0;  // per m^2; zero means no false alarms
  double gate = 9.21;            // chi-square 2 dof, 99%
  std::size_t event_cap = 10000;
};

/// tracks x measurements gating outcome plus the squared Mahalanobis distances.
struct GateMatrix {
  std::size_t num_tracks = 0;
  std::size_t num_measurements = 0;
  std::vector<char> inside;
  std::vector<double> d2;
  std::size_t singular = 0;

  bool operator()(std::size_t t, std::size_t j) const { return inside[t * num_measurements + j] != 0; }
  double distance2(std::size_t t, std::size_t j) const { return d2[t * num_measurements + j]; }
  bool any_for_measurement(std::size_t j) const {
    for (std::size_t t = 0; t < num_tracks; ++t)
      if ((*this)(t, j)) return true;
    return false;
  }
};

inline GateMatrix jpda_gate(const std::vector<Track>& tracks, const std::vector<Measurement>& measurements,
                            const MotionModel& model, const MeasurementCovFn& cov_fn, double gamma) {
  GateMatrix g;
  g.num_tracks = tracks.size();
  g.num_measurements = measurements.size();
  g.inside.assign(g.num_tracks * g.num_measurements, 0);
  g.d2.assign(g.num_tracks * g.num_measurements, std::numeric_limits<double>::infinity());
  for (std::size_t j = 0; j < measurements.size(); ++j) {
    const Mat2 R = cov_fn(measurements[j]);
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      const Mat2 S = model.H * tracks[t].cov * model.H.transpose() + R;
      Eigen::LLT<Mat2> llt(S);
      if (llt.info() != Eigen::Success) {
        ++g.singular;
        continue;
      }
      const Vec2 nu = measurements[j].value - model.H * tracks[t].mean;
      const double d2 = nu.dot(llt.solve(nu));
      g.d2[t * g.num_measurements + j] = d2;
      g.inside[t * g.num_measurements + j] = d2 <= gamma ? 1 : 0;
    }
  }
  return g;
}

struct JpdaResult {
  std::vector<Track> tracks;
  /// tracks x (1 + measurements); column 0 is the miss weight.
  Eigen::MatrixXd beta;
  std::size_t events = 0;
  bool fallback = false;
};

namespace detail {

struct EventEnumerator {
  const std::vector<std::vector<double>>& log_g;  // [t][j], -inf when not gated
  std::size_t num_tracks;
  std::size_t num_meas;
  double log_pd;
  double log_miss;
  double log_clutter;
  std::size_t cap;

  std::vector<int> assign{};     // per measurement: track index or -1
  std::vector<char> used{};      // per track
  std::vector<double> log_weights{};
  std::vector<std::size_t> clutter_counts{};
  std::vector<std::vector<int>> events{};
  bool overflow = false;

  void run() {
    assign.assign(num_meas, -1);
    used.assign(num_tracks, 0);
    recurse(0, 0.0, 0);
  }

  void recurse(std::size_t j, double logw, std::size_t clutter) {
    if (overflow) return;
    if (j == num_meas) {
      double w = logw;
      for (std::size_t t = 0; t < num_tracks; ++t) w += used[t] ? log_pd : log_miss;
      if (events.size() >= cap) {
        overflow = true;
        return;
      }
      log_weights.push_back(w);
      clutter_counts.push_back(clutter);
      events.push_back(assign);
      return;
    }
    assign[j] = -1;
    recurse(j + 1, logw + log_clutter, clutter + 1);
    for (std::size_t t = 0; t < num_tracks; ++t) {
      if (used[t] || !std::isfinite(log_g[t][j])) continue;
      used[t] = 1;
      assign[j] = static_cast<int>(t);
      recurse(j + 1, logw + log_g[t][j], clutter);
      used[t] = 0;
      assign[j] = -1;
    }
  }
};

inline double log_gaussian2(const Vec2& nu, const Mat2& S) {
  Eigen::LLT<Mat2> llt(S);
  const Mat2 L = llt.matrixL();
  const double logdet = 2.0 * (std::log(L(0, 0)) + std::log(L(1, 1)));
  return -0.5 * nu.dot(llt.solve(nu)) - 0.5 * logdet - std::log(2.0 * std::numbers::pi);
}

}  // namespace detail

/// Parametric JPDA update over all feasible joint association events.
/// Falls back to per-track nearest neighbour when the event count exceeds
/// `params.event_cap` or every event has zero probability.
inline JpdaResult jpda_update(const std::vector<Track>& tracks, const std::vector<Measurement>& measurements,
                              const GateMatrix& gate, const MotionModel& model,
                              const MeasurementCovFn& cov_fn, const JpdaParams& params) {
  const std::size_t T = tracks.size();
  const std::size_t M = measurements.size();
  JpdaResult res;
  res.beta = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(M + 1));

  // Per-pair Kalman quantities for every gated pair.
  std::vector<Mat2> R(M);
  for (std::size_t j = 0; j < M; ++j) R[j] = cov_fn(measurements[j]);
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> log_g(T, std::vector<double>(M, ninf));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < M; ++j)
      if (gate(t, j)) {
        const Mat2 S = model.H * tracks[t].cov * model.H.transpose() + R[j];
        log_g[t][j] = detail::log_gaussian2(measurements[j].value - model.H * tracks[t].mean, S);
      }

  // Only measurements inside some gate take part; the rest are unassociated.
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < M; ++j)
    if (gate.any_for_measurement(j)) active.push_back(j);
  std::vector<std::vector<double>> log_g_active(T, std::vector<double>(active.size(), ninf));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t a = 0; a < active.size(); ++a) log_g_active[t][a] = log_g[t][active[a]];

  // Zero clutter density is taken as the limit lambda -> 0: only events with
  // the fewest clutter-labelled measurements keep nonzero probability.
  const bool no_clutter = params.clutter_density <= 0.0;
  detail::EventEnumerator en{log_g_active, T, active.size(), std::log(params.p_d), std::log1p(-params.p_d),
                             no_clutter ? 0.0 : std::log(params.clutter_density), params.event_cap};
  en.run();
  res.events = en.events.size();
  if (no_clutter && !en.overflow && !en.events.empty()) {
    const std::size_t fewest = *std::min_element(en.clutter_counts.begin(), en.clutter_counts.end());
    for (std::size_t e = 0; e < en.log_weights.size(); ++e)
      if (en.clutter_counts[e] > fewest) en.log_weights[e] = ninf;
  }

  double max_lw = ninf;
  for (double w : en.log_weights) max_lw = std::max(max_lw, w);

  if (en.overflow || !std::isfinite(max_lw)) {
    res.fallback = true;
    for (std::size_t t = 0; t < T; ++t) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_j = M;
      for (std::size_t j = 0; j < M; ++j)
        if (gate(t, j) && gate.distance2(t, j) < best) {
          best = gate.distance2(t, j);
          best_j = j;
        }
      if (best_j < M)
        res.beta(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(best_j + 1)) = 1.0;
      else
        res.beta(static_cast<Eigen::Index>(t), 0) = 1.0;
    }
  } else {
    double total = 0.0;
    std::vector<double> w(en.log_weights.size());
    for (std::size_t e = 0; e < w.size(); ++e) {
      w[e] = std::exp(en.log_weights[e] - max_lw);
      total += w[e];
    }
    for (std::size_t e = 0; e < w.size(); ++e) {
      const double p = w[e] / total;
      std::vector<char> hit(T, 0);
      for (std::size_t a = 0; a < active.size(); ++a) {
        const int t = en.events[e][a];
        if (t < 0) continue;
        hit[static_cast<std::size_t>(t)] = 1;
        res.beta(t, static_cast<Eigen::Index>(active[a] + 1)) += p;
      }
      for (std::size_t t = 0; t < T; ++t)
        if (!hit[t]) res.beta(static_cast<Eigen::Index>(t), 0) += p;
    }
  }

  res.tracks.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    const Track& prior = tracks[t];
    Track out = prior;
    const auto ti = static_cast<Eigen::Index>(t);
    const double b0 = res.beta(ti, 0);
    const double assoc = 1.0 - b0;
    if (assoc > 0.0) {
      std::vector<Vec4> xs;
      std::vector<Mat4> Ps;
      std::vector<double> bs;
      xs.push_back(prior.mean);
      Ps.push_back(prior.cov);
      bs.push_back(b0);
      for (std::size_t j = 0; j < M; ++j) {
        const double b = res.beta(ti, static_cast<Eigen::Index>(j + 1));
        if (b <= 0.0) continue;
        const Mat2 S = model.H * prior.cov * model.H.transpose() + R[j];
        const Eigen::Matrix<double, 4, 2> K = prior.cov * model.H.transpose() * S.inverse();
        xs.push_back(prior.mean + K * (measurements[j].value - model.H * prior.mean));
        Ps.push_back((Mat4::Identity() - K * model.H) * prior.cov);
        bs.push_back(b);
      }
      Vec4 xbar = Vec4::Zero();
      for (std::size_t k = 0; k < xs.size(); ++k) xbar += bs[k] * xs[k];
      Mat4 Pbar = Mat4::Zero();
      for (std::size_t k = 0; k < xs.size(); ++k) {
        if (bs[k] == 0.0) continue;
        const Vec4 dx = xs[k] - xbar;
        Pbar += bs[k] * (Ps[k] + dx * dx.transpose());
      }
      symmetrize(Pbar);
      out.mean = xbar;
      out.cov = Pbar;
    }
    const bool hit = assoc > 0.5;
    out.hits.push(hit);
    if (hit && !measurements.empty()) out.last_update_time = measurements.front().time;
    res.tracks.push_back(std::move(out));
  }
  return res;
}

/// Measurements that fall in no track's gate.
inline std::vector<Measurement> unassociated(const GateMatrix& gate, const std::vector<Measurement>& measurements) {
  std::vector<Measurement> out;
  for (std::size_t j = 0; j < measurements.size(); ++j)
    if (!gate.any_for_measurement(j)) out.push_back(measurements[j]);
  return out;
}

struct TrackLogic {
  std::size_t m_confirm = 2;
  std::size_t n_confirm = 3;
  std::size_t m_delete = 5;
  std::size_t n_delete = 6;

  std::size_t window() const { return std::max(n_confirm, n_delete); }
};

struct TrackerDiagnostics {
  std::size_t gate_singular = 0;
  std::size_t jpda_fallbacks = 0;
  std::size_t tracks_spawned = 0;
  std::size_t tracks_confirmed = 0;
  std::size_t tracks_deleted = 0;

  TrackerDiagnostics& operator+=(const TrackerDiagnostics& o) {
    gate_singular += o.gate_singular;
    jpda_fallbacks += o.jpda_fallbacks;
    tracks_spawned += o.tracks_spawned;
    tracks_confirmed += o.tracks_confirmed;
    tracks_deleted += o.tracks_deleted;
    return *this;
  }
};

/// M-of-N confirmation and deletion, then one tentative track per
/// unassociated measurement. The birth detection counts as the first hit.
inline std::vector<Track> maintain_tracks(const std::vector<Track>& tracks,
                                          const std::vector<Measurement>& unassociated_meas,
                                          const TrackLogic& logic, const MotionModel& model,
                                          const Mat4& init_cov, int& next_id,
                                          TrackerDiagnostics* diag = nullptr) {
  std::vector<Track> out;
  out.reserve(tracks.size() + unassociated_meas.size());
  for (const auto& t : tracks) {
    if (t.hits.misses_in_last(logic.n_delete) >= logic.m_delete) {
      if (diag) ++diag->tracks_deleted;
      continue;
    }
    Track kept = t;
    if (kept.status == TrackStatus::tentative && kept.hits.hits_in_last(logic.n_confirm) >= logic.m_confirm) {
      kept.status = TrackStatus::confirmed;
      if (diag) ++diag->tracks_confirmed;
    }
    out.push_back(std::move(kept));
  }
  for (const auto& m : unassociated_meas) {
    Track t;
    t.track_id = next_id++;
    t.mean << model.H.transpose() * m.value;
    t.cov = init_cov;
    t.status = TrackStatus::tentative;
    t.hits = HitHistory(logic.window());
    t.hits.push(true);
    t.last_update_time = m.time;
    out.push_back(std::move(t));
    if (diag) ++diag->tracks_spawned;
  }
  return out;
}

/// One agent's local multi-target tracker.
class Tracker {
 public:
  Tracker() = default;
  Tracker(TrackLogic logic, JpdaParams jpda, Mat4 init_cov)
      : logic_(logic), jpda_(jpda), init_cov_(init_cov) {}

  /// Predict to the scan time, associate, update, then run track logic.
  void step(const std::vector<Measurement>& scan, const AgentState& agent, const MotionModel& model,
            double r0) {
    for (auto& t : tracks_) t = kf_predict(t, model);
    const MeasurementCovFn cov_fn = agent_measurement_cov(agent, r0);
    const GateMatrix gate = jpda_gate(tracks_, scan, model, cov_fn, jpda_.gate);
    diag_.gate_singular += gate.singular;
    JpdaResult upd = jpda_update(tracks_, scan, gate, model, cov_fn, jpda_);
    if (upd.fallback) ++diag_.jpda_fallbacks;
    tracks_ = maintain_tracks(upd.tracks, unassociated(gate, scan), logic_, model, init_cov_, next_id_, &diag_);
  }

  const std::vector<Track>& tracks() const { return tracks_; }
  std::vector<Track>& tracks() { return tracks_; }
  const TrackerDiagnostics& diagnostics() const { return diag_; }

  std::vector<Track> confirmed() const {
    std::vector<Track> out;
    for (const auto& t : tracks_)
      if (t.confirmed()) out.push_back(t);
    return out;
  }

 private:
  TrackLogic logic_;
  JpdaParams jpda_;
  Mat4 init_cov_ = Vec4(4.0, 4.0, 9.0, 9.0).asDiagonal();
  std::vector<Track> tracks_;
  int next_id_ = 0;
  TrackerDiagnostics diag_;
};

}  // namespace swarmtrack
