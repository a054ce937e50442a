#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "swarmtrack/tracking.hpp"

using namespace swarmtrack;

namespace {

Track make_track(int id, const Vec4& mean, const Mat4& cov) {
  Track t;
  t.track_id = id;
  t.mean = mean;
  t.cov = cov;
  return t;
}

Measurement meas(double x, double y) {
  Measurement m;
  m.value = Vec2(x, y);
  m.source_pos = m.value;
  return m;
}

MeasurementCovFn constant_cov(const Mat2& R) {
  return [R](const Measurement&) { return R; };
}

// Closed-form Kalman update in information form: an independent route to the
// same posterior as gain-based updating.
std::pair<Vec4, Mat4> info_form_update(const Track& t, const Vec2& z, const Mat2& R, const Mat24& H) {
  const Mat4 omega = t.cov.inverse() + H.transpose() * R.inverse() * H;
  const Mat4 P = omega.inverse();
  const Vec4 x = P * (t.cov.inverse() * t.mean + H.transpose() * R.inverse() * z);
  return {x, P};
}

Mat4 random_spd(Rng& rng) {
  std::normal_distribution<double> n01;
  Mat4 A;
  for (int i = 0; i < 16; ++i) A(i) = n01(rng);
  return A * A.transpose() + 0.5 * Mat4::Identity();
}

double gauss2(const Vec2& nu, const Mat2& S) {
  return std::exp(-0.5 * nu.dot(S.inverse() * nu)) / (2.0 * std::numbers::pi * std::sqrt(S.determinant()));
}

}  // namespace

TEST(KfPredict, IdentityCovarianceUnitVelocity) {
  const auto m = MotionModel::ncv(1.0, 0.0);
  const auto t = kf_predict(make_track(0, Vec4(0, 0, 1, 0), Mat4::Identity()), m);
  EXPECT_EQ(t.mean, Vec4(1, 0, 1, 0));
  EXPECT_TRUE(t.cov.isApprox(m.F * m.F.transpose()));
}

TEST(KfPredict, PositionVarianceExpansion) {
  Rng rng = make_rng(21);
  const double dt = 0.7;
  const auto m = MotionModel::ncv(dt, 0.0);
  const Mat4 P = random_spd(rng);
  const auto t = kf_predict(make_track(0, Vec4::Zero(), P), m);
  EXPECT_EQ(t.mean, Vec4::Zero());
  EXPECT_NEAR(t.cov(0, 0), P(0, 0) + 2 * dt * P(0, 2) + dt * dt * P(2, 2), 1e-12);
  EXPECT_NEAR(t.cov(1, 1), P(1, 1) + 2 * dt * P(1, 3) + dt * dt * P(3, 3), 1e-12);
}

TEST(KfPredict, TwoHalfStepsEqualOneFullStepWithoutNoise) {
  Rng rng = make_rng(22);
  const Track t0 = make_track(0, Vec4(1, 2, 3, 4), random_spd(rng));
  const auto half = MotionModel::ncv(0.5, 0.0);
  const auto full = MotionModel::ncv(1.0, 0.0);
  const auto a = kf_predict(kf_predict(t0, half), half);
  const auto b = kf_predict(t0, full);
  EXPECT_LT((a.mean - b.mean).norm(), 1e-12);
  EXPECT_LT((a.cov - b.cov).norm(), 1e-12);
}

TEST(JpdaGate, MeasurementAtPredictionIsInside) {
  const auto m = MotionModel::ncv(0.2, 0.5);
  const std::vector<Track> tr{make_track(0, Vec4(3, 4, 0, 0), Mat4::Identity())};
  const auto g = jpda_gate(tr, {meas(3, 4)}, m, constant_cov(Mat2::Identity()), 9.21);
  EXPECT_TRUE(g(0, 0));
  EXPECT_EQ(g.distance2(0, 0), 0.0);
}

TEST(JpdaGate, FarMeasurementIsOutside) {
  const auto m = MotionModel::ncv(0.2, 0.5);
  Mat4 P = Mat4::Identity();
  P.topLeftCorner<2, 2>() = 0.5 * Mat2::Identity();
  const std::vector<Track> tr{make_track(0, Vec4::Zero(), P)};
  const auto g = jpda_gate(tr, {meas(10, 0)}, m, constant_cov(0.5 * Mat2::Identity()), 9.21);
  EXPECT_FALSE(g(0, 0));
  EXPECT_NEAR(g.distance2(0, 0), 100.0, 1e-12);
}

TEST(JpdaGate, NoMeasurements) {
  const auto m = MotionModel::ncv(0.2, 0.5);
  const std::vector<Track> tr{make_track(0, Vec4::Zero(), Mat4::Identity()), make_track(1, Vec4::Ones(), Mat4::Identity())};
  const auto g = jpda_gate(tr, {}, m, constant_cov(Mat2::Identity()), 9.21);
  EXPECT_EQ(g.num_tracks, 2u);
  EXPECT_EQ(g.num_measurements, 0u);
}

TEST(JpdaGate, SingularInnovationCovarianceIsReportedAndGatedOut) {
  const auto m = MotionModel::ncv(0.2, 0.5);
  const std::vector<Track> tr{make_track(0, Vec4::Zero(), Mat4::Identity())};
  const auto g = jpda_gate(tr, {meas(0, 0)}, m, constant_cov(-Mat2::Identity()), 9.21);
  EXPECT_FALSE(g(0, 0));
  EXPECT_EQ(g.singular, 1u);
}

TEST(JpdaUpdate, SingleTrackSingleMeasurementIsKalman) {
  Rng rng = make_rng(23);
  const auto m = MotionModel::ncv(0.2, 0.5);
  for (int k = 0; k < 50; ++k) {
    const Track t = make_track(0, Vec4(1, -1, 0.5, 0.2), random_spd(rng));
    const Mat2 R = Mat2(Vec2(0.3, 0.8).asDiagonal());
    const Measurement z = meas(1.4, -0.6);
    const auto fn = constant_cov(R);
    const auto gate = jpda_gate({t}, {z}, m, fn, 1e9);
    JpdaParams p;
    p.p_d = 1.0;
    p.clutter_density = 0.0;
    const auto res = jpda_update({t}, {z}, gate, m, fn, p);
    EXPECT_DOUBLE_EQ(res.beta(0, 1), 1.0);
    const auto [x, P] = info_form_update(t, z.value, R, m.H);
    EXPECT_LT((res.tracks[0].mean - x).norm(), 1e-10);
    EXPECT_LT((res.tracks[0].cov - P).norm(), 1e-10);
    EXPECT_LE(res.tracks[0].cov.trace(), t.cov.trace());
    EXPECT_TRUE(res.tracks[0].hits.back());
  }
}

TEST(JpdaUpdate, MissLeavesTrackButRecordsMiss) {
  const auto m = MotionModel::ncv(0.2, 0.5);
  const Track t = make_track(0, Vec4(1, 2, 3, 4), 2.0 * Mat4::Identity());
  const auto fn = constant_cov(Mat2::Identity());
  const std::vector<Measurement> zs{meas(100, 100)};
  const auto gate = jpda_gate({t}, zs, m, fn, 9.21);
  const auto res = jpda_update({t}, zs, gate, m, fn, JpdaParams{});
  EXPECT_EQ(res.tracks[0].mean, t.mean);
  EXPECT_EQ(res.tracks[0].cov, t.cov);
  EXPECT_FALSE(res.tracks[0].hits.back());
  EXPECT_DOUBLE_EQ(res.beta(0, 0), 1.0);
}

TEST(JpdaUpdate, SeparatedTracksMatchIndependentKalmanUpdates) {
  const auto m = MotionModel::ncv(0.2, 0.5);
  const Track a = make_track(0, Vec4(0, 0, 1, 0), 0.5 * Mat4::Identity());
  const Track b = make_track(1, Vec4(50, 50, 0, 1), 0.8 * Mat4::Identity());
  const Mat2 R = 0.2 * Mat2::Identity();
  const auto fn = constant_cov(R);
  const std::vector<Measurement> zs{meas(50.3, 49.8), meas(0.2, -0.1)};
  const auto gate = jpda_gate({a, b}, zs, m, fn, 9.21);
  ASSERT_TRUE(gate(0, 1) && gate(1, 0) && !gate(0, 0) && !gate(1, 1));
  JpdaParams p;
  p.p_d = 1.0;
  const auto res = jpda_update({a, b}, zs, gate, m, fn, p);
  const auto [xa, Pa] = info_form_update(a, zs[1].value, R, m.H);
  const auto [xb, Pb] = info_form_update(b, zs[0].value, R, m.H);
  EXPECT_LT((res.tracks[0].mean - xa).norm(), 1e-10);
  EXPECT_LT((res.tracks[0].cov - Pa).norm(), 1e-10);
  EXPECT_LT((res.tracks[1].mean - xb).norm(), 1e-10);
  EXPECT_LT((res.tracks[1].cov - Pb).norm(), 1e-10);
}

TEST(JpdaUpdate, TwoByTwoWeightsMatchHandEnumeration) {
  const auto m = MotionModel::ncv(0.2, 0.5);
  const Track a = make_track(0, Vec4(0, 0, 0, 0), Mat4::Identity());
  const Track b = make_track(1, Vec4(1.5, 0, 0, 0), Mat4::Identity());
  const Mat2 R = 0.5 * Mat2::Identity();
  const auto fn = constant_cov(R);
  const std::vector<Measurement> zs{meas(0.4, 0.1), meas(1.1, -0.2)};
  const auto gate = jpda_gate({a, b}, zs, m, fn, 1e9);
  JpdaParams p;
  p.p_d = 0.9;
  p.clutter_density = 0.01;
  const auto res = jpda_update({a, b}, zs, gate, m, fn, p);

  const Mat2 S = Mat2::Identity() + R;
  auto g = [&](const Track& t, const Measurement& z) { return gauss2(z.value - t.mean.head<2>(), S); };
  const double pd = p.p_d, q = 1 - pd, lam = p.clutter_density;
  // Seven feasible events.
  const double e_none = q * q * lam * lam;
  const double e_a1 = pd * g(a, zs[0]) * q * lam;
  const double e_a2 = pd * g(a, zs[1]) * q * lam;
  const double e_b1 = pd * g(b, zs[0]) * q * lam;
  const double e_b2 = pd * g(b, zs[1]) * q * lam;
  const double e_a1b2 = pd * pd * g(a, zs[0]) * g(b, zs[1]);
  const double e_a2b1 = pd * pd * g(a, zs[1]) * g(b, zs[0]);
  const double total = e_none + e_a1 + e_a2 + e_b1 + e_b2 + e_a1b2 + e_a2b1;
  EXPECT_EQ(res.events, 7u);
  EXPECT_NEAR(res.beta(0, 1), (e_a1 + e_a1b2) / total, 1e-12);
  EXPECT_NEAR(res.beta(0, 2), (e_a2 + e_a2b1) / total, 1e-12);
  EXPECT_NEAR(res.beta(1, 1), (e_b1 + e_a2b1) / total, 1e-12);
  EXPECT_NEAR(res.beta(1, 2), (e_b2 + e_a1b2) / total, 1e-12);
  EXPECT_NEAR(res.beta(0, 0), (e_none + e_b1 + e_b2) / total, 1e-12);
}

TEST(JpdaUpdate, WeightsSumToOneAndCovariancesStaySpd) {
  Rng rng = make_rng(25);
  std::uniform_real_distribution<double> u(0, 12);
  const auto m = MotionModel::ncv(0.2, 0.5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Track> tracks;
    for (int t = 0; t < 3; ++t) tracks.push_back(make_track(t, Vec4(u(rng), u(rng), 0, 0), random_spd(rng)));
    std::vector<Measurement> zs;
    for (int j = 0; j < 4; ++j) zs.push_back(meas(u(rng), u(rng)));
    AgentState agent;
    agent.pos = Vec2(6, 6);
    const auto fn = agent_measurement_cov(agent, 1.0);
    const auto gate = jpda_gate(tracks, zs, m, fn, 9.21);
    const auto res = jpda_update(tracks, zs, gate, m, fn, JpdaParams{});
    for (Eigen::Index t = 0; t < res.beta.rows(); ++t) {
      ASSERT_NEAR(res.beta.row(t).sum(), 1.0, 1e-12);
      const Mat4& P = res.tracks[static_cast<std::size_t>(t)].cov;
      ASSERT_LT((P - P.transpose()).norm(), 1e-9);
      ASSERT_EQ(Eigen::LLT<Mat4>(P).info(), Eigen::Success);
    }
  }
}

TEST(JpdaUpdate, EventCapFallsBackToNearestNeighbour) {
  const auto m = MotionModel::ncv(0.2, 0.5);
  const std::vector<Track> tracks{make_track(0, Vec4::Zero(), Mat4::Identity()),
                                  make_track(1, Vec4(1, 0, 0, 0), Mat4::Identity())};
  const std::vector<Measurement> zs{meas(0.1, 0), meas(0.9, 0)};
  const auto fn = constant_cov(Mat2::Identity());
  const auto gate = jpda_gate(tracks, zs, m, fn, 1e9);
  JpdaParams p;
  p.event_cap = 3;
  const auto res = jpda_update(tracks, zs, gate, m, fn, p);
  EXPECT_TRUE(res.fallback);
  EXPECT_EQ(res.beta(0, 1), 1.0);
  EXPECT_EQ(res.beta(1, 2), 1.0);
}

TEST(MaintainTracks, SpawnsTentativeTrackAtMeasurement) {
  int next_id = 7;
  const auto m = MotionModel::ncv(0.2, 0.5);
  const Mat4 init = Vec4(4, 4, 9, 9).asDiagonal();
  const auto out = maintain_tracks({}, {meas(12, -3)}, TrackLogic{}, m, init, next_id);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].track_id, 7);
  EXPECT_EQ(next_id, 8);
  EXPECT_EQ(out[0].mean, Vec4(12, -3, 0, 0));
  EXPECT_EQ(out[0].cov, init);
  EXPECT_EQ(out[0].status, TrackStatus::tentative);
}

TEST(MaintainTracks, ConfirmsOnTwoOfThree) {
  int next_id = 0;
  Track t = make_track(0, Vec4::Zero(), Mat4::Identity());
  t.hits.push(true);
  t.hits.push(true);
  const auto out = maintain_tracks({t}, {}, TrackLogic{}, MotionModel::ncv(0.2, 0.5), Mat4::Identity(), next_id);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].status, TrackStatus::confirmed);
}

TEST(MaintainTracks, SingleHitStaysTentative) {
  int next_id = 0;
  Track t = make_track(0, Vec4::Zero(), Mat4::Identity());
  t.hits.push(true);
  t.hits.push(false);
  const auto out = maintain_tracks({t}, {}, TrackLogic{}, MotionModel::ncv(0.2, 0.5), Mat4::Identity(), next_id);
  EXPECT_EQ(out[0].status, TrackStatus::tentative);
}

TEST(MaintainTracks, DeletesOnFiveMissesOfSix) {
  int next_id = 0;
  TrackerDiagnostics diag;
  Track t = make_track(0, Vec4::Zero(), Mat4::Identity());
  t.status = TrackStatus::confirmed;
  for (int k = 0; k < 5; ++k) t.hits.push(false);
  Track keep = make_track(1, Vec4::Zero(), Mat4::Identity());
  keep.status = TrackStatus::confirmed;
  for (int k = 0; k < 4; ++k) keep.hits.push(false);
  const auto out =
      maintain_tracks({t, keep}, {}, TrackLogic{}, MotionModel::ncv(0.2, 0.5), Mat4::Identity(), next_id, &diag);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].track_id, 1);
  EXPECT_EQ(diag.tracks_deleted, 1u);
}

TEST(HitHistory, WindowIsBounded) {
  HitHistory h(3);
  for (int k = 0; k < 10; ++k) h.push(k % 2 == 0);
  EXPECT_EQ(h.size(), 3u);
  EXPECT_EQ(h.hits_in_last(3), 1u);
  EXPECT_EQ(h.misses_in_last(2), 1u);
}

TEST(InfoForm, IdentityCovariance) {
  const auto info = to_info_form(make_track(0, Vec4(1, 2, 3, 4), Mat4::Identity()));
  EXPECT_TRUE(info.omega.isApprox(Mat4::Identity()));
  EXPECT_TRUE(info.q.isApprox(Vec4(1, 2, 3, 4)));
}

TEST(InfoForm, ScaledCovariance) {
  const auto info = to_info_form(make_track(0, Vec4::Zero(), 2.0 * Mat4::Identity()));
  EXPECT_TRUE(info.omega.isApprox(0.5 * Mat4::Identity()));
  EXPECT_EQ(info.q, Vec4::Zero());
}

TEST(InfoForm, RoundTripOnRandomSpd) {
  Rng rng = make_rng(26);
  std::normal_distribution<double> n01;
  for (int k = 0; k < 200; ++k) {
    const Track t = make_track(k, Vec4(n01(rng), n01(rng), n01(rng), n01(rng)) * 10.0, random_spd(rng));
    const Track back = from_info_form(to_info_form(t), t);
    ASSERT_LE((back.mean - t.mean).norm(), 1e-6 * std::max(1.0, t.mean.norm()));
    ASSERT_LE((back.cov - t.cov).norm(), 1e-6 * t.cov.norm());
  }
}

TEST(InfoForm, SingularCovarianceSignalsDivergence) {
  Mat4 P = Mat4::Identity();
  P(3, 3) = 0.0;
  EXPECT_THROW(to_info_form(make_track(0, Vec4::Zero(), P)), FilterDivergence);
  InfoForm bad;
  EXPECT_THROW(from_info_form(bad, make_track(0, Vec4::Zero(), Mat4::Identity())), FilterDivergence);
}

TEST(Tracker, ConfirmsAndFollowsAStaticTarget) {
  const auto m = MotionModel::ncv(0.2, 0.5);
  Tracker tracker(TrackLogic{}, JpdaParams{}, Vec4(4, 4, 9, 9).asDiagonal());
  AgentState agent;
  Rng rng = make_rng(27);
  std::normal_distribution<double> n01;
  for (int k = 0; k < 20; ++k) {
    const Mat2 L = measurement_noise_factor(agent, Vec2(3, 4), 1.0);
    Measurement z = meas(3, 4);
    z.value += L * Vec2(n01(rng), n01(rng));
    tracker.step({z}, agent, m, 1.0);
  }
  ASSERT_EQ(tracker.tracks().size(), 1u);
  EXPECT_TRUE(tracker.tracks()[0].confirmed());
  EXPECT_LT((tracker.tracks()[0].position() - Vec2(3, 4)).norm(), 0.5);
  // Target disappears: the track is dropped after five misses.
  for (int k = 0; k < 5; ++k) tracker.step({}, agent, m, 1.0);
  EXPECT_TRUE(tracker.tracks().empty());
  EXPECT_EQ(tracker.diagnostics().tracks_deleted, 1u);
}
