#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "swarmtrack/metrics.hpp"

using namespace swarmtrack;

namespace {

// Brute-force OSPA straight from the definition: try every injection of the
// smaller set into the larger one.
double ospa_oracle(std::vector<Vec2> X, std::vector<Vec2> Y, double c, double p) {
  if (X.size() > Y.size()) std::swap(X, Y);
  const std::size_t m = X.size(), n = Y.size();
  if (n == 0) return 0.0;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += std::pow(std::min(c, (X[i] - Y[idx[i]]).norm()), p);
    best = std::min(best, s);
  } while (std::next_permutation(idx.begin(), idx.end()));
  return std::pow((best + std::pow(c, p) * double(n - m)) / double(n), 1.0 / p);
}

std::vector<Vec2> random_set(Rng& rng, std::size_t max_size) {
  std::uniform_int_distribution<std::size_t> size(0, max_size);
  std::uniform_real_distribution<double> u(0, 100);
  std::vector<Vec2> s(size(rng));
  for (auto& v : s) v = Vec2(u(rng), u(rng));
  return s;
}

}  // namespace

TEST(Ospa, IdenticalSetsAreZero) {
  const std::vector<Vec2> X{{0, 0}, {3, 4}};
  EXPECT_EQ(ospa(X, X, {40, 2}), 0.0);
}

TEST(Ospa, EmptyAgainstNonEmptyIsCutoff) {
  EXPECT_DOUBLE_EQ(ospa({}, {{1, 1}}, {40, 2}), 40.0);
  EXPECT_DOUBLE_EQ(ospa({{1, 1}, {5, 5}}, {}, {40, 2}), 40.0);
}

TEST(Ospa, BothEmptyIsZero) { EXPECT_EQ(ospa({}, {}, {40, 2}), 0.0); }

TEST(Ospa, SingleDisplacedPoint) { EXPECT_DOUBLE_EQ(ospa({{0, 0}}, {{6, 8}}, {40, 2}), 10.0); }

TEST(Ospa, CardinalityPenalty) {
  // One perfect match plus one missed target: sqrt((0 + 40^2) / 2).
  EXPECT_NEAR(ospa({{0, 0}}, {{0, 0}, {50, 50}}, {40, 2}), std::sqrt(800.0), 1e-12);
}

TEST(Ospa, MatchesBruteForceAndMetricAxioms) {
  Rng rng = make_rng(61);
  const OspaParams prm{40, 2};
  for (int k = 0; k < 300; ++k) {
    const auto X = random_set(rng, 5), Y = random_set(rng, 5), Z = random_set(rng, 5);
    const double dxy = ospa(X, Y, prm);
    ASSERT_NEAR(dxy, ospa_oracle(X, Y, 40, 2), 1e-9);
    ASSERT_GE(dxy, 0.0);
    ASSERT_LE(dxy, prm.c + 1e-12);
    ASSERT_NEAR(dxy, ospa(Y, X, prm), 1e-12);
    ASSERT_EQ(ospa(X, X, prm), 0.0);
    ASSERT_LE(ospa(X, Z, prm), dxy + ospa(Y, Z, prm) + 1e-9);
  }
}

TEST(Ospa, OrderInvariant) {
  Rng rng = make_rng(62);
  for (int k = 0; k < 50; ++k) {
    auto X = random_set(rng, 6), Y = random_set(rng, 6);
    const double d = ospa(X, Y, {40, 2});
    std::shuffle(X.begin(), X.end(), rng);
    std::reverse(Y.begin(), Y.end());
    ASSERT_NEAR(ospa(X, Y, {40, 2}), d, 1e-12);
  }
}

TEST(Ospa, MonotoneInCutoff) {
  Rng rng = make_rng(63);
  for (int k = 0; k < 100; ++k) {
    const auto X = random_set(rng, 5), Y = random_set(rng, 5);
    double prev = 0.0;
    for (double c : {1.0, 5.0, 20.0, 40.0, 100.0}) {
      const double d = ospa(X, Y, {c, 2});
      ASSERT_GE(d, prev - 1e-12);
      prev = d;
    }
  }
}

TEST(Hungarian, MatchesExhaustiveOnLargerSets) {
  Rng rng = make_rng(64);
  std::uniform_real_distribution<double> u(0, 10);
  for (int k = 0; k < 30; ++k) {
    const std::size_t n = 7, m = 8;
    std::vector<std::vector<double>> cost(n, std::vector<double>(m));
    for (auto& row : cost)
      for (auto& v : row) v = u(rng);
    const auto a = hungarian(cost);
    double s = 0.0;
    std::vector<char> used(m, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_FALSE(used[a[i]]);
      used[a[i]] = 1;
      s += cost[i][a[i]];
    }
    ASSERT_NEAR(s, detail::min_assignment_exhaustive(cost), 1e-9);
  }
}

TEST(Ospa, LargeSetsUseHungarianConsistently) {
  Rng rng = make_rng(65);
  std::uniform_real_distribution<double> u(0, 100);
  for (int k = 0; k < 10; ++k) {
    std::vector<Vec2> X(7), Y(8);
    for (auto& v : X) v = Vec2(u(rng), u(rng));
    for (auto& v : Y) v = Vec2(u(rng), u(rng));
    ASSERT_NEAR(ospa(X, Y, {40, 2}), ospa_oracle(X, Y, 40, 2), 1e-9);
  }
}

TEST(Summarize, TwoTrialsMeanAndInterval) {
  const auto s = summarize({{0.0, 5.0}, {2.0, 5.0}});
  ASSERT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(s[0].mean, 1.0);
  EXPECT_NEAR(s[0].ci_low, -0.96, 1e-12);
  EXPECT_NEAR(s[0].ci_high, 2.96, 1e-12);
  EXPECT_DOUBLE_EQ(s[1].ci_low, 5.0);
  EXPECT_DOUBLE_EQ(s[1].ci_high, 5.0);
}

TEST(Summarize, RejectsSingleTrialAndRaggedCurves) {
  EXPECT_THROW(summarize({{1.0, 2.0}}), std::invalid_argument);
  EXPECT_THROW(summarize({{1.0, 2.0}, {1.0}}), std::invalid_argument);
}
