#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace tsn;

TEST(SegmentSample, TestModeCenters) {
  EXPECT_EQ(segment_sample(9, 3, SampleMode::test).indices, (std::vector<std::size_t>{1, 4, 7}));
}

TEST(SegmentSample, ShortVideoClamps) {
  for (auto mode : {SampleMode::train, SampleMode::test})
    EXPECT_EQ(segment_sample(1, 3, mode, 42).indices, (std::vector<std::size_t>{0, 0, 0}));
  EXPECT_EQ(segment_sample(2, 4, SampleMode::test).indices.size(), 4u);
}

TEST(SegmentSample, Errors) {
  EXPECT_THROW(segment_sample(0, 3, SampleMode::test), ArgumentError);
  EXPECT_THROW(segment_sample(5, 0, SampleMode::test), ArgumentError);
}

TEST(SegmentSample, TrainIndicesStayInTheirSegment) {
  // Bounds for T=10, K=3 enumerated by hand: [0,3) [3,6) [6,10).
  const std::pair<std::size_t, std::size_t> bounds[] = {{0, 3}, {3, 6}, {6, 10}};
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto p = segment_sample(10, 3, SampleMode::train, seed);
    ASSERT_EQ(p.indices.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_GE(p.indices[i], bounds[i].first);
      EXPECT_LT(p.indices[i], bounds[i].second);
    }
  }
}

TEST(SegmentSample, SegmentLengthsDifferByAtMostOne) {
  for (std::size_t t = 1; t < 40; ++t)
    for (std::size_t k = 1; k <= t; ++k) {
      std::size_t lo = t, hi = 0, covered = 0;
      for (std::size_t i = 0; i < k; ++i) {
        const auto [a, b] = segment_bounds(t, k, i);
        EXPECT_EQ(a, covered);
        covered = b;
        lo = std::min(lo, b - a);
        hi = std::max(hi, b - a);
      }
      EXPECT_EQ(covered, t);
      EXPECT_LE(hi - lo, 1u);
    }
}

TEST(SegmentSample, StrictlyIncreasingAndReproducible) {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 1 + rng.index(10), t = k + rng.index(50);
    const std::uint64_t seed = rng.next();
    for (auto mode : {SampleMode::train, SampleMode::test}) {
      const auto p = segment_sample(t, k, mode, seed);
      EXPECT_EQ(p.indices, segment_sample(t, k, mode, seed).indices);
      for (std::size_t i = 1; i < k; ++i) EXPECT_LT(p.indices[i - 1], p.indices[i]);
      EXPECT_LT(p.indices.back(), t);
    }
  }
}

TEST(FpsSample, TenSecondsAtOneFps) {
  const auto ts = fps_sample(10.0, 1.0);
  ASSERT_EQ(ts.size(), 10u);
  for (std::size_t k = 0; k < 10; ++k) EXPECT_DOUBLE_EQ(ts[k], 0.5 + static_cast<double>(k));
}

TEST(FpsSample, ShortVideoGetsCenter) { EXPECT_EQ(fps_sample(0.3, 1.0), std::vector<double>{0.15}); }

TEST(FpsSample, CountMatchesBruteEnumeration) {
  EXPECT_EQ(fps_sample(7.2, 2.0).size(), 14u);
  for (double ts : fps_sample(7.2, 2.0)) EXPECT_LT(ts, 7.2);
  // Brute force: count bins [k/fps, (k+1)/fps) that fit inside the video,
  // on a grid of exact decimal durations.
  for (int dm = 1; dm <= 400; ++dm) {
    for (double fps : {0.5, 1.0, 2.0, 4.0, 25.0}) {
      const double d = dm / 10.0;
      std::size_t brute = 0;
      while ((static_cast<double>(brute) + 1) * 10.0 <= d * 10.0 * fps + 1e-9) ++brute;
      const auto ts = fps_sample(d, fps);
      EXPECT_EQ(ts.size(), std::max<std::size_t>(1, brute)) << d << " " << fps;
      for (double t : ts) EXPECT_LT(t, d + 1e-12);
    }
  }
}

TEST(FpsSample, Errors) {
  EXPECT_THROW(fps_sample(0.0, 1.0), ArgumentError);
  EXPECT_THROW(fps_sample(1.0, 0.0), ArgumentError);
  EXPECT_THROW(fps_sample(-1.0, 1.0), ArgumentError);
}

TEST(FpsSample, OneFpsOn25FpsSourceInspectsFourPercent) {
  const double duration = 120.0;
  const double frames = duration * 25.0;
  EXPECT_NEAR(static_cast<double>(fps_sample(duration, 1.0).size()) / frames, 0.04, 1e-12);
}

TEST(FpsIndices, MapsTimestampsToRows) {
  EXPECT_EQ(fps_indices(15, 15.0, 1.0).size(), 15u);
  EXPECT_EQ(fps_indices(3, 15.0, 1.0), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(fps_indices(1, 0.2, 1.0), (std::vector<std::size_t>{0}));
}
