#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tsn/error.hpp"
#include "tsn/random.hpp"

namespace tsn {

enum class SampleMode { train, test };

struct SamplePlan {
  std::vector<std::size_t> indices;
  SampleMode mode = SampleMode::test;
};

/// Bounds [first, last) of segment `i` when [0, t) is cut into `k` parts.
inline std::pair<std::size_t, std::size_t> segment_bounds(std::size_t t, std::size_t k, std::size_t i) {
  return {i * t / k, (i + 1) * t / k};
}

/// One snippet per temporal segment. Train mode draws uniformly inside each
/// segment; test mode takes the segment center. When t < k some segments are
/// empty and borrow the nearest valid index, so exactly k indices come back.
inline SamplePlan segment_sample(std::size_t t, std::size_t k, SampleMode mode, std::uint64_t seed = 0) {
  if (t == 0) throw ArgumentError("segment_sample: snippet count must be >= 1");
  if (k == 0) throw ArgumentError("segment_sample: segment count must be >= 1");
  SamplePlan plan{{}, mode};
  plan.indices.reserve(k);
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const auto [lo, hi] = segment_bounds(t, k, i);
    std::size_t idx;
    if (hi <= lo) {
      idx = std::min(lo, t - 1);
    } else if (mode == SampleMode::train) {
      idx = lo + rng.index(hi - lo);
    } else {
      idx = (lo + hi) / 2;
    }
    plan.indices.push_back(idx);
  }
  return plan;
}

/// Mid-bin timestamps at `fps` samples per second; at least one (the video
/// center) for videos shorter than one sampling period.
inline std::vector<double> fps_sample(double duration_sec, double fps) {
  if (!(duration_sec > 0.0) || !std::isfinite(duration_sec))
    throw ArgumentError("fps_sample: duration must be positive");
  if (!(fps > 0.0) || !std::isfinite(fps)) throw ArgumentError("fps_sample: fps must be positive");
  // Relative slack absorbs products like 2.3 * 100 = 229.99999999999997.
  const double product = duration_sec * fps;
  const auto count = static_cast<std::size_t>(std::floor(product * (1.0 + 1e-12)));
  if (count == 0) return {duration_sec / 2.0};
  std::vector<double> ts(count);
  for (std::size_t k = 0; k < count; ++k) ts[k] = static_cast<double>(k) / fps + 1.0 / (2.0 * fps);
  return ts;
}

/// Maps fps timestamps onto rows of a T-snippet sequence spanning
/// `duration_sec`, dropping duplicates.
inline std::vector<std::size_t> fps_indices(std::size_t t, double duration_sec, double fps) {
  if (t == 0) throw ArgumentError("fps_indices: snippet count must be >= 1");
  std::vector<std::size_t> out;
  for (double ts : fps_sample(duration_sec, fps)) {
    auto idx = static_cast<std::size_t>(std::floor(ts / duration_sec * static_cast<double>(t)));
    idx = std::min(idx, t - 1);
    if (out.empty() || out.back() != idx) out.push_back(idx);
  }
  return out;
}

}  // namespace tsn
