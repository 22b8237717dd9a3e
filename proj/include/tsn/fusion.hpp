#pragma once

// Late fusion of per-system score sets and validation-driven grid search
// over fusion weights.

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tsn/core.hpp"
#include "tsn/error.hpp"
#include "tsn/metrics.hpp"

namespace tsn {

enum class ScoreNormalization { none, zscore, softmax };

inline ScoreNormalization parse_normalization(std::string_view s) {
  if (s == "none") return ScoreNormalization::none;
  if (s == "zscore") return ScoreNormalization::zscore;
  if (s == "softmax") return ScoreNormalization::softmax;
  throw ArgumentError("unknown normalization '" + std::string(s) + "' (none|zscore|softmax)");
}

inline const char* to_string(ScoreNormalization n) {
  switch (n) {
    case ScoreNormalization::none: return "none";
    case ScoreNormalization::zscore: return "zscore";
    case ScoreNormalization::softmax: return "softmax";
  }
  return "?";
}

struct FusionComponent {
  std::string name;
  std::string path;
  double weight = 1.0;
};

struct FusionSpec {
  std::vector<FusionComponent> components;
  ScoreNormalization normalization = ScoreNormalization::zscore;

  void validate() const {
    if (components.empty()) throw ValidationError("fusion spec: no components");
    bool any = false;
    for (const auto& c : components) {
      if (!(c.weight >= 0.0) || !std::isfinite(c.weight))
        throw ValidationError("fusion spec: weight of '" + c.name + "' must be finite and >= 0");
      any = any || c.weight > 0.0;
    }
    if (!any) throw ValidationError("fusion spec: all weights are zero");
  }
};

/// {"normalization": "zscore", "components": [{"name", "path", "weight"}]}
inline FusionSpec fusion_spec_from_json(const nlohmann::json& j) {
  FusionSpec spec;
  try {
    if (j.contains("normalization")) spec.normalization = parse_normalization(j.at("normalization").get<std::string>());
    for (const auto& c : j.at("components"))
      spec.components.push_back({c.value("name", c.at("path").get<std::string>()), c.at("path").get<std::string>(),
                                 c.value("weight", 1.0)});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("fusion spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

/// zscore: one mean/stddev over every entry of the set. softmax: per video
/// over classes.
inline ScoreSet normalize_scores(const ScoreSet& scores, ScoreNormalization mode) {
  validate_scores(scores);
  ScoreSet out = scores;
  switch (mode) {
    case ScoreNormalization::none: break;
    case ScoreNormalization::zscore: {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& [_, v] : scores)
        for (double x : v) {
          sum += x;
          ++n;
        }
      const double mean = sum / static_cast<double>(n);
      double ss = 0.0;
      for (const auto& [_, v] : scores)
        for (double x : v) ss += (x - mean) * (x - mean);
      const double sd = std::sqrt(ss / static_cast<double>(n));
      for (auto& [_, v] : out)
        for (double& x : v) x = sd > 0.0 ? (x - mean) / sd : 0.0;
      break;
    }
    case ScoreNormalization::softmax:
      for (auto& [_, v] : out) v = softmax(v);
      break;
  }
  return out;
}

namespace detail {

inline void check_same_keys(std::span<const ScoreSet> sets) {
  if (sets.empty()) throw ArgumentError("fuse: no score sets");
  const std::size_t c = validate_scores(sets[0]);
  for (std::size_t i = 1; i < sets.size(); ++i) {
    validate_scores(sets[i], c);
    std::string missing;
    std::size_t count = 0;
    for (const auto& [id, _] : sets[0])
      if (!sets[i].contains(id) && count++ < 10) missing += (missing.empty() ? "" : ",") + id;
    for (const auto& [id, _] : sets[i])
      if (!sets[0].contains(id) && count++ < 10) missing += (missing.empty() ? "" : ",") + id;
    if (count > 0)
      throw ValidationError("fuse: component " + std::to_string(i) + " differs from component 0 on " +
                            std::to_string(count) + " video ids: " + missing);
  }
}

/// Weighted sum of already-normalized sets.
inline ScoreSet weighted_sum(std::span<const ScoreSet> sets, std::span<const double> weights) {
  ScoreSet out;
  for (const auto& [id, v0] : sets[0]) {
    std::vector<double> acc(v0.size(), 0.0);
    for (std::size_t i = 0; i < sets.size(); ++i) {
      const auto& v = sets[i].at(id);
      for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += weights[i] * v[c];
    }
    out.emplace(id, std::move(acc));
  }
  return out;
}

inline void check_weights(std::span<const double> weights, std::size_t n) {
  if (weights.size() != n) throw ArgumentError("fuse: weight count != component count");
  bool any = false;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ArgumentError("fuse: weights must be finite and >= 0");
    any = any || w > 0.0;
  }
  if (!any) throw ArgumentError("fuse: all weights are zero");
}

}  // namespace detail

inline ScoreSet fuse(std::span<const ScoreSet> sets, std::span<const double> weights, ScoreNormalization mode) {
  detail::check_same_keys(sets);
  detail::check_weights(weights, sets.size());
  std::vector<ScoreSet> normed;
  normed.reserve(sets.size());
  for (const auto& s : sets) normed.push_back(normalize_scores(s, mode));
  return detail::weighted_sum(normed, weights);
}

struct WeightTrial {
  std::vector<double> weights;
  double map = 0.0;
};

struct WeightSearchResult {
  std::vector<double> weights;
  double map = 0.0;
  std::vector<WeightTrial> trace;
};

/// Visits every point of the weight simplex with spacing 1/round(1/step),
/// in lexicographically descending order of the integer grid coordinates
/// (so the first component's vertex comes first), and keeps the first point
/// reaching the highest mAP.
inline WeightSearchResult weight_search(std::span<const ScoreSet> sets, const LabelMap& labels, double step,
                                        ScoreNormalization mode = ScoreNormalization::zscore) {
  if (!(step > 0.0) || !std::isfinite(step)) throw ArgumentError("weight_search: grid step must be positive");
  detail::check_same_keys(sets);
  const std::size_t m = sets.size();
  if (m == 1) {
    const double map = mean_average_precision(normalize_scores(sets[0], mode), labels).map;
    return {{1.0}, map, {{{1.0}, map}}};
  }
  const auto divisions = static_cast<std::size_t>(std::max<long long>(1, std::llround(1.0 / step)));
  std::vector<ScoreSet> normed;
  for (const auto& s : sets) normed.push_back(normalize_scores(s, mode));

  WeightSearchResult best;
  best.map = -1.0;
  std::vector<std::size_t> units(m, 0);
  // Enumerate compositions of `divisions` into m parts, first part descending.
  auto visit = [&](auto&& self, std::size_t i, std::size_t remaining) -> void {
    if (i + 1 == m) {
      units[i] = remaining;
      std::vector<double> w(m);
      for (std::size_t j = 0; j < m; ++j) w[j] = static_cast<double>(units[j]) / static_cast<double>(divisions);
      const double map = mean_average_precision(detail::weighted_sum(normed, w), labels).map;
      best.trace.push_back({w, map});
      if (map > best.map) {
        best.map = map;
        best.weights = w;
      }
      return;
    }
    for (std::size_t u = remaining + 1; u-- > 0;) {
      units[i] = u;
      self(self, i + 1, remaining - u);
    }
  };
  visit(visit, 0, divisions);
  return best;
}

inline nlohmann::json to_json(const WeightSearchResult& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& t : r.trace) trace.push_back({{"weights", t.weights}, {"map", t.map}});
  return {{"weights", r.weights}, {"map", r.map}, {"trace", trace}};
}

}  // namespace tsn
