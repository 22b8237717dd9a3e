#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tsn/core.hpp"
#include "tsn/error.hpp"

namespace tsn {

struct RankedItem {
  std::string_view id;
  double score = 0.0;
  bool positive = false;
};

/// Non-interpolated AP: rank by score descending (ties by id ascending) and
/// average precision@rank over the positives. Returns nullopt when there
/// are no positives.
inline std::optional<double> average_precision(std::vector<RankedItem> items) {
  std::sort(items.begin(), items.end(), [](const RankedItem& a, const RankedItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < items.size(); ++r) {
    if (!items[r].positive) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

struct EvalReport {
  std::size_t num_videos = 0;
  std::vector<std::optional<double>> per_class_ap;  // nullopt: no positives
  std::vector<std::size_t> skipped_classes;
  double map = 0.0;
  std::map<std::size_t, double> topk_accuracy;
};

namespace detail {

/// Checks that scores and labels cover exactly the same videos.
inline std::size_t check_eval_inputs(const ScoreSet& scores, const LabelMap& labels) {
  const std::size_t c = validate_scores(scores);
  std::vector<std::string> missing, unlabeled;
  for (const auto& [id, _] : labels)
    if (!scores.contains(id)) missing.push_back(id);
  for (const auto& [id, _] : scores)
    if (!labels.contains(id)) unlabeled.push_back(id);
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size() && i < 10; ++i) s += (i ? "," : "") + v[i];
    if (v.size() > 10) s += ",...";
    return s;
  };
  if (!missing.empty()) throw ValidationError("no scores for " + std::to_string(missing.size()) + " videos: " + join(missing));
  if (!unlabeled.empty())
    throw ValidationError("no labels for " + std::to_string(unlabeled.size()) + " videos: " + join(unlabeled));
  for (const auto& [id, l] : labels)
    if (l >= c) throw ValidationError(id + ": label " + std::to_string(l) + " >= score width " + std::to_string(c));
  return c;
}

}  // namespace detail

/// Per-class AP and their unweighted mean over classes with >= 1 positive.
inline EvalReport mean_average_precision(const ScoreSet& scores, const LabelMap& labels) {
  const std::size_t c = detail::check_eval_inputs(scores, labels);
  EvalReport rep;
  rep.num_videos = scores.size();
  rep.per_class_ap.resize(c);
  double sum = 0.0;
  std::size_t counted = 0;
  std::vector<RankedItem> items;
  items.reserve(scores.size());
  for (std::size_t cls = 0; cls < c; ++cls) {
    items.clear();
    for (const auto& [id, v] : scores) items.push_back({id, v[cls], labels.at(id) == cls});
    rep.per_class_ap[cls] = average_precision(items);
    if (rep.per_class_ap[cls]) {
      sum += *rep.per_class_ap[cls];
      ++counted;
    } else {
      rep.skipped_classes.push_back(cls);
    }
  }
  if (counted == 0) throw ValidationError("no class has a positive video");
  rep.map = sum / static_cast<double>(counted);
  return rep;
}

/// Fraction of videos whose label is among the k highest scores (ties by
/// lower class index).
inline double topk_accuracy(const ScoreSet& scores, const LabelMap& labels, std::size_t k) {
  const std::size_t c = detail::check_eval_inputs(scores, labels);
  if (k < 1 || k > c) throw ArgumentError("topk_accuracy: k=" + std::to_string(k) + " outside [1," + std::to_string(c) + "]");
  std::size_t correct = 0;
  for (const auto& [id, v] : scores) {
    const std::size_t y = labels.at(id);
    // Classes ranked ahead of y under (score desc, index asc).
    std::size_t ahead = 0;
    for (std::size_t j = 0; j < c; ++j)
      if (v[j] > v[y] || (v[j] == v[y] && j < y)) ++ahead;
    if (ahead < k) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

/// mAP plus top-k accuracy for every k in `ks` not exceeding C.
inline EvalReport evaluate(const ScoreSet& scores, const LabelMap& labels, std::span<const std::size_t> ks) {
  EvalReport rep = mean_average_precision(scores, labels);
  const std::size_t c = rep.per_class_ap.size();
  for (auto k : ks)
    if (k >= 1 && k <= c) rep.topk_accuracy[k] = topk_accuracy(scores, labels, k);
  return rep;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json ap = nlohmann::json::array();
  for (const auto& v : r.per_class_ap) ap.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
  nlohmann::json topk = nlohmann::json::object();
  for (const auto& [k, acc] : r.topk_accuracy) topk[std::to_string(k)] = acc;
  return {{"num_videos", r.num_videos}, {"map", r.map}, {"per_class_ap", ap},
          {"skipped_classes", r.skipped_classes}, {"topk_accuracy", topk}};
}

}  // namespace tsn
