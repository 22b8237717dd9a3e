#pragma once

// Consensus functions mapping a T×C snippet score matrix to one C-vector,
// with exact backward passes so they can sit inside the training loss.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tsn/error.hpp"
#include "tsn/matrix.hpp"

namespace tsn {

enum class AggregationKind { average, topk, attention };

struct AggregationSpec {
  AggregationKind kind = AggregationKind::average;
  std::size_t k = 1;
  /// Attention logit e_t = attn_w · S[t,:] + attn_b.
  std::vector<double> attn_w;
  double attn_b = 0.0;

  static AggregationSpec average() { return {}; }
  static AggregationSpec topk(std::size_t k) { return {AggregationKind::topk, k, {}, 0.0}; }
  static AggregationSpec attention(std::vector<double> w, double b = 0.0) {
    return {AggregationKind::attention, 1, std::move(w), b};
  }

  /// Number of trainable consensus parameters for `classes` classes.
  std::size_t num_params(std::size_t classes) const {
    return kind == AggregationKind::attention ? classes + 1 : 0;
  }

  friend bool operator==(const AggregationSpec&, const AggregationSpec&) = default;
};

/// Parses "avg", "topk:K" or "attn".
inline AggregationSpec parse_aggregation(std::string_view s) {
  if (s == "avg" || s == "average") return AggregationSpec::average();
  if (s == "attn" || s == "attention") return AggregationSpec::attention({});
  if (s.starts_with("topk:")) {
    std::size_t k = 0;
    const auto digits = s.substr(5);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || k == 0)
      throw ArgumentError("bad top-k spec '" + std::string(s) + "'");
    return AggregationSpec::topk(k);
  }
  throw ArgumentError("unknown aggregation '" + std::string(s) + "' (avg|topk:K|attn)");
}

inline std::string to_string(const AggregationSpec& spec) {
  switch (spec.kind) {
    case AggregationKind::average: return "avg";
    case AggregationKind::topk: return "topk:" + std::to_string(spec.k);
    case AggregationKind::attention: return "attn";
  }
  return "?";
}

inline nlohmann::json to_json(const AggregationSpec& spec) {
  nlohmann::json j;
  j["kind"] = spec.kind == AggregationKind::average ? "average"
              : spec.kind == AggregationKind::topk  ? "topk"
                                                    : "attention";
  if (spec.kind == AggregationKind::topk) j["k"] = spec.k;
  if (spec.kind == AggregationKind::attention) {
    j["attn_w"] = spec.attn_w;
    j["attn_b"] = spec.attn_b;
  }
  return j;
}

inline AggregationSpec aggregation_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "average") return AggregationSpec::average();
  if (kind == "topk") return AggregationSpec::topk(j.at("k").get<std::size_t>());
  if (kind == "attention")
    return AggregationSpec::attention(j.at("attn_w").get<std::vector<double>>(), j.at("attn_b").get<double>());
  throw FormatError("unknown aggregation kind '" + kind + "'");
}

struct AggGradient {
  Matrix dS;
  /// Attention only: d/dw (C entries) then d/db. Empty otherwise.
  std::vector<double> dparams;
};

namespace detail {

inline void check_scores(const Matrix& s) {
  if (s.rows < 1 || s.cols < 1) throw ArgumentError("aggregation: score matrix must be at least 1x1");
  if (!s.all_finite()) throw ArgumentError("aggregation: non-finite snippet scores");
}

/// Rows holding the k largest entries of column c; ties go to the lower row.
inline std::vector<std::size_t> topk_rows(const Matrix& s, std::size_t c, std::size_t k) {
  std::vector<std::size_t> order(s.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (s(a, c) != s(b, c)) return s(a, c) > s(b, c);
                      return a < b;
                    });
  order.resize(k);
  return order;
}

}  // namespace detail

inline std::vector<double> agg_average(const Matrix& s) {
  detail::check_scores(s);
  std::vector<double> g(s.cols, 0.0);
  for (std::size_t t = 0; t < s.rows; ++t)
    for (std::size_t c = 0; c < s.cols; ++c) g[c] += s(t, c);
  for (double& v : g) v /= static_cast<double>(s.rows);
  return g;
}

/// Per class, the mean of the k largest snippet scores.
inline std::vector<double> agg_topk(const Matrix& s, std::size_t k) {
  detail::check_scores(s);
  if (k < 1 || k > s.rows)
    throw ArgumentError("agg_topk: k=" + std::to_string(k) + " outside [1," + std::to_string(s.rows) + "]");
  std::vector<double> g(s.cols, 0.0);
  for (std::size_t c = 0; c < s.cols; ++c) {
    for (std::size_t t : detail::topk_rows(s, c, k)) g[c] += s(t, c);
    g[c] /= static_cast<double>(k);
  }
  return g;
}

/// Softmax over snippets of e_t = w · S[t,:] + b.
inline std::vector<double> attention_weights(const Matrix& s, std::span<const double> w, double b) {
  detail::check_scores(s);
  if (w.size() != s.cols)
    throw ArgumentError("attention: weight length " + std::to_string(w.size()) + " != classes " +
                        std::to_string(s.cols));
  if (!std::isfinite(b)) throw ArgumentError("attention: non-finite bias");
  std::vector<double> e(s.rows);
  for (std::size_t t = 0; t < s.rows; ++t) e[t] = dot(w, s.row(t)) + b;
  return softmax(e);
}

inline std::vector<double> agg_attention(const Matrix& s, std::span<const double> w, double b) {
  const auto a = attention_weights(s, w, b);
  std::vector<double> g(s.cols, 0.0);
  for (std::size_t t = 0; t < s.rows; ++t)
    for (std::size_t c = 0; c < s.cols; ++c) g[c] += a[t] * s(t, c);
  return g;
}

/// Attention parameters default to zero (uniform weights) when unset.
inline std::vector<double> attention_params_or_zero(const AggregationSpec& spec, std::size_t classes) {
  if (spec.attn_w.empty()) return std::vector<double>(classes, 0.0);
  return spec.attn_w;
}

inline std::vector<double> aggregate(const AggregationSpec& spec, const Matrix& s) {
  switch (spec.kind) {
    case AggregationKind::average: return agg_average(s);
    case AggregationKind::topk: return agg_topk(s, spec.k);
    case AggregationKind::attention:
      return agg_attention(s, attention_params_or_zero(spec, s.cols), spec.attn_b);
  }
  throw ArgumentError("unknown aggregation kind");
}

inline AggGradient agg_backward(const AggregationSpec& spec, const Matrix& s, std::span<const double> upstream) {
  detail::check_scores(s);
  if (upstream.size() != s.cols) throw ArgumentError("agg_backward: upstream length mismatch");
  const std::size_t T = s.rows, C = s.cols;
  AggGradient grad{Matrix(T, C), {}};
  switch (spec.kind) {
    case AggregationKind::average:
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t c = 0; c < C; ++c) grad.dS(t, c) = upstream[c] / static_cast<double>(T);
      break;
    case AggregationKind::topk:
      if (spec.k < 1 || spec.k > T) throw ArgumentError("agg_backward: k outside [1,T]");
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t t : detail::topk_rows(s, c, spec.k)) grad.dS(t, c) = upstream[c] / static_cast<double>(spec.k);
      break;
    case AggregationKind::attention: {
      const auto w = attention_params_or_zero(spec, C);
      const auto a = attention_weights(s, w, spec.attn_b);
      // q_t = dL/da_t; r_t = dL/de_t through the softmax.
      std::vector<double> q(T), r(T);
      double mean_q = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        q[t] = dot(upstream, s.row(t));
        mean_q += a[t] * q[t];
      }
      for (std::size_t t = 0; t < T; ++t) r[t] = a[t] * (q[t] - mean_q);
      grad.dparams.assign(C + 1, 0.0);
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t c = 0; c < C; ++c) {
          grad.dS(t, c) = a[t] * upstream[c] + r[t] * w[c];
          grad.dparams[c] += r[t] * s(t, c);
        }
        grad.dparams[C] += r[t];
      }
      break;
    }
  }
  return grad;
}

}  // namespace tsn
