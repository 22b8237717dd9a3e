#pragma once

// Independent reference implementations used only by tests. Each one takes
// the slow, obvious route so it shares no code path with the library.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "tsn/tsn.hpp"

namespace oracle {

using tsn::Matrix;

/// |DFT| of one Hann-windowed frame, straight from the definition.
inline std::vector<double> dft_magnitude(const std::vector<double>& x, std::size_t start, std::size_t n) {
  std::vector<double> out(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * i % n) / static_cast<double>(n);
      acc += w * x[start + i] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = std::abs(acc);
  }
  return out;
}

/// Inverse of the orthonormal DCT-II (a DCT-III), used to round-trip.
inline std::vector<double> idct_ortho(const std::vector<double>& c) {
  const std::size_t n = c.size();
  std::vector<double> x(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const double a = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
      x[i] += a * c[k] * std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * static_cast<double>(i) + 1.0) /
                                  (2.0 * static_cast<double>(n)));
    }
  return x;
}

/// AP by pairwise rank counting: for each positive p, rank(p) = 1 + number
/// of items ordered ahead of p; precision at p = positives at or ahead / rank.
inline double average_precision(const std::vector<std::string>& ids, const std::vector<double>& scores,
                                const std::vector<bool>& positive) {
  const std::size_t n = ids.size();
  auto ahead = [&](std::size_t j, std::size_t p) {
    return scores[j] > scores[p] || (scores[j] == scores[p] && ids[j] < ids[p]);
  };
  double sum = 0.0;
  std::size_t npos = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (!positive[p]) continue;
    ++npos;
    std::size_t rank = 1, hits = 1;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == p || !ahead(j, p)) continue;
      ++rank;
      if (positive[j]) ++hits;
    }
    sum += static_cast<double>(hits) / static_cast<double>(rank);
  }
  return sum / static_cast<double>(npos);
}

/// Top-k accuracy by fully sorting class indices per video.
inline double topk_accuracy(const tsn::ScoreSet& scores, const tsn::LabelMap& labels, std::size_t k) {
  std::size_t hit = 0;
  for (const auto& [id, v] : scores) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
    const auto y = labels.at(id);
    if (std::find(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), y) != idx.begin() + static_cast<std::ptrdiff_t>(k))
      ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(scores.size());
}

/// Per-column mean of the k largest values, via a full sort of each column.
inline std::vector<double> topk_pool(const Matrix& s, std::size_t k) {
  std::vector<double> g(s.cols);
  for (std::size_t c = 0; c < s.cols; ++c) {
    std::vector<double> col(s.rows);
    for (std::size_t t = 0; t < s.rows; ++t) col[t] = s(t, c);
    std::sort(col.rbegin(), col.rend());
    g[c] = std::accumulate(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(k), 0.0) / static_cast<double>(k);
  }
  return g;
}

inline std::vector<double> attention_pool(const Matrix& s, const std::vector<double>& w, double b) {
  std::vector<double> e(s.rows);
  double mx = -INFINITY;
  for (std::size_t t = 0; t < s.rows; ++t) {
    e[t] = b;
    for (std::size_t c = 0; c < s.cols; ++c) e[t] += w[c] * s(t, c);
    mx = std::max(mx, e[t]);
  }
  double z = 0.0;
  for (double& v : e) z += (v = std::exp(v - mx));
  std::vector<double> g(s.cols, 0.0);
  for (std::size_t t = 0; t < s.rows; ++t)
    for (std::size_t c = 0; c < s.cols; ++c) g[c] += e[t] / z * s(t, c);
  return g;
}

/// Central differences of f at x, one coordinate at a time.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i - n_i| / max(|a_i|, |n_i|, floor). The floor keeps gradients
/// that are zero up to rounding from producing 0/0.
inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& n, double floor = 1e-4) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - n[i]) / std::max({std::abs(a[i]), std::abs(n[i]), floor}));
  return worst;
}

/// Layer-by-layer forward for linear/mlp predictors written against the
/// documented flat parameter layout: per dense layer, W (out×in, row-major)
/// then b (out).
inline std::vector<double> dense_forward(const tsn::PredictorConfig& cfg, const std::vector<double>& p,
                                         std::vector<double> x) {
  std::vector<std::size_t> widths = {cfg.input_dim};
  for (auto h : cfg.hidden_dims) widths.push_back(h);
  widths.push_back(cfg.num_classes);
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t in = widths[l], out = widths[l + 1];
    std::vector<double> y(out);
    for (std::size_t r = 0; r < out; ++r) {
      double s = p[off + out * in + r];
      for (std::size_t c = 0; c < in; ++c) s += p[off + r * in + c] * x[c];
      y[r] = (l + 2 < widths.size()) ? std::max(0.0, s) : s;
    }
    off += out * in + out;
    x = std::move(y);
  }
  return x;
}

/// Conv predictor forward by nested loops: kernels (K × ch·kh·kw), biases
/// (K), then the final dense layer; valid correlation, ReLU, mean over
/// pool_h frequency rows, mean over time.
inline std::vector<double> conv_forward(const tsn::PredictorConfig& cfg, const std::vector<double>& p,
                                        const std::vector<double>& x) {
  const std::size_t K = cfg.conv_kernels, ch = cfg.input_ch, H = cfg.input_h, W = cfg.input_w;
  const std::size_t kh = cfg.kernel_h, kw = cfg.kernel_w, Ho = H - kh + 1, Wo = W - kw + 1, Hp = Ho / cfg.pool_h;
  const std::size_t wsz = ch * kh * kw;
  std::vector<double> head(K * Hp, 0.0);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t i = 0; i < Hp * cfg.pool_h; ++i)
      for (std::size_t j = 0; j < Wo; ++j) {
        double s = p[K * wsz + k];
        for (std::size_t c = 0; c < ch; ++c)
          for (std::size_t a = 0; a < kh; ++a)
            for (std::size_t b = 0; b < kw; ++b)
              s += p[k * wsz + (c * kh + a) * kw + b] * x[(c * H + i + a) * W + j + b];
        head[k * Hp + i / cfg.pool_h] += std::max(0.0, s) / static_cast<double>(cfg.pool_h * Wo);
      }
  const std::size_t off = K * wsz + K, in = K * Hp;
  std::vector<double> y(cfg.num_classes);
  for (std::size_t r = 0; r < cfg.num_classes; ++r) {
    double s = p[off + cfg.num_classes * in + r];
    for (std::size_t c = 0; c < in; ++c) s += p[off + r * in + c] * head[c];
    y[r] = s;
  }
  return y;
}

inline Matrix random_matrix(tsn::Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data) v = scale * rng.normal();
  return m;
}

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::path(TSN_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
