#pragma once

// Classical acoustic branch: descriptor standardization, diagonal-covariance
// GMM fitted by EM, Fisher-vector encoding, and a one-vs-rest linear SVM.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include <json.hpp>

#include "tsn/error.hpp"
#include "tsn/matrix.hpp"
#include "tsn/random.hpp"

namespace tsn {

/// Per-dimension z-scoring with statistics from the training descriptors.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  static Standardizer fit(const Matrix& x) {
    if (x.rows == 0) throw ArgumentError("standardizer: no descriptors");
    Standardizer s{std::vector<double>(x.cols, 0.0), std::vector<double>(x.cols, 0.0)};
    for (std::size_t r = 0; r < x.rows; ++r)
      for (std::size_t c = 0; c < x.cols; ++c) s.mean[c] += x(r, c);
    for (double& m : s.mean) m /= static_cast<double>(x.rows);
    for (std::size_t r = 0; r < x.rows; ++r)
      for (std::size_t c = 0; c < x.cols; ++c) s.stddev[c] += (x(r, c) - s.mean[c]) * (x(r, c) - s.mean[c]);
    for (double& v : s.stddev) {
      v = std::sqrt(v / static_cast<double>(x.rows));
      if (v < 1e-12) v = 1.0;
    }
    return s;
  }

  Matrix apply(const Matrix& x) const {
    if (x.cols != mean.size()) throw ArgumentError("standardizer: dimension mismatch");
    Matrix out = x;
    for (std::size_t r = 0; r < x.rows; ++r)
      for (std::size_t c = 0; c < x.cols; ++c) out(r, c) = (x(r, c) - mean[c]) / stddev[c];
    return out;
  }
};

inline constexpr double kVarianceFloor = 1e-4;

struct GmmModel {
  std::vector<double> weights;  // K
  Matrix means;                 // K × D
  Matrix variances;             // K × D

  std::size_t components() const { return weights.size(); }
  std::size_t dim() const { return means.cols; }

  void validate() const {
    const std::size_t k = weights.size();
    if (k == 0 || means.rows != k || variances.rows != k || variances.cols != means.cols || means.cols == 0)
      throw ValidationError("gmm: inconsistent shapes");
    double sum = 0.0;
    for (double w : weights) {
      if (!(w > 0.0)) throw ValidationError("gmm: weights must be positive");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-10) throw ValidationError("gmm: weights must sum to 1");
    for (double v : variances.data)
      if (!(v >= kVarianceFloor) || !std::isfinite(v)) throw ValidationError("gmm: variance below floor");
    if (!means.all_finite()) throw ValidationError("gmm: non-finite means");
  }

  /// log(π_k N(x | μ_k, σ²_k)) for every component.
  std::vector<double> component_log_densities(std::span<const double> x) const {
    const std::size_t d = dim();
    std::vector<double> out(components());
    for (std::size_t k = 0; k < components(); ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double v = variances(k, j);
        const double diff = x[j] - means(k, j);
        s += std::log(2.0 * std::numbers::pi * v) + diff * diff / v;
      }
      out[k] = std::log(weights[k]) - 0.5 * s;
    }
    return out;
  }

  /// Soft assignments γ_k(x).
  std::vector<double> posteriors(std::span<const double> x) const { return softmax(component_log_densities(x)); }

  /// Mean per-descriptor log-likelihood.
  double mean_log_likelihood(const Matrix& x) const {
    double s = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r) s += log_sum_exp(component_log_densities(x.row(r)));
    return s / static_cast<double>(x.rows);
  }

  /// Draws n descriptors from the mixture.
  Matrix sample(std::size_t n, Rng& rng) const {
    Matrix out(n, dim());
    for (std::size_t r = 0; r < n; ++r) {
      double u = rng.uniform(), acc = 0.0;
      std::size_t k = 0;
      for (; k + 1 < components(); ++k) {
        acc += weights[k];
        if (u < acc) break;
      }
      for (std::size_t j = 0; j < dim(); ++j) out(r, j) = rng.normal(means(k, j), std::sqrt(variances(k, j)));
    }
    return out;
  }
};

struct GmmFitOptions {
  std::size_t components = 2;
  std::uint64_t seed = 0;
  std::size_t max_iter = 100;
  double tol = 1e-6;  // stop when the mean log-likelihood gains less than this
  double variance_floor = kVarianceFloor;
};

struct GmmFitResult {
  GmmModel model;
  std::vector<double> log_likelihood;  // mean LL of the parameters at the start of each E-step
  bool converged = false;
};

namespace detail {

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance to the nearest chosen center (uniform if all distances vanish).
inline Matrix kmeanspp_centers(const Matrix& x, std::size_t k, Rng& rng) {
  Matrix centers(k, x.cols);
  std::vector<double> dist(x.rows, INFINITY);
  std::size_t pick = rng.index(x.rows);
  for (std::size_t c = 0; c < k; ++c) {
    std::copy_n(x.row(pick).begin(), x.cols, centers.row(c).begin());
    double total = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r) {
      double d = 0.0;
      for (std::size_t j = 0; j < x.cols; ++j) d += (x(r, j) - centers(c, j)) * (x(r, j) - centers(c, j));
      dist[r] = std::min(dist[r], d);
      total += dist[r];
    }
    if (c + 1 == k) break;
    if (total <= 0.0) {
      pick = rng.index(x.rows);
      continue;
    }
    double u = rng.uniform() * total;
    pick = x.rows - 1;
    for (std::size_t r = 0; r < x.rows; ++r) {
      u -= dist[r];
      if (u < 0.0) {
        pick = r;
        break;
      }
    }
  }
  return centers;
}

}  // namespace detail

/// EM for a diagonal GMM. Means start at k-means++ centers, variances at the
/// pooled per-dimension variance, weights uniform. Variances are floored
/// after each M-step.
inline GmmFitResult gmm_fit(const Matrix& x, const GmmFitOptions& opt) {
  const std::size_t n = x.rows, d = x.cols, k = opt.components;
  if (k < 1) throw ArgumentError("gmm_fit: need at least one component");
  if (d < 1) throw ArgumentError("gmm_fit: descriptor dimension must be >= 1");
  if (n < k) throw ArgumentError("gmm_fit: need at least as many descriptors as components");
  if (!x.all_finite()) throw ArgumentError("gmm_fit: non-finite descriptors");

  Rng rng(opt.seed);
  GmmModel g;
  g.weights.assign(k, 1.0 / static_cast<double>(k));
  g.means = detail::kmeanspp_centers(x, k, rng);
  g.variances = Matrix(k, d);
  {
    std::vector<double> mu(d, 0.0), var(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < d; ++j) mu[j] += x(r, j);
    for (double& m : mu) m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < d; ++j) var[j] += (x(r, j) - mu[j]) * (x(r, j) - mu[j]);
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t j = 0; j < d; ++j)
        g.variances(c, j) = std::max(var[j] / static_cast<double>(n), opt.variance_floor);
  }

  GmmFitResult result;
  Matrix resp(n, k);
  for (std::size_t it = 0; it < opt.max_iter; ++it) {
    double ll = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const auto logp = g.component_log_densities(x.row(r));
      const double lse = log_sum_exp(logp);
      ll += lse;
      for (std::size_t c = 0; c < k; ++c) resp(r, c) = std::exp(logp[c] - lse);
    }
    ll /= static_cast<double>(n);
    if (!std::isfinite(ll)) throw NumericError("gmm_fit: non-finite log-likelihood");
    if (!result.log_likelihood.empty() && ll - result.log_likelihood.back() < opt.tol) {
      result.log_likelihood.push_back(ll);
      result.converged = true;
      break;
    }
    result.log_likelihood.push_back(ll);

    for (std::size_t c = 0; c < k; ++c) {
      double nk = 0.0;
      for (std::size_t r = 0; r < n; ++r) nk += resp(r, c);
      g.weights[c] = nk / static_cast<double>(n);
      if (nk <= 0.0) continue;  // starved component keeps its mean and variance
      for (std::size_t j = 0; j < d; ++j) {
        double m = 0.0;
        for (std::size_t r = 0; r < n; ++r) m += resp(r, c) * x(r, j);
        m /= nk;
        double v = 0.0;
        for (std::size_t r = 0; r < n; ++r) v += resp(r, c) * (x(r, j) - m) * (x(r, j) - m);
        g.means(c, j) = m;
        g.variances(c, j) = std::max(v / nk, opt.variance_floor);
      }
    }
    // Keep every weight strictly positive.
    double wsum = 0.0;
    for (double& w : g.weights) {
      w = std::max(w, 1e-12);
      wsum += w;
    }
    for (double& w : g.weights) w /= wsum;
  }
  result.model = std::move(g);
  return result;
}

struct FisherVector {
  std::vector<double> values;  // K·D mean block, then K·D variance block
  bool normalized = false;
};

/// Fisher vector w.r.t. means and variances. With `normalize`, applies
/// signed square root then global L2 (an all-zero vector stays zero).
inline FisherVector fisher_encode(const Matrix& x, const GmmModel& gmm, bool normalize = true) {
  const std::size_t k = gmm.components(), d = gmm.dim();
  if (x.rows < 1) throw ArgumentError("fisher_encode: need at least one descriptor");
  if (x.cols != d)
    throw ArgumentError("fisher_encode: descriptor dim " + std::to_string(x.cols) + " != gmm dim " + std::to_string(d));
  FisherVector fv{std::vector<double>(2 * k * d, 0.0), false};
  auto* mean_block = fv.values.data();
  auto* var_block = fv.values.data() + k * d;
  for (std::size_t r = 0; r < x.rows; ++r) {
    const auto gamma = gmm.posteriors(x.row(r));
    for (std::size_t c = 0; c < k; ++c) {
      if (gamma[c] == 0.0) continue;
      for (std::size_t j = 0; j < d; ++j) {
        const double z = (x(r, j) - gmm.means(c, j)) / std::sqrt(gmm.variances(c, j));
        mean_block[c * d + j] += gamma[c] * z;
        var_block[c * d + j] += gamma[c] * (z * z - 1.0);
      }
    }
  }
  const double n = static_cast<double>(x.rows);
  for (std::size_t c = 0; c < k; ++c) {
    const double sm = 1.0 / (n * std::sqrt(gmm.weights[c]));
    const double sv = 1.0 / (n * std::sqrt(2.0 * gmm.weights[c]));
    for (std::size_t j = 0; j < d; ++j) {
      mean_block[c * d + j] *= sm;
      var_block[c * d + j] *= sv;
    }
  }
  if (normalize) {
    for (double& v : fv.values) v = std::copysign(std::sqrt(std::abs(v)), v);
    const double norm = std::sqrt(squared_norm(fv.values));
    if (norm > 0.0)
      for (double& v : fv.values) v /= norm;
    fv.normalized = true;
  }
  return fv;
}

inline double hinge_loss(double margin) { return std::max(0.0, 1.0 - margin); }

/// One-vs-rest linear SVM. The bias is learned as the weight of a constant
/// input of 1 and is regularized with the rest.
struct LinearSvm {
  Matrix weights;             // C × dim
  std::vector<double> bias;   // C
  double lambda = 1e-3;

  std::size_t num_classes() const { return weights.rows; }
  std::size_t dim() const { return weights.cols; }
};

inline std::vector<double> svm_score(const LinearSvm& svm, std::span<const double> x) {
  if (x.size() != svm.dim())
    throw ArgumentError("svm_score: vector dim " + std::to_string(x.size()) + " != model dim " +
                        std::to_string(svm.dim()));
  std::vector<double> s(svm.num_classes());
  for (std::size_t c = 0; c < s.size(); ++c) s[c] = dot(svm.weights.row(c), x) + svm.bias[c];
  return s;
}

/// Sum over classes of λ/2 (‖w_c‖² + b_c²) + mean hinge loss of class c vs rest.
inline double svm_objective(const LinearSvm& svm, const Matrix& x, std::span<const std::size_t> labels) {
  double obj = 0.0;
  for (std::size_t c = 0; c < svm.num_classes(); ++c) {
    double hinge = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r) {
      const double y = labels[r] == c ? 1.0 : -1.0;
      hinge += hinge_loss(y * (dot(svm.weights.row(c), x.row(r)) + svm.bias[c]));
    }
    obj += 0.5 * svm.lambda * (squared_norm(svm.weights.row(c)) + svm.bias[c] * svm.bias[c]) +
           hinge / static_cast<double>(x.rows);
  }
  return obj;
}

struct SvmOptions {
  double lambda = 1e-3;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
};

struct SvmTrainResult {
  LinearSvm svm;
  std::vector<double> objective;  // evaluated after every epoch
};

/// Pegasos: per sample (seeded permutation each epoch), step η_t = 1/(λ t)
/// on every binary problem, then projection onto the ball of radius 1/√λ.
/// The returned model is the average of the iterates visited after the
/// first epoch (the first epoch's iterate when epochs == 1); `objective`
/// holds that average's objective at the end of every epoch.
inline SvmTrainResult svm_train(const Matrix& x, std::span<const std::size_t> labels, std::size_t num_classes,
                                const SvmOptions& opt) {
  if (x.rows < 2) throw ArgumentError("svm_train: need at least 2 vectors");
  if (labels.size() != x.rows) throw ArgumentError("svm_train: label count mismatch");
  if (!(opt.lambda > 0.0)) throw ArgumentError("svm_train: lambda must be positive");
  if (opt.epochs < 1) throw ArgumentError("svm_train: epochs must be >= 1");
  std::vector<bool> present(num_classes, false);
  for (auto l : labels) {
    if (l >= num_classes) throw ArgumentError("svm_train: label out of range");
    present[l] = true;
  }
  if (std::count(present.begin(), present.end(), true) < 2) throw ArgumentError("svm_train: need at least 2 classes");

  const std::size_t dim = x.cols;
  // Row c holds w_c followed by b_c.
  Matrix w(num_classes, dim + 1), avg(num_classes, dim + 1);
  std::size_t averaged = 0;
  const double radius = 1.0 / std::sqrt(opt.lambda);
  std::vector<std::size_t> order(x.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(opt.seed);
  std::uint64_t t = 0;

  auto as_model = [&](const Matrix& m) {
    LinearSvm svm{Matrix(num_classes, dim), std::vector<double>(num_classes), opt.lambda};
    for (std::size_t c = 0; c < num_classes; ++c) {
      std::copy_n(m.row(c).begin(), dim, svm.weights.row(c).begin());
      svm.bias[c] = m(c, dim);
    }
    return svm;
  };

  SvmTrainResult res{as_model(w), {}};
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (opt.lambda * static_cast<double>(t));
      const double shrink = 1.0 - eta * opt.lambda;
      const auto xi = x.row(i);
      for (std::size_t c = 0; c < num_classes; ++c) {
        auto wc = w.row(c);
        const double y = labels[i] == c ? 1.0 : -1.0;
        const double margin = y * (dot(wc.first(dim), xi) + wc[dim]);
        for (double& v : wc) v *= shrink;
        if (margin < 1.0) {
          for (std::size_t j = 0; j < dim; ++j) wc[j] += eta * y * xi[j];
          wc[dim] += eta * y;
        }
        const double norm = std::sqrt(squared_norm(wc));
        if (norm > radius)
          for (double& v : wc) v *= radius / norm;
      }
      if (epoch > 0) {
        ++averaged;
        const double f = 1.0 / static_cast<double>(averaged);
        for (std::size_t k = 0; k < avg.data.size(); ++k) avg.data[k] += f * (w.data[k] - avg.data[k]);
      }
    }
    res.svm = as_model(epoch > 0 ? avg : w);
    res.objective.push_back(svm_objective(res.svm, x, labels));
  }
  return res;
}

inline nlohmann::json to_json(const Standardizer& s) { return {{"mean", s.mean}, {"stddev", s.stddev}}; }

inline Standardizer standardizer_from_json(const nlohmann::json& j) {
  return {j.at("mean").get<std::vector<double>>(), j.at("stddev").get<std::vector<double>>()};
}

inline nlohmann::json to_json(const GmmModel& g) {
  return {{"components", g.components()}, {"dim", g.dim()}, {"weights", g.weights},
          {"means", g.means.data},        {"variances", g.variances.data}};
}

inline GmmModel gmm_from_json(const nlohmann::json& j) {
  const auto k = j.at("components").get<std::size_t>();
  const auto d = j.at("dim").get<std::size_t>();
  GmmModel g{j.at("weights").get<std::vector<double>>(), Matrix(k, d, j.at("means").get<std::vector<double>>()),
             Matrix(k, d, j.at("variances").get<std::vector<double>>())};
  if (g.means.data.size() != k * d || g.variances.data.size() != k * d) throw FormatError("gmm: array size mismatch");
  g.validate();
  return g;
}

inline nlohmann::json to_json(const LinearSvm& s) {
  return {{"classes", s.num_classes()}, {"dim", s.dim()}, {"lambda", s.lambda},
          {"weights", s.weights.data},  {"bias", s.bias}};
}

inline LinearSvm svm_from_json(const nlohmann::json& j) {
  const auto c = j.at("classes").get<std::size_t>();
  const auto d = j.at("dim").get<std::size_t>();
  LinearSvm s{Matrix(c, d, j.at("weights").get<std::vector<double>>()), j.at("bias").get<std::vector<double>>(),
              j.at("lambda").get<double>()};
  if (s.weights.data.size() != c * d || s.bias.size() != c) throw FormatError("svm: array size mismatch");
  return s;
}

}  // namespace tsn
