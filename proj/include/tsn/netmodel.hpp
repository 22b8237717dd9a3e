#pragma once

// Snippet-wise predictors (linear, MLP, small conv net) and the segment-based
// training loop that backpropagates through the consensus function.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsn/aggregation.hpp"
#include "tsn/core.hpp"
#include "tsn/error.hpp"
#include "tsn/matrix.hpp"
#include "tsn/random.hpp"
#include "tsn/sampling.hpp"

namespace tsn {

enum class PredictorKind { linear, mlp, conv2d };

inline const char* to_string(PredictorKind k) {
  switch (k) {
    case PredictorKind::linear: return "linear";
    case PredictorKind::mlp: return "mlp";
    case PredictorKind::conv2d: return "conv2d";
  }
  return "?";
}

inline PredictorKind parse_predictor_kind(std::string_view s) {
  if (s == "linear") return PredictorKind::linear;
  if (s == "mlp") return PredictorKind::mlp;
  if (s == "conv2d") return PredictorKind::conv2d;
  throw ArgumentError("unknown predictor kind '" + std::string(s) + "'");
}

/// Shape of the snippet predictor.
///
/// linear/mlp consume a flat `input_dim` vector. conv2d consumes an
/// input_ch × input_h × input_w stack flattened channel-major, then frequency
/// (h), then time (w); it applies `conv_kernels` valid kernel_h × kernel_w
/// filters, ReLU, mean pooling over non-overlapping blocks of `pool_h`
/// frequency rows, a mean over time, and a final linear layer.
/// Dropout, when enabled, acts on the input of the final linear layer.
struct PredictorConfig {
  PredictorKind kind = PredictorKind::linear;
  std::size_t input_dim = 0;
  std::size_t input_ch = 0, input_h = 0, input_w = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t conv_kernels = 4, kernel_h = 3, kernel_w = 3, pool_h = 2;
  std::size_t num_classes = 0;
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;

  std::size_t input_size() const {
    return kind == PredictorKind::conv2d ? input_ch * input_h * input_w : input_dim;
  }
  std::size_t conv_out_h() const { return input_h - kernel_h + 1; }
  std::size_t conv_out_w() const { return input_w - kernel_w + 1; }
  std::size_t pooled_h() const { return conv_out_h() / pool_h; }

  /// Width of the vector entering the final linear layer.
  std::size_t head_dim() const {
    switch (kind) {
      case PredictorKind::linear: return input_dim;
      case PredictorKind::mlp: return hidden_dims.empty() ? input_dim : hidden_dims.back();
      case PredictorKind::conv2d: return conv_kernels * pooled_h();
    }
    return 0;
  }

  void validate() const {
    if (num_classes < 2) throw ArgumentError("predictor: num_classes must be >= 2");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ArgumentError("predictor: dropout_rate must be in [0,1)");
    if (kind == PredictorKind::conv2d) {
      if (input_ch == 0 || input_h == 0 || input_w == 0) throw ArgumentError("conv2d: input dims must be positive");
      if (conv_kernels == 0 || kernel_h == 0 || kernel_w == 0 || pool_h == 0)
        throw ArgumentError("conv2d: kernel dims must be positive");
      if (kernel_h > input_h || kernel_w > input_w) throw ArgumentError("conv2d: kernel larger than input");
      if (pooled_h() == 0) throw ArgumentError("conv2d: pool_h larger than conv output height");
    } else {
      if (input_dim == 0) throw ArgumentError("predictor: input_dim must be positive");
      if (kind == PredictorKind::linear && !hidden_dims.empty())
        throw ArgumentError("linear predictor takes no hidden layers");
      for (auto h : hidden_dims)
        if (h == 0) throw ArgumentError("mlp: hidden dims must be positive");
    }
  }

  friend bool operator==(const PredictorConfig&, const PredictorConfig&) = default;
};

inline nlohmann::json to_json(const PredictorConfig& c) {
  return {{"kind", to_string(c.kind)},   {"input_dim", c.input_dim},       {"input_ch", c.input_ch},
          {"input_h", c.input_h},        {"input_w", c.input_w},           {"hidden_dims", c.hidden_dims},
          {"conv_kernels", c.conv_kernels}, {"kernel_h", c.kernel_h},      {"kernel_w", c.kernel_w},
          {"pool_h", c.pool_h},          {"num_classes", c.num_classes},   {"dropout_rate", c.dropout_rate},
          {"seed", c.seed}};
}

inline PredictorConfig predictor_config_from_json(const nlohmann::json& j) {
  PredictorConfig c;
  c.kind = parse_predictor_kind(j.at("kind").get<std::string>());
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.input_ch = j.at("input_ch").get<std::size_t>();
  c.input_h = j.at("input_h").get<std::size_t>();
  c.input_w = j.at("input_w").get<std::size_t>();
  c.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
  c.conv_kernels = j.at("conv_kernels").get<std::size_t>();
  c.kernel_h = j.at("kernel_h").get<std::size_t>();
  c.kernel_w = j.at("kernel_w").get<std::size_t>();
  c.pool_h = j.at("pool_h").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

/// A rows × cols block inside the flat parameter vector.
struct ParamBlock {
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
};

/// Inverted-dropout mask source. Each snippet row t draws its mask from
/// derive_seed(seed, t), so the mask is a pure function of (seed, t).
struct Dropout {
  double rate = 0.0;
  std::uint64_t seed = 0;
};

class Predictor {
 public:
  /// Per-forward activations kept for the backward pass.
  struct Tape {
    Matrix inputs;
    std::vector<std::vector<std::vector<double>>> acts;  // [snippet][layer]
    std::vector<std::vector<double>> conv_pre;            // conv2d: K×H'×W' pre-ReLU
    std::vector<std::vector<double>> head;                // input of final layer before dropout
    std::vector<std::vector<double>> mask;                // empty when dropout off
  };

  explicit Predictor(PredictorConfig config) : config_(std::move(config)) {
    config_.validate();
    build_layout();
    params_.assign(total_, 0.0);
    init_params();
  }

  Predictor(PredictorConfig config, std::vector<double> params) : config_(std::move(config)) {
    config_.validate();
    build_layout();
    if (params.size() != total_)
      throw ValidationError("predictor: expected " + std::to_string(total_) + " params, got " +
                            std::to_string(params.size()));
    for (double v : params)
      if (!std::isfinite(v)) throw ValidationError("predictor: non-finite parameter");
    params_ = std::move(params);
  }

  const PredictorConfig& config() const { return config_; }
  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }
  std::size_t num_params() const { return total_; }

  /// Weight/bias blocks of the dense layers, input to output.
  const std::vector<std::pair<ParamBlock, ParamBlock>>& dense_layers() const { return dense_; }
  const ParamBlock& conv_weights() const { return conv_w_; }
  const ParamBlock& conv_bias() const { return conv_b_; }

  /// Scores every row of `inputs` independently; returns rows × C.
  Matrix forward(const Matrix& inputs, const Dropout* dropout = nullptr) const {
    Tape tape;
    return forward(inputs, tape, dropout);
  }

  Matrix forward(const Matrix& inputs, Tape& tape, const Dropout* dropout = nullptr) const {
    check_inputs(inputs);
    const std::size_t n = inputs.rows;
    const std::size_t C = config_.num_classes;
    tape = Tape{};
    tape.inputs = inputs;
    tape.acts.resize(n);
    tape.head.resize(n);
    if (config_.kind == PredictorKind::conv2d) tape.conv_pre.resize(n);
    const bool drop = dropout != nullptr && dropout->rate > 0.0;
    if (drop) tape.mask.resize(n);

    Matrix scores(n, C);
    for (std::size_t t = 0; t < n; ++t) {
      std::vector<double> h = head_forward(inputs.row(t), tape, t);
      tape.head[t] = h;
      if (drop) {
        auto& m = tape.mask[t];
        m.resize(h.size());
        Rng rng(derive_seed(dropout->seed, t));
        const double keep = 1.0 - dropout->rate;
        for (std::size_t j = 0; j < h.size(); ++j) {
          m[j] = rng.uniform() < keep ? 1.0 / keep : 0.0;
          h[j] *= m[j];
        }
      }
      const auto& [wb, bb] = dense_.back();
      dense_apply(wb, bb, h, scores.row(t));
    }
    return scores;
  }

  /// Accumulates dL/dparams into `grad` (size num_params()).
  void backward(const Tape& tape, const Matrix& dscores, std::span<double> grad) const {
    if (grad.size() != total_) throw ArgumentError("predictor backward: gradient size mismatch");
    const std::size_t n = tape.inputs.rows;
    if (dscores.rows != n || dscores.cols != config_.num_classes)
      throw ArgumentError("predictor backward: dscores shape mismatch");
    for (std::size_t t = 0; t < n; ++t) {
      std::vector<double> head = tape.head[t];
      if (!tape.mask.empty())
        for (std::size_t j = 0; j < head.size(); ++j) head[j] *= tape.mask[t][j];
      const auto& [wb, bb] = dense_.back();
      std::vector<double> dhead = dense_backward(wb, bb, head, dscores.row(t), grad);
      if (!tape.mask.empty())
        for (std::size_t j = 0; j < dhead.size(); ++j) dhead[j] *= tape.mask[t][j];
      head_backward(tape, t, dhead, grad);
    }
  }

  /// conv2d only: pooled activations before the temporal mean, laid out
  /// kernel × pooled row × time column.
  Matrix pooled_activations(std::span<const double> input) const {
    if (config_.kind != PredictorKind::conv2d) throw ArgumentError("pooled_activations: conv2d only");
    if (input.size() != config_.input_size()) throw ArgumentError("pooled_activations: input size mismatch");
    const auto pre = conv_forward(input);
    return pool_freq(pre);
  }

 private:
  void build_layout() {
    total_ = 0;
    auto block = [&](std::size_t r, std::size_t c) {
      ParamBlock b{total_, r, c};
      total_ += r * c;
      return b;
    };
    dense_.clear();
    const std::size_t C = config_.num_classes;
    switch (config_.kind) {
      case PredictorKind::linear:
        dense_.push_back({block(C, config_.input_dim), block(C, 1)});
        break;
      case PredictorKind::mlp: {
        std::size_t in = config_.input_dim;
        for (auto h : config_.hidden_dims) {
          dense_.push_back({block(h, in), block(h, 1)});
          in = h;
        }
        dense_.push_back({block(C, in), block(C, 1)});
        break;
      }
      case PredictorKind::conv2d:
        conv_w_ = block(config_.conv_kernels, config_.input_ch * config_.kernel_h * config_.kernel_w);
        conv_b_ = block(config_.conv_kernels, 1);
        dense_.push_back({block(C, config_.head_dim()), block(C, 1)});
        break;
    }
  }

  void init_params() {
    Rng rng(config_.seed);
    auto fill = [&](const ParamBlock& b, double scale) {
      for (std::size_t i = 0; i < b.size(); ++i) params_[b.offset + i] = scale * rng.normal();
    };
    if (config_.kind == PredictorKind::conv2d) fill(conv_w_, std::sqrt(2.0 / static_cast<double>(conv_w_.cols)));
    for (std::size_t l = 0; l < dense_.size(); ++l) {
      const auto& w = dense_[l].first;
      const bool last = l + 1 == dense_.size();
      fill(w, std::sqrt((last ? 1.0 : 2.0) / static_cast<double>(w.cols)));
    }
  }

  void check_inputs(const Matrix& inputs) const {
    if (inputs.rows < 1) throw ArgumentError("predictor: no snippets");
    if (inputs.cols != config_.input_size())
      throw ArgumentError("predictor: input width " + std::to_string(inputs.cols) + " != expected " +
                          std::to_string(config_.input_size()));
  }

  void dense_apply(const ParamBlock& w, const ParamBlock& b, std::span<const double> x, std::span<double> y) const {
    for (std::size_t r = 0; r < w.rows; ++r) {
      const double* wr = params_.data() + w.offset + r * w.cols;
      double s = params_[b.offset + r];
      for (std::size_t c = 0; c < w.cols; ++c) s += wr[c] * x[c];
      y[r] = s;
    }
  }

  /// Returns dL/dx; accumulates weight and bias gradients.
  std::vector<double> dense_backward(const ParamBlock& w, const ParamBlock& b, std::span<const double> x,
                                     std::span<const double> dy, std::span<double> grad) const {
    std::vector<double> dx(w.cols, 0.0);
    for (std::size_t r = 0; r < w.rows; ++r) {
      const double g = dy[r];
      grad[b.offset + r] += g;
      if (g == 0.0) continue;
      const double* wr = params_.data() + w.offset + r * w.cols;
      double* gr = grad.data() + w.offset + r * w.cols;
      for (std::size_t c = 0; c < w.cols; ++c) {
        gr[c] += g * x[c];
        dx[c] += g * wr[c];
      }
    }
    return dx;
  }

  std::vector<double> head_forward(std::span<const double> x, Tape& tape, std::size_t t) const {
    switch (config_.kind) {
      case PredictorKind::linear: return {x.begin(), x.end()};
      case PredictorKind::mlp: {
        auto& acts = tape.acts[t];
        acts.emplace_back(x.begin(), x.end());
        for (std::size_t l = 0; l + 1 < dense_.size(); ++l) {
          const auto& [w, b] = dense_[l];
          std::vector<double> y(w.rows);
          dense_apply(w, b, acts.back(), y);
          acts.push_back(y);  // pre-activation
          for (double& v : y) v = std::max(v, 0.0);
          acts.push_back(std::move(y));
        }
        return acts.back();
      }
      case PredictorKind::conv2d: {
        tape.conv_pre[t] = conv_forward(x);
        const Matrix pooled = pool_freq(tape.conv_pre[t]);
        const std::size_t wo = config_.conv_out_w();
        std::vector<double> z(pooled.rows, 0.0);
        for (std::size_t r = 0; r < pooled.rows; ++r) {
          for (std::size_t c = 0; c < wo; ++c) z[r] += pooled(r, c);
          z[r] /= static_cast<double>(wo);
        }
        return z;
      }
    }
    return {};
  }

  void head_backward(const Tape& tape, std::size_t t, std::vector<double> dhead, std::span<double> grad) const {
    switch (config_.kind) {
      case PredictorKind::linear: return;
      case PredictorKind::mlp: {
        const auto& acts = tape.acts[t];
        // acts = [x, pre_0, post_0, pre_1, post_1, ...]
        for (std::size_t l = dense_.size() - 1; l-- > 0;) {
          const auto& pre = acts[2 * l + 1];
          for (std::size_t j = 0; j < dhead.size(); ++j)
            if (pre[j] <= 0.0) dhead[j] = 0.0;
          const auto& [w, b] = dense_[l];
          dhead = dense_backward(w, b, acts[2 * l], dhead, grad);
        }
        return;
      }
      case PredictorKind::conv2d: {
        const auto& cfg = config_;
        const std::size_t ho = cfg.conv_out_h(), wo = cfg.conv_out_w(), hp = cfg.pooled_h();
        const auto& pre = tape.conv_pre[t];
        const auto x = tape.inputs.row(t);
        const double scale = 1.0 / static_cast<double>(wo * cfg.pool_h);
        for (std::size_t k = 0; k < cfg.conv_kernels; ++k) {
          double* gk = grad.data() + conv_w_.offset + k * conv_w_.cols;
          for (std::size_t i = 0; i < hp * cfg.pool_h; ++i) {
            const double dz = dhead[k * hp + i / cfg.pool_h] * scale;
            if (dz == 0.0) continue;
            for (std::size_t j = 0; j < wo; ++j) {
              if (pre[(k * ho + i) * wo + j] <= 0.0) continue;
              grad[conv_b_.offset + k] += dz;
              for (std::size_t ch = 0; ch < cfg.input_ch; ++ch)
                for (std::size_t a = 0; a < cfg.kernel_h; ++a) {
                  const double* xr = x.data() + (ch * cfg.input_h + i + a) * cfg.input_w + j;
                  double* gr = gk + (ch * cfg.kernel_h + a) * cfg.kernel_w;
                  for (std::size_t b = 0; b < cfg.kernel_w; ++b) gr[b] += dz * xr[b];
                }
            }
          }
        }
        return;
      }
    }
  }

  /// Valid cross-correlation plus bias, pre-ReLU; K × H' × W' flattened.
  std::vector<double> conv_forward(std::span<const double> x) const {
    const auto& cfg = config_;
    const std::size_t ho = cfg.conv_out_h(), wo = cfg.conv_out_w();
    std::vector<double> out(cfg.conv_kernels * ho * wo);
    for (std::size_t k = 0; k < cfg.conv_kernels; ++k) {
      const double* wk = params_.data() + conv_w_.offset + k * conv_w_.cols;
      const double bias = params_[conv_b_.offset + k];
      for (std::size_t i = 0; i < ho; ++i) {
        double* orow = out.data() + (k * ho + i) * wo;
        std::fill(orow, orow + wo, bias);
        for (std::size_t ch = 0; ch < cfg.input_ch; ++ch)
          for (std::size_t a = 0; a < cfg.kernel_h; ++a) {
            const double* xr = x.data() + (ch * cfg.input_h + i + a) * cfg.input_w;
            const double* wr = wk + (ch * cfg.kernel_h + a) * cfg.kernel_w;
            for (std::size_t b = 0; b < cfg.kernel_w; ++b) {
              const double wv = wr[b];
              for (std::size_t j = 0; j < wo; ++j) orow[j] += wv * xr[j + b];
            }
          }
      }
    }
    return out;
  }

  /// ReLU then mean over pool_h frequency rows; (K·Hp) × W'.
  Matrix pool_freq(const std::vector<double>& pre) const {
    const auto& cfg = config_;
    const std::size_t ho = cfg.conv_out_h(), wo = cfg.conv_out_w(), hp = cfg.pooled_h();
    Matrix pooled(cfg.conv_kernels * hp, wo);
    for (std::size_t k = 0; k < cfg.conv_kernels; ++k)
      for (std::size_t i = 0; i < hp * cfg.pool_h; ++i)
        for (std::size_t j = 0; j < wo; ++j)
          pooled(k * hp + i / cfg.pool_h, j) += std::max(pre[(k * ho + i) * wo + j], 0.0);
    for (double& v : pooled.data) v /= static_cast<double>(cfg.pool_h);
    return pooled;
  }

  PredictorConfig config_;
  std::vector<double> params_;
  std::size_t total_ = 0;
  std::vector<std::pair<ParamBlock, ParamBlock>> dense_;
  ParamBlock conv_w_, conv_b_;
};

/// Predictor plus the consensus function applied on top of it.
struct VideoModel {
  Predictor predictor;
  AggregationSpec aggregation;

  std::size_t num_classes() const { return predictor.config().num_classes; }
  /// Predictor parameters followed by attention parameters (if any).
  std::size_t num_params() const {
    return predictor.num_params() + aggregation.num_params(num_classes());
  }
};

struct VideoLoss {
  double loss = 0.0;
  Matrix dS;
  std::vector<double> dparams;
  std::vector<double> probs;
};

/// Cross-entropy of softmax(aggregate(S)) against `label`, with gradients
/// for S and for the consensus parameters.
inline VideoLoss video_loss(const Matrix& s, const AggregationSpec& spec, std::size_t label) {
  if (label >= s.cols) throw ArgumentError("video_loss: label out of range");
  const auto g = aggregate(spec, s);
  VideoLoss out;
  out.loss = log_sum_exp(g) - g[label];
  out.probs = softmax(g);
  std::vector<double> dg = out.probs;
  dg[label] -= 1.0;
  auto agg = agg_backward(spec, s, dg);
  out.dS = std::move(agg.dS);
  out.dparams = std::move(agg.dparams);
  return out;
}

namespace detail {

inline AggregationSpec with_attention_params(AggregationSpec spec, std::size_t classes) {
  if (spec.kind == AggregationKind::attention && spec.attn_w.empty()) spec.attn_w.assign(classes, 0.0);
  return spec;
}

}  // namespace detail

/// Loss and full gradient (predictor params then consensus params) for one
/// video given its sampled snippet rows.
inline double model_loss_and_grad(const VideoModel& model, const Matrix& snippets, std::size_t label,
                                  std::span<double> grad, const Dropout* dropout = nullptr) {
  Predictor::Tape tape;
  const Matrix scores = model.predictor.forward(snippets, tape, dropout);
  if (!scores.all_finite()) throw NumericError("non-finite snippet scores (diverged parameters?)");
  const auto spec = detail::with_attention_params(model.aggregation, model.num_classes());
  const VideoLoss vl = video_loss(scores, spec, label);
  const std::size_t np = model.predictor.num_params();
  model.predictor.backward(tape, vl.dS, grad.subspan(0, np));
  for (std::size_t i = 0; i < vl.dparams.size(); ++i) grad[np + i] += vl.dparams[i];
  return vl.loss;
}

inline double model_loss(const VideoModel& model, const Matrix& snippets, std::size_t label,
                         const Dropout* dropout = nullptr) {
  const Matrix scores = model.predictor.forward(snippets, dropout);
  return video_loss(scores, detail::with_attention_params(model.aggregation, model.num_classes()), label).loss;
}

struct TrainConfig {
  std::size_t segments = 3;
  AggregationSpec aggregation;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      throw ArgumentError("train: learning_rate must be >= 0");
    if (epochs < 1) throw ArgumentError("train: epochs must be >= 1");
    if (segments < 1) throw ArgumentError("train: segments must be >= 1");
    if (batch_size < 1) throw ArgumentError("train: batch_size must be >= 1");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ArgumentError("train: momentum must be in [0,1)");
    if (!(weight_decay >= 0.0)) throw ArgumentError("train: weight_decay must be >= 0");
    if (aggregation.kind == AggregationKind::topk && (aggregation.k < 1 || aggregation.k > segments))
      throw ArgumentError("train: top-k requires 1 <= k <= segments");
  }
};

struct LabeledSequence {
  std::string video_id;
  FeatureSequence features;
  std::size_t label = 0;
};

struct TrainResult {
  VideoModel model;
  std::vector<double> loss_trace;  // mean training loss per epoch
};

inline Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(m.row(rows[i]).begin(), m.cols, out.row(i).begin());
  return out;
}

/// Mini-batch SGD with momentum and weight decay. Each video contributes K
/// snippets drawn by segment_sample; batch loss is the mean of video losses.
/// Single-threaded with a fixed summation order, so runs are bit-reproducible.
inline TrainResult train(std::span<const LabeledSequence> data, const PredictorConfig& pcfg,
                         const TrainConfig& tcfg) {
  tcfg.validate();
  if (data.empty()) throw ArgumentError("train: no training videos");
  for (const auto& v : data) {
    if (v.label >= pcfg.num_classes) throw ValidationError(v.video_id + ": label out of range");
    if (v.features.dim() != pcfg.input_size())
      throw ValidationError(v.video_id + ": feature width " + std::to_string(v.features.dim()) +
                            " != predictor input " + std::to_string(pcfg.input_size()));
  }
  VideoModel model{Predictor(pcfg), detail::with_attention_params(tcfg.aggregation, pcfg.num_classes)};
  const std::size_t np = model.predictor.num_params();
  const std::size_t total = model.num_params();
  std::vector<double> velocity(total, 0.0), grad(total, 0.0);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffler(derive_seed(tcfg.seed, 0x5eed));

  auto param_at = [&](std::size_t i) -> double& {
    if (i < np) return model.predictor.params()[i];
    if (i - np < pcfg.num_classes) return model.aggregation.attn_w[i - np];
    return model.aggregation.attn_b;
  };

  TrainResult result{model, {}};
  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    shuffler.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += tcfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + tcfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const auto& video = data[order[i]];
        const auto plan = segment_sample(video.features.snippets(), tcfg.segments, SampleMode::train,
                                         derive_seed(tcfg.seed, step, i));
        const Matrix snippets = gather_rows(video.features.values, plan.indices);
        const Dropout dropout{pcfg.dropout_rate, derive_seed(tcfg.seed ^ 0xd80, step, i)};
        const double loss = model_loss_and_grad(model, snippets, video.label, grad, &dropout);
        if (!std::isfinite(loss)) throw NumericError("train: non-finite loss on " + video.video_id);
        epoch_loss += loss;
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = 0; i < total; ++i) {
        double& p = param_at(i);
        const double g = grad[i] * inv + tcfg.weight_decay * p;
        velocity[i] = tcfg.momentum * velocity[i] - tcfg.learning_rate * g;
        p += velocity[i];
        if (!std::isfinite(p)) throw NumericError("train: parameters diverged at step " + std::to_string(step));
      }
      ++step;
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  result.model = std::move(model);
  return result;
}

/// Evaluation: scores every fps-sampled snippet with dropout off and pools
/// them with the model's consensus. Top-k uses min(k, snippets).
inline std::vector<double> predict_video(const VideoModel& model, const FeatureSequence& seq, double duration_sec,
                                         double fps = 1.0) {
  const auto idx = fps_indices(seq.snippets(), duration_sec, fps);
  const Matrix scores = model.predictor.forward(gather_rows(seq.values, idx));
  auto spec = detail::with_attention_params(model.aggregation, model.num_classes());
  if (spec.kind == AggregationKind::topk) spec.k = std::min(spec.k, scores.rows);
  return aggregate(spec, scores);
}

inline nlohmann::json checkpoint_to_json(const VideoModel& model, std::uint64_t seed, std::size_t epochs) {
  const auto p = model.predictor.params();
  return {{"format", "tsn-checkpoint"},
          {"version", 1},
          {"predictor", to_json(model.predictor.config())},
          {"aggregation", to_json(model.aggregation)},
          {"params", std::vector<double>(p.begin(), p.end())},
          {"seed", seed},
          {"epochs", epochs}};
}

inline VideoModel checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "tsn-checkpoint") throw FormatError("not a tsn checkpoint");
    if (j.at("version").get<int>() != 1) throw FormatError("unsupported checkpoint version");
    auto cfg = predictor_config_from_json(j.at("predictor"));
    auto agg = aggregation_from_json(j.at("aggregation"));
    if (agg.kind == AggregationKind::attention && agg.attn_w.size() != cfg.num_classes)
      throw FormatError("attention weights do not match num_classes");
    return VideoModel{Predictor(cfg, j.at("params").get<std::vector<double>>()), agg};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const fs::path& path, const VideoModel& model, std::uint64_t seed, std::size_t epochs) {
  detail::write_file(path, checkpoint_to_json(model, seed, epochs).dump(1) + "\n");
}

inline VideoModel load_checkpoint(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

/// Loads one modality's feature file for every record, naming the video on
/// failure.
inline std::vector<LabeledSequence> load_modality(const fs::path& manifest_path, const std::vector<VideoRecord>& records,
                                                  Modality modality) {
  std::vector<LabeledSequence> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const auto& cell = r.path(modality);
    if (!cell) throw ValidationError(r.video_id + ": no " + std::string(to_string(modality)) + " path in manifest");
    try {
      out.push_back({r.video_id, read_features(resolve_path(manifest_path, *cell)), r.label});
    } catch (const Error& e) {
      throw IoError(r.video_id + ": " + e.what());
    }
  }
  return out;
}

/// Loads `<dir>/<video_id>.tsnf` for every record.
inline std::vector<LabeledSequence> load_feature_dir(const fs::path& dir, const std::vector<VideoRecord>& records) {
  std::vector<LabeledSequence> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    try {
      out.push_back({r.video_id, read_features(dir / (r.video_id + ".tsnf")), r.label});
    } catch (const Error& e) {
      throw IoError(r.video_id + ": " + e.what());
    }
  }
  return out;
}

}  // namespace tsn
