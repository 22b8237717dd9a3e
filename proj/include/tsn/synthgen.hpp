#pragma once

// Seeded synthetic datasets: untrimmed "videos" whose class evidence sits in
// a few snippets, per-class audio tones in noise, and modality-specific
// informative class subsets for fusion studies.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "tsn/audio.hpp"
#include "tsn/core.hpp"
#include "tsn/error.hpp"
#include "tsn/random.hpp"

namespace tsn {

struct SynthConfig {
  std::size_t num_train = 200;
  std::size_t num_val = 100;
  std::size_t num_classes = 5;
  std::size_t snippets = 15;  // one snippet per second of video
  std::size_t feature_dim = 16;
  double evidence_ratio = 0.2;
  double signal_strength = 2.0;
  double noise_sigma = 1.0;
  double flow_signal_scale = 0.7;
  /// Classes whose evidence is visible in each modality; empty means all.
  std::vector<std::size_t> rgb_classes, flow_classes, audio_classes;
  bool with_flow = true;
  bool with_audio = true;
  double tone_base_hz = 500.0;
  double tone_step_hz = 400.0;
  double snr_db = 10.0;  // +inf gives a clean tone
  double tone_amplitude = 0.5;
  std::uint32_t sample_rate = kDefaultSampleRate;
  double audio_seconds = 0.0;  // 0: same as video duration
  double source_fps = 25.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_classes < 2) throw ArgumentError("synth: num_classes must be >= 2");
    if (num_train + num_val == 0) throw ArgumentError("synth: no videos requested");
    if (snippets < 1 || feature_dim < 1) throw ArgumentError("synth: snippets and feature_dim must be >= 1");
    if (!(evidence_ratio > 0.0 && evidence_ratio <= 1.0)) throw ArgumentError("synth: evidence_ratio must be in (0,1]");
    if (!(noise_sigma >= 0.0)) throw ArgumentError("synth: noise_sigma must be >= 0");
    for (const auto* set : {&rgb_classes, &flow_classes, &audio_classes})
      for (auto c : *set)
        if (c >= num_classes) throw ArgumentError("synth: informative class out of range");
    if (with_audio) {
      const double top = tone_base_hz + tone_step_hz * static_cast<double>(num_classes - 1);
      if (!(tone_base_hz > 0.0) || top >= sample_rate / 2.0) throw ArgumentError("synth: tones must lie below Nyquist");
    }
  }

  double video_seconds() const { return static_cast<double>(snippets); }
  double clip_seconds() const { return audio_seconds > 0.0 ? audio_seconds : video_seconds(); }
  std::size_t evidence_count() const {
    // Slack keeps products like 0.2 * 15 from rounding up to 4.
    const auto n = static_cast<std::size_t>(std::ceil(evidence_ratio * static_cast<double>(snippets) - 1e-9));
    return std::clamp<std::size_t>(n, 1, snippets);
  }
  double tone_hz(std::size_t cls) const { return tone_base_hz + tone_step_hz * static_cast<double>(cls); }
};

namespace detail {

enum SynthStream : std::uint64_t { kPositions = 1, kRgb = 2, kFlow = 3, kAudio = 4, kDirections = 5 };

inline bool informative(const std::vector<std::size_t>& set, std::size_t cls) {
  return set.empty() || std::find(set.begin(), set.end(), cls) != set.end();
}

inline std::string video_id(std::size_t index) {
  std::string digits = std::to_string(index);
  return "v" + std::string(digits.size() < 5 ? 5 - digits.size() : 0, '0') + digits;
}

}  // namespace detail

/// Unit-norm class directions for one visual modality (C × D).
inline Matrix class_directions(const SynthConfig& cfg, Modality modality) {
  Rng rng(derive_seed(cfg.seed, detail::kDirections, static_cast<std::uint64_t>(modality)));
  Matrix dirs(cfg.num_classes, cfg.feature_dim);
  for (std::size_t c = 0; c < cfg.num_classes; ++c) {
    for (double& v : dirs.row(c)) v = rng.normal();
    const double n = std::sqrt(squared_norm(dirs.row(c)));
    for (double& v : dirs.row(c)) v /= n;
  }
  return dirs;
}

/// Snippet positions carrying class evidence in video `index` (sorted).
inline std::vector<std::size_t> evidence_positions(const SynthConfig& cfg, std::size_t index) {
  std::vector<std::size_t> pos(cfg.snippets);
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  Rng rng(derive_seed(cfg.seed, index, detail::kPositions));
  rng.shuffle(std::span<std::size_t>(pos));
  pos.resize(cfg.evidence_count());
  std::sort(pos.begin(), pos.end());
  return pos;
}

/// Evidence snippets ~ N(strength · dir_label, σ²I); all others ~ N(0, σ²I).
inline FeatureSequence synth_visual_features(const SynthConfig& cfg, Modality modality, std::size_t label,
                                             std::size_t index) {
  const bool is_flow = modality == Modality::flow;
  const auto& classes = is_flow ? cfg.flow_classes : cfg.rgb_classes;
  const double strength = cfg.signal_strength * (is_flow ? cfg.flow_signal_scale : 1.0);
  const Matrix dirs = class_directions(cfg, modality);
  const auto evidence = evidence_positions(cfg, index);
  const bool visible = detail::informative(classes, label);
  Rng rng(derive_seed(cfg.seed, index, is_flow ? detail::kFlow : detail::kRgb));
  Matrix m(cfg.snippets, cfg.feature_dim);
  for (std::size_t t = 0; t < cfg.snippets; ++t) {
    const bool ev = visible && std::binary_search(evidence.begin(), evidence.end(), t);
    for (std::size_t j = 0; j < cfg.feature_dim; ++j)
      m(t, j) = (ev ? strength * dirs(label, j) : 0.0) + cfg.noise_sigma * rng.normal();
  }
  return FeatureSequence(std::move(m));
}

/// Class tone (random phase) plus white noise at the configured SNR; classes
/// outside audio_classes get noise only.
inline Waveform synth_audio(const SynthConfig& cfg, std::size_t label, std::size_t index) {
  Rng rng(derive_seed(cfg.seed, index, detail::kAudio));
  const auto n = static_cast<std::size_t>(std::llround(cfg.clip_seconds() * cfg.sample_rate));
  const double signal_power = cfg.tone_amplitude * cfg.tone_amplitude / 2.0;
  const double noise_sigma = std::isinf(cfg.snr_db) ? 0.0 : std::sqrt(signal_power / std::pow(10.0, cfg.snr_db / 10.0));
  const bool audible = detail::informative(cfg.audio_classes, label);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double omega = 2.0 * std::numbers::pi * cfg.tone_hz(label) / cfg.sample_rate;
  Waveform w{cfg.sample_rate, std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double tone = audible ? cfg.tone_amplitude * std::sin(omega * static_cast<double>(i) + phase) : 0.0;
    w.samples[i] = std::clamp(tone + noise_sigma * rng.normal(), -1.0, 1.0);
  }
  return w;
}

/// Video ids, labels (round-robin over classes) and durations; train first.
inline std::vector<VideoRecord> synth_records(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<VideoRecord> out;
  for (std::size_t i = 0; i < cfg.num_train + cfg.num_val; ++i) {
    const std::size_t within = i < cfg.num_train ? i : i - cfg.num_train;
    VideoRecord r;
    r.video_id = detail::video_id(i);
    r.label = within % cfg.num_classes;
    r.duration_sec = cfg.video_seconds();
    r.num_frames = static_cast<std::uint64_t>(std::llround(r.duration_sec * cfg.source_fps));
    out.push_back(std::move(r));
  }
  return out;
}

/// Writes rgb (and flow) feature files under `dir` and fills their paths.
inline void gen_visual(const SynthConfig& cfg, const fs::path& dir, std::vector<VideoRecord>& records) {
  fs::create_directories(dir / "rgb");
  if (cfg.with_flow) fs::create_directories(dir / "flow");
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& r = records[i];
    r.rgb_feature_path = "rgb/" + r.video_id + ".tsnf";
    write_features(dir / *r.rgb_feature_path, synth_visual_features(cfg, Modality::rgb, r.label, i));
    if (cfg.with_flow) {
      r.flow_feature_path = "flow/" + r.video_id + ".tsnf";
      write_features(dir / *r.flow_feature_path, synth_visual_features(cfg, Modality::flow, r.label, i));
    }
  }
}

/// Writes one PCM16 WAV per video under `dir` and fills audio paths.
inline void gen_audio(const SynthConfig& cfg, const fs::path& dir, std::vector<VideoRecord>& records) {
  fs::create_directories(dir / "audio");
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& r = records[i];
    r.audio_path = "audio/" + r.video_id + ".wav";
    write_wav(dir / *r.audio_path, synth_audio(cfg, r.label, i));
  }
}

struct SynthDataset {
  fs::path dir;
  std::vector<VideoRecord> train;
  std::vector<VideoRecord> val;
  fs::path train_manifest() const { return dir / "train.csv"; }
  fs::path val_manifest() const { return dir / "val.csv"; }
  fs::path classes_file() const { return dir / "classes.txt"; }
};

/// Full dataset: classes.txt, train.csv, val.csv and the per-video files.
inline SynthDataset synthesize(const SynthConfig& cfg, const fs::path& dir) {
  auto records = synth_records(cfg);
  fs::create_directories(dir);
  gen_visual(cfg, dir, records);
  if (cfg.with_audio) gen_audio(cfg, dir, records);
  const LabelSpace labels = LabelSpace::anonymous(cfg.num_classes);
  for (const auto& r : records) validate_record(r, labels);
  labels.save(dir / "classes.txt");
  SynthDataset ds{dir,
                  {records.begin(), records.begin() + static_cast<std::ptrdiff_t>(cfg.num_train)},
                  {records.begin() + static_cast<std::ptrdiff_t>(cfg.num_train), records.end()}};
  write_manifest(ds.train_manifest(), ds.train);
  write_manifest(ds.val_manifest(), ds.val);
  return ds;
}

}  // namespace tsn
