#pragma once

// Glue between the stages: manifest-level scoring, audio feature extraction
// specs, and the MFCC -> Fisher vector -> SVM model bundle. The command-line
// tool and the end-to-end experiments both go through these.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsn/audio.hpp"
#include "tsn/core.hpp"
#include "tsn/encoding.hpp"
#include "tsn/error.hpp"
#include "tsn/netmodel.hpp"

namespace tsn {

/// Default label file: classes.txt next to the manifest.
inline LabelSpace load_label_space(const fs::path& manifest_path, const fs::path& classes_path = {}) {
  return LabelSpace::load(classes_path.empty() ? manifest_path.parent_path() / "classes.txt" : classes_path);
}

/// Video-level scores for every sequence. `records` supplies durations and
/// must be aligned with `data`.
inline ScoreSet score_sequences(const VideoModel& model, std::span<const LabeledSequence> data,
                                std::span<const VideoRecord> records, double fps = 1.0) {
  if (data.size() != records.size()) throw ArgumentError("score_sequences: data/records size mismatch");
  ScoreSet out;
  for (std::size_t i = 0; i < data.size(); ++i)
    out.emplace(data[i].video_id, predict_video(model, data[i].features, records[i].duration_sec, fps));
  return out;
}

enum class AudioFeatureKind { mfcc, multiscale };

inline AudioFeatureKind parse_audio_feature_kind(std::string_view s) {
  if (s == "mfcc") return AudioFeatureKind::mfcc;
  if (s == "multiscale") return AudioFeatureKind::multiscale;
  throw ArgumentError("unknown audio feature kind '" + std::string(s) + "' (mfcc|multiscale)");
}

inline const char* to_string(AudioFeatureKind k) { return k == AudioFeatureKind::mfcc ? "mfcc" : "multiscale"; }

/// How a directory of audio feature files was produced. Stored next to the
/// files so consumers can recover the multiscale stack shape.
struct AudioFeatureSpec {
  AudioFeatureKind kind = AudioFeatureKind::mfcc;
  MfccParams mfcc;
  std::vector<std::size_t> windows = {256, 512, 1024};
  std::size_t height = 128;
  std::size_t width = 128;
  double fps = 1.0;
  std::uint32_t sample_rate = kDefaultSampleRate;

  std::size_t row_width() const {
    return kind == AudioFeatureKind::mfcc ? mfcc.n_coeffs : windows.size() * height * width;
  }
};

inline nlohmann::json to_json(const AudioFeatureSpec& s) {
  return {{"kind", to_string(s.kind)},
          {"mfcc", {{"window", s.mfcc.window}, {"hop", s.mfcc.hop}, {"n_mels", s.mfcc.n_mels},
                    {"n_coeffs", s.mfcc.n_coeffs}, {"fmin", s.mfcc.fmin}, {"fmax", s.mfcc.fmax}}},
          {"windows", s.windows},
          {"height", s.height},
          {"width", s.width},
          {"fps", s.fps},
          {"sample_rate", s.sample_rate}};
}

inline AudioFeatureSpec audio_feature_spec_from_json(const nlohmann::json& j) {
  try {
    AudioFeatureSpec s;
    s.kind = parse_audio_feature_kind(j.at("kind").get<std::string>());
    const auto& m = j.at("mfcc");
    s.mfcc = {m.at("window").get<std::size_t>(), m.at("hop").get<std::size_t>(), m.at("n_mels").get<std::size_t>(),
              m.at("n_coeffs").get<std::size_t>(), m.at("fmin").get<double>(), m.at("fmax").get<double>()};
    s.windows = j.at("windows").get<std::vector<std::size_t>>();
    s.height = j.at("height").get<std::size_t>();
    s.width = j.at("width").get<std::size_t>();
    s.fps = j.at("fps").get<double>();
    s.sample_rate = j.at("sample_rate").get<std::uint32_t>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("audio feature spec: ") + e.what());
  }
}

/// MFCC: one row per STFT frame. Multiscale: one flattened stack per fps
/// timestamp (channel-major, then frequency, then time).
inline FeatureSequence audio_features(const Waveform& w, const AudioFeatureSpec& spec) {
  if (spec.kind == AudioFeatureKind::mfcc) return FeatureSequence(mfcc(w, spec.mfcc).frames);
  return multiscale_snippets(w, spec.windows, spec.height, spec.width, spec.fps);
}

/// Reads every record's WAV and extracts features; errors name the video.
inline std::vector<LabeledSequence> extract_audio_features(const fs::path& manifest_path,
                                                           const std::vector<VideoRecord>& records,
                                                           const AudioFeatureSpec& spec) {
  std::vector<LabeledSequence> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (!r.audio_path) throw ValidationError(r.video_id + ": no audio path in manifest");
    try {
      out.push_back({r.video_id, audio_features(read_wav(resolve_path(manifest_path, *r.audio_path), spec.sample_rate), spec),
                     r.label});
    } catch (const Error& e) {
      throw ValidationError(r.video_id + ": " + e.what());
    }
  }
  return out;
}

inline void write_feature_dir(const fs::path& dir, std::span<const LabeledSequence> data, const AudioFeatureSpec& spec) {
  fs::create_directories(dir);
  for (const auto& s : data) write_features(dir / (s.video_id + ".tsnf"), s.features);
  detail::write_file(dir / "features.json", to_json(spec).dump(1) + "\n");
}

inline AudioFeatureSpec read_feature_dir_spec(const fs::path& dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(dir / "features.json"));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError((dir / "features.json").string() + ": " + e.what());
  }
  return audio_feature_spec_from_json(j);
}

struct FvOptions {
  GmmFitOptions gmm;
  SvmOptions svm;
};

/// Standardizer + GMM + SVM: everything needed to score a new MFCC sequence.
struct FvModel {
  Standardizer standardizer;
  GmmModel gmm;
  LinearSvm svm;
};

struct FvTrainResult {
  FvModel model;
  std::vector<double> gmm_log_likelihood;
  std::vector<double> svm_objective;
};

inline std::vector<double> fv_encode_video(const FvModel& m, const Matrix& frames) {
  return fisher_encode(m.standardizer.apply(frames), m.gmm).values;
}

/// Standardizes all training frames, fits the GMM on them, encodes each video
/// and trains the one-vs-rest SVM on the encodings.
inline FvTrainResult fv_train(std::span<const LabeledSequence> data, std::size_t num_classes, const FvOptions& opt) {
  if (data.empty()) throw ArgumentError("fv_train: no training videos");
  std::size_t rows = 0;
  for (const auto& s : data) rows += s.features.snippets();
  const std::size_t d = data[0].features.dim();
  Matrix frames(rows, d);
  std::size_t r = 0;
  for (const auto& s : data) {
    if (s.features.dim() != d) throw ValidationError(s.video_id + ": descriptor dim differs from first video");
    for (std::size_t t = 0; t < s.features.snippets(); ++t, ++r)
      std::copy_n(s.features.values.row(t).begin(), d, frames.row(r).begin());
  }
  FvTrainResult res;
  res.model.standardizer = Standardizer::fit(frames);
  auto fit = gmm_fit(res.model.standardizer.apply(frames), opt.gmm);
  res.model.gmm = std::move(fit.model);
  res.gmm_log_likelihood = std::move(fit.log_likelihood);

  Matrix encoded(data.size(), 2 * res.model.gmm.components() * d);
  std::vector<std::size_t> labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto fv = fv_encode_video(res.model, data[i].features.values);
    std::copy(fv.begin(), fv.end(), encoded.row(i).begin());
    labels[i] = data[i].label;
  }
  auto svm = svm_train(encoded, labels, num_classes, opt.svm);
  res.model.svm = std::move(svm.svm);
  res.svm_objective = std::move(svm.objective);
  return res;
}

inline ScoreSet fv_scores(const FvModel& m, std::span<const LabeledSequence> data) {
  ScoreSet out;
  for (const auto& s : data) out.emplace(s.video_id, svm_score(m.svm, fv_encode_video(m, s.features.values)));
  return out;
}

inline nlohmann::json to_json(const FvModel& m) {
  return {{"format", "tsn-fv-model"},
          {"version", 1},
          {"standardizer", to_json(m.standardizer)},
          {"gmm", to_json(m.gmm)},
          {"svm", to_json(m.svm)}};
}

inline FvModel fv_model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "tsn-fv-model") throw FormatError("not a tsn fv model");
    return {standardizer_from_json(j.at("standardizer")), gmm_from_json(j.at("gmm")), svm_from_json(j.at("svm"))};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("fv model: ") + e.what());
  }
}

}  // namespace tsn
