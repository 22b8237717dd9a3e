#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "oracles.hpp"

using namespace tsn;

namespace {

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return out;
}

SynthConfig small_config() {
  SynthConfig c;
  c.num_train = 6;
  c.num_val = 4;
  c.num_classes = 3;
  c.snippets = 5;
  c.feature_dim = 4;
  c.audio_seconds = 0.5;
  c.seed = 21;
  return c;
}

}  // namespace

TEST(Synth, FullEvidenceRatioMarksEverySnippet) {
  SynthConfig c = small_config();
  c.evidence_ratio = 1.0;
  for (std::size_t i = 0; i < 10; ++i) {
    std::vector<std::size_t> all(c.snippets);
    std::iota(all.begin(), all.end(), std::size_t{0});
    EXPECT_EQ(evidence_positions(c, i), all);
  }
  // With no noise every snippet sits exactly on the class direction.
  c.noise_sigma = 0.0;
  const auto dirs = class_directions(c, Modality::rgb);
  const auto f = synth_visual_features(c, Modality::rgb, 2, 0);
  for (std::size_t t = 0; t < c.snippets; ++t)
    for (std::size_t j = 0; j < c.feature_dim; ++j) EXPECT_DOUBLE_EQ(f.values(t, j), c.signal_strength * dirs(2, j));
}

TEST(Synth, EvidenceCountIsCeilOfRatio) {
  SynthConfig c;
  c.snippets = 15;
  c.evidence_ratio = 0.2;
  EXPECT_EQ(c.evidence_count(), 3u);
  EXPECT_EQ(evidence_positions(c, 7).size(), 3u);
  c.evidence_ratio = 0.21;
  EXPECT_EQ(c.evidence_count(), 4u);
  c.evidence_ratio = 0.0;
  EXPECT_THROW(c.validate(), ArgumentError);
}

TEST(Synth, UninformativeClassHasNoSignal) {
  SynthConfig c = small_config();
  c.noise_sigma = 0.0;
  c.rgb_classes = {0};
  for (double v : synth_visual_features(c, Modality::rgb, 1, 3).values.data) EXPECT_EQ(v, 0.0);
}

TEST(Synth, ByteIdenticalAcrossRuns) {
  const auto a = oracle::scratch_dir("synth_a"), b = oracle::scratch_dir("synth_b");
  synthesize(small_config(), a);
  synthesize(small_config(), b);
  const auto sa = snapshot(a), sb = snapshot(b);
  EXPECT_EQ(sa.size(), 1u + 2u + 10u * 3u);
  EXPECT_EQ(sa, sb);
  auto other = small_config();
  other.seed = 22;
  const auto c = oracle::scratch_dir("synth_c");
  synthesize(other, c);
  EXPECT_NE(snapshot(c), sa);
}

TEST(Synth, ManifestsPassCoreValidation) {
  const auto dir = oracle::scratch_dir("synth_valid");
  const auto ds = synthesize(small_config(), dir);
  const auto labels = LabelSpace::load(ds.classes_file());
  const auto train = load_manifest(ds.train_manifest(), labels);
  const auto val = load_manifest(ds.val_manifest(), labels);
  EXPECT_EQ(train, ds.train);
  EXPECT_EQ(val.size(), 4u);
  for (const auto& r : train) {
    EXPECT_EQ(read_features(resolve_path(ds.train_manifest(), *r.rgb_feature_path)).snippets(), 5u);
    EXPECT_EQ(read_wav(resolve_path(ds.train_manifest(), *r.audio_path)).samples.size(), 8000u);
  }
}

TEST(Synth, CleanToneArgmaxIsToneBin) {
  SynthConfig c = small_config();
  c.snr_db = std::numeric_limits<double>::infinity();
  c.tone_base_hz = 500.0;
  c.tone_step_hz = 250.0;
  for (std::size_t label = 0; label < 3; ++label) {
    const auto w = synth_audio(c, label, label);
    const auto m = stft_magnitude(w, 512, 256);
    const auto bin = static_cast<std::size_t>(std::llround(c.tone_hz(label) * 512.0 / 16000.0));
    for (std::size_t f = 0; f < m.cols; ++f) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < m.rows; ++k)
        if (m(k, f) > m(best, f)) best = k;
      EXPECT_EQ(best, bin);
    }
  }
}

TEST(Synth, FullEvidenceBaselineIsEasy) {
  SynthConfig c;
  c.num_train = 100;
  c.num_val = 50;
  c.evidence_ratio = 1.0;
  c.with_audio = false;
  c.with_flow = false;
  c.seed = 3;
  const auto dir = oracle::scratch_dir("synth_easy");
  const auto ds = synthesize(c, dir);
  const auto train_data = load_modality(ds.train_manifest(), ds.train, Modality::rgb);
  const auto val_data = load_modality(ds.val_manifest(), ds.val, Modality::rgb);
  PredictorConfig p;
  p.input_dim = c.feature_dim;
  p.num_classes = c.num_classes;
  TrainConfig t;
  t.segments = 3;
  t.epochs = 10;
  t.learning_rate = 0.05;
  const auto model = train(train_data, p, t).model;
  const auto scores = score_sequences(model, val_data, ds.val, 1.0);
  EXPECT_GT(mean_average_precision(scores, label_map(ds.val)).map, 0.95);
}
