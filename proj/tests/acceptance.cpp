// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "gradcheck.hpp"

using namespace tsn;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- 1: full-chain gradients ----------------------------------------------

Outcome gradients() {
  Rng rng(20251);
  double worst = 0.0;
  std::size_t n = 0;
  struct Agg {
    AggregationKind kind;
    std::size_t k;  // topk only; 0 = T
  };
  const Agg aggs[] = {{AggregationKind::average, 0}, {AggregationKind::topk, 1}, {AggregationKind::topk, 2},
                      {AggregationKind::topk, 0},     {AggregationKind::attention, 0}};
  for (auto kind : {PredictorKind::linear, PredictorKind::mlp, PredictorKind::conv2d})
    for (const auto& a : aggs)
      for (int i = 0; i < 100; ++i) {
        worst = std::max(worst, gradcheck::max_error(gradcheck::draw(rng, kind, a.kind, a.k)));
        ++n;
      }
  return {worst < 1e-5, fmt("%zu instances, max relative error %.2e (limit 1e-5)", n, worst)};
}

// ---- 2: reduction identities ------------------------------------------------

Outcome reductions() {
  Rng rng(20252);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t t = 1 + rng.index(20), c = 1 + rng.index(10);
    const auto s = oracle::random_matrix(rng, t, c, rng.uniform(0.1, 10.0));
    const auto avg = agg_average(s), top = agg_topk(s, t);
    const auto att = agg_attention(s, std::vector<double>(c, 0.0), 0.0);
    for (std::size_t j = 0; j < c; ++j) worst = std::max({worst, std::abs(top[j] - avg[j]), std::abs(att[j] - avg[j])});
  }
  return {worst <= 1e-12, fmt("1000 matrices, max |difference| %.2e (limit 1e-12)", worst)};
}

// ---- 3: DSP oracles --------------------------------------------------------

Outcome dsp() {
  Rng rng(20253);
  double stft_err = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t win = std::size_t{8} << rng.index(7);  // 8 .. 512
    const std::size_t hop = std::max<std::size_t>(1, win / (1 + rng.index(4)));
    Waveform w{16000, std::vector<double>(win + rng.index(2 * win + 1))};
    for (double& x : w.samples) x = rng.uniform(-1.0, 1.0);
    const auto m = stft_magnitude(w, win, hop);
    for (std::size_t f = 0; f < m.cols; ++f) {
      const auto ref = oracle::dft_magnitude(w.samples, f * hop, win);
      for (std::size_t k = 0; k < ref.size(); ++k) stft_err = std::max(stft_err, std::abs(m(k, f) - ref[k]));
    }
  }
  double const_err = 0.0, parseval_err = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = 1 + rng.index(64);
    const double c = rng.normal(0.0, 10.0);
    const auto dc = dct_ortho(std::vector<double>(n, c));
    const_err = std::max(const_err, std::abs(dc[0] - c * std::sqrt(static_cast<double>(n))));
    for (std::size_t k = 1; k < n; ++k) const_err = std::max(const_err, std::abs(dc[k]));
    std::vector<double> x(n);
    for (double& v : x) v = rng.normal(0.0, 5.0);
    parseval_err = std::max(parseval_err, std::abs(std::sqrt(squared_norm(dct_ortho(x))) - std::sqrt(squared_norm(x))));
  }
  const bool ok = stft_err < 1e-8 && const_err < 1e-10 && parseval_err < 1e-10;
  return {ok, fmt("STFT vs DFT max diff %.2e (limit 1e-8); DCT constant-input residue %.2e, Parseval gap %.2e "
                  "(limit 1e-10)",
                  stft_err, const_err, parseval_err)};
}

// ---- 4: Fisher score at the generating model ---------------------------------

Outcome fisher() {
  std::size_t shrank = 0;
  std::string norms;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(derive_seed(20254, seed));
    // Fit a GMM to clustered data, then draw from the fitted model.
    Matrix x(600, 4);
    for (std::size_t r = 0; r < x.rows; ++r)
      for (std::size_t j = 0; j < 4; ++j) x(r, j) = (r % 3 == 0 ? 2.0 : -1.0) * (j % 2 ? 1.0 : -1.0) + rng.normal();
    GmmFitOptions opt;
    opt.components = 3;
    opt.seed = seed;
    const auto g = gmm_fit(x, opt).model;
    const double small = std::sqrt(squared_norm(fisher_encode(g.sample(100, rng), g, false).values));
    const double large = std::sqrt(squared_norm(fisher_encode(g.sample(10000, rng), g, false).values));
    if (large < small) ++shrank;
    if (seed < 3) norms += fmt(" %.3f->%.4f", small, large);
  }
  return {shrank == 10, fmt("norm decreased N=1e2 -> 1e4 on %zu/10 seeds (first:%s)", shrank, norms.c_str())};
}

// ---- 5: metric oracles -----------------------------------------------------

Outcome metric_oracles() {
  Rng rng(20255);
  double ap_err = 0.0, topk_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 1 + rng.index(200);
    std::vector<std::string> ids(n);
    std::vector<double> s(n);
    std::vector<bool> pos(n);
    const double grain = rng.uniform() < 0.5 ? 4.0 : 1e6;  // half the instances have many ties
    for (std::size_t v = 0; v < n; ++v) {
      ids[v] = "v" + std::to_string(rng.index(100000)) + "_" + std::to_string(v);
      s[v] = std::round(rng.normal() * grain) / grain;
      pos[v] = rng.uniform() < 0.2;
    }
    pos[rng.index(n)] = true;
    std::vector<RankedItem> items;
    for (std::size_t v = 0; v < n; ++v) items.push_back({ids[v], s[v], pos[v]});
    ap_err = std::max(ap_err, std::abs(*average_precision(items) - oracle::average_precision(ids, s, pos)));
  }
  for (int i = 0; i < 200; ++i) {
    const std::size_t c = 2 + rng.index(9), n = 1 + rng.index(100);
    ScoreSet scores;
    LabelMap labels;
    for (std::size_t v = 0; v < n; ++v) {
      std::vector<double> x(c);
      for (double& e : x) e = std::round(rng.normal() * 2.0);
      scores["v" + std::to_string(v)] = x;
      labels["v" + std::to_string(v)] = rng.index(c);
    }
    for (std::size_t k = 1; k <= c; ++k)
      topk_err = std::max(topk_err, std::abs(topk_accuracy(scores, labels, k) - oracle::topk_accuracy(scores, labels, k)));
  }
  return {ap_err <= 1e-12 && topk_err == 0.0,
          fmt("AP vs pairwise oracle on 1000 instances: max diff %.2e (limit 1e-12); top-k vs sort oracle: %.2e",
              ap_err, topk_err)};
}

// ---- 6: aggregation direction --------------------------------------------

double visual_val_map(const SynthDataset& ds, const AggregationSpec& agg, std::size_t dim, std::size_t classes) {
  const auto train_data = load_modality(ds.train_manifest(), ds.train, Modality::rgb);
  const auto val_data = load_modality(ds.val_manifest(), ds.val, Modality::rgb);
  PredictorConfig p;
  p.input_dim = dim;
  p.num_classes = classes;
  p.seed = 1;
  TrainConfig t;
  t.aggregation = agg;
  t.segments = 5;
  t.epochs = 40;
  t.batch_size = 16;
  t.learning_rate = 0.05;
  t.seed = 2;
  const auto model = train(train_data, p, t).model;
  return mean_average_precision(score_sequences(model, val_data, ds.val, 1.0), label_map(ds.val)).map;
}

Outcome aggregation_direction(const fs::path& tmp) {
  SynthConfig c;
  c.num_train = 400;
  c.num_val = 200;
  c.num_classes = 5;
  c.snippets = 15;
  c.evidence_ratio = 0.2;
  c.feature_dim = 16;
  c.signal_strength = 2.5;
  c.with_flow = false;
  c.with_audio = false;
  c.seed = 7;
  const auto ds = synthesize(c, tmp / "c6");
  const double avg = visual_val_map(ds, AggregationSpec::average(), c.feature_dim, c.num_classes);
  const double top = visual_val_map(ds, AggregationSpec::topk(3), c.feature_dim, c.num_classes);
  return {top >= avg + 0.02 && avg > 0.5 && top > 0.5,
          fmt("val mAP average %.3f, topk(3) %.3f, gain %+.3f (need >= +0.02, both > 0.5)", avg, top, top - avg)};
}

// ---- 7: acoustic branch ---------------------------------------------------

SynthConfig audio_config() {
  SynthConfig c;
  c.num_train = 200;
  c.num_val = 100;
  c.num_classes = 5;
  c.snr_db = 10.0;
  c.snippets = 3;
  c.audio_seconds = 3.0;
  c.with_flow = false;
  c.seed = 11;
  return c;
}

FvOptions fv_options() {
  FvOptions o;
  o.gmm.components = 2;
  o.gmm.seed = 1;
  o.svm.lambda = 1e-3;
  o.svm.epochs = 30;
  o.svm.seed = 2;
  return o;
}

ScoreSet fv_val_scores(const SynthDataset& ds, std::size_t classes) {
  AudioFeatureSpec spec;
  const auto train_data = extract_audio_features(ds.train_manifest(), ds.train, spec);
  const auto val_data = extract_audio_features(ds.val_manifest(), ds.val, spec);
  return fv_scores(fv_train(train_data, classes, fv_options()).model, val_data);
}

Outcome acoustic(const fs::path& tmp) {
  const auto c = audio_config();
  const auto ds = synthesize(c, tmp / "c7");
  const auto labels = label_map(ds.val);
  const double fv_top1 = topk_accuracy(fv_val_scores(ds, c.num_classes), labels, 1);

  AudioFeatureSpec ms;
  ms.kind = AudioFeatureKind::multiscale;
  ms.height = 64;
  ms.width = 32;
  const auto train_data = extract_audio_features(ds.train_manifest(), ds.train, ms);
  const auto val_data = extract_audio_features(ds.val_manifest(), ds.val, ms);
  PredictorConfig p;
  p.kind = PredictorKind::conv2d;
  p.input_ch = ms.windows.size();
  p.input_h = ms.height;
  p.input_w = ms.width;
  p.conv_kernels = 4;
  p.kernel_h = 3;
  p.kernel_w = 3;
  p.pool_h = 4;
  p.num_classes = c.num_classes;
  p.seed = 1;
  TrainConfig t;
  t.segments = 2;
  t.epochs = 20;
  t.learning_rate = 0.05;
  t.seed = 2;
  const auto model = train(train_data, p, t).model;
  const double cnn_top1 = topk_accuracy(score_sequences(model, val_data, ds.val, 1.0), labels, 1);
  return {fv_top1 > 0.9 && cnn_top1 > 0.8,
          fmt("val top-1: MFCC+FV+SVM %.3f (need > 0.9), audio CNN %.3f (need > 0.8)", fv_top1, cnn_top1)};
}

// ---- 8: fusion direction ---------------------------------------------------

Outcome fusion_direction(const fs::path& tmp) {
  SynthConfig c = audio_config();
  c.snippets = 15;
  c.rgb_classes = {0, 1, 2};
  c.audio_classes = {3, 4};
  c.signal_strength = 2.5;
  c.seed = 13;
  const auto ds = synthesize(c, tmp / "c8");
  const auto labels = label_map(ds.val);

  const auto train_data = load_modality(ds.train_manifest(), ds.train, Modality::rgb);
  const auto val_data = load_modality(ds.val_manifest(), ds.val, Modality::rgb);
  PredictorConfig p;
  p.input_dim = c.feature_dim;
  p.num_classes = c.num_classes;
  p.seed = 1;
  TrainConfig t;
  t.aggregation = AggregationSpec::topk(3);
  t.segments = 5;
  t.epochs = 40;
  t.learning_rate = 0.05;
  t.seed = 2;
  const std::vector<ScoreSet> sets = {score_sequences(train(train_data, p, t).model, val_data, ds.val, 1.0),
                                      fv_val_scores(ds, c.num_classes)};
  const double visual = mean_average_precision(sets[0], labels).map;
  const double audio = mean_average_precision(sets[1], labels).map;
  const auto best = weight_search(sets, labels, 0.1);
  return {best.map > visual && best.map > audio,
          fmt("val mAP visual %.3f, audio %.3f, fused %.3f at weights (%.1f, %.1f)", visual, audio, best.map,
              best.weights[0], best.weights[1])};
}

// ---- 9: CLI determinism ---------------------------------------------------

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

std::map<std::string, std::uint64_t> hash_tree(const fs::path& dir) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), dir).string()] = fnv1a(ss.str());
  }
  return out;
}

Outcome cli_determinism(const fs::path& tmp) {
  const std::vector<std::pair<std::string, std::string>> steps = {
      {"synth", "--seed 3 synth --out D/data --num-train 20 --num-val 10 --num-classes 3 --snippets 4 --dim 6 "
                "--audio-seconds 1"},
      {"train-visual", "--seed 3 train-visual --manifest D/data/train.csv --score-manifest D/data/val.csv "
                       "--out-dir D/tv --epochs 3 --agg attn --predictor mlp --hidden 8 --dropout 0.2"},
      {"predict", "predict --checkpoint D/tv/checkpoint.json --manifest D/data/val.csv --modality rgb "
                  "--out D/pred.json"},
      {"audio-features", "audio-features --manifest D/data/train.csv --manifest D/data/val.csv --kind mfcc "
                         "--out-dir D/mfcc"},
      {"audio-features", "audio-features --manifest D/data/train.csv --manifest D/data/val.csv --kind multiscale "
                         "--height 16 --width 8 --out-dir D/ms"},
      {"train-audio-fv", "--seed 3 train-audio-fv --manifest D/data/train.csv --score-manifest D/data/val.csv "
                         "--features-dir D/mfcc --out-dir D/fv --svm-epochs 5"},
      {"train-audio-cnn", "--seed 3 train-audio-cnn --manifest D/data/train.csv --score-manifest D/data/val.csv "
                          "--features-dir D/ms --out-dir D/cnn --epochs 3 --kernels 2 --pool-h 2"},
      {"fuse", "fuse --spec D/fusion.json --out D/fused.json"},
      {"eval", "eval --scores D/fused.json --manifest D/data/val.csv --out D/report.json"},
      {"weight-search", "weight-search --components D/tv/scores.json,D/fv/scores.json,D/cnn/scores.json "
                        "--manifest D/data/val.csv --step 0.25 --out D/weights.json"},
  };
  std::map<std::string, std::uint64_t> hashes[2];
  for (int run = 0; run < 2; ++run) {
    const auto dir = tmp / "c9" / (run == 0 ? "a" : "b");
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "fusion.json")
        << R"({"normalization":"zscore","components":[{"name":"rgb","path":"tv/scores.json","weight":0.5},)"
        << R"({"name":"audio","path":"fv/scores.json","weight":0.5}]})";
    for (const auto& [name, args] : steps) {
      std::string cmd = args;
      // Relative paths inside each run dir, so both runs issue the same commands.
      for (std::size_t at; (at = cmd.find("D/")) != std::string::npos;) cmd.erase(at, 2);
      cmd = "cd " + dir.string() + " && " + TSN_CLI_PATH + " " + cmd + " >/dev/null 2>>stderr.txt";
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return {false, name + " failed on run " + std::to_string(run)};
    }
    hashes[run] = hash_tree(dir);
  }
  std::size_t differ = 0;
  std::string which;
  for (const auto& [path, h] : hashes[0])
    if (!hashes[1].contains(path) || hashes[1].at(path) != h) {
      ++differ;
      which += " " + path;
    }
  const bool ok = differ == 0 && hashes[0].size() == hashes[1].size();
  return {ok, fmt("%zu subcommands x 2 runs, %zu artifacts hashed, %zu differ%s", steps.size(), hashes[0].size(), differ,
                  which.c_str())};
}

}  // namespace

int main() {
  const fs::path tmp = fs::path(TSN_TEST_TMP) / "acceptance";
  fs::create_directories(tmp);
  struct Criterion {
    int id;
    const char* name;
    double limit_sec;  // 0: none
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient suite", 60, gradients},
      {2, "reduction identities", 0, reductions},
      {3, "DSP oracles", 30, dsp},
      {4, "FV zero-score property", 0, fisher},
      {5, "metric oracles", 0, metric_oracles},
      {6, "aggregation direction", 300, [&] { return aggregation_direction(tmp); }},
      {7, "acoustic branch", 600, [&] { return acoustic(tmp); }},
      {8, "fusion direction", 300, [&] { return fusion_direction(tmp); }},
      {9, "CLI determinism", 0, [&] { return cli_determinism(tmp); }},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_sec > 0 && secs >= c.limit_sec) {
      o.pass = false;
      o.detail += fmt("; over the %.0f s budget", c.limit_sec);
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << c.id << " " << c.name << ": " << o.detail
              << fmt(" [%.1f s]", secs) << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
