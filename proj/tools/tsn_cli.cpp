// tsn: command-line front end for the video classification pipeline.
//
// Every failure prints exactly one line "error: <kind>: <message>" on stderr.
// Exit codes: 0 ok, 2 usage/argument, 3 data (parse/validation/format/io),
// 4 numeric.

#include <cstdio>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsn/tsn.hpp"

namespace {

using namespace tsn;
using nlohmann::json;

struct Globals {
  std::uint64_t seed = 0;
};

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw IoError(std::string(what) + " not found: " + p.string());
}

void require_dir(const fs::path& p, const char* what) {
  if (!fs::is_directory(p)) throw IoError(std::string(what) + " not found: " + p.string());
}

void write_json(const fs::path& p, const json& j) { detail::write_file(p, j.dump(1) + "\n"); }

json read_json(const fs::path& p) {
  try {
    return json::parse(detail::read_file(p));
  } catch (const json::parse_error& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

std::vector<VideoRecord> manifest(const fs::path& path, const fs::path& classes) {
  require_file(path, "manifest");
  return load_manifest(path, load_label_space(path, classes));
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  SynthConfig cfg;
  std::string out;
  bool no_flow = false, no_audio = false;
};

void add_synth(CLI::App& app, SynthArgs& a) {
  auto* sub = app.add_subcommand("synth", "Generate a seeded synthetic dataset (features, WAVs, manifests)");
  auto& c = a.cfg;
  sub->add_option("--out", a.out, "Output dataset directory")->required();
  sub->add_option("--num-train", c.num_train, "Training videos")->capture_default_str();
  sub->add_option("--num-val", c.num_val, "Validation videos")->capture_default_str();
  sub->add_option("--num-classes", c.num_classes, "Number of classes")->capture_default_str();
  sub->add_option("--snippets", c.snippets, "Snippets per video (one per second)")->capture_default_str();
  sub->add_option("--dim", c.feature_dim, "Visual feature dimension")->capture_default_str();
  sub->add_option("--evidence-ratio", c.evidence_ratio, "Fraction of snippets carrying class evidence")
      ->capture_default_str();
  sub->add_option("--signal", c.signal_strength, "Evidence mean norm")->capture_default_str();
  sub->add_option("--noise", c.noise_sigma, "Feature noise sigma")->capture_default_str();
  sub->add_option("--flow-scale", c.flow_signal_scale, "Flow signal relative to rgb")->capture_default_str();
  sub->add_option("--rgb-classes", c.rgb_classes, "Classes visible in rgb (default all)")->delimiter(',');
  sub->add_option("--flow-classes", c.flow_classes, "Classes visible in flow (default all)")->delimiter(',');
  sub->add_option("--audio-classes", c.audio_classes, "Classes audible (default all)")->delimiter(',');
  sub->add_flag("--no-flow", a.no_flow, "Skip flow features");
  sub->add_flag("--no-audio", a.no_audio, "Skip audio");
  sub->add_option("--tone-base", c.tone_base_hz, "Tone of class 0 (Hz)")->capture_default_str();
  sub->add_option("--tone-step", c.tone_step_hz, "Tone spacing between classes (Hz)")->capture_default_str();
  sub->add_option("--snr-db", c.snr_db, "Tone-to-noise ratio (dB)")->capture_default_str();
  sub->add_option("--audio-seconds", c.audio_seconds, "Clip length; 0 = video length")->capture_default_str();
  sub->add_option("--sample-rate", c.sample_rate, "Audio sample rate (Hz)")->capture_default_str();
}

int run_synth(const SynthArgs& a, const Globals& g) {
  SynthConfig cfg = a.cfg;
  cfg.seed = g.seed;
  cfg.with_flow = !a.no_flow;
  cfg.with_audio = !a.no_audio;
  const auto ds = synthesize(cfg, a.out);
  std::cout << "wrote " << ds.train.size() << " train / " << ds.val.size() << " val videos to " << a.out << "\n";
  return 0;
}

// ---- shared training options ----------------------------------------------

struct TrainArgs {
  std::string manifest, classes, out_dir, score_manifest, agg = "avg";
  std::size_t segments = 3, epochs = 10, batch_size = 16;
  double lr = 0.01, momentum = 0.9, weight_decay = 0.0, dropout = 0.0, fps = 1.0;
};

void add_train_options(CLI::App* sub, TrainArgs& a) {
  sub->add_option("--manifest", a.manifest, "Training manifest CSV")->required();
  sub->add_option("--classes", a.classes, "Class-name file (default: classes.txt next to the manifest)");
  sub->add_option("--out-dir", a.out_dir, "Output directory")->required();
  sub->add_option("--score-manifest", a.score_manifest, "Also write scores.json for this manifest");
  sub->add_option("--agg", a.agg, "Consensus: avg | topk:K | attn")->capture_default_str();
  sub->add_option("--segments", a.segments, "Segments (snippets) per video per step")->capture_default_str();
  sub->add_option("--epochs", a.epochs, "Training epochs")->capture_default_str();
  sub->add_option("--batch-size", a.batch_size, "Videos per SGD step")->capture_default_str();
  sub->add_option("--lr", a.lr, "Learning rate")->capture_default_str();
  sub->add_option("--momentum", a.momentum, "SGD momentum")->capture_default_str();
  sub->add_option("--weight-decay", a.weight_decay, "L2 weight decay")->capture_default_str();
  sub->add_option("--dropout", a.dropout, "Dropout on the final layer input")->capture_default_str();
  sub->add_option("--fps", a.fps, "Test-time sampling rate for scores.json")->capture_default_str();
}

TrainConfig train_config(const TrainArgs& a, std::uint64_t seed) {
  TrainConfig t;
  t.segments = a.segments;
  t.aggregation = parse_aggregation(a.agg);
  t.learning_rate = a.lr;
  t.momentum = a.momentum;
  t.epochs = a.epochs;
  t.batch_size = a.batch_size;
  t.weight_decay = a.weight_decay;
  t.seed = derive_seed(seed, 2);
  return t;
}

using Loader = std::function<std::vector<LabeledSequence>(const fs::path&, const std::vector<VideoRecord>&)>;

int train_and_save(const TrainArgs& a, PredictorConfig pcfg, std::uint64_t seed, const Loader& load) {
  const auto records = manifest(a.manifest, a.classes);
  std::vector<VideoRecord> score_records;
  if (!a.score_manifest.empty()) score_records = manifest(a.score_manifest, a.classes);
  const auto data = load(a.manifest, records);
  if (pcfg.kind != PredictorKind::conv2d && !data.empty()) pcfg.input_dim = data[0].features.dim();
  pcfg.num_classes = load_label_space(a.manifest, a.classes).size();
  pcfg.dropout_rate = a.dropout;
  pcfg.seed = derive_seed(seed, 1);
  const TrainConfig tcfg = train_config(a, seed);
  const auto res = train(data, pcfg, tcfg);

  fs::create_directories(a.out_dir);
  const fs::path out(a.out_dir);
  save_checkpoint(out / "checkpoint.json", res.model, seed, tcfg.epochs);
  write_json(out / "loss_trace.json", {{"loss", res.loss_trace}});
  std::cout << "final training loss " << res.loss_trace.back() << "\n";
  if (!score_records.empty()) {
    const auto scores = score_sequences(res.model, load(a.score_manifest, score_records), score_records, a.fps);
    write_scores(out / "scores.json", scores);
  }
  return 0;
}

// ---- train-visual ---------------------------------------------------------

struct VisualArgs {
  TrainArgs train;
  std::string modality = "rgb", predictor = "linear";
  std::vector<std::size_t> hidden;
};

void add_train_visual(CLI::App& app, VisualArgs& a) {
  auto* sub = app.add_subcommand("train-visual", "Train a snippet predictor on rgb or flow features");
  add_train_options(sub, a.train);
  sub->add_option("--modality", a.modality, "rgb | flow")->capture_default_str();
  sub->add_option("--predictor", a.predictor, "linear | mlp")->capture_default_str();
  sub->add_option("--hidden", a.hidden, "MLP hidden widths, comma separated")->delimiter(',');
}

int run_train_visual(const VisualArgs& a, const Globals& g) {
  const Modality m = parse_modality(a.modality);
  if (m == Modality::audio) throw ArgumentError("train-visual: modality must be rgb or flow");
  PredictorConfig p;
  p.kind = parse_predictor_kind(a.predictor);
  if (p.kind == PredictorKind::conv2d) throw ArgumentError("train-visual: use train-audio-cnn for conv2d");
  p.hidden_dims = a.hidden;
  return train_and_save(a.train, p, g.seed, [m](const fs::path& mf, const std::vector<VideoRecord>& recs) {
    return load_modality(mf, recs, m);
  });
}

// ---- predict --------------------------------------------------------------

struct PredictArgs {
  std::string checkpoint, manifest, classes, modality, features_dir, out;
  double fps = 1.0;
};

void add_predict(CLI::App& app, PredictArgs& a) {
  auto* sub = app.add_subcommand("predict", "Score every video of a manifest at a fixed sampling rate");
  sub->add_option("--checkpoint", a.checkpoint, "Checkpoint JSON")->required();
  sub->add_option("--manifest", a.manifest, "Manifest CSV")->required();
  sub->add_option("--classes", a.classes, "Class-name file (default: classes.txt next to the manifest)");
  auto* mod = sub->add_option("--modality", a.modality, "rgb | flow (features named in the manifest)");
  auto* dir = sub->add_option("--features-dir", a.features_dir, "Directory of <video_id>.tsnf files");
  mod->excludes(dir);
  sub->add_option("--fps", a.fps, "Snippets per second")->capture_default_str();
  sub->add_option("--out", a.out, "Output score JSON")->required();
}

int run_predict(const PredictArgs& a, const Globals&) {
  if (a.modality.empty() == a.features_dir.empty())
    throw ArgumentError("predict: give exactly one of --modality or --features-dir");
  require_file(a.checkpoint, "checkpoint");
  const auto model = load_checkpoint(a.checkpoint);
  const auto records = manifest(a.manifest, a.classes);
  std::vector<LabeledSequence> data;
  if (!a.modality.empty()) {
    data = load_modality(a.manifest, records, parse_modality(a.modality));
  } else {
    require_dir(a.features_dir, "features dir");
    data = load_feature_dir(a.features_dir, records);
  }
  write_scores(a.out, score_sequences(model, data, records, a.fps));
  return 0;
}

// ---- audio-features -------------------------------------------------------

struct AudioArgs {
  std::vector<std::string> manifests;
  std::string classes, kind = "mfcc", out_dir;
  AudioFeatureSpec spec;
};

void add_audio_features(CLI::App& app, AudioArgs& a) {
  auto* sub = app.add_subcommand("audio-features", "Extract MFCC or multi-scale spectrogram features from WAVs");
  auto& s = a.spec;
  sub->add_option("--manifest", a.manifests, "Manifest CSV (repeatable)")->required();
  sub->add_option("--classes", a.classes, "Class-name file (default: classes.txt next to the manifest)");
  sub->add_option("--kind", a.kind, "mfcc | multiscale")->capture_default_str();
  sub->add_option("--out-dir", a.out_dir, "Output directory for <video_id>.tsnf")->required();
  sub->add_option("--windows", s.windows, "Multiscale STFT windows, comma separated")->delimiter(',')->capture_default_str();
  sub->add_option("--height", s.height, "Multiscale frequency rows")->capture_default_str();
  sub->add_option("--width", s.width, "Multiscale time columns")->capture_default_str();
  sub->add_option("--fps", s.fps, "Multiscale snippets per second")->capture_default_str();
  sub->add_option("--mfcc-window", s.mfcc.window, "MFCC STFT window")->capture_default_str();
  sub->add_option("--mfcc-hop", s.mfcc.hop, "MFCC STFT hop")->capture_default_str();
  sub->add_option("--n-mels", s.mfcc.n_mels, "Mel bands")->capture_default_str();
  sub->add_option("--n-coeffs", s.mfcc.n_coeffs, "MFCC coefficients kept")->capture_default_str();
  sub->add_option("--fmin", s.mfcc.fmin, "Lowest mel frequency (Hz)")->capture_default_str();
  sub->add_option("--fmax", s.mfcc.fmax, "Highest mel frequency (Hz); 0 = Nyquist")->capture_default_str();
  sub->add_option("--sample-rate", s.sample_rate, "Required WAV sample rate")->capture_default_str();
}

int run_audio_features(const AudioArgs& a, const Globals&) {
  AudioFeatureSpec spec = a.spec;
  spec.kind = parse_audio_feature_kind(a.kind);
  std::size_t n = 0;
  for (const auto& mf : a.manifests) {
    const auto records = manifest(mf, a.classes);
    const auto data = extract_audio_features(mf, records, spec);
    write_feature_dir(a.out_dir, data, spec);
    n += data.size();
  }
  std::cout << "wrote " << n << " " << to_string(spec.kind) << " feature files to " << a.out_dir << "\n";
  return 0;
}

// ---- train-audio-fv -------------------------------------------------------

struct FvArgs {
  std::string manifest, classes, features_dir, out_dir, score_manifest;
  FvOptions opt;
};

void add_train_audio_fv(CLI::App& app, FvArgs& a) {
  auto* sub = app.add_subcommand("train-audio-fv", "Fit GMM, encode Fisher vectors and train a linear SVM on MFCCs");
  sub->add_option("--manifest", a.manifest, "Training manifest CSV")->required();
  sub->add_option("--classes", a.classes, "Class-name file (default: classes.txt next to the manifest)");
  sub->add_option("--features-dir", a.features_dir, "MFCC feature directory from audio-features")->required();
  sub->add_option("--out-dir", a.out_dir, "Output directory")->required();
  sub->add_option("--score-manifest", a.score_manifest, "Also write scores.json for this manifest");
  sub->add_option("--components", a.opt.gmm.components, "GMM components")->capture_default_str();
  sub->add_option("--gmm-iter", a.opt.gmm.max_iter, "EM iteration cap")->capture_default_str();
  sub->add_option("--gmm-tol", a.opt.gmm.tol, "EM log-likelihood tolerance")->capture_default_str();
  sub->add_option("--lambda", a.opt.svm.lambda, "SVM regularization")->capture_default_str();
  sub->add_option("--svm-epochs", a.opt.svm.epochs, "SVM epochs")->capture_default_str();
}

int run_train_audio_fv(const FvArgs& a, const Globals& g) {
  const auto records = manifest(a.manifest, a.classes);
  std::vector<VideoRecord> score_records;
  if (!a.score_manifest.empty()) score_records = manifest(a.score_manifest, a.classes);
  require_dir(a.features_dir, "features dir");
  if (read_feature_dir_spec(a.features_dir).kind != AudioFeatureKind::mfcc)
    throw ValidationError("train-audio-fv: " + a.features_dir + " does not hold mfcc features");
  FvOptions opt = a.opt;
  opt.gmm.seed = derive_seed(g.seed, 1);
  opt.svm.seed = derive_seed(g.seed, 2);
  const auto num_classes = load_label_space(a.manifest, a.classes).size();
  const auto res = fv_train(load_feature_dir(a.features_dir, records), num_classes, opt);

  fs::create_directories(a.out_dir);
  const fs::path out(a.out_dir);
  auto model_json = to_json(res.model);
  model_json["seed"] = g.seed;
  write_json(out / "fv_model.json", model_json);
  write_json(out / "trace.json", {{"gmm_log_likelihood", res.gmm_log_likelihood}, {"svm_objective", res.svm_objective}});
  std::cout << "final svm objective " << res.svm_objective.back() << "\n";
  if (!score_records.empty())
    write_scores(out / "scores.json", fv_scores(res.model, load_feature_dir(a.features_dir, score_records)));
  return 0;
}

// ---- train-audio-cnn ------------------------------------------------------

struct CnnArgs {
  TrainArgs train;
  std::string features_dir;
  std::size_t kernels = 4, kernel_h = 3, kernel_w = 3, pool_h = 4;
};

void add_train_audio_cnn(CLI::App& app, CnnArgs& a) {
  auto* sub = app.add_subcommand("train-audio-cnn", "Train the conv predictor on multi-scale spectrogram stacks");
  a.train.segments = 2;
  a.train.lr = 0.05;
  a.train.epochs = 20;
  add_train_options(sub, a.train);
  sub->add_option("--features-dir", a.features_dir, "Multiscale feature directory from audio-features")->required();
  sub->add_option("--kernels", a.kernels, "Conv kernels")->capture_default_str();
  sub->add_option("--kernel-h", a.kernel_h, "Kernel height (frequency)")->capture_default_str();
  sub->add_option("--kernel-w", a.kernel_w, "Kernel width (time)")->capture_default_str();
  sub->add_option("--pool-h", a.pool_h, "Frequency pooling block")->capture_default_str();
}

int run_train_audio_cnn(const CnnArgs& a, const Globals& g) {
  require_dir(a.features_dir, "features dir");
  const auto spec = read_feature_dir_spec(a.features_dir);
  if (spec.kind != AudioFeatureKind::multiscale)
    throw ValidationError("train-audio-cnn: " + a.features_dir + " does not hold multiscale features");
  PredictorConfig p;
  p.kind = PredictorKind::conv2d;
  p.input_ch = spec.windows.size();
  p.input_h = spec.height;
  p.input_w = spec.width;
  p.conv_kernels = a.kernels;
  p.kernel_h = a.kernel_h;
  p.kernel_w = a.kernel_w;
  p.pool_h = a.pool_h;
  const fs::path dir(a.features_dir);
  return train_and_save(a.train, p, g.seed,
                        [&](const fs::path&, const std::vector<VideoRecord>& recs) { return load_feature_dir(dir, recs); });
}

// ---- fuse -----------------------------------------------------------------

struct FuseArgs {
  std::string spec, out;
};

void add_fuse(CLI::App& app, FuseArgs& a) {
  auto* sub = app.add_subcommand("fuse", "Late-fuse score files as described by a fusion spec JSON");
  sub->add_option("--spec", a.spec, "Fusion spec JSON (component paths relative to it)")->required();
  sub->add_option("--out", a.out, "Output score JSON")->required();
}

int run_fuse(const FuseArgs& a, const Globals&) {
  require_file(a.spec, "fusion spec");
  const auto spec = fusion_spec_from_json(read_json(a.spec));
  std::vector<ScoreSet> sets;
  std::vector<double> weights;
  for (const auto& c : spec.components) {
    sets.push_back(read_scores(resolve_path(a.spec, c.path)));
    weights.push_back(c.weight);
  }
  write_scores(a.out, fuse(sets, weights, spec.normalization));
  return 0;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string scores, manifest, classes, out;
  std::size_t k = 3;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  auto* sub = app.add_subcommand("eval", "Per-class AP, mAP and top-k accuracy of a score file");
  sub->add_option("--scores", a.scores, "Score JSON")->required();
  sub->add_option("--manifest", a.manifest, "Manifest with ground-truth labels")->required();
  sub->add_option("--classes", a.classes, "Class-name file (default: classes.txt next to the manifest)");
  sub->add_option("-k", a.k, "Top-k accuracy cutoff")->capture_default_str();
  sub->add_option("--out", a.out, "Write the report JSON here as well");
}

int run_eval(const EvalArgs& a, const Globals&) {
  require_file(a.scores, "scores");
  const auto labels = label_map(manifest(a.manifest, a.classes));
  const auto scores = read_scores(a.scores);
  const std::size_t c = validate_scores(scores);
  if (a.k < 1 || a.k > c) throw ArgumentError("eval: -k must be in [1," + std::to_string(c) + "]");
  const std::size_t ks[] = {a.k};
  const auto rep = evaluate(scores, labels, ks);

  const std::string name = fs::path(a.scores).filename().string();
  const std::string topk = "Top-" + std::to_string(a.k) + " (%)";
  std::printf("%-24s %9s %11s\n", "scores", "mAP (%)", topk.c_str());
  std::printf("%-24s %9.1f %11.1f\n", name.c_str(), 100.0 * rep.map, 100.0 * rep.topk_accuracy.at(a.k));
  if (!rep.skipped_classes.empty()) std::printf("classes without positives: %zu\n", rep.skipped_classes.size());
  const json j = to_json(rep);
  if (!a.out.empty()) write_json(a.out, j);
  std::cout << j.dump() << "\n";
  return 0;
}

// ---- weight-search --------------------------------------------------------

struct SearchArgs {
  std::vector<std::string> components;
  std::string manifest, classes, normalization = "zscore", out;
  double step = 0.1;
};

void add_weight_search(CLI::App& app, SearchArgs& a) {
  auto* sub = app.add_subcommand("weight-search", "Grid-search fusion weights on the simplex by validation mAP");
  sub->add_option("--components", a.components, "Score files, comma separated")->delimiter(',')->required();
  sub->add_option("--manifest", a.manifest, "Validation manifest with labels")->required();
  sub->add_option("--classes", a.classes, "Class-name file (default: classes.txt next to the manifest)");
  sub->add_option("--step", a.step, "Grid spacing")->capture_default_str();
  sub->add_option("--normalization", a.normalization, "none | zscore | softmax")->capture_default_str();
  sub->add_option("--out", a.out, "Write weights and trace JSON here");
}

int run_weight_search(const SearchArgs& a, const Globals&) {
  const auto mode = parse_normalization(a.normalization);
  const auto labels = label_map(manifest(a.manifest, a.classes));
  std::vector<ScoreSet> sets;
  for (const auto& p : a.components) {
    require_file(p, "scores");
    sets.push_back(read_scores(p));
  }
  const auto res = weight_search(sets, labels, a.step, mode);
  json j = to_json(res);
  j["components"] = a.components;
  j["normalization"] = to_string(mode);
  j["step"] = a.step;
  if (!a.out.empty()) write_json(a.out, j);
  std::printf("best mAP %.4f with weights", res.map);
  for (std::size_t i = 0; i < res.weights.size(); ++i) std::printf(" %s=%.4g", a.components[i].c_str(), res.weights[i]);
  std::printf("\n");
  return 0;
}

std::string one_line(std::string s) {
  for (char& ch : s)
    if (ch == '\n' || ch == '\r') ch = ' ';
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::argument: return 2;
    case ErrorKind::numeric: return 4;
    default: return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Untrimmed video classification: synthetic data, training, audio features, fusion, evaluation"};
  app.name("tsn");
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML config; [subcommand] tables hold its flags; flags given here win");
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random choice of this run")->capture_default_str();

  SynthArgs synth;
  VisualArgs visual;
  PredictArgs predict;
  AudioArgs audio;
  FvArgs fv;
  CnnArgs cnn;
  FuseArgs fuse_args;
  EvalArgs eval_args;
  SearchArgs search;
  add_synth(app, synth);
  add_train_visual(app, visual);
  add_predict(app, predict);
  add_audio_features(app, audio);
  add_train_audio_fv(app, fv);
  add_train_audio_cnn(app, cnn);
  add_fuse(app, fuse_args);
  add_eval(app, eval_args);
  add_weight_search(app, search);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "synth") return run_synth(synth, g);
    if (cmd == "train-visual") return run_train_visual(visual, g);
    if (cmd == "predict") return run_predict(predict, g);
    if (cmd == "audio-features") return run_audio_features(audio, g);
    if (cmd == "train-audio-fv") return run_train_audio_fv(fv, g);
    if (cmd == "train-audio-cnn") return run_train_audio_cnn(cnn, g);
    if (cmd == "fuse") return run_fuse(fuse_args, g);
    if (cmd == "eval") return run_eval(eval_args, g);
    if (cmd == "weight-search") return run_weight_search(search, g);
    throw ArgumentError("unknown subcommand " + cmd);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << one_line(e.what()) << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: io: " << one_line(e.what()) << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << one_line(e.what()) << "\n";
    return 3;
  }
}
