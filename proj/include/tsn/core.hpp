#pragma once

// Dataset manifest, label space, and the feature/score file formats every
// other stage reads and writes.

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tsn/error.hpp"
#include "tsn/matrix.hpp"

namespace tsn {

namespace fs = std::filesystem;

class LabelSpace {
 public:
  explicit LabelSpace(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.size() < 2) throw ValidationError("label space needs at least 2 classes");
    std::set<std::string> seen;
    for (const auto& n : names_) {
      if (n.empty()) throw ValidationError("empty class name");
      if (!seen.insert(n).second) throw ValidationError("duplicate class name '" + n + "'");
    }
  }

  /// Classes named class_0 .. class_{n-1}.
  static LabelSpace anonymous(std::size_t n) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back("class_" + std::to_string(i));
    return LabelSpace(std::move(names));
  }

  /// One class name per line.
  static LabelSpace load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open label file " + path.string());
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) names.push_back(line);
    }
    return LabelSpace(std::move(names));
  }

  void save(const fs::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write label file " + path.string());
    for (const auto& n : names_) out << n << '\n';
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
};

enum class Modality { rgb, flow, audio };

inline const char* to_string(Modality m) {
  switch (m) {
    case Modality::rgb: return "rgb";
    case Modality::flow: return "flow";
    case Modality::audio: return "audio";
  }
  return "?";
}

inline Modality parse_modality(std::string_view s) {
  if (s == "rgb") return Modality::rgb;
  if (s == "flow") return Modality::flow;
  if (s == "audio") return Modality::audio;
  throw ArgumentError("unknown modality '" + std::string(s) + "'");
}

struct VideoRecord {
  std::string video_id;
  std::uint64_t num_frames = 1;
  double duration_sec = 1.0;
  std::size_t label = 0;
  std::optional<std::string> rgb_feature_path;
  std::optional<std::string> flow_feature_path;
  std::optional<std::string> audio_path;

  const std::optional<std::string>& path(Modality m) const {
    switch (m) {
      case Modality::rgb: return rgb_feature_path;
      case Modality::flow: return flow_feature_path;
      case Modality::audio: break;
    }
    return audio_path;
  }

  friend bool operator==(const VideoRecord&, const VideoRecord&) = default;
};

inline void validate_record(const VideoRecord& r, const LabelSpace& labels) {
  if (r.video_id.empty()) throw ValidationError("empty video_id");
  if (r.num_frames < 1) throw ValidationError(r.video_id + ": num_frames must be >= 1");
  if (!(r.duration_sec > 0.0) || !std::isfinite(r.duration_sec))
    throw ValidationError(r.video_id + ": duration_sec must be positive");
  if (r.label >= labels.size())
    throw ValidationError(r.video_id + ": label " + std::to_string(r.label) + " out of range [0," +
                          std::to_string(labels.size()) + ")");
  if (!r.rgb_feature_path && !r.flow_feature_path && !r.audio_path)
    throw ValidationError(r.video_id + ": no modality");
}

inline constexpr std::string_view kManifestHeader =
    "video_id,num_frames,duration_sec,label,rgb_feature_path,flow_feature_path,audio_path";

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
  return value;
}

inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

inline std::optional<std::string> optional_cell(std::string_view s) {
  if (s.empty()) return std::nullopt;
  return std::string(s);
}

}  // namespace detail

/// Reads the CSV manifest. Rows keep file order; every record is validated
/// against `labels`. Duplicate video ids are rejected.
inline std::vector<VideoRecord> load_manifest(const fs::path& path, const LabelSpace& labels) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader) throw ParseError(1, "unexpected header '" + line + "'");

  std::vector<VideoRecord> records;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != 7)
      throw ParseError(line_no, "expected 7 cells, got " + std::to_string(cells.size()));
    VideoRecord r;
    r.video_id = std::string(cells[0]);
    const auto frames = detail::parse_number<std::uint64_t>(cells[1]);
    const auto duration = detail::parse_number<double>(cells[2]);
    const auto label = detail::parse_number<std::size_t>(cells[3]);
    if (!frames) throw ParseError(line_no, "bad num_frames '" + std::string(cells[1]) + "'");
    if (!duration) throw ParseError(line_no, "bad duration_sec '" + std::string(cells[2]) + "'");
    if (!label) throw ParseError(line_no, "bad label '" + std::string(cells[3]) + "'");
    r.num_frames = *frames;
    r.duration_sec = *duration;
    r.label = *label;
    r.rgb_feature_path = detail::optional_cell(cells[4]);
    r.flow_feature_path = detail::optional_cell(cells[5]);
    r.audio_path = detail::optional_cell(cells[6]);
    try {
      validate_record(r, labels);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(r.video_id).second)
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate video_id " + r.video_id);
    records.push_back(std::move(r));
  }
  return records;
}

inline void write_manifest(const fs::path& path, const std::vector<VideoRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << kManifestHeader << '\n';
  for (const auto& r : records) {
    out << r.video_id << ',' << r.num_frames << ',' << detail::format_double(r.duration_sec) << ','
        << r.label << ',' << r.rgb_feature_path.value_or("") << ','
        << r.flow_feature_path.value_or("") << ',' << r.audio_path.value_or("") << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

/// Resolves a manifest cell relative to the manifest's directory.
inline fs::path resolve_path(const fs::path& manifest_path, const std::string& cell) {
  fs::path p(cell);
  if (p.is_absolute()) return p;
  return manifest_path.parent_path() / p;
}

/// T×D snippet features. All values finite, T ≥ 1, D ≥ 1.
struct FeatureSequence {
  Matrix values;

  FeatureSequence() = default;
  explicit FeatureSequence(Matrix m) : values(std::move(m)) { validate(); }

  std::size_t snippets() const { return values.rows; }
  std::size_t dim() const { return values.cols; }

  void validate() const {
    if (values.rows < 1 || values.cols < 1) throw ValidationError("feature sequence must be at least 1x1");
    if (values.data.size() != values.rows * values.cols) throw ValidationError("feature storage size mismatch");
    if (!values.all_finite()) throw ValidationError("feature sequence has non-finite values");
  }
};

/// Failure modes of the binary feature container.
class FeatureFileError : public FormatError {
 public:
  enum class Reason { bad_magic, bad_version, truncated, trailing_data, non_finite };

  FeatureFileError(Reason reason, const std::string& what) : FormatError(what), reason_(reason) {}
  Reason reason() const noexcept { return reason_; }

 private:
  Reason reason_;
};

inline constexpr std::array<char, 4> kFeatureMagic = {'T', 'S', 'N', 'F'};
inline constexpr std::uint32_t kFeatureVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

inline void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace detail

/// Layout: "TSNF", u32 version, u32 T, u32 D, T*D f32, all little-endian.
inline std::string encode_features(const FeatureSequence& seq) {
  seq.validate();
  std::string out;
  out.reserve(16 + 4 * seq.values.data.size());
  out.append(kFeatureMagic.data(), kFeatureMagic.size());
  detail::put_u32(out, kFeatureVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(seq.snippets()));
  detail::put_u32(out, static_cast<std::uint32_t>(seq.dim()));
  for (double v : seq.values.data) {
    const float f = static_cast<float>(v);
    if (!std::isfinite(f)) throw ValidationError("feature value overflows f32");
    detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

inline FeatureSequence decode_features(std::string_view bytes) {
  using Reason = FeatureFileError::Reason;
  if (bytes.size() < 4 || !std::equal(kFeatureMagic.begin(), kFeatureMagic.end(), bytes.begin()))
    throw FeatureFileError(Reason::bad_magic, "bad magic (expected TSNF)");
  if (bytes.size() < 16) throw FeatureFileError(Reason::truncated, "truncated header");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t version = detail::get_u32(p + 4);
  if (version != kFeatureVersion)
    throw FeatureFileError(Reason::bad_version, "unsupported version " + std::to_string(version));
  const std::uint64_t t = detail::get_u32(p + 8);
  const std::uint64_t d = detail::get_u32(p + 12);
  const std::uint64_t payload = t * d * 4;
  if (bytes.size() - 16 < payload)
    throw FeatureFileError(Reason::truncated, "truncated payload: need " + std::to_string(payload) +
                                                  " bytes, have " + std::to_string(bytes.size() - 16));
  if (bytes.size() - 16 > payload) throw FeatureFileError(Reason::trailing_data, "trailing bytes after payload");
  if (t == 0 || d == 0) throw FeatureFileError(Reason::truncated, "empty feature matrix");
  Matrix m(t, d);
  for (std::size_t i = 0; i < t * d; ++i) {
    const float f = std::bit_cast<float>(detail::get_u32(p + 16 + 4 * i));
    if (!std::isfinite(f)) throw FeatureFileError(Reason::non_finite, "non-finite value at index " + std::to_string(i));
    m.data[i] = f;
  }
  return FeatureSequence(std::move(m));
}

inline void write_features(const fs::path& path, const FeatureSequence& seq) {
  detail::write_file(path, encode_features(seq));
}

inline FeatureSequence read_features(const fs::path& path) {
  return decode_features(detail::read_file(path));
}

/// video_id -> length-C class scores. Ordered map keeps serialization stable.
using ScoreSet = std::map<std::string, std::vector<double>>;

/// Returns C. Rejects empty sets, ragged lengths and non-finite values.
inline std::size_t validate_scores(const ScoreSet& scores, std::optional<std::size_t> num_classes = std::nullopt) {
  if (scores.empty()) throw ValidationError("empty score set");
  const std::size_t c = num_classes.value_or(scores.begin()->second.size());
  if (c == 0) throw ValidationError("score vectors are empty");
  for (const auto& [id, v] : scores) {
    if (v.size() != c)
      throw ValidationError("video " + id + ": score length " + std::to_string(v.size()) + " != " + std::to_string(c));
    for (double x : v)
      if (!std::isfinite(x)) throw ValidationError("video " + id + ": non-finite score");
  }
  return c;
}

inline nlohmann::json scores_to_json(const ScoreSet& scores) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, v] : scores) j[id] = v;
  return j;
}

inline ScoreSet scores_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("score file must be a JSON object");
  ScoreSet scores;
  for (const auto& [id, v] : j.items()) {
    if (!v.is_array()) throw FormatError("video " + id + ": scores must be an array");
    std::vector<double> row;
    for (const auto& x : v) {
      if (!x.is_number()) throw FormatError("video " + id + ": non-numeric score");
      row.push_back(x.get<double>());
    }
    scores.emplace(id, std::move(row));
  }
  return scores;
}

inline void write_scores(const fs::path& path, const ScoreSet& scores) {
  validate_scores(scores);
  detail::write_file(path, scores_to_json(scores).dump(1) + "\n");
}

inline ScoreSet read_scores(const fs::path& path, std::optional<std::size_t> num_classes = std::nullopt) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  ScoreSet scores = scores_from_json(j);
  validate_scores(scores, num_classes);
  return scores;
}

/// video_id -> label, taken from a manifest.
using LabelMap = std::map<std::string, std::size_t>;

inline LabelMap label_map(const std::vector<VideoRecord>& records) {
  LabelMap m;
  for (const auto& r : records) m.emplace(r.video_id, r.label);
  return m;
}

}  // namespace tsn
