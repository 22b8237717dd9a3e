#pragma once

// Acoustic front-end: PCM16 WAV I/O, STFT magnitudes, grayscale
// spectrogram images, multi-scale channel stacks, mel filterbank and MFCC.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "tsn/core.hpp"
#include "tsn/error.hpp"
#include "tsn/matrix.hpp"
#include "tsn/sampling.hpp"

namespace tsn {

inline constexpr std::uint32_t kDefaultSampleRate = 16000;

struct Waveform {
  std::uint32_t sample_rate = kDefaultSampleRate;
  std::vector<double> samples;

  double duration_sec() const { return static_cast<double>(samples.size()) / sample_rate; }
};

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

inline std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

/// Mono PCM16. Samples are clamped to [-1, 1] and quantized as round(x * 32768),
/// saturating at 32767.
inline std::string encode_wav(const Waveform& w) {
  if (w.sample_rate == 0) throw ArgumentError("wav: sample rate must be positive");
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  detail::put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);  // PCM
  detail::put_u16(out, 1);  // mono
  detail::put_u32(out, w.sample_rate);
  detail::put_u32(out, w.sample_rate * 2);
  detail::put_u16(out, 2);
  detail::put_u16(out, 16);
  out += "data";
  detail::put_u32(out, data_bytes);
  for (double x : w.samples) {
    const double q = std::round(std::clamp(x, -1.0, 1.0) * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0));
    detail::put_u16(out, std::bit_cast<std::uint16_t>(v));
  }
  return out;
}

inline Waveform decode_wav(std::string_view bytes, std::uint32_t expected_rate = kDefaultSampleRate) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE")
    throw FormatError("wav: not a RIFF/WAVE file");
  std::size_t pos = 12;
  bool have_fmt = false;
  Waveform w;
  while (pos + 8 <= bytes.size()) {
    const auto id = bytes.substr(pos, 4);
    const std::size_t size = detail::get_u32(p + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw FormatError("wav: truncated chunk '" + std::string(id) + "'");
    if (id == "fmt ") {
      if (size < 16) throw FormatError("wav: short fmt chunk");
      const auto format = detail::get_u16(p + body);
      const auto channels = detail::get_u16(p + body + 2);
      const auto rate = detail::get_u32(p + body + 4);
      const auto bits = detail::get_u16(p + body + 14);
      if (format != 1) throw FormatError("wav: not PCM (format " + std::to_string(format) + ")");
      if (channels != 1) throw FormatError("wav: expected mono, got " + std::to_string(channels) + " channels");
      if (bits != 16) throw FormatError("wav: expected 16-bit samples, got " + std::to_string(bits));
      if (rate != expected_rate)
        throw FormatError("wav: sample rate " + std::to_string(rate) + " != expected " + std::to_string(expected_rate));
      w.sample_rate = rate;
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError("wav: data chunk before fmt chunk");
      if (size % 2 != 0) throw FormatError("wav: odd data size");
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i)
        w.samples[i] = std::bit_cast<std::int16_t>(detail::get_u16(p + body + 2 * i)) / 32768.0;
      if (w.samples.empty()) throw FormatError("wav: no samples");
      return w;
    }
    pos = body + size + (size & 1);
  }
  throw FormatError("wav: missing data chunk");
}

inline void write_wav(const fs::path& path, const Waveform& w) { detail::write_file(path, encode_wav(w)); }

inline Waveform read_wav(const fs::path& path, std::uint32_t expected_rate = kDefaultSampleRate) {
  try {
    return decode_wav(detail::read_file(path), expected_rate);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// In-place iterative radix-2 FFT; size must be a power of two.
inline void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n)) throw ArgumentError("fft: size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> w = std::polar(1.0, ang * static_cast<double>(k));
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

/// Periodic Hann window of length n.
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

/// |DFT| of Hann-windowed frames; F = window/2 + 1 rows, one column per full
/// frame (partial trailing frames are dropped).
inline Matrix stft_magnitude(const Waveform& w, std::size_t window, std::size_t hop) {
  if (!is_power_of_two(window)) throw ArgumentError("stft: window size must be a power of two");
  if (hop < 1) throw ArgumentError("stft: hop must be >= 1");
  if (w.samples.size() < window)
    throw ArgumentError("stft: waveform shorter (" + std::to_string(w.samples.size()) + ") than window " +
                        std::to_string(window));
  const std::size_t frames = 1 + (w.samples.size() - window) / hop;
  const std::size_t bins = window / 2 + 1;
  const auto hann = hann_window(window);
  Matrix mag(bins, frames);
  std::vector<std::complex<double>> buf(window);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t i = 0; i < window; ++i) buf[i] = w.samples[f * hop + i] * hann[i];
    fft(buf);
    for (std::size_t k = 0; k < bins; ++k) mag(k, f) = std::abs(buf[k]);
  }
  return mag;
}

/// Min-max normalized log(1 + m) over the whole map; constant maps give zeros.
inline Matrix to_grayscale(const Matrix& mag) {
  Matrix out(mag.rows, mag.cols);
  if (mag.data.empty()) return out;
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t i = 0; i < mag.data.size(); ++i) {
    const double m = mag.data[i];
    if (!(m >= 0.0) || !std::isfinite(m)) throw ArgumentError("to_grayscale: magnitudes must be finite and >= 0");
    out.data[i] = std::log1p(m);
    lo = std::min(lo, out.data[i]);
    hi = std::max(hi, out.data[i]);
  }
  if (hi == lo) {
    std::fill(out.data.begin(), out.data.end(), 0.0);
    return out;
  }
  for (double& v : out.data) v = (v - lo) / (hi - lo);
  return out;
}

struct Spectrogram {
  std::size_t window_size = 0;
  std::size_t hop = 0;
  Matrix frames;  // F × N, values in [0, 1]
};

inline Spectrogram grayscale_spectrogram(const Waveform& w, std::size_t window, std::size_t hop) {
  return {window, hop, to_grayscale(stft_magnitude(w, window, hop))};
}

/// Separable linear interpolation with aligned corners.
inline Matrix resample_bilinear(const Matrix& src, std::size_t rows, std::size_t cols) {
  if (src.rows == 0 || src.cols == 0 || rows == 0 || cols == 0) throw ArgumentError("resample: empty shape");
  auto coords = [](std::size_t n_src, std::size_t n_dst) {
    std::vector<std::pair<std::size_t, double>> out(n_dst);
    for (std::size_t i = 0; i < n_dst; ++i) {
      const double pos = n_dst == 1 ? 0.5 * static_cast<double>(n_src - 1)
                                    : static_cast<double>(i) * static_cast<double>(n_src - 1) /
                                          static_cast<double>(n_dst - 1);
      auto i0 = static_cast<std::size_t>(std::floor(pos));
      if (i0 + 1 >= n_src) i0 = n_src >= 2 ? n_src - 2 : 0;
      out[i] = {i0, n_src >= 2 ? pos - static_cast<double>(i0) : 0.0};
    }
    return out;
  };
  const auto rc = coords(src.rows, rows);
  const auto cc = coords(src.cols, cols);
  // Rows first, then columns.
  Matrix tmp(rows, src.cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto [r0, fr] = rc[r];
    const std::size_t r1 = std::min(r0 + 1, src.rows - 1);
    for (std::size_t c = 0; c < src.cols; ++c) tmp(r, c) = (1.0 - fr) * src(r0, c) + fr * src(r1, c);
  }
  Matrix out(rows, cols);
  for (std::size_t c = 0; c < cols; ++c) {
    const auto [c0, fc] = cc[c];
    const std::size_t c1 = std::min(c0 + 1, src.cols - 1);
    for (std::size_t r = 0; r < rows; ++r) out(r, c) = (1.0 - fc) * tmp(r, c0) + fc * tmp(r, c1);
  }
  return out;
}

struct MultiScaleSpectrogram {
  std::vector<Matrix> channels;
  std::vector<std::size_t> window_sizes;
  std::size_t height = 0;  // frequency
  std::size_t width = 0;   // time

  /// Channel-major, then frequency, then time.
  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(channels.size() * height * width);
    for (const auto& ch : channels) out.insert(out.end(), ch.data.begin(), ch.data.end());
    return out;
  }
};

/// Grayscale spectrograms at several window sizes (hop = window/2), each
/// resampled to height × width and stacked as channels. Repeated window sizes
/// are allowed and yield identical channels.
inline MultiScaleSpectrogram multiscale(const Waveform& w, std::span<const std::size_t> windows, std::size_t height,
                                        std::size_t width) {
  if (windows.size() < 2) throw ArgumentError("multiscale: need at least 2 window sizes");
  const auto largest = *std::max_element(windows.begin(), windows.end());
  if (w.samples.size() < largest)
    throw ArgumentError("multiscale: waveform too short for window " + std::to_string(largest));
  MultiScaleSpectrogram ms;
  ms.window_sizes.assign(windows.begin(), windows.end());
  ms.height = height;
  ms.width = width;
  for (std::size_t win : windows) {
    if (win < 2) throw ArgumentError("multiscale: window must be >= 2");
    const auto gray = grayscale_spectrogram(w, win, win / 2);
    ms.channels.push_back(resample_bilinear(gray.frames, height, width));
  }
  return ms;
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

struct MelFilterbank {
  Matrix weights;                // n_mels × F
  std::vector<double> edges_hz;  // n_mels + 2 points; filter i spans (edges[i], edges[i+2])
};

/// Triangular filters with centers evenly spaced in mel between fmin and
/// fmax, evaluated at bin frequencies k * sample_rate / (2 (F - 1)).
inline MelFilterbank mel_filterbank(std::size_t bins, double sample_rate, std::size_t n_mels, double fmin,
                                    double fmax) {
  if (bins < 2) throw ArgumentError("mel_filterbank: need at least 2 bins");
  if (n_mels < 1) throw ArgumentError("mel_filterbank: n_mels must be >= 1");
  if (!(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0))
    throw ArgumentError("mel_filterbank: need 0 <= fmin < fmax <= sample_rate/2");
  MelFilterbank fb;
  const double m_lo = hz_to_mel(fmin), m_hi = hz_to_mel(fmax);
  for (std::size_t i = 0; i < n_mels + 2; ++i)
    fb.edges_hz.push_back(mel_to_hz(m_lo + (m_hi - m_lo) * static_cast<double>(i) / static_cast<double>(n_mels + 1)));
  fb.weights = Matrix(n_mels, bins);
  const double bin_hz = sample_rate / (2.0 * static_cast<double>(bins - 1));
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = fb.edges_hz[m], mid = fb.edges_hz[m + 1], hi = fb.edges_hz[m + 2];
    double row_sum = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      double v = 0.0;
      if (f > lo && f <= mid) v = (f - lo) / (mid - lo);
      else if (f > mid && f < hi) v = (hi - f) / (hi - mid);
      fb.weights(m, k) = v;
      row_sum += v;
    }
    if (row_sum <= 0.0)
      throw ArgumentError("mel_filterbank: filter " + std::to_string(m) + " covers no bins (n_mels too large for " +
                          std::to_string(bins) + " bins)");
  }
  return fb;
}

/// Orthonormal DCT-II.
inline std::vector<double> dct_ortho(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += x[i] * std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * static_cast<double>(i) + 1.0) /
                           (2.0 * static_cast<double>(n)));
    out[k] = s * std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
  }
  return out;
}

struct MfccParams {
  std::size_t window = 512;
  std::size_t hop = 256;
  std::size_t n_mels = 26;
  std::size_t n_coeffs = 13;
  double fmin = 0.0;
  double fmax = 0.0;  // 0 means sample_rate / 2
};

struct MfccSequence {
  Matrix frames;  // N × n_coeffs
  MfccParams params;
};

inline constexpr double kMelFloor = 1e-10;

/// Per frame: power spectrum -> mel energies -> log(e + 1e-10) -> DCT-II,
/// first n_coeffs kept.
inline MfccSequence mfcc(const Waveform& w, const MfccParams& params = {}) {
  if (params.n_coeffs < 1 || params.n_coeffs > params.n_mels)
    throw ArgumentError("mfcc: need 1 <= n_coeffs <= n_mels");
  const Matrix mag = stft_magnitude(w, params.window, params.hop);
  const double fmax = params.fmax > 0.0 ? params.fmax : w.sample_rate / 2.0;
  const auto fb = mel_filterbank(mag.rows, w.sample_rate, params.n_mels, params.fmin, fmax);
  MfccSequence out{Matrix(mag.cols, params.n_coeffs), params};
  std::vector<double> log_mel(params.n_mels);
  for (std::size_t f = 0; f < mag.cols; ++f) {
    for (std::size_t m = 0; m < params.n_mels; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < mag.rows; ++k) e += fb.weights(m, k) * mag(k, f) * mag(k, f);
      log_mel[m] = std::log(e + kMelFloor);
    }
    const auto c = dct_ortho(log_mel);
    std::copy_n(c.begin(), params.n_coeffs, out.frames.row(f).begin());
  }
  return out;
}

/// Audio-CNN snippet sequence: for every fps timestamp, a one-period window of
/// audio centered on it (shifted inside the clip at the edges) becomes one
/// flattened multi-scale stack row.
inline FeatureSequence multiscale_snippets(const Waveform& w, std::span<const std::size_t> windows, std::size_t height,
                                           std::size_t width, double fps = 1.0) {
  const auto stamps = fps_sample(w.duration_sec(), fps);
  const auto span_len = std::min(w.samples.size(), static_cast<std::size_t>(std::llround(w.sample_rate / fps)));
  Matrix rows(stamps.size(), windows.size() * height * width);
  for (std::size_t i = 0; i < stamps.size(); ++i) {
    const auto center = static_cast<std::ptrdiff_t>(std::llround(stamps[i] * w.sample_rate));
    auto start = center - static_cast<std::ptrdiff_t>(span_len / 2);
    start = std::clamp<std::ptrdiff_t>(start, 0, static_cast<std::ptrdiff_t>(w.samples.size() - span_len));
    Waveform clip{w.sample_rate, std::vector<double>(w.samples.begin() + start, w.samples.begin() + start + span_len)};
    const auto flat = multiscale(clip, windows, height, width).flatten();
    std::copy(flat.begin(), flat.end(), rows.row(i).begin());
  }
  return FeatureSequence(std::move(rows));
}

}  // namespace tsn
