#include "dsp/dsp.h"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>
#include <sstream>

#include "common/error.h"
#include "common/io.h"
#include "json.hpp"

namespace ladproto {

namespace {

// FFTW planning is not thread-safe; execution on per-call buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_ = fftw_alloc_real(static_cast<size_t>(n));
    out_ = fftw_alloc_complex(static_cast<size_t>(n / 2 + 1));
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard<std::mutex> lock(planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  void execute() { fftw_execute(plan_); }
  std::complex<double> bin(int k) const { return {out_[k][0], out_[k][1]}; }

 private:
  int n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

template <typename T>
T read_le(const std::string& bytes, size_t offset) {
  if (offset + sizeof(T) > bytes.size()) fail(ErrorKind::kIo, "WAV: truncated data");
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    auto* p = reinterpret_cast<unsigned char*>(&v);
    std::reverse(p, p + sizeof(T));
  }
  return v;
}

template <typename T>
void append_le(std::string& out, T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto* p = reinterpret_cast<unsigned char*>(&v);
    std::reverse(p, p + sizeof(T));
  }
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

int DspConfig::resolved_fft_size() const {
  if (fft_size > 0) return fft_size;
  int n = 1;
  while (n < window_length) n <<= 1;
  return n;
}

double DspConfig::resolved_fmax() const { return fmax > 0.0 ? fmax : sample_rate / 2.0; }

void DspConfig::validate() const {
  if (!(sample_rate > 0.0)) fail(ErrorKind::kConfig, "dsp: sample_rate must be positive");
  if (hop <= 0 || hop > window_length) fail(ErrorKind::kConfig, "dsp: need 0 < hop <= window_length");
  if (window_length > resolved_fft_size()) fail(ErrorKind::kConfig, "dsp: window_length exceeds fft_size");
  if (n_mels < 1) fail(ErrorKind::kConfig, "dsp: n_mels must be >= 1");
  if (!(log_floor > 0.0)) fail(ErrorKind::kConfig, "dsp: log_floor must be positive");
  if (fmin < 0.0 || resolved_fmax() <= fmin || resolved_fmax() > sample_rate / 2.0) {
    fail(ErrorKind::kConfig, "dsp: need 0 <= fmin < fmax <= Nyquist");
  }
}

std::string DspConfig::fingerprint() const {
  std::ostringstream ss;
  ss.precision(17);
  ss << "sr=" << sample_rate << ";win=" << window_length << ";hop=" << hop
     << ";fft=" << resolved_fft_size() << ";mels=" << n_mels << ";fmin=" << fmin
     << ";fmax=" << resolved_fmax() << ";floor=" << log_floor << ";hann;htk;power;ln";
  return short_hash(ss.str());
}

size_t frame_count(size_t n_samples, const DspConfig& cfg) {
  const size_t win = static_cast<size_t>(cfg.window_length);
  const size_t n = std::max(n_samples, win);
  return 1 + (n - win) / static_cast<size_t>(cfg.hop);
}

std::vector<double> hann_window(int length) {
  std::vector<double> w(static_cast<size_t>(length));
  for (int n = 0; n < length; ++n) {
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length);
  }
  return w;
}

ComplexMatrix stft(const Waveform& wave, const DspConfig& cfg) {
  cfg.validate();
  if (wave.samples.empty()) fail(ErrorKind::kConfig, "stft: empty waveform");
  for (double x : wave.samples) {
    if (!std::isfinite(x)) fail(ErrorKind::kNumeric, "stft: non-finite sample");
  }
  const int nfft = cfg.resolved_fft_size();
  const size_t bins = static_cast<size_t>(nfft / 2 + 1);
  const size_t frames = frame_count(wave.samples.size(), cfg);
  const auto window = hann_window(cfg.window_length);

  ComplexMatrix out;
  out.rows = frames;
  out.cols = bins;
  out.data.resize(frames * bins);
  RealFft fft(nfft);
  for (size_t f = 0; f < frames; ++f) {
    double* buf = fft.input();
    std::fill(buf, buf + nfft, 0.0);
    const size_t start = f * static_cast<size_t>(cfg.hop);
    for (int n = 0; n < cfg.window_length; ++n) {
      const size_t i = start + static_cast<size_t>(n);
      if (i < wave.samples.size()) buf[n] = wave.samples[i] * window[n];
    }
    fft.execute();
    for (size_t k = 0; k < bins; ++k) out.data[f * bins + k] = fft.bin(static_cast<int>(k));
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_band_edges_hz(const DspConfig& cfg) {
  const double lo = hz_to_mel(cfg.fmin);
  const double hi = hz_to_mel(cfg.resolved_fmax());
  std::vector<double> edges(static_cast<size_t>(cfg.n_mels + 2));
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * i / (cfg.n_mels + 1));
  }
  return edges;
}

Matrix mel_filterbank(const DspConfig& cfg) {
  cfg.validate();
  const int nfft = cfg.resolved_fft_size();
  const size_t bins = static_cast<size_t>(nfft / 2 + 1);
  const auto edges = mel_band_edges_hz(cfg);
  Matrix fb(static_cast<size_t>(cfg.n_mels), bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    double area = 0.0;
    for (size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / nfft;
      const double w = std::max(0.0, std::min((f - left) / (center - left), (right - f) / (right - center)));
      fb.at(m, k) = w;
      area += w;
    }
    if (area <= 0.0) {
      fail(ErrorKind::kConfig, "mel filterbank: filter " + std::to_string(m) +
                                   " covers no FFT bin; reduce n_mels or raise fft_size");
    }
  }
  return fb;
}

LogMelSpectrogram logmel(const Waveform& wave, const DspConfig& cfg) {
  const auto spec = stft(wave, cfg);
  const auto fb = mel_filterbank(cfg);
  LogMelSpectrogram out;
  out.config_fingerprint = cfg.fingerprint();
  out.values = Matrix(spec.rows, fb.rows);
  std::vector<double> power(spec.cols);
  for (size_t f = 0; f < spec.rows; ++f) {
    for (size_t k = 0; k < spec.cols; ++k) power[k] = std::norm(spec.at(f, k));
    for (size_t m = 0; m < fb.rows; ++m) {
      double e = 0.0;
      const double* row = &fb.data[m * fb.cols];
      for (size_t k = 0; k < spec.cols; ++k) e += row[k] * power[k];
      out.values.at(f, m) = std::log(cfg.log_floor + e);
    }
  }
  return out;
}

ZScoreStats zscore_fit(const std::vector<const Matrix*>& specs) {
  size_t total = 0;
  size_t cols = 0;
  for (const auto* s : specs) {
    if (s->rows == 0) continue;
    if (total == 0) cols = s->cols;
    if (s->cols != cols) fail(ErrorKind::kShape, "zscore_fit: inconsistent mel-bin counts");
    total += s->rows;
  }
  if (total == 0) fail(ErrorKind::kConfig, "zscore_fit: empty collection");

  // Anchor on the first value so a constant column yields an exact mean.
  ZScoreStats stats;
  stats.mean.assign(cols, 0.0);
  stats.stddev.assign(cols, 0.0);
  std::vector<double> anchor(cols);
  for (const auto* s : specs) {
    if (s->rows) {
      for (size_t c = 0; c < cols; ++c) anchor[c] = s->at(0, c);
      break;
    }
  }
  std::vector<double> shift(cols, 0.0);
  for (const auto* s : specs) {
    for (size_t r = 0; r < s->rows; ++r) {
      for (size_t c = 0; c < cols; ++c) shift[c] += s->at(r, c) - anchor[c];
    }
  }
  for (size_t c = 0; c < cols; ++c) stats.mean[c] = anchor[c] + shift[c] / static_cast<double>(total);
  std::vector<double> ss(cols, 0.0);
  for (const auto* s : specs) {
    for (size_t r = 0; r < s->rows; ++r) {
      for (size_t c = 0; c < cols; ++c) {
        const double d = s->at(r, c) - stats.mean[c];
        ss[c] += d * d;
      }
    }
  }
  for (size_t c = 0; c < cols; ++c) {
    stats.stddev[c] = std::max(kStdFloor, std::sqrt(ss[c] / static_cast<double>(total)));
  }
  return stats;
}

ZScoreStats zscore_fit(const std::vector<LogMelSpectrogram>& specs) {
  std::vector<const Matrix*> ptrs;
  ptrs.reserve(specs.size());
  for (const auto& s : specs) ptrs.push_back(&s.values);
  return zscore_fit(ptrs);
}

Matrix zscore_apply(const Matrix& spec, const ZScoreStats& stats) {
  if (spec.cols != stats.mean.size()) {
    fail(ErrorKind::kShape, "zscore_apply: spectrogram has " + std::to_string(spec.cols) +
                                " bins, statistics have " + std::to_string(stats.mean.size()));
  }
  Matrix out = spec;
  for (size_t r = 0; r < spec.rows; ++r) {
    for (size_t c = 0; c < spec.cols; ++c) {
      out.at(r, c) = (spec.at(r, c) - stats.mean[c]) / stats.stddev[c];
    }
  }
  return out;
}

LogMelSpectrogram zscore_apply(const LogMelSpectrogram& spec, const ZScoreStats& stats) {
  return {zscore_apply(spec.values, stats), spec.config_fingerprint};
}

Matrix fit_frames(const Matrix& spec, size_t frames, double pad_value) {
  Matrix out(frames, spec.cols, pad_value);
  const size_t keep = std::min(frames, spec.rows);
  std::copy(spec.data.begin(), spec.data.begin() + static_cast<std::ptrdiff_t>(keep * spec.cols),
            out.data.begin());
  return out;
}

Waveform parse_wav(const std::string& bytes) {
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0) {
    fail(ErrorKind::kIo, "WAV: missing RIFF/WAVE header");
  }
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  size_t data_off = 0, data_len = 0;
  bool have_fmt = false, have_data = false;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id = bytes.substr(pos, 4);
    const uint32_t len = read_le<uint32_t>(bytes, pos + 4);
    const size_t body = pos + 8;
    if (id == "fmt ") {
      format = read_le<uint16_t>(bytes, body);
      channels = read_le<uint16_t>(bytes, body + 2);
      rate = read_le<uint32_t>(bytes, body + 4);
      bits = read_le<uint16_t>(bytes, body + 14);
      if (format == 0xFFFE && len >= 26) format = read_le<uint16_t>(bytes, body + 24);
      have_fmt = true;
    } else if (id == "data") {
      data_off = body;
      data_len = std::min<size_t>(len, bytes.size() - body);
      have_data = true;
    }
    pos = body + len + (len & 1);
  }
  if (!have_fmt || !have_data) fail(ErrorKind::kIo, "WAV: missing fmt or data chunk");
  if (channels == 0) fail(ErrorKind::kIo, "WAV: zero channels");
  const bool pcm16 = format == 1 && bits == 16;
  const bool float32 = format == 3 && bits == 32;
  if (!pcm16 && !float32) {
    fail(ErrorKind::kIo, "WAV: unsupported encoding (format " + std::to_string(format) + ", " +
                             std::to_string(bits) + " bits); need 16-bit PCM or 32-bit float");
  }
  const size_t width = bits / 8;
  const size_t frames = data_len / (width * channels);
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(frames);
  for (size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (size_t ch = 0; ch < channels; ++ch) {
      const size_t off = data_off + (i * channels + ch) * width;
      acc += pcm16 ? read_le<int16_t>(bytes, off) / 32768.0 : read_le<float>(bytes, off);
    }
    w.samples[i] = acc / channels;
  }
  return w;
}

Waveform read_wav(const std::filesystem::path& path) { return parse_wav(read_file(path)); }

std::string encode_wav_pcm16(const Waveform& wave) {
  const uint32_t n = static_cast<uint32_t>(wave.samples.size());
  const uint32_t rate = static_cast<uint32_t>(std::lround(wave.sample_rate));
  std::string out = "RIFF";
  append_le<uint32_t>(out, 36 + 2 * n);
  out += "WAVEfmt ";
  append_le<uint32_t>(out, 16);
  append_le<uint16_t>(out, 1);
  append_le<uint16_t>(out, 1);
  append_le<uint32_t>(out, rate);
  append_le<uint32_t>(out, rate * 2);
  append_le<uint16_t>(out, 2);
  append_le<uint16_t>(out, 16);
  out += "data";
  append_le<uint32_t>(out, 2 * n);
  for (double x : wave.samples) {
    const double clipped = std::clamp(x, -1.0, 32767.0 / 32768.0);
    append_le<int16_t>(out, static_cast<int16_t>(std::lround(clipped * 32768.0)));
  }
  return out;
}

std::string encode_feature_file(const FeatureFile& file) {
  nlohmann::json header = {{"rows", file.values.rows},
                           {"cols", file.values.cols},
                           {"dtype", "f32le"},
                           {"config", file.config_fingerprint},
                           {"clip", file.clip_fingerprint}};
  std::string out = "LPFEAT 1\n" + header.dump() + "\n";
  out.reserve(out.size() + 4 * file.values.data.size());
  for (double v : file.values.data) append_le<float>(out, static_cast<float>(v));
  return out;
}

FeatureFile decode_feature_file(const std::string& bytes) {
  const size_t l1 = bytes.find('\n');
  if (l1 == std::string::npos || bytes.compare(0, l1, "LPFEAT 1") != 0) {
    fail(ErrorKind::kIo, "feature file: bad magic line");
  }
  const size_t l2 = bytes.find('\n', l1 + 1);
  if (l2 == std::string::npos) fail(ErrorKind::kIo, "feature file: missing header");
  FeatureFile f;
  size_t rows = 0, cols = 0;
  std::string dtype;
  try {
    const auto header = nlohmann::json::parse(bytes.substr(l1 + 1, l2 - l1 - 1));
    rows = header.at("rows").get<size_t>();
    cols = header.at("cols").get<size_t>();
    dtype = header.at("dtype").get<std::string>();
    f.config_fingerprint = header.at("config").get<std::string>();
    f.clip_fingerprint = header.at("clip").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::kIo, "feature file: malformed header");
  }
  if (dtype != "f32le") fail(ErrorKind::kIo, "feature file: unsupported dtype " + dtype);
  const size_t payload = l2 + 1;
  if (bytes.size() - payload != 4 * rows * cols) {
    fail(ErrorKind::kIo, "feature file: payload size does not match header shape");
  }
  f.values = Matrix(rows, cols);
  for (size_t i = 0; i < rows * cols; ++i) {
    f.values.data[i] = read_le<float>(bytes, payload + 4 * i);
  }
  return f;
}

}  // namespace ladproto
