#ifndef LADPROTO_DSP_DSP_H_
#define LADPROTO_DSP_DSP_H_

#include <complex>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace ladproto {

// Row-major dense matrix of doubles.
struct Matrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& at(size_t r, size_t c) { return data[r * cols + c]; }
  double at(size_t r, size_t c) const { return data[r * cols + c]; }
};

struct ComplexMatrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<std::complex<double>> data;

  const std::complex<double>& at(size_t r, size_t c) const { return data[r * cols + c]; }
};

struct Waveform {
  std::vector<double> samples;
  double sample_rate = 44100.0;
};

// Front-end parameters. Defaults: 44.1 kHz, 882-sample (20 ms) periodic Hann
// window, 50% hop, 1024-point FFT, 64 HTK mel bands from 0 Hz to Nyquist,
// natural log with floor 1e-10.
struct DspConfig {
  double sample_rate = 44100.0;
  int window_length = 882;
  int hop = 441;
  int fft_size = 0;  // 0 selects the next power of two >= window_length
  int n_mels = 64;
  double fmin = 0.0;
  double fmax = 0.0;  // 0 selects Nyquist
  double log_floor = 1e-10;

  int resolved_fft_size() const;
  double resolved_fmax() const;
  void validate() const;
  std::string fingerprint() const;
};

// frames = 1 + floor((n - window) / hop); inputs shorter than one window are
// zero-padded to one window.
size_t frame_count(size_t n_samples, const DspConfig& cfg);

std::vector<double> hann_window(int length);

// One-sided spectrum, [frames x (fft_size / 2 + 1)].
ComplexMatrix stft(const Waveform& wave, const DspConfig& cfg);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filters with unit peak, [n_mels x (fft_size / 2 + 1)].
Matrix mel_filterbank(const DspConfig& cfg);

// Band edges and centers: n_mels + 2 points equally spaced on the mel scale.
std::vector<double> mel_band_edges_hz(const DspConfig& cfg);

struct LogMelSpectrogram {
  Matrix values;  // [frames x n_mels]
  std::string config_fingerprint;
};

LogMelSpectrogram logmel(const Waveform& wave, const DspConfig& cfg);

struct ZScoreStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

constexpr double kStdFloor = 1e-10;

// Per-column statistics pooled over every row of every matrix.
ZScoreStats zscore_fit(const std::vector<const Matrix*>& specs);
ZScoreStats zscore_fit(const std::vector<LogMelSpectrogram>& specs);
Matrix zscore_apply(const Matrix& spec, const ZScoreStats& stats);
LogMelSpectrogram zscore_apply(const LogMelSpectrogram& spec, const ZScoreStats& stats);

// Crops trailing frames or pads with pad_value to a fixed frame count.
Matrix fit_frames(const Matrix& spec, size_t frames, double pad_value);

// Mono PCM WAV: 16-bit integer or 32-bit float; channels are averaged.
Waveform read_wav(const std::filesystem::path& path);
Waveform parse_wav(const std::string& bytes);
std::string encode_wav_pcm16(const Waveform& wave);

// Feature cache file: one text line "LPFEAT 1", one JSON header line
// (rows, cols, dtype, fingerprints), then little-endian float32 payload.
struct FeatureFile {
  Matrix values;
  std::string config_fingerprint;
  std::string clip_fingerprint;
};

std::string encode_feature_file(const FeatureFile& file);
FeatureFile decode_feature_file(const std::string& bytes);

}  // namespace ladproto

#endif  // LADPROTO_DSP_DSP_H_
