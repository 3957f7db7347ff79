#include "fvad/dsp/mfcc.hpp"

#include "fvad/error.hpp"

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <string>

namespace fvad::dsp {
namespace {

// Planner calls are not thread-safe in FFTW; execution with new-array is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

class RealFft {
 public:
  explicit RealFft(int n)
      : n_(n),
        in_(static_cast<double*>(fftw_malloc(sizeof(double) * n))),
        out_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)))) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(n, in_.get(), out_.get(), FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_.get(); }

  // Power spectrum |X_k|^2 for k = 0..n/2 of the current input buffer.
  void power(double* dst) {
    fftw_execute(plan_);
    for (int k = 0; k <= n_ / 2; ++k) {
      dst[k] = out_.get()[k][0] * out_.get()[k][0] + out_.get()[k][1] * out_.get()[k][1];
    }
  }

 private:
  int n_;
  std::unique_ptr<double, FftwDeleter> in_;
  std::unique_ptr<fftw_complex, FftwDeleter> out_;
  fftw_plan plan_;
};

std::size_t reflect(long long i, std::size_t n) {
  if (n == 1) return 0;
  const long long last = static_cast<long long>(n) - 1;
  while (i < 0 || i > last) {
    if (i < 0) i = -i;
    if (i > last) i = 2 * last - i;
  }
  return static_cast<std::size_t>(i);
}

void check_audio(const AudioBuffer& audio, const MfccConfig& cfg) {
  cfg.validate();
  if (audio.samples.empty()) throw InvalidInput("audio buffer is empty");
  if (audio.sample_rate != cfg.sample_rate_hz) {
    throw SampleRateMismatch("audio is " + std::to_string(audio.sample_rate) +
                             " Hz, config expects " + std::to_string(cfg.sample_rate_hz) + " Hz");
  }
  for (float s : audio.samples) {
    if (!std::isfinite(s)) throw InvalidInput("audio contains non-finite samples");
  }
}

}  // namespace

int MfccConfig::window_samples() const {
  return static_cast<int>(std::lround(window_ms * sample_rate_hz / 1000.0));
}

int MfccConfig::hop_samples() const {
  return static_cast<int>(std::lround(hop_ms * sample_rate_hz / 1000.0));
}

void MfccConfig::validate() const {
  auto fail = [](const std::string& msg) { throw InvalidConfig("mfcc config: " + msg); };
  if (sample_rate_hz != 16000) fail("only 16000 Hz input is supported");
  if (!(hop_ms > 0.0)) fail("hop_ms must be positive");
  if (window_ms < hop_ms) fail("window_ms must be >= hop_ms");
  if (hop_samples() < 1) fail("hop shorter than one sample");
  if (fft_size < window_samples()) fail("fft_size smaller than the window");
  if (n_mels < 1) fail("n_mels must be positive");
  if (n_coeffs < 1 || n_coeffs > n_mels) fail("n_coeffs must be in [1, n_mels]");
  if (!(log_floor > 0.0)) fail("log_floor must be positive");
  if (!(preemphasis >= 0.0 && preemphasis < 1.0)) fail("preemphasis must be in [0, 1)");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

RowMatrixD mel_filterbank(const MfccConfig& cfg) {
  cfg.validate();
  const int n_bins = cfg.fft_size / 2 + 1;
  const double nyquist = cfg.sample_rate_hz / 2.0;
  const double mel_hi = hz_to_mel(nyquist);

  std::vector<double> edges(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    edges[i] = mel_to_hz(mel_hi * i / (cfg.n_mels + 1));
  }

  RowMatrixD fb = RowMatrixD::Zero(cfg.n_mels, n_bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate_hz / cfg.fft_size;
      if (f > lo && f < hi) {
        fb(m, k) = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      }
    }
    if (fb.row(m).sum() <= 0.0) {
      throw InvalidConfig("mel filter " + std::to_string(m) + " is empty: n_mels=" +
                          std::to_string(cfg.n_mels) + " too large for fft_size=" +
                          std::to_string(cfg.fft_size));
    }
  }
  return fb;
}

RowMatrixD dct_matrix(int n_coeffs, int n_mels) {
  RowMatrixD d(n_coeffs, n_mels);
  for (int k = 0; k < n_coeffs; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / n_mels);
    for (int m = 0; m < n_mels; ++m) {
      d(k, m) = scale * std::cos(M_PI * k * (m + 0.5) / n_mels);
    }
  }
  return d;
}

std::vector<double> hamming_window(int length) {
  std::vector<double> w(length);
  for (int i = 0; i < length; ++i) w[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / length);
  return w;
}

Eigen::Index frame_count(std::size_t n_samples, const MfccConfig& cfg) {
  return static_cast<Eigen::Index>(n_samples / static_cast<std::size_t>(cfg.hop_samples()));
}

RowMatrixD compute_mel_energies(const AudioBuffer& audio, const MfccConfig& cfg) {
  check_audio(audio, cfg);
  const std::size_t n = audio.samples.size();
  const Eigen::Index frames = frame_count(n, cfg);
  if (frames < 1) throw InvalidInput("audio shorter than one hop");

  std::vector<double> x(n);
  x[0] = audio.samples[0];
  for (std::size_t i = 1; i < n; ++i) {
    x[i] = static_cast<double>(audio.samples[i]) - cfg.preemphasis * audio.samples[i - 1];
  }

  const int win = cfg.window_samples();
  const int hop = cfg.hop_samples();
  const auto window = hamming_window(win);
  const RowMatrixD fb = mel_filterbank(cfg);
  const int n_bins = cfg.fft_size / 2 + 1;

  RealFft fft(cfg.fft_size);
  Eigen::VectorXd power(n_bins);
  RowMatrixD energies(frames, cfg.n_mels);
  for (Eigen::Index t = 0; t < frames; ++t) {
    // Window centred on the middle of hop cell t.
    const long long start = static_cast<long long>(t) * hop + hop / 2 - win / 2;
    double* buf = fft.input();
    for (int i = 0; i < win; ++i) buf[i] = x[reflect(start + i, n)] * window[i];
    for (int i = win; i < cfg.fft_size; ++i) buf[i] = 0.0;
    fft.power(power.data());
    energies.row(t) = (fb * power).transpose();
  }
  return energies;
}

RowMatrixD compute_mfcc(const AudioBuffer& audio, const MfccConfig& cfg) {
  const RowMatrixD energies = compute_mel_energies(audio, cfg);
  const RowMatrixD dct = dct_matrix(cfg.n_coeffs, cfg.n_mels);
  RowMatrixD out(energies.rows(), cfg.n_coeffs);
  Eigen::VectorXd logmel(cfg.n_mels);
  for (Eigen::Index t = 0; t < energies.rows(); ++t) {
    for (int m = 0; m < cfg.n_mels; ++m) {
      logmel[m] = std::log(std::max(energies(t, m), cfg.log_floor));
    }
    out(t, 0) = dct.row(0).dot(logmel);
    // DCT rows k >= 1 sum to zero, so the frame's first log-mel value can be
    // removed before the product; a flat spectrum then yields exact zeros.
    const Eigen::VectorXd centred = logmel.array() - logmel[0];
    for (int k = 1; k < cfg.n_coeffs; ++k) out(t, k) = dct.row(k).dot(centred);
  }
  return out;
}

FeatureMatrix extract_mfcc(const AudioBuffer& audio, const MfccConfig& cfg) {
  FeatureMatrix fm;
  fm.data = compute_mfcc(audio, cfg).cast<float>();
  fm.hop_ms = cfg.hop_ms;
  fm.source_tag = "mfcc";
  return fm;
}

}  // namespace fvad::dsp
