#pragma once

#include "fvad/dsp/wav.hpp"
#include "fvad/feature_matrix.hpp"

#include <Eigen/Dense>

namespace fvad::dsp {

struct MfccConfig {
  int sample_rate_hz = 16000;
  double window_ms = 25.0;
  double hop_ms = 20.0;
  int fft_size = 512;
  int n_mels = 40;
  int n_coeffs = 13;
  double log_floor = 1e-10;
  double preemphasis = 0.97;

  int window_samples() const;
  int hop_samples() const;

  // Throws InvalidConfig on any violated invariant.
  void validate() const;
};

using RowMatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// n_mels x (fft_size/2 + 1) triangular filters, edges evenly spaced on the
// mel scale over [0, sample_rate/2]. Throws InvalidConfig if any filter
// would have no nonzero weight.
RowMatrixD mel_filterbank(const MfccConfig& cfg);

// Orthonormal DCT-II basis, n_coeffs x n_mels.
RowMatrixD dct_matrix(int n_coeffs, int n_mels);

// Periodic Hamming window of the configured length.
std::vector<double> hamming_window(int length);

// Frame count for a signal of n samples: floor(duration_ms / hop_ms).
Eigen::Index frame_count(std::size_t n_samples, const MfccConfig& cfg);

// Centered framing with reflective padding: frame t covers samples centred on
// t*hop + hop/2, so T depends only on duration and hop.
FeatureMatrix extract_mfcc(const AudioBuffer& audio, const MfccConfig& cfg);

}  // namespace fvad::dsp

namespace fvad::dsp {

// Pre-log mel energies, T x n_mels, double precision. Exposed for inspection
// and for checking the front end stage by stage.
RowMatrixD compute_mel_energies(const AudioBuffer& audio, const MfccConfig& cfg);

// Double-precision cepstra, T x n_coeffs. extract_mfcc() rounds this to float.
RowMatrixD compute_mfcc(const AudioBuffer& audio, const MfccConfig& cfg);

}  // namespace fvad::dsp
