#pragma once

#include <filesystem>
#include <vector>

namespace fvad::dsp {

struct AudioBuffer {
  std::vector<float> samples;
  int sample_rate = 16000;

  double duration_s() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

// Reads a RIFF/WAVE file holding mono PCM16 or IEEE float32 samples.
// PCM16 is normalized by 32768. Throws IoError / InvalidInput.
AudioBuffer read_wav(const std::filesystem::path& path);

// Writes mono PCM16 (samples clipped to [-1, 1)).
void write_wav_pcm16(const std::filesystem::path& path, const AudioBuffer& audio);

}  // namespace fvad::dsp
