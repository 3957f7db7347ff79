#include "fvad/dsp/wav.hpp"

#include "fvad/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace fvad::dsp {
namespace {

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

void put16(std::ostream& os, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  os.write(b, 2);
}

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open wav file: " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  const std::string where = " (" + path.string() + ")";
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw InvalidInput("not a RIFF/WAVE file" + where);
  }

  int format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = le32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16 || avail < 16) throw InvalidInput("truncated fmt chunk" + where);
      format = le16(chunk + 8);
      channels = le16(chunk + 10);
      rate = le32(chunk + 12);
      bits = le16(chunk + 22);
      if (format == 0xFFFE && len >= 26 && avail >= 26) format = le16(chunk + 32);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = std::min<std::size_t>(len, avail);
    }
    pos = body + len + (len & 1u);
  }
  if (format == 0) throw InvalidInput("missing fmt chunk" + where);
  if (data == nullptr) throw InvalidInput("missing data chunk" + where);
  if (channels != 1) {
    throw InvalidInput("expected mono audio, got " + std::to_string(channels) + " channels" +
                       where);
  }

  AudioBuffer out;
  out.sample_rate = static_cast<int>(rate);
  if (format == 1 && bits == 16) {
    out.samples.resize(data_len / 2);
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
      const auto v = static_cast<std::int16_t>(le16(data + 2 * i));
      out.samples[i] = static_cast<float>(v) / 32768.0f;
    }
  } else if (format == 3 && bits == 32) {
    out.samples.resize(data_len / 4);
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
      const std::uint32_t u = le32(data + 4 * i);
      float f;
      std::memcpy(&f, &u, 4);
      out.samples[i] = f;
    }
  } else {
    throw InvalidInput("unsupported sample format (format=" + std::to_string(format) +
                       ", bits=" + std::to_string(bits) + ")" + where);
  }
  return out;
}

void write_wav_pcm16(const std::filesystem::path& path, const AudioBuffer& audio) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write wav file: " + path.string());
  const auto n = static_cast<std::uint32_t>(audio.samples.size());
  os.write("RIFF", 4);
  put32(os, 36 + 2 * n);
  os.write("WAVEfmt ", 8);
  put32(os, 16);
  put16(os, 1);
  put16(os, 1);
  put32(os, static_cast<std::uint32_t>(audio.sample_rate));
  put32(os, static_cast<std::uint32_t>(audio.sample_rate) * 2);
  put16(os, 2);
  put16(os, 16);
  os.write("data", 4);
  put32(os, 2 * n);
  for (float s : audio.samples) {
    const float c = std::clamp(s, -1.0f, 32767.0f / 32768.0f);
    put16(os, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32768.0f))));
  }
}

}  // namespace fvad::dsp
