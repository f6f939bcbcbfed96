#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "adloop/error.hpp"
#include "adloop/signal/types.hpp"

namespace adloop::signal {

enum class WavEncoding { pcm16, float32 };

struct WavInfo {
  int channels = 0;
  double sample_rate = 0.0;
  WavEncoding encoding = WavEncoding::pcm16;
  std::size_t frames = 0;
};

/// Decoded recording. Multi-channel input is collapsed to the channel mean.
struct WavData {
  WavInfo info;
  SampleChunk mono;
};

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

constexpr const char* kSupportedWav =
    "supported encodings: RIFF/WAVE PCM 16-bit or IEEE float 32-bit, any channel count";

}  // namespace detail

inline WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw IoError("'" + path + "' is not a RIFF/WAVE file; " + detail::kSupportedWav);
  }

  WavData wav;
  std::uint16_t format = 0, bits = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = detail::read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size() && std::memcmp(chunk, "data", 4) != 0) break;
    if (std::memcmp(chunk, "fmt ", 4) == 0 && size >= 16) {
      format = detail::read_u16(chunk + 8);
      wav.info.channels = detail::read_u16(chunk + 10);
      wav.info.sample_rate = detail::read_u32(chunk + 12);
      bits = detail::read_u16(chunk + 22);
      if (format == 0xFFFE && size >= 40) format = detail::read_u16(chunk + 32);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = std::min<std::size_t>(size, bytes.size() - body);
    }
    pos = body + size + (size & 1u);
  }
  if (wav.info.channels <= 0 || !(wav.info.sample_rate > 0.0)) {
    throw IoError("'" + path + "' has no valid fmt chunk");
  }
  if (data == nullptr) throw IoError("'" + path + "' has no data chunk");

  if (format == 1 && bits == 16) {
    wav.info.encoding = WavEncoding::pcm16;
  } else if (format == 3 && bits == 32) {
    wav.info.encoding = WavEncoding::float32;
  } else {
    throw IoError("'" + path + "' uses unsupported encoding (format tag " +
                  std::to_string(format) + ", " + std::to_string(bits) + " bits); " +
                  detail::kSupportedWav);
  }

  const std::size_t bytes_per_sample = bits / 8;
  const auto channels = static_cast<std::size_t>(wav.info.channels);
  wav.info.frames = data_size / (bytes_per_sample * channels);
  wav.mono.sample_rate = wav.info.sample_rate;
  wav.mono.start_index = 0;
  wav.mono.samples.resize(wav.info.frames);
  for (std::size_t f = 0; f < wav.info.frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (f * channels + c) * bytes_per_sample;
      if (wav.info.encoding == WavEncoding::pcm16) {
        acc += static_cast<std::int16_t>(detail::read_u16(p)) / 32768.0;
      } else {
        const std::uint32_t raw = detail::read_u32(p);
        float v;
        std::memcpy(&v, &raw, sizeof v);
        acc += static_cast<double>(v);
      }
    }
    wav.mono.samples[f] = acc / static_cast<double>(channels);
  }
  return wav;
}

/// Writes mono samples. PCM output is clipped to [-1, 1).
inline void write_wav(const std::string& path, const std::vector<double>& samples,
                      double sample_rate, WavEncoding encoding = WavEncoding::float32) {
  const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : 32;
  const std::uint16_t format = encoding == WavEncoding::pcm16 ? 1 : 3;
  const std::uint32_t block = bits / 8;
  const auto data_size = static_cast<std::uint32_t>(samples.size() * block);
  const auto rate = static_cast<std::uint32_t>(std::lround(sample_rate));

  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  detail::put_u32(out, 36 + data_size);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, format);
  detail::put_u16(out, 1);
  detail::put_u32(out, rate);
  detail::put_u32(out, rate * block);
  detail::put_u16(out, static_cast<std::uint16_t>(block));
  detail::put_u16(out, bits);
  out += "data";
  detail::put_u32(out, data_size);
  for (double s : samples) {
    if (encoding == WavEncoding::pcm16) {
      const double c = std::clamp(s, -1.0, 32767.0 / 32768.0);
      detail::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32768.0))));
    } else {
      const auto f = static_cast<float>(s);
      std::uint32_t raw;
      std::memcpy(&raw, &f, sizeof raw);
      detail::put_u32(out, raw);
    }
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot create WAV file '" + path + "'");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("failed writing WAV file '" + path + "'");
}

}  // namespace adloop::signal
