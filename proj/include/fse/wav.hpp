// RIFF/WAVE reading and writing: 16-bit PCM (format 1) and 32-bit IEEE
// float (format 3), little-endian.
#pragma once

#include "fse/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fse {

enum class WavEncoding { pcm16, float32 };

struct WavDescriptor {
  int sample_rate = 16000;
  int channels = 1;
  WavEncoding encoding = WavEncoding::pcm16;
  std::size_t frames = 0;

  friend bool operator==(const WavDescriptor&, const WavDescriptor&) = default;
};

class WavError : public Error {
 public:
  enum class Kind { io, malformed, unsupported, truncated };
  WavError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct WavData {
  std::vector<AudioSignal> channels;
  WavDescriptor descriptor;
};

WavData read_wav(const std::string& path);
WavData decode_wav(const std::vector<std::uint8_t>& bytes);

/// Number of samples that fell outside [-1, 1] and were clamped (pcm16 only).
struct WavWriteSummary {
  std::size_t clamped = 0;
};

/// Channels must share length and sample rate. pcm16 clamps samples outside
/// [-1, 1] and reports how many it touched.
WavWriteSummary write_wav(const std::vector<AudioSignal>& channels, WavEncoding encoding, const std::string& path);
std::vector<std::uint8_t> encode_wav(const std::vector<AudioSignal>& channels, WavEncoding encoding,
                                     WavWriteSummary* summary = nullptr);

/// Round half away from zero on v*32768, clamped to the int16 range.
std::int16_t quantize_pcm16(double v) noexcept;

}  // namespace fse
