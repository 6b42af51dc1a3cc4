#include "fse/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace fse {
namespace {

static_assert(std::endian::native == std::endian::little, "WAV codec assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>((v >> s) & 0xFF));
}
void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

[[noreturn]] void fail(WavError::Kind kind, const std::string& what) { throw WavError(kind, what); }

}  // namespace

std::int16_t quantize_pcm16(double v) noexcept {
  const double scaled = std::round(v * 32768.0);  // std::round breaks ties away from zero
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

WavData decode_wav(const std::vector<std::uint8_t>& bytes) {
  using K = WavError::Kind;
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    fail(K::malformed, "not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::size_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) fail(K::malformed, "fmt chunk is too short");
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      if (format == kFormatExtensible) {
        if (size < 26) fail(K::malformed, "extensible fmt chunk is too short");
        format = read_u16(bytes.data() + body + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) fail(K::malformed, "data chunk precedes fmt chunk");
      data = bytes.data() + body;
      data_size = std::min(size, bytes.size() - std::min(body, bytes.size()));
      if (body + size > bytes.size()) {
        const std::size_t frame = static_cast<std::size_t>(channels) * (bits / 8);
        fail(K::truncated, "data chunk declares " + std::to_string(size) + " bytes but only " +
                               std::to_string(data_size) + " are present" +
                               (frame ? " (" + std::to_string(data_size / frame) + " whole frames)" : ""));
      }
      break;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) fail(K::malformed, "missing fmt chunk");
  if (!data) fail(K::malformed, "missing data chunk");
  if (channels == 0) fail(K::malformed, "zero channels");
  if (rate == 0) fail(K::malformed, "zero sample rate");

  WavEncoding enc;
  if (format == kFormatPcm && bits == 16) enc = WavEncoding::pcm16;
  else if (format == kFormatFloat && bits == 32) enc = WavEncoding::float32;
  else
    fail(K::unsupported, "unsupported encoding: format " + std::to_string(format) + ", " +
                             std::to_string(bits) + " bits");

  const std::size_t width = bits / 8;
  const std::size_t frame_bytes = width * channels;
  if (data_size % frame_bytes != 0) fail(K::truncated, "data chunk ends inside a frame");
  const std::size_t frames = data_size / frame_bytes;

  WavData out;
  out.descriptor = {static_cast<int>(rate), channels, enc, frames};
  for (std::uint16_t c = 0; c < channels; ++c) {
    Eigen::VectorXd samples(static_cast<Eigen::Index>(frames));
    for (std::size_t i = 0; i < frames; ++i) {
      const std::uint8_t* p = data + i * frame_bytes + c * width;
      if (enc == WavEncoding::pcm16) {
        samples[static_cast<Eigen::Index>(i)] = static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      } else {
        samples[static_cast<Eigen::Index>(i)] = std::bit_cast<float>(read_u32(p));
      }
    }
    try {
      out.channels.emplace_back(std::move(samples), static_cast<int>(rate));
    } catch (const Error& e) {
      fail(K::malformed, e.what());
    }
  }
  return out;
}

WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError(WavError::Kind::io, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

std::vector<std::uint8_t> encode_wav(const std::vector<AudioSignal>& channels, WavEncoding encoding,
                                     WavWriteSummary* summary) {
  if (channels.empty()) throw Error("write_wav needs at least one channel");
  const auto frames = static_cast<std::size_t>(channels.front().size());
  const int rate = channels.front().sample_rate();
  for (const auto& ch : channels)
    if (static_cast<std::size_t>(ch.size()) != frames || ch.sample_rate() != rate)
      throw Error("channels differ in length or sample rate");

  const std::uint16_t width = encoding == WavEncoding::pcm16 ? 2 : 4;
  const auto nch = static_cast<std::uint16_t>(channels.size());
  const std::uint32_t data_size = static_cast<std::uint32_t>(frames * width * nch);

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_size);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, encoding == WavEncoding::pcm16 ? kFormatPcm : kFormatFloat);
  put_u16(out, nch);
  put_u32(out, static_cast<std::uint32_t>(rate));
  put_u32(out, static_cast<std::uint32_t>(rate) * width * nch);
  put_u16(out, static_cast<std::uint16_t>(width * nch));
  put_u16(out, static_cast<std::uint16_t>(width * 8));
  put_tag(out, "data");
  put_u32(out, data_size);

  std::size_t clamped = 0;
  for (std::size_t i = 0; i < frames; ++i) {
    for (const auto& ch : channels) {
      const double v = ch[static_cast<Eigen::Index>(i)];
      if (encoding == WavEncoding::pcm16) {
        if (v < -1.0 || v > 1.0) ++clamped;
        put_u16(out, static_cast<std::uint16_t>(quantize_pcm16(v)));
      } else {
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      }
    }
  }
  if (summary) summary->clamped = clamped;
  return out;
}

WavWriteSummary write_wav(const std::vector<AudioSignal>& channels, WavEncoding encoding, const std::string& path) {
  WavWriteSummary summary;
  const auto bytes = encode_wav(channels, encoding, &summary);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WavError(WavError::Kind::io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw WavError(WavError::Kind::io, "write failed for " + path);
  return summary;
}

}  // namespace fse
