#include "wdtcn/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace wdtcn {

namespace {

constexpr double kPcmScale = 32768.0;

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";
  if (bytes.size() < 12) throw IoError(where + "truncated RIFF header");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0) {
    throw IoError(where + "missing RIFF chunk id");
  }
  if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw IoError(where + "RIFF form type is not WAVE");
  }

  bool have_fmt = false;
  int sample_rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > bytes.size()) {
        throw IoError(where + "truncated fmt chunk");
      }
      const std::uint16_t format = read_u16(bytes.data() + body);
      const std::uint16_t channels = read_u16(bytes.data() + body + 2);
      sample_rate = static_cast<int>(read_u32(bytes.data() + body + 4));
      const std::uint16_t bits = read_u16(bytes.data() + body + 14);
      if (format != 1) {
        throw IoError(where + "unsupported audio format " +
                      std::to_string(format) + " (need PCM = 1)");
      }
      if (channels != 1) {
        throw IoError(where + "unsupported channel count " +
                      std::to_string(channels) + " (need mono)");
      }
      if (bits != 16) {
        throw IoError(where + "unsupported bits per sample " +
                      std::to_string(bits) + " (need 16)");
      }
      if (sample_rate <= 0) throw IoError(where + "invalid sample rate");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw IoError(where + "data chunk before fmt chunk");
      if (body + size > bytes.size()) {
        throw IoError(where + "truncated data chunk (header says " +
                      std::to_string(size) + " bytes)");
      }
      const std::size_t count = size / 2;
      if (count == 0) throw IoError(where + "empty data chunk");
      AudioClip clip;
      clip.sample_rate = sample_rate;
      clip.samples.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        const auto raw =
            static_cast<std::int16_t>(read_u16(bytes.data() + body + 2 * i));
        clip.samples[i] = raw / kPcmScale;
      }
      return clip;
    }
    pos = body + size + (size & 1);
  }
  throw IoError(where + (have_fmt ? "missing data chunk" : "missing fmt chunk"));
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  if (clip.sample_rate <= 0) throw IoError("write_wav: invalid sample rate");
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double v : clip.samples) {
    const double q = std::clamp(std::round(v * kPcmScale), -32768.0, 32767.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot create " + path.string());
  os.write(reinterpret_cast<const char*>(out.data()),
           static_cast<std::streamsize>(out.size()));
  if (!os) throw IoError("write failed for " + path.string());
}

}  // namespace wdtcn
