#pragma once

#include <filesystem>
#include <stdexcept>

#include "wdtcn/signal.h"

namespace wdtcn {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 16-bit PCM mono RIFF/WAVE. Samples map to [-1, 1) with scale 2^15;
// writing clamps to the representable range.
AudioClip read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

}  // namespace wdtcn
