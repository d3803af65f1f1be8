#include "wdtcn/signal.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace wdtcn {

namespace {

void require_even_block(std::size_t block) {
  if (block < 2 || block % 2 != 0) {
    throw ConfigError("block size must be even and >= 2, got " +
                      std::to_string(block));
  }
}

}  // namespace

std::size_t frame_count(std::size_t length, std::size_t block) {
  require_even_block(block);
  const std::size_t hop = block / 2;
  if (length <= block) return 1;
  return (length - block + hop - 1) / hop + 1;
}

std::size_t padded_length(std::size_t length, std::size_t block) {
  return (frame_count(length, block) - 1) * (block / 2) + block;
}

Tensor frame_signal(const AudioClip& x, std::size_t block) {
  const std::size_t frames = frame_count(x.size(), block);
  const std::size_t hop = block / 2;
  Tensor out({frames, block});
  for (std::size_t l = 0; l < frames; ++l) {
    auto dst = out.row(l);
    for (std::size_t j = 0; j < block; ++j) {
      const std::size_t i = l * hop + j;
      dst[j] = i < x.size() ? x.samples[i] : 0.0;
    }
  }
  return out;
}

AudioClip overlap_add(const Tensor& frames, int sample_rate) {
  if (frames.rank() != 2) {
    throw DimensionError("overlap_add: frames must be rank 2, got " +
                         shape_string(frames.shape()));
  }
  const std::size_t count = frames.shape()[0];
  const std::size_t block = frames.shape()[1];
  require_even_block(block);
  const std::size_t hop = block / 2;
  AudioClip out;
  out.sample_rate = sample_rate;
  out.samples.assign((count - 1) * hop + block, 0.0);
  for (std::size_t l = 0; l < count; ++l) {
    auto src = frames.row(l);
    for (std::size_t j = 0; j < block; ++j) out.samples[l * hop + j] += src[j];
  }
  return out;
}

double rir_envelope(std::size_t n, int fs, double t60) {
  return std::pow(10.0, -3.0 * static_cast<double>(n) / (fs * t60));
}

Rir synth_rir(double t60, std::size_t delay, double gain, int fs,
              std::size_t length, std::uint64_t seed, double tail_gain) {
  if (!(t60 > 0.0)) throw ConfigError("synth_rir: t60 must be > 0");
  if (length <= delay) {
    throw ConfigError("synth_rir: length " + std::to_string(length) +
                      " must exceed direct delay " + std::to_string(delay));
  }
  if (fs <= 0) throw ConfigError("synth_rir: sample rate must be positive");
  Rir h;
  h.taps.assign(length, 0.0);
  h.direct_delay = delay;
  h.direct_gain = gain;
  h.t60 = t60;
  h.taps[delay] = gain;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double g = tail_gain * gain;
  for (std::size_t i = delay + 1; i < length; ++i) {
    h.taps[i] = g * noise(rng) * rir_envelope(i - delay, fs, t60);
  }
  return h;
}

std::pair<AudioClip, AudioClip> apply_rir(const AudioClip& s, const Rir& h) {
  const std::size_t len = s.size();
  AudioClip x{std::vector<double>(len, 0.0), s.sample_rate};
  AudioClip dir{std::vector<double>(len, 0.0), s.sample_rate};
  // Output-major: x[i] = sum_k h[k] s[i - k].
  const std::size_t taps = h.taps.size();
  for (std::size_t i = 0; i < len; ++i) {
    const std::size_t kmax = std::min(taps, i + 1);
    double acc = 0.0;
    for (std::size_t k = 0; k < kmax; ++k) acc += h.taps[k] * s.samples[i - k];
    x.samples[i] = acc;
  }
  for (std::size_t i = h.direct_delay; i < len; ++i) {
    dir.samples[i] = h.direct_gain * s.samples[i - h.direct_delay];
  }
  return {std::move(x), std::move(dir)};
}

ReverbSample fit_length(const ReverbSample& sample, std::size_t length) {
  ReverbSample out = sample;
  out.input.samples.resize(length, 0.0);
  out.target.samples.resize(length, 0.0);
  return out;
}

}  // namespace wdtcn
