#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "wdtcn/tensor.h"

namespace wdtcn {

inline constexpr int kDefaultSampleRate = 8000;

struct AudioClip {
  std::vector<double> samples;
  int sample_rate = kDefaultSampleRate;

  std::size_t size() const { return samples.size(); }
};

// Number of 50%-overlap blocks of `block` samples needed to cover `length`
// samples once the tail is zero-padded to a whole block.
std::size_t frame_count(std::size_t length, std::size_t block);
// Signal length after tail padding: (frames - 1) * block / 2 + block.
std::size_t padded_length(std::size_t length, std::size_t block);

// Splits `x` into blocks of `block` samples with hop block/2. Block l
// (0-based) covers samples [l*hop, l*hop + block). Throws ConfigError for an
// odd block size.
Tensor frame_signal(const AudioClip& x, std::size_t block);

// Sums the rows of `frames` [L_x x block] at hop block/2. No synthesis
// window: framing followed by this doubles every interior sample.
AudioClip overlap_add(const Tensor& frames, int sample_rate = kDefaultSampleRate);

struct Rir {
  std::vector<double> taps;
  std::size_t direct_delay = 0;  // tau
  double direct_gain = 1.0;      // alpha
  double t60 = 0.0;              // seconds
};

// Relative amplitude of the reverberant tail just after the direct tap.
inline constexpr double kDefaultTailGain = 0.05;

// Direct tap `gain` at `delay`, followed by seeded unit-variance Gaussian
// noise under a 60 dB-per-T60 exponential envelope scaled by
// tail_gain * gain. Taps before the delay are zero.
Rir synth_rir(double t60, std::size_t delay, double gain, int fs,
              std::size_t length, std::uint64_t seed,
              double tail_gain = kDefaultTailGain);

// Envelope 10^(-3 n / (fs t60)) of tail sample n after the direct tap.
double rir_envelope(std::size_t n, int fs, double t60);

// Reverberant mixture (full convolution truncated to len(s)) and the
// direct-path target alpha * s[i - tau].
std::pair<AudioClip, AudioClip> apply_rir(const AudioClip& s, const Rir& h);

struct ReverbSample {
  AudioClip input;   // x
  AudioClip target;  // s_dir
  double t60 = 0.0;
  std::uint64_t seed = 0;
  std::size_t direct_delay = 0;
  double direct_gain = 1.0;
  std::string id;
};

struct CorpusOptions {
  std::size_t count = 16;
  double duration_s = 4.0;
  int sample_rate = kDefaultSampleRate;
  double t60_min = 0.1;
  double t60_max = 1.0;
  std::uint64_t seed = 0;
  double tail_gain = kDefaultTailGain;
};

// Deterministic synthetic clean source: a few amplitude-modulated harmonics
// with a gliding f0 in [80, 300] Hz, band-limited noise bursts, and silence
// gaps. RMS-normalized.
AudioClip speech_like_source(std::size_t length, int fs, std::uint64_t seed);

// T60 labels are stratified over [t60_min, t60_max] so every sub-range is
// covered; the whole corpus is a pure function of `seed`.
std::vector<ReverbSample> generate_corpus(const CorpusOptions& options);

// Truncates or zero-pads both clips of a sample to `length` samples.
ReverbSample fit_length(const ReverbSample& sample, std::size_t length);

// One JSON-lines manifest record.
struct ManifestEntry {
  std::filesystem::path path_in;
  std::filesystem::path path_target;
  double t60 = 0.0;
  std::uint64_t seed = 0;
};

// Writes each sample as two WAV files under `dir` plus `manifest.jsonl`;
// returns the manifest path.
std::filesystem::path write_corpus(const std::vector<ReverbSample>& corpus,
                                   const std::filesystem::path& dir);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ManifestEntry>& entries,
                    const std::filesystem::path& path);
// Loads every manifest entry; relative paths resolve against the manifest's
// directory.
std::vector<ReverbSample> load_corpus(const std::filesystem::path& manifest);

}  // namespace wdtcn
