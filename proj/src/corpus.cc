#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

#include <json.hpp>

#include "wdtcn/signal.h"
#include "wdtcn/wav.h"

namespace wdtcn {

namespace {

// SplitMix64 finalizer: derives independent per-item seeds from one seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

AudioClip speech_like_source(std::size_t length, int fs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double rate = static_cast<double>(fs);
  const int harmonics = 3 + static_cast<int>(rng() % 3);
  const double f0_base = uniform(80.0, 300.0);
  std::vector<double> harmonic_gain(harmonics);
  for (int k = 0; k < harmonics; ++k) {
    harmonic_gain[k] = uniform(0.5, 1.0) / (k + 1);
  }

  AudioClip clip;
  clip.sample_rate = fs;
  clip.samples.assign(length, 0.0);

  // Alternating syllables and silence gaps.
  std::size_t pos = static_cast<std::size_t>(uniform(0.0, 0.1) * rate);
  double phase = 0.0;
  double noise_state = 0.0;
  while (pos < length) {
    const auto syllable = static_cast<std::size_t>(uniform(0.12, 0.45) * rate);
    const double glide = uniform(-0.15, 0.15);
    const double vibrato = uniform(3.0, 6.0);
    const double am_rate = uniform(3.0, 6.0);
    const double noise_level = uniform(0.05, 0.3);
    const double syllable_f0 = f0_base * uniform(0.9, 1.1);
    for (std::size_t n = 0; n < syllable && pos + n < length; ++n) {
      const double t = n / rate;
      const double frac = static_cast<double>(n) / syllable;
      const double window = 0.5 - 0.5 * std::cos(kTwoPi * frac);
      const double f0 = syllable_f0 * (1.0 + glide * frac) *
                        (1.0 + 0.02 * std::sin(kTwoPi * vibrato * t));
      phase += kTwoPi * f0 / rate;
      if (phase > kTwoPi) phase -= kTwoPi;
      double voiced = 0.0;
      for (int k = 0; k < harmonics; ++k) {
        voiced += harmonic_gain[k] * std::sin((k + 1) * phase);
      }
      // One-pole low-pass noise for the unvoiced component.
      noise_state = 0.7 * noise_state + 0.3 * gauss(rng);
      const double am = 1.0 + 0.3 * std::sin(kTwoPi * am_rate * t);
      clip.samples[pos + n] = window * am * (voiced + noise_level * noise_state);
    }
    pos += syllable + static_cast<std::size_t>(uniform(0.05, 0.3) * rate);
  }

  double energy = 0.0;
  for (double v : clip.samples) energy += v * v;
  if (energy > 0.0) {
    const double gain = 0.1 / std::sqrt(energy / static_cast<double>(length));
    for (double& v : clip.samples) v *= gain;
  }
  return clip;
}

std::vector<ReverbSample> generate_corpus(const CorpusOptions& options) {
  if (!(options.t60_min > 0.0) || options.t60_max > 1.0 ||
      options.t60_min > options.t60_max) {
    throw ConfigError("generate_corpus: T60 range must satisfy 0 < min <= max <= 1.0");
  }
  if (options.duration_s <= 0.0 || options.sample_rate <= 0) {
    throw ConfigError("generate_corpus: duration and sample rate must be positive");
  }
  const auto length = static_cast<std::size_t>(
      std::llround(options.duration_s * options.sample_rate));
  std::mt19937_64 rng(mix_seed(options.seed, 0xC0FFEE));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> delay_dist(8, 40);

  std::vector<ReverbSample> corpus;
  corpus.reserve(options.count);
  const double span = options.t60_max - options.t60_min;
  for (std::size_t k = 0; k < options.count; ++k) {
    ReverbSample sample;
    sample.seed = mix_seed(options.seed, k);
    sample.t60 = options.t60_min + span * (k + unit(rng)) / options.count;
    sample.direct_delay = delay_dist(rng);
    sample.direct_gain = 0.3 + 0.7 * unit(rng);
    char id[32];
    std::snprintf(id, sizeof id, "utt%04zu", k);
    sample.id = id;

    const AudioClip clean =
        speech_like_source(length, options.sample_rate, sample.seed);
    const auto rir_len = sample.direct_delay +
                         static_cast<std::size_t>(std::ceil(
                             sample.t60 * options.sample_rate)) + 1;
    const Rir h = synth_rir(sample.t60, sample.direct_delay, sample.direct_gain,
                            options.sample_rate, rir_len,
                            mix_seed(sample.seed, 1), options.tail_gain);
    auto [x, dir] = apply_rir(clean, h);
    sample.input = std::move(x);
    sample.target = std::move(dir);
    corpus.push_back(std::move(sample));
  }
  return corpus;
}

void write_manifest(const std::vector<ManifestEntry>& entries,
                    const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot create " + path.string());
  for (const auto& e : entries) {
    nlohmann::json j;
    j["path_in"] = e.path_in.generic_string();
    j["path_target"] = e.path_target.generic_string();
    j["t60"] = e.t60;
    j["seed"] = e.seed;
    os << j.dump() << '\n';
  }
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.path_in = j.at("path_in").get<std::string>();
      e.path_target = j.at("path_target").get<std::string>();
      e.t60 = j.at("t60").get<double>();
      e.seed = j.value("seed", std::uint64_t{0});
      entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " +
                    ex.what());
    }
  }
  return entries;
}

std::filesystem::path write_corpus(const std::vector<ReverbSample>& corpus,
                                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<ManifestEntry> entries;
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    const auto& s = corpus[k];
    const std::string stem = s.id.empty() ? "utt" + std::to_string(k) : s.id;
    ManifestEntry e{stem + "_in.wav", stem + "_target.wav", s.t60, s.seed};
    write_wav(dir / e.path_in, s.input);
    write_wav(dir / e.path_target, s.target);
    entries.push_back(std::move(e));
  }
  const auto manifest = dir / "manifest.jsonl";
  write_manifest(entries, manifest);
  return manifest;
}

std::vector<ReverbSample> load_corpus(const std::filesystem::path& manifest) {
  const auto base = manifest.parent_path();
  auto resolve = [&](const std::filesystem::path& p) {
    return p.is_absolute() ? p : base / p;
  };
  std::vector<ReverbSample> corpus;
  for (const auto& e : read_manifest(manifest)) {
    ReverbSample s;
    s.input = read_wav(resolve(e.path_in));
    s.target = read_wav(resolve(e.path_target));
    if (s.input.size() != s.target.size() ||
        s.input.sample_rate != s.target.sample_rate) {
      throw IoError("manifest entry " + e.path_in.string() +
                    ": input and target differ in length or sample rate");
    }
    s.t60 = e.t60;
    s.seed = e.seed;
    s.id = e.path_in.stem().string();
    corpus.push_back(std::move(s));
  }
  return corpus;
}

}  // namespace wdtcn
