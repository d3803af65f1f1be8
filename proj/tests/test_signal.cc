#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "oracles.h"
#include "wdtcn/signal.h"
#include "wdtcn/wav.h"

using namespace wdtcn;
namespace fs = std::filesystem;

namespace {

AudioClip clip(std::vector<double> v) { return {std::move(v), kDefaultSampleRate}; }

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("wdtcn_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

double rms(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
  double s = 0.0;
  for (std::size_t i = lo; i < hi; ++i) s += v[i] * v[i];
  return std::sqrt(s / static_cast<double>(hi - lo));
}

}  // namespace

TEST_CASE("framing examples") {
  const Tensor f = frame_signal(clip({0, 1, 2, 3, 4, 5, 6, 7}), 4);
  REQUIRE(f.dim(0) == 3);
  CHECK(f.values() == std::vector<double>{0, 1, 2, 3, 2, 3, 4, 5, 4, 5, 6, 7});

  // A signal exactly one block long needs no padding and yields one block.
  CHECK(frame_signal(clip(std::vector<double>(16, 1.0)), 16).dim(0) == 1);
  CHECK(frame_count(16, 16) == 1);
  CHECK(frame_count(17, 16) == 2);
  CHECK(padded_length(17, 16) == 24);

  const Tensor k = frame_signal(clip(std::vector<double>(40, 0.3)), 8);
  for (std::size_t l = 0; l < k.dim(0); ++l)
    for (std::size_t j = 0; j < 8; ++j) CHECK(k.at(l, j) == 0.3);

  CHECK_THROWS_AS(frame_signal(clip({1, 2, 3}), 3), ConfigError);
}

TEST_CASE("overlap-add of framing doubles interior samples exactly") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const std::size_t block = 4 + 4 * s;
    const auto x = oracle::random_vector(100 + 7 * s, s);
    const AudioClip y = overlap_add(frame_signal(clip(x), block));
    for (std::size_t i = block / 2; i + block / 2 < x.size(); ++i) CHECK(y.samples[i] == 2 * x[i]);

    Tensor half = frame_signal(clip(x), block);
    half *= 0.5;
    const AudioClip r = overlap_add(half);
    for (std::size_t i = block / 2; i + block / 2 < x.size(); ++i) CHECK(r.samples[i] == x[i]);
  }
  const Tensor one = Tensor::matrix(1, 4, {1, 2, 3, 4});
  CHECK(overlap_add(one).samples == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("overlap-add is the adjoint of framing") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const std::size_t block = 8, len = 8 + 4 * (5 + s);
    const auto x = oracle::random_vector(len, s);
    const Tensor fx = frame_signal(clip(x), block);
    const Tensor y = oracle::random_tensor(fx.shape(), s + 9);
    const AudioClip aty = overlap_add(y);
    double rhs = 0.0;
    for (std::size_t i = 0; i < len; ++i) rhs += x[i] * aty.samples[i];
    CHECK(std::abs(oracle::inner(fx, y) - rhs) < 1e-12);
  }
}

TEST_CASE("rir envelope and taps") {
  CHECK(rir_envelope(0, 8000, 0.5) == 1.0);
  CHECK(std::abs(rir_envelope(4000, 8000, 0.5) - 1e-3) < 1e-15);

  const Rir h = synth_rir(0.4, 20, 0.7, 8000, 4000, 5);
  REQUIRE(h.taps.size() == 4000);
  CHECK(h.taps[20] == 0.7);
  for (std::size_t i = 0; i < 20; ++i) CHECK(h.taps[i] == 0.0);

  const Rir other = synth_rir(0.4, 20, 0.7, 8000, 4000, 6);
  CHECK(other.taps[20] == h.taps[20]);
  CHECK(other.taps != h.taps);
  CHECK(synth_rir(0.4, 20, 0.7, 8000, 4000, 5).taps == h.taps);

  auto tail_energy = [](double t60) {
    const Rir r = synth_rir(t60, 10, 1.0, 8000, 2000, 3);
    double e = 0.0;
    for (std::size_t i = 11; i < r.taps.size(); ++i) e += r.taps[i] * r.taps[i];
    return e;
  };
  CHECK(tail_energy(1e-4) < 1e-6 * tail_energy(0.5));
}

TEST_CASE("rir tail decays") {
  for (double t60 : {0.2, 0.6, 1.0}) {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const std::size_t tau = 15;
      const auto w = static_cast<std::size_t>(8000 * t60 / 4);
      const Rir h = synth_rir(t60, tau, 0.8, 8000, tau + 2 * w + 1, s);
      CHECK(rms(h.taps, tau + w, tau + 2 * w) < rms(h.taps, tau + 1, tau + w));
    }
  }
}

TEST_CASE("apply_rir") {
  const AudioClip s = clip(oracle::random_vector(300, 1));
  Rir unit{{1.0}, 0, 1.0, 0.0};
  auto [x0, d0] = apply_rir(s, unit);
  CHECK(x0.samples == s.samples);
  CHECK(d0.samples == s.samples);

  Rir pure{std::vector<double>(13, 0.0), 12, 0.6, 0.0};
  pure.taps[12] = 0.6;
  auto [x1, d1] = apply_rir(s, pure);
  CHECK(x1.samples == d1.samples);

  for (std::uint64_t k = 0; k < 5; ++k) {
    const Rir h = synth_rir(0.1 + 0.2 * k, 8 + k, 0.5, 8000, 900, k);
    auto [x, d] = apply_rir(s, h);
    const auto ref = oracle::convolve(s.samples, h.taps);
    double worst = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(x.samples[i] - ref[i]));
    CHECK(worst < 1e-12);
    CHECK(x.size() == s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(d.samples[i] == (i >= h.direct_delay ? 0.5 * s.samples[i - h.direct_delay] : 0.0));
    }
  }
}

TEST_CASE("wav round trip") {
  const fs::path dir = scratch_dir("wav");
  auto v = oracle::random_vector(5000, 4);
  for (auto& x : v) x = std::clamp(0.3 * x, -1.0, 32767.0 / 32768.0);
  const AudioClip a{v, 16000};
  write_wav(dir / "a.wav", a);
  const AudioClip b = read_wav(dir / "a.wav");
  CHECK(b.sample_rate == 16000);
  REQUIRE(b.size() == a.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.samples[i] - b.samples[i]));
  CHECK(worst <= std::ldexp(1.0, -15));
}

TEST_CASE("wav format errors name the field") {
  const fs::path dir = scratch_dir("wavbad");
  write_wav(dir / "ok.wav", clip({0.1, -0.2, 0.3}));
  std::string bytes;
  {
    std::ifstream in(dir / "ok.wav", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write_bytes = [&](const fs::path& p, const std::string& b) {
    std::ofstream(p, std::ios::binary) << b;
  };

  std::string stereo = bytes;
  stereo[22] = 2;  // channel count in the fmt chunk
  write_bytes(dir / "stereo.wav", stereo);
  try {
    read_wav(dir / "stereo.wav");
    FAIL("stereo file accepted");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("channel") != std::string::npos);
  }

  write_bytes(dir / "short.wav", bytes.substr(0, 20));
  CHECK_THROWS_AS(read_wav(dir / "short.wav"), IoError);

  std::string riff = bytes;
  riff[0] = 'X';
  write_bytes(dir / "riff.wav", riff);
  try {
    read_wav(dir / "riff.wav");
    FAIL("bad magic accepted");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("RIFF") != std::string::npos);
  }
  CHECK_THROWS_AS(read_wav(dir / "missing.wav"), IoError);
}

TEST_CASE("corpus generation") {
  CorpusOptions o;
  o.count = 8;
  o.seed = 77;
  const auto a = generate_corpus(o);
  const auto b = generate_corpus(o);
  REQUIRE(a.size() == 8);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].input.samples == b[i].input.samples);
    CHECK(a[i].target.samples == b[i].target.samples);
    CHECK(a[i].t60 == b[i].t60);
    CHECK(a[i].input.size() == 32000);
    CHECK(a[i].target.size() == 32000);
    CHECK(a[i].direct_delay >= 8);
    CHECK(a[i].direct_delay <= 40);
    CHECK(a[i].direct_gain >= 0.3);
    CHECK(a[i].direct_gain <= 1.0);
  }
  o.seed = 78;
  CHECK(generate_corpus(o)[0].input.samples != a[0].input.samples);

  o.count = 60;
  o.duration_s = 0.05;
  const auto many = generate_corpus(o);
  std::vector<int> hist(6, 0);
  for (const auto& s : many) {
    CHECK(s.t60 >= 0.1);
    CHECK(s.t60 <= 1.0);
    ++hist[std::min<std::size_t>(5, static_cast<std::size_t>((s.t60 - 0.1) / 0.15))];
  }
  for (int h : hist) CHECK(h == 10);

  o.t60_max = 1.5;
  CHECK_THROWS_AS(generate_corpus(o), ConfigError);
}

TEST_CASE("speech-like source") {
  const AudioClip s = speech_like_source(16000, 8000, 3);
  CHECK(s.size() == 16000);
  CHECK(std::abs(rms(s.samples, 0, s.size()) - 0.1) < 1e-12);
  CHECK(speech_like_source(16000, 8000, 3).samples == s.samples);
}

TEST_CASE("corpus manifest round trip") {
  const fs::path dir = scratch_dir("manifest");
  CorpusOptions o;
  o.count = 3;
  o.duration_s = 0.25;
  o.seed = 5;
  const auto corpus = generate_corpus(o);
  const fs::path manifest = write_corpus(corpus, dir);
  const auto entries = read_manifest(manifest);
  REQUIRE(entries.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(entries[i].t60 == corpus[i].t60);
    CHECK(entries[i].seed == corpus[i].seed);
  }
  const auto loaded = load_corpus(manifest);
  REQUIRE(loaded.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < corpus[i].input.size(); ++k) {
      CHECK(std::abs(loaded[i].input.samples[k] - corpus[i].input.samples[k]) <=
            std::ldexp(1.0, -15));
    }
  }
  CHECK_THROWS(load_corpus(dir / "nope.jsonl"));
}

TEST_CASE("fit_length pads and truncates both clips") {
  ReverbSample s;
  s.input = clip({1, 2, 3});
  s.target = clip({4, 5, 6});
  CHECK(fit_length(s, 5).input.samples == std::vector<double>{1, 2, 3, 0, 0});
  CHECK(fit_length(s, 2).target.samples == std::vector<double>{4, 5});
}
