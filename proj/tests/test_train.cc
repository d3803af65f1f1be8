#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.h"
#include "oracles.h"
#include "wdtcn/checkpoint.h"
#include "wdtcn/optim.h"
#include "wdtcn/sisdr.h"
#include "wdtcn/train.h"

using namespace wdtcn;
namespace fs = std::filesystem;

namespace {

std::vector<ReverbSample> small_corpus(std::size_t count, double seconds, std::uint64_t seed) {
  CorpusOptions o;
  o.count = count;
  o.duration_s = seconds;
  o.seed = seed;
  return generate_corpus(o);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("adam basics") {
  std::vector<Tensor> p{Tensor::vector({1.0, -2.0})};
  AdamState st;
  adam_step(p, std::vector<Tensor>{Tensor::zeros({2})}, st, 0.1);
  CHECK(p[0].values() == std::vector<double>{1.0, -2.0});

  // Constant gradient: bias correction makes every step exactly lr * sign(g)
  // up to eps, which the closed form m_hat = g, v_hat = g^2 gives.
  std::vector<Tensor> q{Tensor::vector({0.0, 0.0})};
  AdamState s2;
  const double lr = 0.01;
  for (int k = 0; k < 200; ++k) {
    const Tensor before = q[0];
    adam_step(q, std::vector<Tensor>{Tensor::vector({0.3, -5.0})}, s2, lr);
    CHECK(std::abs((before[0] - q[0][0]) - lr * 0.3 / (0.3 + 1e-8)) < 1e-12);
    CHECK(std::abs((q[0][1] - before[1]) - lr * 5.0 / (5.0 + 1e-8)) < 1e-12);
  }
  CHECK(s2.step == 200);

  std::vector<Tensor> bad{Tensor::zeros({3})};
  CHECK_THROWS_AS(adam_step(bad, std::vector<Tensor>{Tensor::zeros({2})}, st, 0.1),
                  DimensionError);
}

TEST_CASE("gradient clipping") {
  std::vector<Tensor> g{Tensor::vector({3.0, 0.0}), Tensor::vector({4.0})};
  CHECK(clip_global_norm(g, 1.0) == 5.0);
  CHECK(std::abs(g[0][0] - 0.6) < 1e-15);
  CHECK(std::abs(g[1][0] - 0.8) < 1e-15);
  std::vector<Tensor> small{Tensor::vector({0.1})};
  clip_global_norm(small, 1.0);
  CHECK(small[0][0] == 0.1);
}

TEST_CASE("plateau schedule traces") {
  PlateauSchedule a;
  for (double l : {5.0, 4.0, 3.0, 2.0, 1.0, 0.5}) CHECK_FALSE(a.update(l));
  CHECK(a.lr() == 1e-3);

  PlateauSchedule b;
  CHECK_FALSE(b.update(5));
  CHECK_FALSE(b.update(5));
  CHECK_FALSE(b.update(5));
  CHECK(b.update(5));
  CHECK(b.lr() == 5e-4);

  PlateauSchedule c;
  CHECK_FALSE(c.update(5));
  CHECK_FALSE(c.update(5));
  CHECK_FALSE(c.update(5));
  CHECK_FALSE(c.update(4.999));
  CHECK(c.halvings() == 0);

  PlateauSchedule d(0.003, 2);
  for (int k = 0; k < 41; ++k) d.update(1.0);
  CHECK(d.halvings() == 20);
  CHECK(d.lr() == 0.003 * std::pow(0.5, 20));
}

TEST_CASE("zero learning rate leaves parameters bit-identical") {
  const auto corpus = small_corpus(4, 0.25, 3);
  Model m(fixture::tiny(Variant::kWdTcn, 2, 1, 8, 6, 8), 4);
  const Model before = m;
  TrainConfig tc;
  tc.epochs = 3;
  tc.lr_initial = 0.0;
  tc.clip_seconds = 0.25;
  train(m, corpus, tc);
  for (std::size_t i = 0; i < m.parameters().size(); ++i) {
    CHECK(m.parameters()[i].value == before.parameters()[i].value);
  }
}

TEST_CASE("batch larger than the corpus") {
  const auto corpus = small_corpus(3, 0.25, 5);
  Model m(fixture::tiny(Variant::kTcn, 1, 1, 8, 6, 8), 4);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 10;
  tc.clip_seconds = 0.25;
  tc.validation_fraction = 0.0;
  const TrainState st = train(m, corpus, tc);
  CHECK(st.history.size() == 2);
  CHECK(st.adam.step == 2);
  CHECK(st.train_indices.size() == 3);
}

TEST_CASE("validation split and clip fitting") {
  const auto corpus = small_corpus(16, 0.3, 6);
  Model m(fixture::tiny(Variant::kTcn, 1, 1, 4, 4, 4), 1);
  TrainConfig tc;
  tc.epochs = 1;
  tc.clip_seconds = 0.2;
  const TrainState st = train(m, corpus, tc);
  CHECK(st.val_indices.size() == 2);
  CHECK(st.train_indices.size() == 14);
  CHECK(st.adam.step == 4);

  CHECK_THROWS_AS(train(m, {}, tc), TrainingError);
  tc.batch_size = 0;
  CHECK_THROWS_AS(train(m, corpus, tc), ConfigError);
}

TEST_CASE("threaded batches match the serial run bit for bit") {
  const auto corpus = small_corpus(6, 0.25, 8);
  TrainConfig tc;
  tc.epochs = 2;
  tc.clip_seconds = 0.25;
  tc.seed = 3;
  Model a(fixture::tiny(Variant::kWdTcn, 2, 1, 8, 6, 8), 2);
  Model b = a;
  const auto sa = train(a, corpus, tc);
  tc.threads = 3;
  const auto sb = train(b, corpus, tc);
  CHECK(loss_curve_csv(sa.history) == loss_curve_csv(sb.history));
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    CHECK(a.parameters()[i].value == b.parameters()[i].value);
  }
}

TEST_CASE("resume reproduces the next epochs exactly") {
  const auto corpus = small_corpus(6, 0.25, 9);
  const fs::path dir = fs::temp_directory_path() / "wdtcn_test_resume";
  fs::remove_all(dir);
  TrainConfig tc;
  tc.clip_seconds = 0.25;
  tc.seed = 12;
  tc.lr_halve_patience = 1;

  Model full(fixture::tiny(Variant::kWdTcn, 2, 1, 8, 6, 8), 6);
  Model part = full;
  tc.epochs = 4;
  const TrainState straight = train(full, corpus, tc);

  tc.epochs = 2;
  tc.out_dir = dir;
  train(part, corpus, tc);
  auto [restored, state] = train_state_from_json(read_json_file(dir / "state.json"));
  tc.epochs = 4;
  tc.out_dir.clear();
  const TrainState resumed = train(restored, corpus, tc, std::move(state));

  CHECK(loss_curve_csv(resumed.history) == loss_curve_csv(straight.history));
  for (std::size_t i = 0; i < full.parameters().size(); ++i) {
    CHECK(restored.parameters()[i].value == full.parameters()[i].value);
  }
  CHECK(fs::exists(dir / "best.ckpt.json"));
  CHECK(slurp(dir / "loss_curve.csv").rfind("epoch,train_loss_db,val_loss_db,lr\n", 0) == 0);
}

TEST_CASE("learning rate stays an exact power-of-two fraction") {
  const auto corpus = small_corpus(4, 0.25, 10);
  Model m(fixture::tiny(Variant::kTcn, 1, 1, 4, 4, 4), 1);
  TrainConfig tc;
  tc.epochs = 12;
  tc.clip_seconds = 0.25;
  tc.lr_halve_patience = 1;
  tc.lr_initial = 0.01;  // large enough that validation loss plateaus
  const TrainState st = train(m, corpus, tc);
  for (const auto& r : st.history) {
    const double k = std::log2(tc.lr_initial / r.lr);
    CHECK(k == std::round(k));
    CHECK(r.lr == std::ldexp(tc.lr_initial, -static_cast<int>(std::round(k))));
  }
}

TEST_CASE("toy training lowers the loss") {
  const auto corpus = small_corpus(8, 0.5, 14);
  Model m(fixture::tiny(Variant::kWdTcn, 2, 2, 64, 32, 64), 14);
  TrainConfig tc;
  tc.epochs = 30;
  tc.clip_seconds = 0.5;
  tc.seed = 14;
  const TrainState st = train(m, corpus, tc);
  CHECK(st.history.back().train_loss_db < st.history.front().train_loss_db);
}

TEST_CASE("single-sample overfit") {
  const auto corpus = small_corpus(5, 0.25, 21);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CAPTURE(seed);
    const std::vector<ReverbSample> one{corpus[seed - 1]};
    Model m(fixture::tiny(Variant::kWdTcn, 2, 2, 32, 16, 32), seed);
    const double start = evaluate_loss(m, one, {0});
    TrainConfig tc;
    tc.epochs = 200;  // one step per epoch
    tc.clip_seconds = 0.25;
    tc.seed = seed;
    tc.validation_fraction = 0.0;
    train(m, one, tc);
    CHECK(start - evaluate_loss(m, one, {0}) >= 5.0);
  }
}

TEST_CASE("non-finite loss aborts with the epoch and batch") {
  auto corpus = small_corpus(2, 0.25, 2);
  corpus[1].input.samples[10] = std::nan("");
  Model m(fixture::tiny(Variant::kTcn, 1, 1, 4, 4, 4), 1);
  TrainConfig tc;
  tc.epochs = 1;
  tc.clip_seconds = 0.25;
  tc.validation_fraction = 0.0;
  tc.batch_size = 1;
  try {
    train(m, corpus, tc);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch 1") != std::string::npos);
    CHECK(msg.find("batch") != std::string::npos);
  }
}
