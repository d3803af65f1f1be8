#include <doctest.h>

#include <cmath>

#include "fixtures.h"
#include "wdtcn/analysis.h"

using namespace wdtcn;

namespace {

AttentionRecord rec(double t60, std::vector<double> a, std::string utt = "u",
                    std::size_t block = 0, std::size_t model = 0) {
  return {model, std::move(utt), t60, block, std::move(a)};
}

}  // namespace

TEST_CASE("collect_attention") {
  CorpusOptions o;
  o.count = 3;
  o.duration_s = 0.2;
  o.seed = 4;
  const auto corpus = generate_corpus(o);
  Model m(fixture::tiny(Variant::kWdTcn, 2, 2, 8, 6, 8), 3);
  for (auto& p : m.parameters()) {
    if (p.name.ends_with("se.excite.weight")) p.value.fill(0.4);
  }
  const auto records = collect_attention(m, corpus);
  CHECK(records.size() == 12);
  for (const auto& r : records) CHECK(std::abs(r.a[0] + r.a[1] - 1.0) < 1e-9);
  const auto again = collect_attention(m, corpus);
  for (std::size_t i = 0; i < records.size(); ++i) CHECK(records[i].a == again[i].a);

  const Model tcn(fixture::tiny(Variant::kTcn, 2, 2, 8, 6, 8), 3);
  CHECK_THROWS_AS(collect_attention(tcn, corpus), UnsupportedVariantError);
}

TEST_CASE("default edges") {
  const auto e = default_t60_edges();
  REQUIRE(e.size() == 7);
  CHECK(e.front() == 0.1);
  CHECK(e.back() == 1.0);
}

TEST_CASE("binning arithmetic") {
  const auto edges = default_t60_edges();
  auto one = bin_by_t60({rec(0.3, {0.2, 0.8})}, edges);
  REQUIRE(one.bins.size() == 1);
  CHECK(one.bins[0].mean_a == std::vector<double>{0.2, 0.8});
  CHECK(one.bins[0].count == 1);

  auto two = bin_by_t60({rec(0.3, {0.3, 0.7}, "a"), rec(0.31, {0.5, 0.5}, "b")}, edges);
  REQUIRE(two.bins.size() == 1);
  CHECK(std::abs(two.bins[0].mean_a[0] - 0.4) < 1e-15);
  CHECK(std::abs(two.bins[0].mean_a[1] - 0.6) < 1e-15);

  std::vector<AttentionRecord> uniform;
  for (int i = 0; i < 12; ++i) uniform.push_back(rec(0.1 + 0.075 * i, {0.5, 0.5}, std::to_string(i)));
  for (const auto& b : bin_by_t60(uniform, edges).bins) {
    CHECK(b.mean_a == std::vector<double>{0.5, 0.5});
  }
}

TEST_CASE("aggregation order: blocks, then utterances, then models") {
  const std::vector<double> edges{0.0, 1.0};
  // Utterance a has two blocks, b has one; per-utterance averaging weighs
  // them equally.
  auto r = bin_by_t60({rec(0.5, {0.0, 1.0}, "a", 0), rec(0.5, {0.4, 0.6}, "a", 1),
                       rec(0.5, {1.0, 0.0}, "b", 0)},
                      edges);
  CHECK(std::abs(r.bins[0].mean_a[0] - 0.6) < 1e-15);
  CHECK(r.bins[0].count == 3);

  // Model 0 contributes two utterances, model 1 one; models weigh equally.
  auto m = bin_by_t60({rec(0.5, {0.2, 0.8}, "a", 0, 0), rec(0.5, {0.4, 0.6}, "b", 0, 0),
                       rec(0.5, {0.9, 0.1}, "a", 0, 1)},
                      edges);
  CHECK(std::abs(m.bins[0].mean_a[0] - 0.6) < 1e-15);
}

TEST_CASE("binning partitions records and reports spill") {
  const auto edges = default_t60_edges();
  std::vector<AttentionRecord> records{rec(0.05, {0.5, 0.5}, "lo"), rec(0.1, {0.5, 0.5}, "x"),
                                       rec(1.0, {0.5, 0.5}, "y"), rec(1.2, {0.5, 0.5}, "hi"),
                                       rec(0.55, {0.5, 0.5}, "z")};
  const auto r = bin_by_t60(records, edges);
  std::size_t total = r.spill.size();
  for (const auto& b : r.bins) total += b.count;
  CHECK(total == records.size());
  CHECK(r.spill.size() == 2);
  CHECK(r.bins.front().bin_lo == 0.1);
  CHECK(r.bins.back().bin_hi == 1.0);  // last bin is closed

  CHECK_THROWS_AS(bin_by_t60(records, {0.5}), ConfigError);
  CHECK_THROWS_AS(bin_by_t60(records, {0.5, 0.4}), ConfigError);
}

TEST_CASE("bins csv") {
  const auto r = bin_by_t60({rec(0.3, {0.25, 0.75})}, default_t60_edges());
  const std::string csv = bins_csv(r.bins);
  CHECK(csv.rfind("bin_lo,bin_hi,count,mean_a1,mean_a2\n", 0) == 0);
  CHECK(csv.find(",1,0.25,0.75\n") != std::string::npos);
}
