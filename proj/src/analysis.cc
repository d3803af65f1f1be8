#include "wdtcn/analysis.h"

#include <cstdio>
#include <map>
#include <tuple>

namespace wdtcn {

std::vector<AttentionRecord> collect_attention(
    const Model& model, const std::vector<ReverbSample>& corpus,
    std::size_t model_id) {
  if (model.config().variant != Variant::kWdTcn) {
    throw UnsupportedVariantError(
        "attention analysis needs a wd-tcn model, got " +
        to_string(model.config().variant));
  }
  std::vector<AttentionRecord> records;
  for (std::size_t u = 0; u < corpus.size(); ++u) {
    const ReverbSample& s = corpus[u];
    const ForwardResult r = model.forward(s.input);
    const std::string id = s.id.empty() ? "utt" + std::to_string(u) : s.id;
    for (std::size_t b = 0; b < r.trace.attention.size(); ++b) {
      const auto& a = r.trace.attention[b];
      records.push_back({model_id, id, s.t60, b,
                         std::vector<double>(a.data().begin(), a.data().end())});
    }
  }
  return records;
}

std::vector<double> default_t60_edges() {
  std::vector<double> edges;
  for (int i = 0; i <= 6; ++i) edges.push_back(0.1 + 0.15 * i);
  edges.back() = 1.0;
  return edges;
}

BinningResult bin_by_t60(const std::vector<AttentionRecord>& records,
                         const std::vector<double>& edges) {
  if (edges.size() < 2) throw ConfigError("bin_by_t60: need at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) {
      throw ConfigError("bin_by_t60: edges must be strictly increasing");
    }
  }
  const std::size_t nbins = edges.size() - 1;
  auto bin_of = [&](double t60) -> std::ptrdiff_t {
    if (t60 < edges.front() || t60 > edges.back()) return -1;
    for (std::size_t i = 0; i < nbins; ++i) {
      if (t60 < edges[i + 1]) return static_cast<std::ptrdiff_t>(i);
    }
    return static_cast<std::ptrdiff_t>(nbins - 1);
  };

  // bin -> model -> utterance -> (sum of a over blocks, block count)
  using UttAcc = std::pair<std::vector<double>, std::size_t>;
  std::vector<std::map<std::size_t, std::map<std::string, UttAcc>>> acc(nbins);
  std::vector<std::size_t> counts(nbins, 0);
  std::size_t width = 0;
  BinningResult result;
  for (const auto& rec : records) {
    const auto bin = bin_of(rec.t60);
    if (bin < 0) {
      result.spill.push_back(rec);
      continue;
    }
    if (width == 0) width = rec.a.size();
    if (rec.a.size() != width) {
      throw DimensionError("bin_by_t60: records carry different weight counts");
    }
    auto& [sum, n] = acc[bin][rec.model_id][rec.utterance_id];
    if (sum.empty()) sum.assign(width, 0.0);
    for (std::size_t q = 0; q < width; ++q) sum[q] += rec.a[q];
    ++n;
    ++counts[bin];
  }

  for (std::size_t i = 0; i < nbins; ++i) {
    if (counts[i] == 0) continue;
    T60BinSummary summary{edges[i], edges[i + 1], std::vector<double>(width, 0.0),
                          counts[i]};
    for (const auto& [model_id, utterances] : acc[i]) {
      std::vector<double> model_mean(width, 0.0);
      for (const auto& [utt, entry] : utterances) {
        const auto& [sum, n] = entry;
        for (std::size_t q = 0; q < width; ++q) model_mean[q] += sum[q] / n;
      }
      for (std::size_t q = 0; q < width; ++q) {
        summary.mean_a[q] += model_mean[q] / utterances.size();
      }
    }
    for (double& v : summary.mean_a) v /= static_cast<double>(acc[i].size());
    result.bins.push_back(std::move(summary));
  }
  return result;
}

std::string bins_csv(const std::vector<T60BinSummary>& bins) {
  std::string out = "bin_lo,bin_hi,count,mean_a1,mean_a2\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& b : bins) {
    out += num(b.bin_lo) + ',' + num(b.bin_hi) + ',' + std::to_string(b.count);
    for (std::size_t q = 0; q < 2; ++q) {
      out += ',' + (q < b.mean_a.size() ? num(b.mean_a[q]) : std::string("0"));
    }
    out += '\n';
  }
  return out;
}

}  // namespace wdtcn
