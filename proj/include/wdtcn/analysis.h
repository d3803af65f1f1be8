#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "wdtcn/model.h"
#include "wdtcn/signal.h"

namespace wdtcn {

class UnsupportedVariantError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Attention weights of one block for one utterance.
struct AttentionRecord {
  std::size_t model_id = 0;
  std::string utterance_id;
  double t60 = 0.0;
  std::size_t block_index = 0;
  std::vector<double> a;  // a[0]: growing-dilation kernel, a[1]: local kernel
};

struct T60BinSummary {
  double bin_lo = 0.0;
  double bin_hi = 0.0;
  std::vector<double> mean_a;
  std::size_t count = 0;  // records in the bin
};

struct BinningResult {
  std::vector<T60BinSummary> bins;     // non-empty bins, increasing T60
  std::vector<AttentionRecord> spill;  // records outside every bin
};

// One record per (utterance, block). Throws UnsupportedVariantError for a
// baseline TCN.
std::vector<AttentionRecord> collect_attention(
    const Model& model, const std::vector<ReverbSample>& corpus,
    std::size_t model_id = 0);

// Six equal-width bins over [0.1, 1.0] s.
std::vector<double> default_t60_edges();

// Bins are [lo, hi) except the last, which is closed. Within a bin the
// weights are averaged over blocks per utterance, then over utterances per
// model, then over models.
BinningResult bin_by_t60(const std::vector<AttentionRecord>& records,
                         const std::vector<double>& edges);

// bin_lo,bin_hi,count,mean_a1,mean_a2 at full precision.
std::string bins_csv(const std::vector<T60BinSummary>& bins);

}  // namespace wdtcn
