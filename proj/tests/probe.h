#pragma once

// Receptive field measured from gradient support: differentiate one frame of
// the mask logits w.r.t. the encoded features and count the frames that get
// a nonzero gradient. Normalization statistics and attention weights are
// held constant, since they couple every frame to every other.

#include <cstddef>

#include "oracles.h"
#include "wdtcn/model.h"
#include "wdtcn/ops.h"

namespace oracle {

struct ProbeResult {
  std::size_t width = 0;
  std::size_t first = 0, last = 0;
  std::size_t frames = 0, center = 0;
};

inline ProbeResult probe_receptive_field(const wdtcn::ModelConfig& config,
                                         std::uint64_t seed) {
  const wdtcn::Model model(config, seed);
  // Frame count large enough that the support cannot touch either edge:
  // twice the summed kernel extents of every block.
  std::size_t extent = 1;
  for (std::size_t b = 0; b < config.block_count(); ++b) {
    std::size_t widest = 0;
    for (std::size_t f : model.block_dilations(b)) widest = std::max(widest, f);
    extent += static_cast<std::size_t>(config.p - 1) * widest;
  }
  ProbeResult r;
  r.frames = 2 * extent + 1;
  r.center = r.frames / 2;

  const auto params = model.bind(false);
  wdtcn::Var w = wdtcn::parameter(
      random_tensor({static_cast<std::size_t>(config.n), r.frames}, seed + 1, 0.0, 1.0));
  wdtcn::ForwardOptions opts;
  opts.detach_global_stats = true;
  const auto trace = model.masknet(w, params, opts);
  wdtcn::backward(wdtcn::sum(wdtcn::column(trace.mask_logits, r.center)));

  const wdtcn::Tensor g = w.grad();
  bool any = false;
  for (std::size_t t = 0; t < r.frames; ++t) {
    bool nonzero = false;
    for (std::size_t c = 0; c < g.dim(0); ++c) nonzero = nonzero || g.at(c, t) != 0.0;
    if (!nonzero) continue;
    if (!any) r.first = t;
    r.last = t;
    any = true;
  }
  r.width = any ? r.last - r.first + 1 : 0;
  return r;
}

}  // namespace oracle
