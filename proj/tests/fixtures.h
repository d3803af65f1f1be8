#pragma once

#include <string>
#include <vector>

#include "wdtcn/model.h"

namespace fixture {

inline wdtcn::ModelConfig tiny(wdtcn::Variant v, int x, int r, int n, int b, int h) {
  wdtcn::ModelConfig c;
  c.variant = v;
  c.x = x;
  c.r = r;
  c.n = n;
  c.b = b;
  c.h = h;
  return c;
}

// Baseline TCN that reuses the WD model's tensors: the growing-dilation
// kernel becomes the block's only depthwise kernel, the local kernel and the
// attention network are dropped.
inline wdtcn::Model tcn_sharing_kernels(const wdtcn::Model& wd) {
  wdtcn::ModelConfig c = wd.config();
  c.variant = wdtcn::Variant::kTcn;
  std::vector<wdtcn::Model::Parameter> kept;
  for (const auto& p : wd.parameters()) {
    const bool local = p.name.ends_with(".dconv.1");
    const bool se = p.name.find(".se.") != std::string::npos;
    if (!local && !se) kept.push_back(p);
  }
  return wdtcn::Model(c, std::move(kept));
}

}  // namespace fixture
