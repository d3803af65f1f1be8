#include "wdtcn/model.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <random>
#include <string>

#include "wdtcn/ops.h"

namespace wdtcn {

std::string to_string(Variant v) {
  return v == Variant::kTcn ? "tcn" : "wd-tcn";
}

Variant parse_variant(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "tcn") return Variant::kTcn;
  if (lower == "wd-tcn" || lower == "wdtcn") return Variant::kWdTcn;
  throw ConfigError("unknown model variant '" + std::string(text) +
                    "' (expected tcn or wd-tcn)");
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be >= 1");
  };
  positive(x, "X");
  positive(r, "R");
  positive(n, "N");
  positive(b, "B");
  positive(h, "H");
  positive(p, "P");
  positive(l_bl, "L_BL");
  if (p % 2 == 0) {
    throw ConfigError("depthwise kernel size P must be odd, got " +
                      std::to_string(p));
  }
  if (l_bl % 2 != 0) {
    throw ConfigError("block length L_BL must be even, got " +
                      std::to_string(l_bl));
  }
  if (x > 30) throw ConfigError("X too large for the dilation schedule");
  if (variant == Variant::kWdTcn && q != 2) {
    throw ConfigError("WD-TCN supports Q = 2 parallel depthwise convs, got " +
                      std::to_string(q));
  }
}

std::size_t ModelConfig::dconv_count() const {
  return variant == Variant::kWdTcn ? static_cast<std::size_t>(q) : 1;
}

std::vector<std::size_t> dilation_schedule(int x, int r) {
  if (x < 1 || r < 1) throw ConfigError("dilation_schedule: X and R must be >= 1");
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(x) * r);
  for (int rep = 0; rep < r; ++rep) {
    for (int i = 0; i < x; ++i) out.push_back(std::size_t{1} << i);
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> wd_dilation_pairs(int x, int r) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t f : dilation_schedule(x, r)) out.emplace_back(1, f);
  return out;
}

std::size_t receptive_field(const ModelConfig& config) {
  config.validate();
  const std::size_t span = (std::size_t{1} << config.x) - 1;
  return 1 + static_cast<std::size_t>(config.r) * (config.p - 1) * span;
}

std::size_t ParamSpec::count() const {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::vector<ParamSpec> parameter_layout(const ModelConfig& c) {
  c.validate();
  const auto N = static_cast<std::size_t>(c.n);
  const auto B = static_cast<std::size_t>(c.b);
  const auto H = static_cast<std::size_t>(c.h);
  const auto P = static_cast<std::size_t>(c.p);
  const auto L = static_cast<std::size_t>(c.l_bl);
  const auto Q = static_cast<std::size_t>(c.q);
  const auto S = static_cast<std::size_t>(kSqueezeDim);
  using K = InitKind;

  std::vector<ParamSpec> out;
  out.push_back({"encoder.weight", {N, 1, L}, K::kFanInUniform, L});
  out.push_back({"bottleneck.norm.gain", {N}, K::kOnes, 1});
  out.push_back({"bottleneck.norm.bias", {N}, K::kZeros, 1});
  out.push_back({"bottleneck.pconv", {N, B}, K::kFanInUniform, N});
  for (std::size_t i = 0; i < c.block_count(); ++i) {
    const std::string pre = "blocks." + std::to_string(i) + ".";
    out.push_back({pre + "in_pconv", {B, H}, K::kFanInUniform, B});
    out.push_back({pre + "prelu1", {1}, K::kPrelu, 1});
    out.push_back({pre + "norm1.gain", {H}, K::kOnes, 1});
    out.push_back({pre + "norm1.bias", {H}, K::kZeros, 1});
    for (std::size_t q = 0; q < c.dconv_count(); ++q) {
      out.push_back({pre + "dconv." + std::to_string(q), {H, P},
                     K::kFanInUniform, P});
    }
    if (c.variant == Variant::kWdTcn) {
      out.push_back({pre + "se.squeeze.weight", {S, H}, K::kFanInUniform, H});
      out.push_back({pre + "se.squeeze.bias", {S}, K::kSqueezeBias, 1});
      // Zero excite layer: attention starts at exactly 1/Q per kernel.
      out.push_back({pre + "se.excite.weight", {Q, S}, K::kZeros, S});
      out.push_back({pre + "se.excite.bias", {Q}, K::kZeros, 1});
    }
    out.push_back({pre + "prelu2", {1}, K::kPrelu, 1});
    out.push_back({pre + "norm2.gain", {H}, K::kOnes, 1});
    out.push_back({pre + "norm2.bias", {H}, K::kZeros, 1});
    out.push_back({pre + "out_pconv", {H, B}, K::kFanInUniform, H});
  }
  out.push_back({"mask.prelu", {1}, K::kPrelu, 1});
  out.push_back({"mask.pconv", {B, N}, K::kFanInUniform, B});
  out.push_back({"decoder.weight", {N, L}, K::kFanInUniform, N});
  return out;
}

ParameterReport count_parameters(const ModelConfig& config) {
  // Group by submodule: block parameters are pooled across all blocks.
  auto group_of = [](const std::string& name) -> std::string {
    if (name.rfind("blocks.", 0) != 0) {
      for (std::string_view suffix : {".weight", ".gain", ".bias"}) {
        if (name.ends_with(suffix)) return name.substr(0, name.size() - suffix.size());
      }
      return name;
    }
    const std::string rest = name.substr(name.find('.', 7) + 1);
    if (rest.rfind("dconv", 0) == 0) return std::string("blocks.dconv");
    if (rest.rfind("se.", 0) == 0) return std::string("blocks.se");
    if (rest.rfind("norm", 0) == 0) return std::string("blocks.norm");
    if (rest.rfind("prelu", 0) == 0) return std::string("blocks.prelu");
    return "blocks." + rest;
  };
  ParameterReport report;
  std::map<std::string, std::size_t> position;
  for (const auto& spec : parameter_layout(config)) {
    const std::string group = group_of(spec.name);
    auto [it, inserted] = position.try_emplace(group, report.items.size());
    if (inserted) report.items.push_back({group, 0});
    report.items[it->second].count += spec.count();
    report.total += spec.count();
  }
  return report;
}

// ---------------------------------------------------------------------------

namespace {

// FNV-1a of the name, folded into the seed with a SplitMix64 finalizer.
std::uint64_t tensor_seed(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : name) h = (h ^ c) * 0x100000001B3ULL;
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (h + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

// Each tensor draws from its own stream keyed by name, so a TCN and a WD-TCN
// built from the same seed start with identical shared tensors.
Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (auto& spec : parameter_layout(config_)) {
    std::mt19937_64 rng(tensor_seed(seed, spec.name));
    Tensor t(spec.shape);
    switch (spec.init) {
      case InitKind::kFanInUniform: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
        for (double& v : t.data()) v = bound * unit(rng);
        break;
      }
      case InitKind::kZeros:
        break;
      case InitKind::kOnes:
        t.fill(1.0);
        break;
      case InitKind::kPrelu:
        t.fill(kPreluInit);
        break;
      case InitKind::kSqueezeBias:
        t.fill(kSqueezeBiasInit);
        break;
    }
    params_.push_back({std::move(spec.name), std::move(t)});
  }
  build_index();
}

Model::Model(const ModelConfig& config, std::vector<Parameter> parameters)
    : config_(config), params_(std::move(parameters)) {
  const auto layout = parameter_layout(config_);
  if (layout.size() != params_.size()) {
    throw ConfigError("model expects " + std::to_string(layout.size()) +
                      " parameter tensors, got " +
                      std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout[i].name != params_[i].name ||
        layout[i].shape != params_[i].value.shape()) {
      throw ConfigError("parameter " + std::to_string(i) + " should be " +
                        layout[i].name + " " + shape_string(layout[i].shape) +
                        ", got " + params_[i].name + " " +
                        shape_string(params_[i].value.shape()));
    }
  }
  build_index();
}

std::size_t Model::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw std::out_of_range("no parameter named " + std::string(name));
}

void Model::build_index() {
  encoder_ = index_of("encoder.weight");
  bn_gain_ = index_of("bottleneck.norm.gain");
  bn_bias_ = index_of("bottleneck.norm.bias");
  bn_pconv_ = index_of("bottleneck.pconv");
  mask_prelu_ = index_of("mask.prelu");
  mask_pconv_ = index_of("mask.pconv");
  decoder_ = index_of("decoder.weight");
  const auto dilations = dilation_schedule(config_.x, config_.r);
  blocks_.clear();
  for (std::size_t i = 0; i < config_.block_count(); ++i) {
    const std::string pre = "blocks." + std::to_string(i) + ".";
    BlockIndex b{};
    b.in_pconv = index_of(pre + "in_pconv");
    b.prelu1 = index_of(pre + "prelu1");
    b.norm1_gain = index_of(pre + "norm1.gain");
    b.norm1_bias = index_of(pre + "norm1.bias");
    for (std::size_t q = 0; q < config_.dconv_count(); ++q) {
      b.dconv.push_back(index_of(pre + "dconv." + std::to_string(q)));
      // Kernel 0 follows the schedule; the extra kernels stay local.
      b.dilation.push_back(q == 0 ? dilations[i] : 1);
    }
    if (config_.variant == Variant::kWdTcn) {
      b.se = SeIndex{index_of(pre + "se.squeeze.weight"),
                     index_of(pre + "se.squeeze.bias"),
                     index_of(pre + "se.excite.weight"),
                     index_of(pre + "se.excite.bias")};
    }
    b.prelu2 = index_of(pre + "prelu2");
    b.norm2_gain = index_of(pre + "norm2.gain");
    b.norm2_bias = index_of(pre + "norm2.bias");
    b.out_pconv = index_of(pre + "out_pconv");
    blocks_.push_back(std::move(b));
  }
}

std::vector<Var> Model::bind(bool requires_grad) const {
  std::vector<Var> out;
  out.reserve(params_.size());
  for (const auto& p : params_) {
    out.push_back(requires_grad ? wdtcn::parameter(p.value) : constant(p.value));
  }
  return out;
}

Var Model::encode(const Var& signal, std::span<const Var> p) const {
  return relu(conv1d(signal, p[encoder_], config_.hop(), 0));
}

Var Model::se_attention(const Var& z, std::size_t block,
                        std::span<const Var> p) const {
  const auto& se = blocks_.at(block).se;
  if (!se) throw ConfigError("se_attention: block has no attention network");
  Var pooled = global_avg_pool(z);
  Var squeezed = relu(linear(pooled, p[se->squeeze_w], p[se->squeeze_b]));
  return softmax(linear(squeezed, p[se->excite_w], p[se->excite_b]));
}

BlockOutput Model::conv_block(const Var& y, std::size_t block,
                              std::span<const Var> p,
                              const ForwardOptions& options) const {
  const BlockIndex& b = blocks_.at(block);
  const bool detach = options.detach_global_stats;
  Var hidden = pointwise_conv1d(y, p[b.in_pconv]);
  hidden = prelu(hidden, p[b.prelu1]);
  hidden = global_layer_norm(hidden, p[b.norm1_gain], p[b.norm1_bias],
                             kNormEps, detach);

  BlockOutput out;
  Var mixed;
  if (!b.se) {
    mixed = depthwise_conv1d(hidden, p[b.dconv[0]], b.dilation[0]);
  } else {
    Var weights;
    if (options.pinned_attention) {
      weights = constant(Tensor::vector(*options.pinned_attention));
    } else {
      weights = se_attention(hidden, block, p);
      if (detach) weights = wdtcn::detach(weights);
    }
    std::vector<Var> branches;
    for (std::size_t q = 0; q < b.dconv.size(); ++q) {
      branches.push_back(depthwise_conv1d(hidden, p[b.dconv[q]], b.dilation[q]));
    }
    mixed = weighted_sum(branches, weights);
    out.attention = weights.value();
  }
  mixed = prelu(mixed, p[b.prelu2]);
  mixed = global_layer_norm(mixed, p[b.norm2_gain], p[b.norm2_bias], kNormEps,
                            detach);
  out.output = add(y, pointwise_conv1d(mixed, p[b.out_pconv]));
  return out;
}

ForwardTrace Model::masknet(const Var& w, std::span<const Var> p,
                            const ForwardOptions& options) const {
  ForwardTrace trace;
  trace.encoded = w;
  Var y = global_layer_norm(w, p[bn_gain_], p[bn_bias_], kNormEps,
                            options.detach_global_stats);
  y = pointwise_conv1d(y, p[bn_pconv_]);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    BlockOutput block = conv_block(y, i, p, options);
    y = block.output;
    if (block.attention) trace.attention.push_back(std::move(*block.attention));
  }
  trace.mask_logits = pointwise_conv1d(prelu(y, p[mask_prelu_]), p[mask_pconv_]);
  trace.mask = relu(trace.mask_logits);
  return trace;
}

Var Model::decode(const Var& v, std::span<const Var> p, std::size_t length) const {
  Var signal = transposed_conv1d(v, p[decoder_], config_.hop());
  return trim_columns(signal, length);
}

ForwardResult Model::forward(const AudioClip& x, const ForwardOptions& options,
                             bool requires_grad) const {
  const auto block = static_cast<std::size_t>(config_.l_bl);
  Tensor padded({1, padded_length(x.size(), block)});
  std::copy(x.samples.begin(), x.samples.end(), padded.data().begin());

  ForwardResult result;
  result.params = bind(requires_grad);
  Var w = encode(constant(std::move(padded)), result.params);
  result.trace = masknet(w, result.params, options);
  result.trace.masked = mul(result.trace.mask, w);
  result.estimate = decode(result.trace.masked, result.params, x.size());
  return result;
}

AudioClip ForwardResult::clip(int sample_rate) const {
  const auto data = estimate.value().data();
  return AudioClip{std::vector<double>(data.begin(), data.end()), sample_rate};
}

}  // namespace wdtcn
