#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wdtcn/autodiff.h"
#include "wdtcn/signal.h"

namespace wdtcn {

enum class Variant { kTcn, kWdTcn };

std::string to_string(Variant v);
// Accepts "tcn" and "wd-tcn" (case-insensitive); throws ConfigError otherwise.
Variant parse_variant(std::string_view text);

// Hyperparameters of the encoder / mask network / decoder stack.
struct ModelConfig {
  Variant variant = Variant::kWdTcn;
  int x = 8;      // conv blocks per stack
  int r = 4;      // stack repeats
  int n = 512;    // encoder channels
  int b = 128;    // bottleneck channels
  int h = 512;    // channels inside a block
  int p = 3;      // depthwise kernel size
  int l_bl = 16;  // encoder kernel / block length
  int q = 2;      // parallel depthwise convs (WD-TCN only)

  void validate() const;
  std::size_t block_count() const { return static_cast<std::size_t>(x) * r; }
  std::size_t hop() const { return static_cast<std::size_t>(l_bl) / 2; }
  // Depthwise kernels per block: 1 for TCN, q for WD-TCN.
  std::size_t dconv_count() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Hidden size of the squeeze layer in the attention network.
inline constexpr int kSqueezeDim = 4;
inline constexpr double kNormEps = 1e-8;
inline constexpr double kPreluInit = 0.25;
// Squeeze-layer bias at init. Slightly positive so the squeeze ReLUs start
// active; with a zero bias a block's whole attention network is dead from
// the first step about one time in fifteen.
inline constexpr double kSqueezeBiasInit = 0.1;

// R copies of [1, 2, ..., 2^(X-1)].
std::vector<std::size_t> dilation_schedule(int x, int r);
// (f_local, f_exp) per block: the local kernel always has dilation 1, the
// other follows dilation_schedule.
std::vector<std::pair<std::size_t, std::size_t>> wd_dilation_pairs(int x, int r);

// Frames of mask-network input that influence one output frame.
std::size_t receptive_field(const ModelConfig& config);

enum class InitKind { kFanInUniform, kZeros, kOnes, kPrelu, kSqueezeBias };

struct ParamSpec {
  std::string name;
  Shape shape;
  InitKind init = InitKind::kFanInUniform;
  std::size_t fan_in = 1;
  std::size_t count() const;
};

// Every trainable tensor of a model with `config`, in binding order.
std::vector<ParamSpec> parameter_layout(const ModelConfig& config);

struct ParameterReport {
  struct Item {
    std::string name;
    std::size_t count = 0;
  };
  std::vector<Item> items;
  std::size_t total = 0;
};

// Exact trainable-scalar count, itemized per submodule. Never allocates the
// model itself.
ParameterReport count_parameters(const ModelConfig& config);

struct ForwardOptions {
  // Replaces every block's attention output by this constant weight vector.
  std::optional<std::vector<double>> pinned_attention;
  // Stop-gradient through normalization statistics and attention weights;
  // leaves only the convolutional paths differentiable.
  bool detach_global_stats = false;
};

struct ForwardTrace {
  Var encoded;      // w, [N x L_x]
  Var mask_logits;  // pre-activation of the mask, [N x L_x]
  Var mask;         // m, [N x L_x]
  Var masked;       // v = m * w
  std::vector<Tensor> attention;  // one [Q] vector per block (WD-TCN only)
};

struct BlockOutput {
  Var output;
  std::optional<Tensor> attention;
};

struct ForwardResult {
  Var estimate;  // [1 x T]
  ForwardTrace trace;
  std::vector<Var> params;  // bound leaves, same order as parameters()
  AudioClip clip(int sample_rate) const;
};

class Model {
 public:
  struct Parameter {
    std::string name;
    Tensor value;
  };

  Model(const ModelConfig& config, std::uint64_t seed);
  // Adopts externally provided tensors; names and shapes must match the
  // layout of `config`.
  Model(const ModelConfig& config, std::vector<Parameter> parameters);

  const ModelConfig& config() const { return config_; }
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::size_t index_of(std::string_view name) const;
  Tensor& parameter(std::string_view name) { return params_[index_of(name)].value; }
  const Tensor& parameter(std::string_view name) const {
    return params_[index_of(name)].value;
  }

  // Fresh leaves for one forward graph. With requires_grad the leaves
  // accumulate gradients independently of any other binding.
  std::vector<Var> bind(bool requires_grad) const;

  // signal: [1 x T_pad] with T_pad a whole number of blocks.
  Var encode(const Var& signal, std::span<const Var> p) const;
  BlockOutput conv_block(const Var& y, std::size_t block,
                         std::span<const Var> p,
                         const ForwardOptions& options = {}) const;
  Var se_attention(const Var& z, std::size_t block, std::span<const Var> p) const;
  ForwardTrace masknet(const Var& w, std::span<const Var> p,
                       const ForwardOptions& options = {}) const;
  Var decode(const Var& v, std::span<const Var> p, std::size_t length) const;

  ForwardResult forward(const AudioClip& x, const ForwardOptions& options = {},
                        bool requires_grad = false) const;

  // Dilation of each depthwise kernel of a block (index 0 = growing
  // dilation, index 1 = local dilation 1).
  const std::vector<std::size_t>& block_dilations(std::size_t block) const {
    return blocks_[block].dilation;
  }

 private:
  struct SeIndex {
    std::size_t squeeze_w, squeeze_b, excite_w, excite_b;
  };
  struct BlockIndex {
    std::size_t in_pconv, prelu1, norm1_gain, norm1_bias;
    std::vector<std::size_t> dconv;
    std::vector<std::size_t> dilation;
    std::optional<SeIndex> se;
    std::size_t prelu2, norm2_gain, norm2_bias, out_pconv;
  };

  void build_index();

  ModelConfig config_;
  std::vector<Parameter> params_;
  std::size_t encoder_ = 0, bn_gain_ = 0, bn_bias_ = 0, bn_pconv_ = 0;
  std::size_t mask_prelu_ = 0, mask_pconv_ = 0, decoder_ = 0;
  std::vector<BlockIndex> blocks_;
};

}  // namespace wdtcn
