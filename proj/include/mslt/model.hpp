#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mslt/bgnet.hpp"
#include "mslt/pyramid.hpp"
#include "mslt/tensor.hpp"

namespace mslt {

enum class Variant : std::uint8_t { kMslt = 0, kMsltPlus = 1, kMsltPlusPlus = 2, kChannelMlp = 3 };

std::string_view variant_name(Variant v);
// Accepts "mslt", "mslt+", "mslt++", "channel-mlp"; nullopt otherwise.
std::optional<Variant> parse_variant(std::string_view token);

std::string_view pooling_name(PoolingMode mode);
// Accepts "gap", "gsp", "gap+gsp".
std::optional<PoolingMode> parse_pooling(std::string_view token);

inline bool has_learnable_pyramid(Variant v) { return v == Variant::kMsltPlus || v == Variant::kMsltPlusPlus; }

struct ModelConfig {
  int levels = 4;
  int cfd_count = 3;
  PoolingMode pooling = PoolingMode::kGapGsp;
  bool hf_shared = true;

  BgnetConfig bgnet() const { return {cfd_count, pooling}; }
};

// Two 1x1 layers with a LeakyReLU between them.
template <typename T>
struct MaskMlp {
  Conv1x1<T> l1;
  Conv1x1<T> l2;

  MaskMlp() = default;
  MaskMlp(int in, int hidden, int out) : l1(in, hidden), l2(hidden, out) {}
  std::size_t param_count() const { return l1.param_count() + l2.param_count(); }
};

inline constexpr int kChannelMlpWidth = 60;
inline constexpr int kChannelMlpLayers = 4;

// Reference totals the counted parameters are reported against.
inline constexpr int kReferenceParamsMslt = 7594;
inline constexpr int kReferenceParamsMsltPlus = 8098;
inline constexpr int kReferenceParamsChannelMlp = 7683;
inline constexpr double kReferenceMflopsMslt1024 = 83.45;

using Dims = std::vector<std::uint32_t>;

template <typename T>
struct ModelParams {
  Variant variant = Variant::kMslt;
  ModelConfig config;

  SfeParams<T> guidance = make_sfe_params<T>(3, kGuidanceChannels, true);
  HfdParams<T> hfd;
  MaskMlp<T> hf_first = MaskMlp<T>(9, 9, 3);
  std::vector<MaskMlp<T>> hf_levels;  // one shared MLP, or one per level H_{n-2}..H_1
  PyramidParams<T> pyramid;           // MSLT+ / MSLT++ only
  std::vector<Conv1x1<T>> cmlp;       // Channel-MLP only

  // Zero-valued parameters with the right shapes for (variant, config).
  static ModelParams zeros(Variant variant, const ModelConfig& config);

  // MLP used for high-frequency level i (1 <= i <= n-2).
  const MaskMlp<T>& level_mlp(int i) const { return hf_levels[config.hf_shared ? 0 : config.levels - 2 - i]; }
  MaskMlp<T>& level_mlp(int i) { return hf_levels[config.hf_shared ? 0 : config.levels - 2 - i]; }

  // Visits every named tensor in a fixed order: f(name, values, dims).
  template <typename F>
  void for_each_tensor(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    visit(*this, f);
  }

  std::size_t param_count() const;
  // FNV-1a over the variant, config and every parameter bit pattern.
  std::uint64_t fingerprint() const;

  template <typename U>
  ModelParams<U> cast() const;

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F& f) {
    auto conv = [&](const std::string& name, auto& layer) {
      f(name + ".weight", std::span(layer.weight.data),
        Dims{std::uint32_t(layer.weight.rows), std::uint32_t(layer.weight.cols)});
      f(name + ".bias", std::span(layer.bias), Dims{std::uint32_t(layer.bias.size())});
    };
    auto conv3 = [&](const std::string& name, auto& layer) {
      f(name + ".weight", std::span(layer.weight), Dims{std::uint32_t(layer.out), std::uint32_t(layer.in), 3u, 3u});
      f(name + ".bias", std::span(layer.bias), Dims{std::uint32_t(layer.bias.size())});
    };
    if (self.variant == Variant::kChannelMlp) {
      for (std::size_t k = 0; k < self.cmlp.size(); ++k) conv("cmlp.layer" + std::to_string(k), self.cmlp[k]);
      return;
    }
    conv("guidance.conv_a", self.guidance.conv_a);
    conv("guidance.conv_b", self.guidance.conv_b);
    if (self.guidance.head) conv("guidance.head", *self.guidance.head);
    conv("hfd.stem", self.hfd.stem);
    conv("hfd.refine", self.hfd.refine);
    conv("hfd.sfe.conv_a", self.hfd.sfe.conv_a);
    conv("hfd.sfe.conv_b", self.hfd.sfe.conv_b);
    conv("hfd.fuse", self.hfd.fuse);
    conv("hf.first.l1", self.hf_first.l1);
    conv("hf.first.l2", self.hf_first.l2);
    for (std::size_t k = 0; k < self.hf_levels.size(); ++k) {
      const std::string base =
          self.config.hf_shared ? std::string("hf.shared") : "hf.level" + std::to_string(self.config.levels - 2 - k);
      conv(base + ".l1", self.hf_levels[k].l1);
      conv(base + ".l2", self.hf_levels[k].l2);
    }
    for (std::size_t k = 0; k < self.pyramid.down.size(); ++k) {
      conv3("pyramid.down" + std::to_string(k + 1), self.pyramid.down[k]);
      conv3("pyramid.up" + std::to_string(k + 1), self.pyramid.up[k]);
    }
  }
};

// Weights under which forward() is the identity map (up to pyramid round-trip error).
template <typename T>
ModelParams<T> make_identity(Variant variant, const ModelConfig& config = {});

// Fan-in uniform init; pyramid kernels start Gaussian-like, mask output biases start at 1 and the
// grid gain channels get a unit bias so the affine map starts near identity.
template <typename T>
ModelParams<T> make_random(Variant variant, const ModelConfig& config, std::uint64_t seed);

// ---- forward -------------------------------------------------------------------

template <typename T>
struct MaskLevelTrace {
  int level = 0;         // i of H_i
  Tensor<T> aux;         // MLP input
  Tensor<T> hidden_pre;  // l1 output before LeakyReLU
  Tensor<T> mask;        // M_i
};

template <typename T>
struct ModelTrace {
  std::uint64_t fingerprint = 0;
  Variant variant = Variant::kMslt;
  Tensor<T> input;
  LearnableDecomposition<T> decomposition;  // gaussians/upsampled empty for the fixed pyramid
  LowFreqTrace<T> low;
  Tensor<T> low_up;            // up(L_n) at H_{n-1} size
  Tensor<T> low_corrected_up;  // up(L̄_n) at H_{n-1} size
  std::vector<MaskLevelTrace<T>> masks;  // coarse to fine, corrected levels only
  Pyramid<T> corrected;                  // L̄_n and H̄_i
  LearnableReconstruction<T> reconstruction;
  Tensor<T> unclamped;
  Tensor<T> output;
  std::vector<Tensor<T>> cmlp_inputs;  // Channel-MLP: input of each layer
  std::vector<Tensor<T>> cmlp_pre;     // Channel-MLP: pre-activation of each layer

  const Tensor<T>& guidance() const { return low.guidance; }
  const BilateralGrid<T>& grid() const { return low.grid; }
};

// (H̄, M) with H̄ = H * mlp(aux).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> correct_high_freq(const Tensor<T>& high, const Tensor<T>& aux, const MaskMlp<T>& mlp,
                                                  MaskLevelTrace<T>* trace = nullptr);

// Corrects every layer of an already decomposed pyramid (L_n first, then H_{n-1}..H_1).
template <typename T>
Pyramid<T> correct_pyramid(const Pyramid<T>& pyramid, const ModelParams<T>& mp, ModelTrace<T>* trace = nullptr);

template <typename T>
Tensor<T> forward(const Tensor<T>& image, const ModelParams<T>& mp, ModelTrace<T>* trace = nullptr);

template <typename T>
Tensor<T> channel_mlp_forward(const Tensor<T>& image, const std::vector<Conv1x1<T>>& layers,
                              ModelTrace<T>* trace = nullptr);

// ---- counting --------------------------------------------------------------------

struct FlopReport {
  std::uint64_t total = 0;  // multiply-accumulates of learned and data-dependent ops
  std::uint64_t arithmetic_total = 0;  // 2 FLOPs per MAC, including the fixed pyramid filters
  std::vector<std::pair<std::string, std::uint64_t>> breakdown;  // MACs per stage
};

template <typename T>
FlopReport flop_report(const ModelParams<T>& mp, int height, int width);

template <typename T>
std::uint64_t flop_count(const ModelParams<T>& mp, int height, int width) {
  return flop_report(mp, height, width).total;
}

int reference_param_target(Variant v);

// ---- serialization -------------------------------------------------------------------

inline constexpr std::uint32_t kWeightFormatVersion = 1;

class LoadError : public IoError {
 public:
  enum class Kind { kOpen, kTruncated, kCorrupt, kBadMagic, kBadVersion, kBadConfig, kVariantMismatch, kShapeMismatch };
  LoadError(Kind kind, const std::string& message) : IoError(message), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// One named float32 record of an MSLTW file.
struct TensorRecord {
  std::string name;
  Dims dims;
  std::vector<float> values;
};

struct WeightFile {
  Variant variant = Variant::kMslt;
  ModelConfig config;
  std::vector<TensorRecord> tensors;
};

void write_weight_file(const WeightFile& file, const std::filesystem::path& path);
WeightFile read_weight_file(const std::filesystem::path& path);

void save_weights(const ModelParams<float>& mp, const std::filesystem::path& path);
// Validates magic, version, variant (when given) and the full shape table.
ModelParams<float> load_weights(const std::filesystem::path& path, std::optional<Variant> expected = std::nullopt);

}  // namespace mslt
