#include "mslt/model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

namespace mslt {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kMslt: return "mslt";
    case Variant::kMsltPlus: return "mslt+";
    case Variant::kMsltPlusPlus: return "mslt++";
    case Variant::kChannelMlp: return "channel-mlp";
  }
  return "unknown";
}

std::optional<Variant> parse_variant(std::string_view token) {
  for (Variant v : {Variant::kMslt, Variant::kMsltPlus, Variant::kMsltPlusPlus, Variant::kChannelMlp}) {
    if (token == variant_name(v)) return v;
  }
  return std::nullopt;
}

std::string_view pooling_name(PoolingMode mode) {
  switch (mode) {
    case PoolingMode::kGap: return "gap";
    case PoolingMode::kGsp: return "gsp";
    case PoolingMode::kGapGsp: return "gap+gsp";
  }
  return "unknown";
}

std::optional<PoolingMode> parse_pooling(std::string_view token) {
  for (PoolingMode m : {PoolingMode::kGap, PoolingMode::kGsp, PoolingMode::kGapGsp}) {
    if (token == pooling_name(m)) return m;
  }
  return std::nullopt;
}

int reference_param_target(Variant v) {
  switch (v) {
    case Variant::kMslt: return kReferenceParamsMslt;
    case Variant::kMsltPlus:
    case Variant::kMsltPlusPlus: return kReferenceParamsMsltPlus;
    case Variant::kChannelMlp: return kReferenceParamsChannelMlp;
  }
  return 0;
}

namespace {

void check_config(const ModelConfig& c) {
  if (c.levels < 2 || c.levels > 12) throw ContractError("model: pyramid levels must be in [2, 12]");
  if (c.cfd_count < 1) throw ContractError("model: CFD count must be >= 1");
}

template <typename T>
Tensor<T> clamp01(const Tensor<T>& x) {
  Tensor<T> y(x.height(), x.width(), x.channels());
  const auto in = x.values();
  auto out = y.values();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::clamp(in[i], T(0), T(1));
  return y;
}

template <typename T>
void check_image(const Tensor<T>& image) {
  if (image.channels() != 3) throw DimensionError("forward: input must have 3 channels");
  for (T v : image.values()) {
    if (!(v >= T(0) && v <= T(1))) throw ContractError("forward: input values must lie in [0, 1]");
  }
}

// Uniform in [-bound, bound) from the top 53 bits, identical on every platform.
double uniform(std::mt19937_64& rng, double bound) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return (2.0 * u - 1.0) * bound;
}

}  // namespace

template <typename T>
ModelParams<T> ModelParams<T>::zeros(Variant variant, const ModelConfig& config) {
  check_config(config);
  ModelParams<T> mp;
  mp.variant = variant;
  mp.config = config;
  if (variant == Variant::kChannelMlp) {
    mp.guidance.head.reset();
    int in = 3;
    for (int k = 0; k < kChannelMlpLayers; ++k) {
      const int out = k + 1 == kChannelMlpLayers ? 3 : kChannelMlpWidth;
      mp.cmlp.emplace_back(in, out);
      in = out;
    }
    return mp;
  }
  const int later = config.hf_shared ? 1 : std::max(config.levels - 2, 0);
  mp.hf_levels.assign(later, MaskMlp<T>(3, 3, 3));
  if (has_learnable_pyramid(variant)) {
    for (int i = 0; i < config.levels - 1; ++i) {
      mp.pyramid.down.emplace_back(3, 3);
      mp.pyramid.up.emplace_back(3, 3);
    }
  }
  return mp;
}

template <typename T>
std::size_t ModelParams<T>::param_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const std::string&, auto values, const Dims&) { n += values.size(); });
  return n;
}

template <typename T>
std::uint64_t ModelParams<T>::fingerprint() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  mix(static_cast<std::uint64_t>(variant));
  mix(static_cast<std::uint64_t>(config.levels));
  mix(static_cast<std::uint64_t>(config.cfd_count));
  mix(static_cast<std::uint64_t>(config.pooling));
  mix(config.hf_shared ? 1 : 0);
  for_each_tensor([&](const std::string&, auto values, const Dims&) {
    for (T v : values) {
      if constexpr (sizeof(T) == 8) {
        mix(std::bit_cast<std::uint64_t>(v));
      } else {
        mix(std::bit_cast<std::uint32_t>(v));
      }
    }
  });
  return h;
}

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
  ModelParams<U> out = ModelParams<U>::zeros(variant, config);
  std::vector<std::span<const T>> src;
  for_each_tensor([&](const std::string&, std::span<const T> values, const Dims&) { src.push_back(values); });
  std::size_t k = 0;
  out.for_each_tensor([&](const std::string&, std::span<U> values, const Dims&) {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<U>(src[k][i]);
    ++k;
  });
  return out;
}

template <typename T>
ModelParams<T> make_identity(Variant variant, const ModelConfig& config) {
  ModelParams<T> mp = ModelParams<T>::zeros(variant, config);
  if (variant == Variant::kChannelMlp) {
    for (auto& layer : mp.cmlp)
      for (int c = 0; c < 3; ++c) layer.weight(c, c) = T(1);
    return mp;
  }
  // Fused channels 0-1 hold every diagonal gain of the grid.
  mp.hfd.fuse.bias[0] = T(1);
  mp.hfd.fuse.bias[1] = T(1);
  std::fill(mp.hf_first.l2.bias.begin(), mp.hf_first.l2.bias.end(), T(1));
  for (auto& mlp : mp.hf_levels) std::fill(mlp.l2.bias.begin(), mlp.l2.bias.end(), T(1));
  if (has_learnable_pyramid(variant)) mp.pyramid = gaussian_pyramid_params<T>(config.levels);
  return mp;
}

template <typename T>
ModelParams<T> make_random(Variant variant, const ModelConfig& config, std::uint64_t seed) {
  ModelParams<T> mp = ModelParams<T>::zeros(variant, config);
  std::mt19937_64 rng(seed);
  double bound = 1.0;
  mp.for_each_tensor([&](const std::string& name, std::span<T> values, const Dims& dims) {
    if (name.starts_with("pyramid.")) return;
    // Biases share the fan-in of their layer's weight, which is visited just before.
    if (dims.size() > 1) {
      std::size_t fan_in = 1;
      for (std::size_t d = 1; d < dims.size(); ++d) fan_in *= dims[d];
      bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    }
    for (T& v : values) v = static_cast<T>(uniform(rng, bound));
  });
  if (variant == Variant::kChannelMlp) return mp;
  // Unit gains on top of the noise: the random grid starts near the identity affine map
  // instead of an arbitrary one that can clamp the whole output (and its gradient) to zero.
  mp.hfd.fuse.bias[0] += T(1);
  mp.hfd.fuse.bias[1] += T(1);
  std::fill(mp.hf_first.l2.bias.begin(), mp.hf_first.l2.bias.end(), T(1));
  for (auto& mlp : mp.hf_levels) std::fill(mlp.l2.bias.begin(), mlp.l2.bias.end(), T(1));
  if (has_learnable_pyramid(variant)) mp.pyramid = gaussian_pyramid_params<T>(config.levels);
  return mp;
}

// ---- forward -------------------------------------------------------------------

template <typename T>
std::pair<Tensor<T>, Tensor<T>> correct_high_freq(const Tensor<T>& high, const Tensor<T>& aux, const MaskMlp<T>& mlp,
                                                  MaskLevelTrace<T>* trace) {
  if (high.channels() != 3) throw DimensionError("correct_high_freq: high-frequency layer must have 3 channels");
  if (aux.channels() != mlp.l1.in_channels()) throw DimensionError("correct_high_freq: aux channels do not match MLP");
  if (mlp.l2.out_channels() != 3) throw DimensionError("correct_high_freq: MLP must emit 3 channels");
  if (aux.height() != high.height() || aux.width() != high.width()) {
    throw DimensionError("correct_high_freq: aux and layer sizes differ");
  }
  Tensor<T> pre = conv1x1(aux, mlp.l1);
  Tensor<T> mask = conv1x1(leaky_relu(pre), mlp.l2);
  Tensor<T> corrected = multiply(high, mask);
  if (trace) {
    trace->aux = aux;
    trace->hidden_pre = std::move(pre);
    trace->mask = mask;
  }
  return {std::move(corrected), std::move(mask)};
}

template <typename T>
Pyramid<T> correct_pyramid(const Pyramid<T>& pyramid, const ModelParams<T>& mp, ModelTrace<T>* trace) {
  if (mp.variant == Variant::kChannelMlp) throw ContractError("correct_pyramid: Channel-MLP has no pyramid");
  const int n = pyramid.levels;
  if (n != mp.config.levels || static_cast<int>(pyramid.highs.size()) != n - 1) {
    throw DimensionError("correct_pyramid: pyramid depth does not match the model");
  }
  Pyramid<T> out;
  out.levels = n;
  out.source_height = pyramid.source_height;
  out.source_width = pyramid.source_width;
  out.highs.resize(n - 1);
  out.low = correct_low_freq(pyramid.low, mp.guidance, mp.hfd, mp.config.bgnet(), trace ? &trace->low : nullptr);
  if (trace) trace->masks.clear();

  Tensor<T> previous_mask;
  for (int i = n - 1; i >= 1; --i) {
    const Tensor<T>& high = pyramid.highs[i - 1];
    if (i == 1 && mp.variant == Variant::kMsltPlusPlus) {
      out.highs[0] = high;
      continue;
    }
    MaskLevelTrace<T> level_trace;
    level_trace.level = i;
    MaskLevelTrace<T>* lt = trace ? &level_trace : nullptr;
    std::pair<Tensor<T>, Tensor<T>> result;
    if (i == n - 1) {
      Tensor<T> low_up = resize_bilinear(pyramid.low, high.height(), high.width());
      Tensor<T> corrected_up = resize_bilinear(out.low, high.height(), high.width());
      const std::array<const Tensor<T>*, 3> parts = {&high, &low_up, &corrected_up};
      result = correct_high_freq(high, concat_channels<T>(parts), mp.hf_first, lt);
      if (trace) {
        trace->low_up = std::move(low_up);
        trace->low_corrected_up = std::move(corrected_up);
      }
    } else {
      result = correct_high_freq(high, resize_bilinear(previous_mask, high.height(), high.width()), mp.level_mlp(i), lt);
    }
    out.highs[i - 1] = std::move(result.first);
    previous_mask = std::move(result.second);
    if (trace) trace->masks.push_back(std::move(level_trace));
  }
  return out;
}

template <typename T>
Tensor<T> channel_mlp_forward(const Tensor<T>& image, const std::vector<Conv1x1<T>>& layers, ModelTrace<T>* trace) {
  if (image.channels() != 3) throw DimensionError("channel_mlp_forward: input must have 3 channels");
  if (trace) {
    trace->cmlp_inputs.clear();
    trace->cmlp_pre.clear();
  }
  Tensor<T> x = image;
  for (const auto& layer : layers) {
    Tensor<T> pre = conv1x1(x, layer);
    Tensor<T> next = relu(pre);
    if (trace) {
      trace->cmlp_inputs.push_back(std::move(x));
      trace->cmlp_pre.push_back(std::move(pre));
    }
    x = std::move(next);
  }
  return x;
}

template <typename T>
Tensor<T> forward(const Tensor<T>& image, const ModelParams<T>& mp, ModelTrace<T>* trace) {
  check_image(image);
  Tensor<T> unclamped;
  if (trace) {
    *trace = ModelTrace<T>{};
    trace->fingerprint = mp.fingerprint();
    trace->variant = mp.variant;
    trace->input = image;
  }
  if (mp.variant == Variant::kChannelMlp) {
    unclamped = channel_mlp_forward(image, mp.cmlp, trace);
  } else if (has_learnable_pyramid(mp.variant)) {
    LearnableDecomposition<T> dec = decompose_learnable_traced(image, mp.config.levels, mp.pyramid);
    Pyramid<T> corrected = correct_pyramid(dec.pyramid, mp, trace);
    LearnableReconstruction<T> rec = reconstruct_learnable_traced(corrected, mp.pyramid);
    unclamped = std::move(rec.output);
    if (trace) {
      trace->decomposition = std::move(dec);
      trace->corrected = std::move(corrected);
      trace->reconstruction = std::move(rec);
    }
  } else {
    Pyramid<T> pyramid = decompose_fixed(image, mp.config.levels);
    Pyramid<T> corrected = correct_pyramid(pyramid, mp, trace);
    unclamped = reconstruct_fixed(corrected);
    if (trace) {
      trace->decomposition.pyramid = std::move(pyramid);
      trace->corrected = std::move(corrected);
    }
  }
  Tensor<T> output = clamp01(unclamped);
  if (trace) {
    trace->unclamped = std::move(unclamped);
    trace->output = output;
  }
  return output;
}

// ---- counting --------------------------------------------------------------------

template <typename T>
FlopReport flop_report(const ModelParams<T>& mp, int height, int width) {
  using u64 = std::uint64_t;
  FlopReport r;
  auto add = [&](std::string name, u64 macs) {
    r.breakdown.emplace_back(std::move(name), macs);
    r.total += macs;
  };
  if (mp.variant == Variant::kChannelMlp) {
    u64 per_pixel = 0;
    for (const auto& layer : mp.cmlp) per_pixel += u64(layer.in_channels()) * layer.out_channels();
    add("channel_mlp", per_pixel * u64(height) * width);
    r.arithmetic_total = 2 * r.total;
    return r;
  }
  const int n = mp.config.levels;
  const int m = pyramid_multiple(n);
  const u64 ph = u64((height + m - 1) / m) * m;
  const u64 pw = u64((width + m - 1) / m) * m;
  // pixels(i): pixel count of pyramid level i (1-based).
  auto pixels = [&](int i) { return (ph >> (i - 1)) * (pw >> (i - 1)); };

  const u64 low = pixels(n);
  const u64 g = kGuidanceChannels;
  add("guidance", low * (3 * g + g * g + g + 2 * g));
  add("resize_to_48", u64(kHfdInputSize) * kHfdInputSize * 3 * 4);
  const u64 c = kHfdChannels;
  // Per CFD stage: GAP, GSP (square + mean), context product, refine, SFE (two convs, GAP, modulation).
  const u64 stage = c + 2 * c + c + c * c + (c * c + c * c + 2 * c);
  const u64 hfd_pp = 3 * c + u64(mp.config.cfd_count) * stage + c * kFusedChannels;
  add("hfd", u64(kHfdInputSize) * kHfdInputSize * hfd_pp);
  // Eight corner weights (two products each) and 8 x 12 weighted sums.
  add("slice", low * (8 * 2 + 8 * kAffineCoeffs));
  add("affine", low * 12);

  for (int i = n - 1; i >= 1; --i) {
    if (i == 1 && mp.variant == Variant::kMsltPlusPlus) continue;
    const u64 px = pixels(i);
    if (i == n - 1) {
      add("mask_H" + std::to_string(i), px * (2 * 3 * 4 + 9 * 9 + 9 * 3 + 3));
    } else {
      add("mask_H" + std::to_string(i), px * (3 * 4 + 3 * 3 + 3 * 3 + 3));
    }
  }

  u64 fixed_filters = 0;
  if (has_learnable_pyramid(mp.variant)) {
    u64 down = 0;
    u64 up = 0;
    for (int i = 1; i < n; ++i) {
      down += pixels(i + 1) * 81;
      up += pixels(i) * (3 * 4 + 81);
    }
    add("pyramid_decompose", down + up);
    add("pyramid_reconstruct", up);
  } else {
    // Fixed binomial filters: 25 taps per output sample down, a quarter of them non-zero up.
    for (int i = 1; i < n; ++i) fixed_filters += pixels(i + 1) * 3 * 25 + 2 * (pixels(i) * 3 * 25 / 4);
  }
  r.arithmetic_total = 2 * (r.total + fixed_filters);
  return r;
}

// ---- serialization -------------------------------------------------------------------

namespace {

constexpr char kMagic[6] = {'M', 'S', 'L', 'T', 'W', '\0'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const char*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  const std::vector<char>& data() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> data) : buf_(std::move(data)) {}
  void need(std::size_t n, const char* what) {
    if (buf_.size() - pos_ < n) throw LoadError(LoadError::Kind::kTruncated, std::string("weights: truncated ") + what);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= std::uint16_t(std::uint8_t(buf_[pos_++])) << (8 * i);
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(buf_[pos_++])) << (8 * i);
    return v;
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_weight_file(const WeightFile& file, const std::filesystem::path& path) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kWeightFormatVersion);
  w.u8(static_cast<std::uint8_t>(file.variant));
  w.u32(static_cast<std::uint32_t>(file.config.levels));
  w.u32(static_cast<std::uint32_t>(file.config.cfd_count));
  w.u8(static_cast<std::uint8_t>(file.config.pooling));
  w.u8(file.config.hf_shared ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(file.tensors.size()));
  for (const auto& t : file.tensors) {
    w.u16(static_cast<std::uint16_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.u8(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) w.u32(d);
    for (float v : t.values) w.u32(std::bit_cast<std::uint32_t>(v));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
  if (!out) throw IoError("failed writing " + path.string());
}

WeightFile read_weight_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(LoadError::Kind::kOpen, "cannot open weight file " + path.string());
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));

  if (r.str(sizeof(kMagic), "magic") != std::string(kMagic, sizeof(kMagic))) {
    throw LoadError(LoadError::Kind::kBadMagic, "weights: bad magic in " + path.string());
  }
  const std::uint32_t version = r.u32("version");
  if (version != kWeightFormatVersion) {
    throw LoadError(LoadError::Kind::kBadVersion, "weights: unsupported format version " + std::to_string(version));
  }
  WeightFile f;
  const std::uint8_t variant = r.u8("variant");
  if (variant > static_cast<std::uint8_t>(Variant::kChannelMlp)) {
    throw LoadError(LoadError::Kind::kBadConfig, "weights: unknown variant tag " + std::to_string(variant));
  }
  f.variant = static_cast<Variant>(variant);
  const std::uint32_t levels = r.u32("config");
  const std::uint32_t cfd = r.u32("config");
  const std::uint8_t pooling = r.u8("config");
  const std::uint8_t shared = r.u8("config");
  if (levels < 2 || levels > 12 || cfd < 1 || cfd > 64 || pooling > 2 || shared > 1) {
    throw LoadError(LoadError::Kind::kBadConfig, "weights: invalid config block");
  }
  f.config = {static_cast<int>(levels), static_cast<int>(cfd), static_cast<PoolingMode>(pooling), shared == 1};
  const std::uint32_t count = r.u32("tensor count");
  for (std::uint32_t k = 0; k < count; ++k) {
    TensorRecord t;
    t.name = r.str(r.u16("name length"), "name");
    const std::uint8_t rank = r.u8("rank");
    std::uint64_t elements = 1;
    for (int d = 0; d < rank; ++d) {
      t.dims.push_back(r.u32("dims"));
      elements *= t.dims.back();
    }
    r.need(elements * 4, "payload");
    t.values.resize(elements);
    for (auto& v : t.values) v = std::bit_cast<float>(r.u32("payload"));
    f.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw LoadError(LoadError::Kind::kCorrupt, "weights: trailing bytes after last tensor");
  return f;
}

void save_weights(const ModelParams<float>& mp, const std::filesystem::path& path) {
  WeightFile f;
  f.variant = mp.variant;
  f.config = mp.config;
  mp.for_each_tensor([&](const std::string& name, std::span<const float> values, const Dims& dims) {
    f.tensors.push_back({name, dims, std::vector<float>(values.begin(), values.end())});
  });
  write_weight_file(f, path);
}

ModelParams<float> load_weights(const std::filesystem::path& path, std::optional<Variant> expected) {
  const WeightFile f = read_weight_file(path);
  if (expected && *expected != f.variant) {
    throw LoadError(LoadError::Kind::kVariantMismatch, "weights: file holds " + std::string(variant_name(f.variant)) +
                                                           " weights, expected " +
                                                           std::string(variant_name(*expected)));
  }
  ModelParams<float> mp = ModelParams<float>::zeros(f.variant, f.config);
  std::size_t k = 0;
  mp.for_each_tensor([&](const std::string& name, std::span<float> values, const Dims& dims) {
    if (k >= f.tensors.size()) throw LoadError(LoadError::Kind::kShapeMismatch, "weights: missing tensor " + name);
    const TensorRecord& t = f.tensors[k++];
    if (t.name != name || t.dims != dims) {
      throw LoadError(LoadError::Kind::kShapeMismatch, "weights: expected tensor " + name + ", found " + t.name);
    }
    std::copy(t.values.begin(), t.values.end(), values.begin());
  });
  if (k != f.tensors.size()) throw LoadError(LoadError::Kind::kShapeMismatch, "weights: unexpected extra tensors");
  return mp;
}

#define MSLT_INSTANTIATE_MODEL(T)                                                                                 \
  template struct ModelParams<T>;                                                                                 \
  template ModelParams<T> make_identity(Variant, const ModelConfig&);                                             \
  template ModelParams<T> make_random(Variant, const ModelConfig&, std::uint64_t);                                \
  template std::pair<Tensor<T>, Tensor<T>> correct_high_freq(const Tensor<T>&, const Tensor<T>&, const MaskMlp<T>&, \
                                                             MaskLevelTrace<T>*);                                 \
  template Pyramid<T> correct_pyramid(const Pyramid<T>&, const ModelParams<T>&, ModelTrace<T>*);                  \
  template Tensor<T> forward(const Tensor<T>&, const ModelParams<T>&, ModelTrace<T>*);                            \
  template Tensor<T> channel_mlp_forward(const Tensor<T>&, const std::vector<Conv1x1<T>>&, ModelTrace<T>*);       \
  template FlopReport flop_report(const ModelParams<T>&, int, int);

MSLT_INSTANTIATE_MODEL(float)
MSLT_INSTANTIATE_MODEL(double)

template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<float> ModelParams<float>::cast<float>() const;
template ModelParams<double> ModelParams<double>::cast<double>() const;

#undef MSLT_INSTANTIATE_MODEL

}  // namespace mslt
