#include "mslt/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

namespace mslt {

template <typename T>
LossResult<T> mse_loss(const Tensor<T>& output, const Tensor<T>& target) {
  require_same_shape("mse_loss", output, target);
  LossResult<T> r;
  r.grad = Tensor<T>(output.height(), output.width(), output.channels());
  const auto o = output.values();
  const auto t = target.values();
  auto g = r.grad.values();
  const double n = static_cast<double>(o.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double d = static_cast<double>(o[i]) - static_cast<double>(t[i]);
    sum += d * d;
    g[i] = static_cast<T>(2.0 * d / n);
  }
  r.loss = n > 0 ? sum / n : 0.0;
  return r;
}

double cosine_lr(std::int64_t global_step, std::int64_t steps_per_epoch, const TrainConfig& cfg) {
  if (steps_per_epoch < 1) throw ContractError("cosine_lr: steps_per_epoch must be >= 1");
  if (cfg.restart_period < 1) throw ContractError("cosine_lr: restart period must be >= 1");
  const std::int64_t period = steps_per_epoch * cfg.restart_period;
  const std::int64_t s = ((global_step % period) + period) % period;
  const double p = static_cast<double>(s) / static_cast<double>(period);
  return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * p));
}

namespace {

template <typename T>
std::vector<std::span<T>> tensor_spans(ModelParams<T>& mp) {
  std::vector<std::span<T>> out;
  mp.for_each_tensor([&](const std::string&, std::span<T> v, const Dims&) { out.push_back(v); });
  return out;
}

template <typename T>
std::vector<std::span<const T>> tensor_spans(const ModelParams<T>& mp) {
  std::vector<std::span<const T>> out;
  mp.for_each_tensor([&](const std::string&, std::span<const T> v, const Dims&) { out.push_back(v); });
  return out;
}

template <typename T>
void require_matching(const char* what, const ModelParams<T>& a, const ModelParams<T>& b) {
  const auto sa = tensor_spans(a);
  const auto sb = tensor_spans(b);
  bool ok = a.variant == b.variant && sa.size() == sb.size();
  for (std::size_t k = 0; ok && k < sa.size(); ++k) ok = sa[k].size() == sb[k].size();
  if (!ok) throw DimensionError(std::string(what) + ": parameter sets do not match");
}

// Gradient of clamp(u, 0, 1); the boundary itself passes the gradient through.
template <typename T>
Tensor<T> clamp_backward(const Tensor<T>& unclamped, const Tensor<T>& dy) {
  Tensor<T> dx(dy.height(), dy.width(), dy.channels());
  const auto u = unclamped.values();
  const auto g = dy.values();
  auto d = dx.values();
  for (std::size_t i = 0; i < u.size(); ++i) d[i] = (u[i] >= T(0) && u[i] <= T(1)) ? g[i] : T(0);
  return dx;
}

template <typename T>
Tensor<T> channel_slice(const Tensor<T>& x, int first) {
  return slice_channels(x, first, 3);
}

// Backward through the mask MLPs and the low-frequency corrector; fills d_layers and grad.
template <typename T>
void correction_backward(const ModelParams<T>& mp, const ModelTrace<T>& trace, const Pyramid<T>& d_corrected,
                         Pyramid<T>& d_layers, ModelParams<T>& grad) {
  const int n = mp.config.levels;
  const Pyramid<T>& layers = trace.decomposition.pyramid;
  d_layers.levels = n;
  d_layers.source_height = layers.source_height;
  d_layers.source_width = layers.source_width;
  d_layers.highs.assign(n - 1, Tensor<T>{});
  Tensor<T> d_low_corrected = d_corrected.low;
  Tensor<T> d_low_extra;

  // MSLT++ passes H_1 through untouched.
  if (mp.variant == Variant::kMsltPlusPlus) d_layers.highs[0] = d_corrected.highs[0];

  Tensor<T> d_mask_from_finer;
  for (auto it = trace.masks.rbegin(); it != trace.masks.rend(); ++it) {
    const MaskLevelTrace<T>& mt = *it;
    const int i = mt.level;
    const Tensor<T>& high = layers.highs[i - 1];
    const Tensor<T>& d_hbar = d_corrected.highs[i - 1];
    Tensor<T> d_mask = multiply(d_hbar, high);
    if (!d_mask_from_finer.values().empty()) add_inplace(d_mask, d_mask_from_finer);
    d_layers.highs[i - 1] = multiply(d_hbar, mt.mask);

    const bool first = i == n - 1;
    const MaskMlp<T>& mlp = first ? mp.hf_first : mp.level_mlp(i);
    MaskMlp<T>& g = first ? grad.hf_first : grad.level_mlp(i);
    Tensor<T> d_hidden;
    conv1x1_backward(leaky_relu(mt.hidden_pre), mlp.l2, d_mask, &d_hidden, &g.l2);
    const Tensor<T> d_pre = leaky_relu_backward(mt.hidden_pre, d_hidden);
    Tensor<T> d_aux;
    conv1x1_backward(mt.aux, mlp.l1, d_pre, &d_aux, &g.l1);

    if (first) {
      add_inplace(d_layers.highs[i - 1], channel_slice(d_aux, 0));
      d_low_extra = resize_bilinear_backward(channel_slice(d_aux, 3), layers.low.height(), layers.low.width());
      add_inplace(d_low_corrected,
                  resize_bilinear_backward(channel_slice(d_aux, 6), layers.low.height(), layers.low.width()));
      d_mask_from_finer = Tensor<T>{};
    } else {
      const Tensor<T>& coarser = layers.highs[i];
      d_mask_from_finer = resize_bilinear_backward(d_aux, coarser.height(), coarser.width());
    }
  }

  d_layers.low = correct_low_freq_backward(trace.low, mp.guidance, mp.hfd, mp.config.bgnet(), d_low_corrected,
                                           &grad.guidance, &grad.hfd);
  if (!d_low_extra.values().empty()) add_inplace(d_layers.low, d_low_extra);
}

}  // namespace

template <typename T>
AdamState<T> make_adam_state(const ModelParams<T>& params) {
  AdamState<T> s;
  for (const auto& span : tensor_spans(params)) {
    s.m.emplace_back(span.size(), T(0));
    s.v.emplace_back(span.size(), T(0));
  }
  return s;
}

template <typename T>
void adam_step(ModelParams<T>& params, const ModelParams<T>& grads, AdamState<T>& state, double lr,
               const TrainConfig& cfg) {
  require_matching("adam_step", params, grads);
  auto p = tensor_spans(params);
  const auto g = tensor_spans(grads);
  bool ok = state.m.size() == p.size() && state.v.size() == p.size();
  for (std::size_t k = 0; ok && k < p.size(); ++k) ok = state.m[k].size() == p[k].size() && state.v[k].size() == p[k].size();
  if (!ok) throw DimensionError("adam_step: optimizer state does not match parameters");

  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < p.size(); ++k) {
    for (std::size_t i = 0; i < p[k].size(); ++i) {
      const double gi = g[k][i];
      const double m = cfg.beta1 * state.m[k][i] + (1.0 - cfg.beta1) * gi;
      const double v = cfg.beta2 * state.v[k][i] + (1.0 - cfg.beta2) * gi * gi;
      state.m[k][i] = static_cast<T>(m);
      state.v[k][i] = static_cast<T>(v);
      const double update = lr * (m / c1) / (std::sqrt(v / c2) + cfg.eps);
      p[k][i] = static_cast<T>(p[k][i] - update);
    }
  }
}

template <typename T>
void accumulate(ModelParams<T>& acc, const ModelParams<T>& g, T scale) {
  require_matching("accumulate", acc, g);
  auto a = tensor_spans(acc);
  const auto b = tensor_spans(g);
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t i = 0; i < a[k].size(); ++i) a[k][i] += scale * b[k][i];
}

template <typename T>
ModelParams<T> backward(const ModelParams<T>& mp, const ModelTrace<T>& trace, const Tensor<T>& d_output) {
  if (trace.variant != mp.variant || trace.fingerprint != mp.fingerprint()) {
    throw ContractError("backward: trace was not produced by these parameters");
  }
  require_same_shape("backward", trace.output, d_output);
  ModelParams<T> grad = ModelParams<T>::zeros(mp.variant, mp.config);
  const Tensor<T> d_unclamped = clamp_backward(trace.unclamped, d_output);

  if (mp.variant == Variant::kChannelMlp) {
    Tensor<T> d = d_unclamped;
    for (int k = static_cast<int>(mp.cmlp.size()) - 1; k >= 0; --k) {
      const Tensor<T> d_pre = relu_backward(trace.cmlp_pre[k], d);
      conv1x1_backward(trace.cmlp_inputs[k], mp.cmlp[k], d_pre, k > 0 ? &d : nullptr, &grad.cmlp[k]);
    }
    return grad;
  }

  const bool learnable = has_learnable_pyramid(mp.variant);
  const Pyramid<T> d_corrected =
      learnable ? reconstruct_learnable_backward(trace.reconstruction, trace.corrected, mp.pyramid, d_unclamped,
                                                 &grad.pyramid)
                : reconstruct_fixed_backward(trace.corrected, d_unclamped);
  Pyramid<T> d_layers;
  correction_backward(mp, trace, d_corrected, d_layers, grad);
  if (learnable) decompose_learnable_backward(trace.decomposition, mp.pyramid, d_layers, &grad.pyramid);
  return grad;
}

// ---- fit -------------------------------------------------------------------------

namespace {

struct CropSpec {
  std::size_t pair;
  int y;
  int x;
  int h;
  int w;
};

std::uint64_t below(std::mt19937_64& rng, std::uint64_t n) { return n == 0 ? 0 : rng() % n; }

ImageTensor crop_region(const ImageTensor& img, const CropSpec& c) {
  ImageTensor out(c.h, c.w, img.channels());
  for (int y = 0; y < c.h; ++y) {
    const float* src = img.pixel(c.y + y, c.x);
    std::copy(src, src + std::size_t(c.w) * img.channels(), out.pixel(y, 0));
  }
  return out;
}

}  // namespace

std::int64_t steps_per_epoch(std::size_t dataset_size, const TrainConfig& cfg) {
  const std::int64_t crops = static_cast<std::int64_t>(dataset_size) * cfg.crops_per_image;
  return (crops + cfg.batch_size - 1) / cfg.batch_size;
}

FitResult fit(const std::vector<SamplePair>& dataset, const ModelParams<float>& initial, const TrainConfig& cfg,
              const AdamState<float>* resume, const FitProgress& progress) {
  if (dataset.empty()) throw ContractError("fit: dataset is empty");
  if (cfg.batch_size < 1 || cfg.crop < 1 || cfg.crops_per_image < 1 || cfg.epochs < 0) {
    throw ContractError("fit: batch, crop, crops per image must be >= 1 and epochs >= 0");
  }
  if (!(cfg.lr_min < cfg.lr_max)) throw ContractError("fit: lr_min must be below lr_max");
  for (const auto& s : dataset) {
    require_same_shape("fit: sample pair", s.input, s.target);
    if (s.input.channels() != 3) throw DimensionError("fit: samples must have 3 channels");
  }

  FitResult r;
  r.params = initial;
  r.adam = resume ? *resume : make_adam_state(initial);
  const std::int64_t spe = steps_per_epoch(dataset.size(), cfg);
  const std::int64_t total = spe * cfg.epochs;
  r.history.reserve(static_cast<std::size_t>(total));
  std::mt19937_64 rng(cfg.seed);
  std::int64_t step = static_cast<std::int64_t>(r.adam.step);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<CropSpec> crops;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const int h = std::min(cfg.crop, dataset[i].input.height());
      const int w = std::min(cfg.crop, dataset[i].input.width());
      for (int c = 0; c < cfg.crops_per_image; ++c) {
        const int y = static_cast<int>(below(rng, std::uint64_t(dataset[i].input.height() - h + 1)));
        const int x = static_cast<int>(below(rng, std::uint64_t(dataset[i].input.width() - w + 1)));
        crops.push_back({i, y, x, h, w});
      }
    }
    for (std::size_t i = crops.size(); i > 1; --i) std::swap(crops[i - 1], crops[below(rng, i)]);

    for (std::size_t b = 0; b < crops.size(); b += cfg.batch_size) {
      const std::size_t end = std::min(crops.size(), b + cfg.batch_size);
      const float inv = 1.0f / static_cast<float>(end - b);
      const double lr = cosine_lr(step, spe, cfg);
      ModelParams<float> grad = ModelParams<float>::zeros(r.params.variant, r.params.config);
      double loss = 0.0;
      for (std::size_t k = b; k < end; ++k) {
        const SamplePair& s = dataset[crops[k].pair];
        const ImageTensor input = crop_region(s.input, crops[k]);
        const ImageTensor target = crop_region(s.target, crops[k]);
        ModelTrace<float> trace;
        const ImageTensor out = forward(input, r.params, &trace);
        const LossResult<float> l = mse_loss(out, target);
        loss += l.loss;
        accumulate(grad, backward(r.params, trace, l.grad), inv);
      }
      adam_step(r.params, grad, r.adam, lr, cfg);
      const HistoryRecord rec{step, lr, loss / static_cast<double>(end - b)};
      r.history.push_back(rec);
      if (progress) progress(rec, total);
      ++step;
    }
  }
  return r;
}

// ---- gradient check -----------------------------------------------------------

std::vector<TensorGradCheck> gradient_check(const ModelParams<double>& mp, const Tensor<double>& input,
                                            const Tensor<double>& target, const GradCheckOptions& options) {
  ModelTrace<double> trace;
  const Tensor<double> out = forward(input, mp, &trace);
  const ModelParams<double> analytic = backward(mp, trace, mse_loss(out, target).grad);

  ModelParams<double> probe = mp;
  auto values = tensor_spans(probe);
  const auto grads = tensor_spans(analytic);
  std::vector<std::string> names;
  mp.for_each_tensor([&](const std::string& name, std::span<const double>, const Dims&) { names.push_back(name); });

  auto loss_at = [&]() { return mse_loss(forward(input, probe), target).loss; };
  std::mt19937_64 rng(options.seed);
  std::vector<TensorGradCheck> report;
  for (std::size_t k = 0; k < values.size(); ++k) {
    std::vector<std::size_t> indices;
    if (values[k].size() <= options.samples_per_tensor) {
      for (std::size_t i = 0; i < values[k].size(); ++i) indices.push_back(i);
    } else {
      std::set<std::size_t> picked;
      while (picked.size() < options.samples_per_tensor) picked.insert(below(rng, values[k].size()));
      indices.assign(picked.begin(), picked.end());
    }
    TensorGradCheck c;
    c.name = names[k];
    for (std::size_t i : indices) {
      const double original = values[k][i];
      values[k][i] = original + options.epsilon;
      const double plus = loss_at();
      values[k][i] = original - options.epsilon;
      const double minus = loss_at();
      values[k][i] = original;
      const double numeric = (plus - minus) / (2.0 * options.epsilon);
      c.max_abs_error = std::max(c.max_abs_error, std::abs(numeric - grads[k][i]));
      c.max_abs_numeric = std::max(c.max_abs_numeric, std::abs(numeric));
      ++c.checked;
    }
    c.relative_error = c.max_abs_error / std::max(c.max_abs_numeric, kGradCheckFloor);
    report.push_back(std::move(c));
  }
  return report;
}

// ---- files -------------------------------------------------------------------------

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  std::vector<ManifestEntry> entries;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos || tab == 0 ||
        tab + 1 == line.size()) {
      throw IoError(path.string() + ":" + std::to_string(number) + ": expected two tab-separated paths");
    }
    entries.push_back({resolve(line.substr(0, tab)), resolve(line.substr(tab + 1))});
  }
  return entries;
}

void save_adam_state(const AdamState<float>& state, const ModelParams<float>& mp, const std::filesystem::path& path) {
  WeightFile f;
  f.variant = mp.variant;
  f.config = mp.config;
  std::vector<std::pair<std::string, Dims>> shapes;
  mp.for_each_tensor([&](const std::string& name, std::span<const float>, const Dims& dims) {
    shapes.emplace_back(name, dims);
  });
  if (state.m.size() != shapes.size() || state.v.size() != shapes.size()) {
    throw DimensionError("save_adam_state: optimizer state does not match parameters");
  }
  for (std::size_t k = 0; k < shapes.size(); ++k) f.tensors.push_back({"adam.m." + shapes[k].first, shapes[k].second, state.m[k]});
  for (std::size_t k = 0; k < shapes.size(); ++k) f.tensors.push_back({"adam.v." + shapes[k].first, shapes[k].second, state.v[k]});
  const std::uint64_t step = state.step;
  f.tensors.push_back({"adam.step", Dims{2},
                       {std::bit_cast<float>(static_cast<std::uint32_t>(step)),
                        std::bit_cast<float>(static_cast<std::uint32_t>(step >> 32))}});
  write_weight_file(f, path);
}

AdamState<float> load_adam_state(const std::filesystem::path& path, const ModelParams<float>& mp) {
  const WeightFile f = read_weight_file(path);
  if (f.variant != mp.variant) throw LoadError(LoadError::Kind::kVariantMismatch, "optimizer state: variant mismatch");
  if (f.config.levels != mp.config.levels || f.config.cfd_count != mp.config.cfd_count ||
      f.config.pooling != mp.config.pooling || f.config.hf_shared != mp.config.hf_shared) {
    throw LoadError(LoadError::Kind::kBadConfig, "optimizer state: config does not match the weights");
  }
  std::vector<std::pair<std::string, Dims>> shapes;
  mp.for_each_tensor([&](const std::string& name, std::span<const float>, const Dims& dims) {
    shapes.emplace_back(name, dims);
  });
  const std::size_t n = shapes.size();
  if (f.tensors.size() != 2 * n + 1) throw LoadError(LoadError::Kind::kShapeMismatch, "optimizer state: tensor count");
  AdamState<float> s;
  for (int part = 0; part < 2; ++part) {
    const std::string prefix = part == 0 ? "adam.m." : "adam.v.";
    for (std::size_t k = 0; k < n; ++k) {
      const TensorRecord& t = f.tensors[part * n + k];
      if (t.name != prefix + shapes[k].first || t.dims != shapes[k].second) {
        throw LoadError(LoadError::Kind::kShapeMismatch, "optimizer state: unexpected tensor " + t.name);
      }
      (part == 0 ? s.m : s.v).push_back(t.values);
    }
  }
  const TensorRecord& st = f.tensors.back();
  if (st.name != "adam.step" || st.values.size() != 2) {
    throw LoadError(LoadError::Kind::kShapeMismatch, "optimizer state: missing step counter");
  }
  s.step = std::uint64_t(std::bit_cast<std::uint32_t>(st.values[0])) |
           (std::uint64_t(std::bit_cast<std::uint32_t>(st.values[1])) << 32);
  return s;
}

#define MSLT_INSTANTIATE_TRAINING(T)                                                                 \
  template LossResult<T> mse_loss(const Tensor<T>&, const Tensor<T>&);                               \
  template AdamState<T> make_adam_state(const ModelParams<T>&);                                      \
  template void adam_step(ModelParams<T>&, const ModelParams<T>&, AdamState<T>&, double, const TrainConfig&); \
  template ModelParams<T> backward(const ModelParams<T>&, const ModelTrace<T>&, const Tensor<T>&);  \
  template void accumulate(ModelParams<T>&, const ModelParams<T>&, T);

MSLT_INSTANTIATE_TRAINING(float)
MSLT_INSTANTIATE_TRAINING(double)

#undef MSLT_INSTANTIATE_TRAINING

}  // namespace mslt
