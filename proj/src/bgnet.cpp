#include "mslt/bgnet.hpp"

#include <cmath>
#include <string>

#include "mslt/parallel.hpp"

namespace mslt {

namespace {

constexpr std::array<int, 9> kOffDiagonal = {1, 2, 3, 4, 6, 7, 8, 9, 11};

template <typename T>
void require_guidance(const Tensor<T>& g) {
  if (g.channels() != 1) throw DimensionError("slice: guidance must have one channel");
  for (T v : g.values()) {
    if (!(v >= T(0) && v <= T(1))) throw ContractError("slice: guidance value outside [0, 1]");
  }
}

// Per-channel sums of a * b in double, reduced in pixel order.
template <typename T>
std::vector<double> channel_dot(const Tensor<T>& a, const Tensor<T>& b) {
  const int ch = a.channels();
  std::vector<double> acc(ch, 0.0);
  const T* pa = a.data();
  const T* pb = b.data();
  for (std::size_t p = 0; p < a.pixels(); ++p, pa += ch, pb += ch)
    for (int c = 0; c < ch; ++c) acc[c] += static_cast<double>(pa[c]) * static_cast<double>(pb[c]);
  return acc;
}

template <typename T>
Tensor<T> scale_channels(const Tensor<T>& x, const std::vector<T>& s) {
  Tensor<T> y(x.height(), x.width(), x.channels());
  const int ch = x.channels();
  const T* in = x.data();
  T* out = y.data();
  for (std::size_t p = 0; p < x.pixels(); ++p, in += ch, out += ch)
    for (int c = 0; c < ch; ++c) out[c] = in[c] * s[c];
  return y;
}

// Depth bins touched by t = d * G: (bin, weight, d weight / dt), at most two.
struct DepthTap {
  int count = 0;
  std::array<int, 2> bin{};
  std::array<double, 2> weight{};
  std::array<double, 2> slope{};
};

DepthTap depth_taps(double t) {
  DepthTap d;
  const int k0 = static_cast<int>(std::floor(t));
  const double f = t - k0;
  if (k0 >= 0 && k0 < kGridDepth) {
    d.bin[d.count] = k0;
    d.weight[d.count] = 1.0 - f;
    d.slope[d.count] = -1.0;
    ++d.count;
  }
  if (k0 + 1 >= 0 && k0 + 1 < kGridDepth) {
    d.bin[d.count] = k0 + 1;
    d.weight[d.count] = f;
    d.slope[d.count] = 1.0;
    ++d.count;
  }
  return d;
}

struct SpatialTap {
  int i0;
  double w1;  // weight of i0 + 1
};

SpatialTap spatial_tap(int pos, int extent) {
  const double u = grid_coordinate(pos, extent);
  int i0 = static_cast<int>(std::floor(u));
  if (i0 > kGridCells - 2) i0 = kGridCells - 2;
  return {i0, u - i0};
}

}  // namespace

// ---- SFE -------------------------------------------------------------------

template <typename T>
Tensor<T> sfe_forward(const Tensor<T>& x, const SfeParams<T>& p, SfeCache<T>* cache) {
  SfeCache<T> local;
  SfeCache<T>& c = cache ? *cache : local;
  c.input = x;
  c.pre = conv1x1(x, p.conv_a);
  c.activated = relu(c.pre);
  c.mean = global_avg_pool(c.activated);
  c.modulated = scale_channels(c.activated, c.mean);
  c.body = conv1x1(c.modulated, p.conv_b);
  c.output = p.head ? sigmoid(conv1x1(c.body, *p.head)) : c.body;
  return c.output;
}

template <typename T>
Tensor<T> sfe_backward(const SfeCache<T>& c, const SfeParams<T>& p, const Tensor<T>& dy, SfeParams<T>* grad) {
  Tensor<T> d_body;
  if (p.head) {
    const Tensor<T> dz = sigmoid_backward(c.output, dy);
    conv1x1_backward(c.body, *p.head, dz, &d_body, &*grad->head);
  } else {
    d_body = dy;
  }
  Tensor<T> d_mod;
  conv1x1_backward(c.modulated, p.conv_b, d_body, &d_mod, &grad->conv_b);

  // modulated = activated * mean(activated)
  const std::vector<double> d_mean = channel_dot(d_mod, c.activated);
  const double n = static_cast<double>(c.activated.pixels());
  const int ch = d_mod.channels();
  Tensor<T> d_act(d_mod.height(), d_mod.width(), ch);
  for (std::size_t q = 0; q < d_mod.pixels(); ++q) {
    const T* g = d_mod.data() + q * ch;
    T* out = d_act.data() + q * ch;
    for (int k = 0; k < ch; ++k) out[k] = g[k] * c.mean[k] + static_cast<T>(d_mean[k] / n);
  }
  const Tensor<T> d_pre = relu_backward(c.pre, d_act);
  Tensor<T> dx;
  conv1x1_backward(c.input, p.conv_a, d_pre, &dx, &grad->conv_a);
  return dx;
}

// ---- CFD -------------------------------------------------------------------

template <typename T>
CfdResult<T> cfd_forward(const Tensor<T>& x, PoolingMode mode) {
  CfdResult<T> r;
  r.mean = global_avg_pool(x);
  r.stdev = global_std_pool(x);
  const int ch = x.channels();
  r.scale.resize(ch);
  for (int c = 0; c < ch; ++c) {
    switch (mode) {
      case PoolingMode::kGap: r.scale[c] = r.mean[c]; break;
      case PoolingMode::kGsp: r.scale[c] = r.stdev[c]; break;
      case PoolingMode::kGapGsp: r.scale[c] = r.mean[c] + r.stdev[c]; break;
    }
  }
  r.context = scale_channels(x, r.scale);
  r.residual = subtract(x, r.context);
  return r;
}

template <typename T>
Tensor<T> cfd_backward(const Tensor<T>& x, const CfdResult<T>& fwd, PoolingMode mode, const Tensor<T>& d_context,
                       const Tensor<T>& d_residual) {
  require_same_shape("cfd_backward", x, d_context);
  require_same_shape("cfd_backward", x, d_residual);
  const int ch = x.channels();
  const double n = static_cast<double>(x.pixels());
  // context = x * s, residual = x - x * s
  const Tensor<T> diff = subtract(d_context, d_residual);
  const std::vector<double> d_scale = channel_dot(diff, x);

  Tensor<T> dx(x.height(), x.width(), ch);
  const bool use_mean = mode != PoolingMode::kGsp;
  const bool use_std = mode != PoolingMode::kGap;
  std::vector<T> mean_term(ch, T(0));
  std::vector<T> std_term(ch, T(0));
  for (int c = 0; c < ch; ++c) {
    if (use_mean) mean_term[c] = static_cast<T>(d_scale[c] / n);
    if (use_std && fwd.stdev[c] > T(0)) std_term[c] = static_cast<T>(d_scale[c] / (n * fwd.stdev[c]));
  }
  for (std::size_t q = 0; q < x.pixels(); ++q) {
    const T* xp = x.data() + q * ch;
    const T* dd = diff.data() + q * ch;
    const T* dr = d_residual.data() + q * ch;
    T* out = dx.data() + q * ch;
    for (int c = 0; c < ch; ++c) {
      out[c] = dr[c] + dd[c] * fwd.scale[c] + mean_term[c] + std_term[c] * (xp[c] - fwd.mean[c]);
    }
  }
  return dx;
}

// ---- HFD -------------------------------------------------------------------

GridSlot grid_slot(int block_position, int channel) {
  if (channel < 2) {
    const int s = channel * 9 + block_position;
    const int row = s % 3;
    return {s / 3, row * 4 + row};
  }
  return {channel - 2, kOffDiagonal[block_position]};
}

template <typename T>
BilateralGrid<T> grid_from_features(const Tensor<T>& fused) {
  if (fused.height() != kHfdInputSize || fused.width() != kHfdInputSize || fused.channels() != kFusedChannels) {
    throw DimensionError("grid_from_features: expected 48x48x8 features");
  }
  BilateralGrid<T> grid;
  for (int bi = 0; bi < kGridCells; ++bi)
    for (int bj = 0; bj < kGridCells; ++bj)
      for (int r = 0; r < kGridBlock; ++r)
        for (int c = 0; c < kGridBlock; ++c) {
          const T* f = fused.pixel(bi * kGridBlock + r, bj * kGridBlock + c);
          for (int ch = 0; ch < kFusedChannels; ++ch) {
            const GridSlot s = grid_slot(r * kGridBlock + c, ch);
            grid.at(bi, bj, s.depth, s.coeff) = f[ch];
          }
        }
  return grid;
}

template <typename T>
Tensor<T> features_from_grid(const BilateralGrid<T>& grid) {
  Tensor<T> fused(kHfdInputSize, kHfdInputSize, kFusedChannels);
  for (int bi = 0; bi < kGridCells; ++bi)
    for (int bj = 0; bj < kGridCells; ++bj)
      for (int r = 0; r < kGridBlock; ++r)
        for (int c = 0; c < kGridBlock; ++c) {
          T* f = fused.pixel(bi * kGridBlock + r, bj * kGridBlock + c);
          for (int ch = 0; ch < kFusedChannels; ++ch) {
            const GridSlot s = grid_slot(r * kGridBlock + c, ch);
            f[ch] = grid.at(bi, bj, s.depth, s.coeff);
          }
        }
  return fused;
}

template <typename T>
BilateralGrid<T> hfd_forward(const Tensor<T>& lhat, const HfdParams<T>& p, const BgnetConfig& cfg,
                             HfdCache<T>* cache) {
  if (lhat.height() != kHfdInputSize || lhat.width() != kHfdInputSize || lhat.channels() != 3) {
    throw SizeError("hfd_forward: input must be 48x48x3, got " + std::to_string(lhat.height()) + "x" +
                    std::to_string(lhat.width()) + "x" + std::to_string(lhat.channels()));
  }
  if (cfg.cfd_count < 1) throw ContractError("hfd_forward: CFD count must be >= 1");
  HfdCache<T> local;
  HfdCache<T>& c = cache ? *cache : local;
  c.input = lhat;
  c.stages.assign(cfg.cfd_count, HfdStage<T>{});

  Tensor<T> f = conv1x1(lhat, p.stem);
  Tensor<T> acc(kHfdInputSize, kHfdInputSize, kHfdChannels);
  for (int k = 0; k < cfg.cfd_count; ++k) {
    HfdStage<T>& s = c.stages[k];
    s.input = std::move(f);
    s.cfd = cfd_forward(s.input, cfg.pooling);
    s.refine_pre = conv1x1(s.cfd.context, p.refine);
    add_inplace(acc, relu(s.refine_pre));
    f = sfe_forward(s.cfd.residual, p.sfe, &s.sfe);
  }
  add_inplace(acc, f);
  c.summed = std::move(acc);
  c.fused = conv1x1(c.summed, p.fuse);
  return grid_from_features(c.fused);
}

template <typename T>
Tensor<T> hfd_backward(const HfdCache<T>& c, const HfdParams<T>& p, const BgnetConfig& cfg,
                       const BilateralGrid<T>& d_grid, HfdParams<T>* grad) {
  if (static_cast<int>(c.stages.size()) != cfg.cfd_count) throw ContractError("hfd_backward: stale cache");
  const Tensor<T> d_fused = features_from_grid(d_grid);
  Tensor<T> d_sum;
  conv1x1_backward(c.summed, p.fuse, d_fused, &d_sum, &grad->fuse);

  Tensor<T> df = d_sum;
  for (int k = cfg.cfd_count - 1; k >= 0; --k) {
    const HfdStage<T>& s = c.stages[k];
    const Tensor<T> d_res = sfe_backward(s.sfe, p.sfe, df, &grad->sfe);
    const Tensor<T> d_pre = relu_backward(s.refine_pre, d_sum);
    Tensor<T> d_ctx;
    conv1x1_backward(s.cfd.context, p.refine, d_pre, &d_ctx, &grad->refine);
    df = cfd_backward(s.input, s.cfd, cfg.pooling, d_ctx, d_res);
  }
  Tensor<T> d_lhat;
  conv1x1_backward(c.input, p.stem, df, &d_lhat, &grad->stem);
  return d_lhat;
}

// ---- slicing ---------------------------------------------------------------

template <typename T>
Tensor<T> slice(const BilateralGrid<T>& grid, const Tensor<T>& guidance) {
  require_guidance(guidance);
  const int h = guidance.height();
  const int w = guidance.width();
  Tensor<T> out(h, w, kAffineCoeffs);
  parallel_rows(h, [&](int y) {
    const SpatialTap ty = spatial_tap(y, h);
    for (int x = 0; x < w; ++x) {
      const SpatialTap tx = spatial_tap(x, w);
      const DepthTap tz = depth_taps(static_cast<double>(kGridDepth) * guidance(y, x, 0));
      T* b = out.pixel(y, x);
      for (int a = 0; a < 2; ++a) {
        const double wy = a ? ty.w1 : 1.0 - ty.w1;
        for (int e = 0; e < 2; ++e) {
          const double wx = e ? tx.w1 : 1.0 - tx.w1;
          for (int q = 0; q < tz.count; ++q) {
            const T wgt = static_cast<T>(wy * wx * tz.weight[q]);
            const T* cell = &grid.at(ty.i0 + a, tx.i0 + e, tz.bin[q], 0);
            for (int c = 0; c < kAffineCoeffs; ++c) b[c] += wgt * cell[c];
          }
        }
      }
    }
  });
  return out;
}

template <typename T>
void slice_backward(const BilateralGrid<T>& grid, const Tensor<T>& guidance, const Tensor<T>& d_coeffs,
                    BilateralGrid<T>* d_grid, Tensor<T>* d_guidance) {
  require_guidance(guidance);
  if (d_coeffs.height() != guidance.height() || d_coeffs.width() != guidance.width() ||
      d_coeffs.channels() != kAffineCoeffs) {
    throw DimensionError("slice_backward: coefficient gradient shape mismatch");
  }
  const int h = guidance.height();
  const int w = guidance.width();
  if (d_guidance) *d_guidance = Tensor<T>(h, w, 1);
  for (int y = 0; y < h; ++y) {
    const SpatialTap ty = spatial_tap(y, h);
    for (int x = 0; x < w; ++x) {
      const SpatialTap tx = spatial_tap(x, w);
      const DepthTap tz = depth_taps(static_cast<double>(kGridDepth) * guidance(y, x, 0));
      const T* g = d_coeffs.pixel(y, x);
      double dg = 0.0;
      for (int a = 0; a < 2; ++a) {
        const double wy = a ? ty.w1 : 1.0 - ty.w1;
        for (int e = 0; e < 2; ++e) {
          const double wx = e ? tx.w1 : 1.0 - tx.w1;
          for (int q = 0; q < tz.count; ++q) {
            const int i = ty.i0 + a;
            const int j = tx.i0 + e;
            if (d_grid) {
              const T wgt = static_cast<T>(wy * wx * tz.weight[q]);
              T* cell = &d_grid->at(i, j, tz.bin[q], 0);
              for (int c = 0; c < kAffineCoeffs; ++c) cell[c] += wgt * g[c];
            }
            if (d_guidance) {
              const T* cell = &grid.at(i, j, tz.bin[q], 0);
              double dot = 0.0;
              for (int c = 0; c < kAffineCoeffs; ++c) dot += static_cast<double>(cell[c]) * g[c];
              dg += wy * wx * tz.slope[q] * dot;
            }
          }
        }
      }
      if (d_guidance) (*d_guidance)(y, x, 0) = static_cast<T>(kGridDepth * dg);
    }
  }
}

// ---- affine ----------------------------------------------------------------

template <typename T>
Tensor<T> apply_affine(const Tensor<T>& image, const Tensor<T>& coeffs) {
  if (image.channels() != 3 || coeffs.channels() != kAffineCoeffs || image.height() != coeffs.height() ||
      image.width() != coeffs.width()) {
    throw DimensionError("apply_affine: expects HxWx3 image and HxWx12 coefficients");
  }
  Tensor<T> out(image.height(), image.width(), 3);
  for (std::size_t p = 0; p < image.pixels(); ++p) {
    const T* v = image.data() + p * 3;
    const T* a = coeffs.data() + p * kAffineCoeffs;
    T* o = out.data() + p * 3;
    for (int r = 0; r < 3; ++r) o[r] = a[4 * r] * v[0] + a[4 * r + 1] * v[1] + a[4 * r + 2] * v[2] + a[4 * r + 3];
  }
  return out;
}

template <typename T>
void apply_affine_backward(const Tensor<T>& image, const Tensor<T>& coeffs, const Tensor<T>& dy, Tensor<T>* d_image,
                           Tensor<T>* d_coeffs) {
  require_same_shape("apply_affine_backward", image, dy);
  if (d_image) *d_image = Tensor<T>(image.height(), image.width(), 3);
  if (d_coeffs) *d_coeffs = Tensor<T>(image.height(), image.width(), kAffineCoeffs);
  for (std::size_t p = 0; p < image.pixels(); ++p) {
    const T* v = image.data() + p * 3;
    const T* a = coeffs.data() + p * kAffineCoeffs;
    const T* g = dy.data() + p * 3;
    if (d_image) {
      T* d = d_image->data() + p * 3;
      for (int j = 0; j < 3; ++j) d[j] = a[j] * g[0] + a[4 + j] * g[1] + a[8 + j] * g[2];
    }
    if (d_coeffs) {
      T* d = d_coeffs->data() + p * kAffineCoeffs;
      for (int r = 0; r < 3; ++r) {
        d[4 * r] = g[r] * v[0];
        d[4 * r + 1] = g[r] * v[1];
        d[4 * r + 2] = g[r] * v[2];
        d[4 * r + 3] = g[r];
      }
    }
  }
}

// ---- low-frequency corrector -------------------------------------------------

template <typename T>
Tensor<T> correct_low_freq(const Tensor<T>& low, const SfeParams<T>& guidance_p, const HfdParams<T>& hfd_p,
                           const BgnetConfig& cfg, LowFreqTrace<T>* trace) {
  if (low.channels() != 3) throw DimensionError("correct_low_freq: low-frequency layer must have 3 channels");
  if (!guidance_p.head) throw ContractError("correct_low_freq: guidance SFE needs a head");
  LowFreqTrace<T> local;
  LowFreqTrace<T>& t = trace ? *trace : local;
  t.input = low;
  t.guidance = sfe_forward(low, guidance_p, &t.guidance_cache);
  t.lhat = resize_bilinear(low, kHfdInputSize, kHfdInputSize);
  t.grid = hfd_forward(t.lhat, hfd_p, cfg, &t.hfd);
  t.coeffs = slice(t.grid, t.guidance);
  return apply_affine(low, t.coeffs);
}

template <typename T>
Tensor<T> correct_low_freq_backward(const LowFreqTrace<T>& t, const SfeParams<T>& guidance_p,
                                    const HfdParams<T>& hfd_p, const BgnetConfig& cfg, const Tensor<T>& d_output,
                                    SfeParams<T>* guidance_grad, HfdParams<T>* hfd_grad) {
  Tensor<T> d_low;
  Tensor<T> d_coeffs;
  apply_affine_backward(t.input, t.coeffs, d_output, &d_low, &d_coeffs);
  BilateralGrid<T> d_grid;
  Tensor<T> d_guidance;
  slice_backward(t.grid, t.guidance, d_coeffs, &d_grid, &d_guidance);
  const Tensor<T> d_lhat = hfd_backward(t.hfd, hfd_p, cfg, d_grid, hfd_grad);
  add_inplace(d_low, resize_bilinear_backward(d_lhat, t.input.height(), t.input.width()));
  add_inplace(d_low, sfe_backward(t.guidance_cache, guidance_p, d_guidance, guidance_grad));
  return d_low;
}

#define MSLT_INSTANTIATE_BGNET(T)                                                                                  \
  template Tensor<T> sfe_forward(const Tensor<T>&, const SfeParams<T>&, SfeCache<T>*);                            \
  template Tensor<T> sfe_backward(const SfeCache<T>&, const SfeParams<T>&, const Tensor<T>&, SfeParams<T>*);      \
  template CfdResult<T> cfd_forward(const Tensor<T>&, PoolingMode);                                               \
  template Tensor<T> cfd_backward(const Tensor<T>&, const CfdResult<T>&, PoolingMode, const Tensor<T>&,           \
                                  const Tensor<T>&);                                                              \
  template BilateralGrid<T> grid_from_features(const Tensor<T>&);                                                 \
  template Tensor<T> features_from_grid(const BilateralGrid<T>&);                                                 \
  template BilateralGrid<T> hfd_forward(const Tensor<T>&, const HfdParams<T>&, const BgnetConfig&, HfdCache<T>*); \
  template Tensor<T> hfd_backward(const HfdCache<T>&, const HfdParams<T>&, const BgnetConfig&,                    \
                                  const BilateralGrid<T>&, HfdParams<T>*);                                        \
  template Tensor<T> slice(const BilateralGrid<T>&, const Tensor<T>&);                                            \
  template void slice_backward(const BilateralGrid<T>&, const Tensor<T>&, const Tensor<T>&, BilateralGrid<T>*,    \
                               Tensor<T>*);                                                                       \
  template Tensor<T> apply_affine(const Tensor<T>&, const Tensor<T>&);                                            \
  template void apply_affine_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>*,           \
                                      Tensor<T>*);                                                                \
  template Tensor<T> correct_low_freq(const Tensor<T>&, const SfeParams<T>&, const HfdParams<T>&,                 \
                                      const BgnetConfig&, LowFreqTrace<T>*);                                      \
  template Tensor<T> correct_low_freq_backward(const LowFreqTrace<T>&, const SfeParams<T>&, const HfdParams<T>&,  \
                                               const BgnetConfig&, const Tensor<T>&, SfeParams<T>*,               \
                                               HfdParams<T>*);

MSLT_INSTANTIATE_BGNET(float)
MSLT_INSTANTIATE_BGNET(double)

#undef MSLT_INSTANTIATE_BGNET

}  // namespace mslt
