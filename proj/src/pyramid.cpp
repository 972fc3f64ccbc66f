#include "mslt/pyramid.hpp"

#include <array>
#include <string>

#include "mslt/parallel.hpp"

namespace mslt {

namespace {

constexpr std::array<int, 5> kBinomial = {1, 4, 6, 4, 1};

// One output sample of a 1D separable pass: up to five (source, weight) taps.
struct Taps1d {
  int count = 0;
  std::array<int, 5> src{};
  std::array<double, 5> weight{};
};

// Blur + decimate: output o reads 2o + k - 2, k = 0..4, mirrored at the borders.
std::vector<Taps1d> down_taps(int n) {
  std::vector<Taps1d> taps((n + 1) / 2);
  for (int o = 0; o < static_cast<int>(taps.size()); ++o) {
    Taps1d& t = taps[o];
    for (int k = 0; k < 5; ++k) {
      t.src[t.count] = reflect_index(2 * o + k - 2, n);
      t.weight[t.count] = kBinomial[k] / 16.0;
      ++t.count;
    }
  }
  return taps;
}

// Zero insertion onto a 2n grid, then the binomial kernel x2 per axis (x4 total).
// Only even positions of the mirrored zero-inserted grid carry samples.
std::vector<Taps1d> up_taps(int n) {
  std::vector<Taps1d> taps(2 * n);
  for (int o = 0; o < 2 * n; ++o) {
    Taps1d& t = taps[o];
    for (int k = 0; k < 5; ++k) {
      const int u = reflect_index(o + k - 2, 2 * n);
      if (u % 2 != 0) continue;
      t.src[t.count] = u / 2;
      t.weight[t.count] = 2.0 * kBinomial[k] / 16.0;
      ++t.count;
    }
  }
  return taps;
}

template <typename T>
Tensor<T> separable(const Tensor<T>& x, const std::vector<Taps1d>& ty, const std::vector<Taps1d>& tx) {
  const int ch = x.channels();
  const int oh = static_cast<int>(ty.size());
  const int ow = static_cast<int>(tx.size());
  Tensor<T> tmp(x.height(), ow, ch);
  parallel_rows(x.height(), [&](int r) {
    for (int c = 0; c < ow; ++c) {
      const Taps1d& t = tx[c];
      T* out = tmp.pixel(r, c);
      for (int k = 0; k < t.count; ++k) {
        const T w = static_cast<T>(t.weight[k]);
        const T* in = x.pixel(r, t.src[k]);
        for (int j = 0; j < ch; ++j) out[j] += w * in[j];
      }
    }
  });
  Tensor<T> y(oh, ow, ch);
  parallel_rows(oh, [&](int r) {
    const Taps1d& t = ty[r];
    for (int k = 0; k < t.count; ++k) {
      const T w = static_cast<T>(t.weight[k]);
      const T* in = tmp.pixel(t.src[k], 0);
      T* out = y.pixel(r, 0);
      for (int j = 0; j < ow * ch; ++j) out[j] += w * in[j];
    }
  });
  return y;
}

template <typename T>
Tensor<T> separable_adjoint(const Tensor<T>& dy, const std::vector<Taps1d>& ty, const std::vector<Taps1d>& tx,
                            int in_h, int in_w) {
  const int ch = dy.channels();
  const int ow = dy.width();
  Tensor<T> dtmp(in_h, ow, ch);
  for (int r = 0; r < dy.height(); ++r) {
    const Taps1d& t = ty[r];
    for (int k = 0; k < t.count; ++k) {
      const T w = static_cast<T>(t.weight[k]);
      const T* g = dy.pixel(r, 0);
      T* out = dtmp.pixel(t.src[k], 0);
      for (int j = 0; j < ow * ch; ++j) out[j] += w * g[j];
    }
  }
  Tensor<T> dx(in_h, in_w, ch);
  parallel_rows(in_h, [&](int r) {
    for (int c = 0; c < ow; ++c) {
      const Taps1d& t = tx[c];
      const T* g = dtmp.pixel(r, c);
      for (int k = 0; k < t.count; ++k) {
        const T w = static_cast<T>(t.weight[k]);
        T* out = dx.pixel(r, t.src[k]);
        for (int j = 0; j < ch; ++j) out[j] += w * g[j];
      }
    }
  });
  return dx;
}

void check_levels(int levels) {
  if (levels < 2) throw ContractError("pyramid: level count must be >= 2, got " + std::to_string(levels));
  if (levels > 12) throw ContractError("pyramid: level count too large");
}

template <typename T>
void check_input(const Tensor<T>& image, int levels) {
  check_levels(levels);
  if (image.channels() != 3) throw DimensionError("pyramid: input must have 3 channels");
  const int m = pyramid_multiple(levels);
  if (image.height() < m || image.width() < m) {
    throw SizeError("pyramid: " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                    " input is smaller than 2^(n-1) = " + std::to_string(m));
  }
}

template <typename T>
void check_layers(const Pyramid<T>& p) {
  check_levels(p.levels);
  if (static_cast<int>(p.highs.size()) != p.levels - 1) throw DimensionError("pyramid: expected n-1 high layers");
  for (int i = 0; i < p.levels - 1; ++i) {
    const Tensor<T>& h = p.highs[i];
    const Tensor<T>& coarser = (i + 1 < p.levels - 1) ? p.highs[i + 1] : p.low;
    if (h.channels() != 3 || coarser.channels() != 3) throw DimensionError("pyramid: layers must have 3 channels");
    if (h.height() != 2 * coarser.height() || h.width() != 2 * coarser.width()) {
      throw DimensionError("pyramid: level " + std::to_string(i + 1) + " is not twice the size of level " +
                           std::to_string(i + 2));
    }
  }
  if (p.source_height > p.padded_height() || p.source_width > p.padded_width() || p.source_height < 1 ||
      p.source_width < 1) {
    throw DimensionError("pyramid: recorded source size does not fit the padded canvas");
  }
}

template <typename T>
void check_params(const PyramidParams<T>& pp, int levels) {
  if (static_cast<int>(pp.down.size()) != levels - 1 || static_cast<int>(pp.up.size()) != levels - 1) {
    throw DimensionError("pyramid: expected " + std::to_string(levels - 1) + " down and up kernels");
  }
  for (const auto* set : {&pp.down, &pp.up})
    for (const Conv3x3<T>& k : *set)
      if (k.in != 3 || k.out != 3) throw DimensionError("pyramid: kernels must map 3 -> 3 channels");
}

template <typename T>
Tensor<T> learnable_up(const Tensor<T>& x, const Conv3x3<T>& k, Tensor<T>* upsampled) {
  Tensor<T> u = resize_bilinear(x, 2 * x.height(), 2 * x.width());
  Tensor<T> y = conv3x3(u, k, 1, Padding::kReflect);
  if (upsampled != nullptr) *upsampled = std::move(u);
  return y;
}

// Returns the gradient w.r.t. the low-resolution input of learnable_up.
template <typename T>
Tensor<T> learnable_up_backward(const Tensor<T>& upsampled, const Conv3x3<T>& k, const Tensor<T>& dy,
                                Conv3x3<T>* grad) {
  Tensor<T> du;
  conv3x3_backward(upsampled, k, 1, Padding::kReflect, dy, &du, grad);
  return resize_bilinear_backward(du, upsampled.height() / 2, upsampled.width() / 2);
}

}  // namespace

Matrix<float> gaussian_kernel() {
  Matrix<float> k(5, 5);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) k(r, c) = static_cast<float>(kBinomial[r] * kBinomial[c]) / 256.0f;
  return k;
}

template <typename T>
Tensor<T> pad_to_multiple(const Tensor<T>& x, int multiple) {
  const int h = (x.height() + multiple - 1) / multiple * multiple;
  const int w = (x.width() + multiple - 1) / multiple * multiple;
  if (h == x.height() && w == x.width()) return x;
  Tensor<T> y(h, w, x.channels());
  for (int r = 0; r < h; ++r) {
    const int sr = reflect_index(r, x.height());
    for (int c = 0; c < w; ++c) {
      const T* in = x.pixel(sr, reflect_index(c, x.width()));
      std::copy(in, in + x.channels(), y.pixel(r, c));
    }
  }
  return y;
}

template <typename T>
Tensor<T> crop(const Tensor<T>& x, int height, int width) {
  if (height == x.height() && width == x.width()) return x;
  if (height > x.height() || width > x.width()) throw DimensionError("crop: target larger than source");
  Tensor<T> y(height, width, x.channels());
  for (int r = 0; r < height; ++r) {
    const T* in = x.pixel(r, 0);
    std::copy(in, in + std::size_t(width) * x.channels(), y.pixel(r, 0));
  }
  return y;
}

template <typename T>
Tensor<T> uncrop(const Tensor<T>& dy, int padded_height, int padded_width) {
  if (dy.height() == padded_height && dy.width() == padded_width) return dy;
  Tensor<T> y(padded_height, padded_width, dy.channels());
  for (int r = 0; r < dy.height(); ++r) {
    const T* in = dy.pixel(r, 0);
    std::copy(in, in + std::size_t(dy.width()) * dy.channels(), y.pixel(r, 0));
  }
  return y;
}

template <typename T>
Tensor<T> gaussian_down(const Tensor<T>& x) {
  return separable(x, down_taps(x.height()), down_taps(x.width()));
}

template <typename T>
Tensor<T> gaussian_up(const Tensor<T>& x) {
  return separable(x, up_taps(x.height()), up_taps(x.width()));
}

template <typename T>
Tensor<T> gaussian_up_adjoint(const Tensor<T>& dy) {
  const int h = dy.height() / 2;
  const int w = dy.width() / 2;
  return separable_adjoint(dy, up_taps(h), up_taps(w), h, w);
}

template <typename T>
Pyramid<T> decompose_fixed(const Tensor<T>& image, int levels) {
  check_input(image, levels);
  Pyramid<T> p;
  p.levels = levels;
  p.source_height = image.height();
  p.source_width = image.width();
  Tensor<T> g = pad_to_multiple(image, pyramid_multiple(levels));
  for (int i = 1; i < levels; ++i) {
    Tensor<T> next = gaussian_down(g);
    p.highs.push_back(subtract(g, gaussian_up(next)));
    g = std::move(next);
  }
  p.low = std::move(g);
  return p;
}

template <typename T>
Tensor<T> reconstruct_fixed(const Pyramid<T>& pyramid) {
  check_layers(pyramid);
  Tensor<T> x = pyramid.low;
  for (int i = pyramid.levels - 2; i >= 0; --i) x = add(pyramid.highs[i], gaussian_up(x));
  return crop(x, pyramid.source_height, pyramid.source_width);
}

template <typename T>
Pyramid<T> reconstruct_fixed_backward(const Pyramid<T>& shape, const Tensor<T>& d_output) {
  check_layers(shape);
  Pyramid<T> g;
  g.levels = shape.levels;
  g.source_height = shape.source_height;
  g.source_width = shape.source_width;
  Tensor<T> dx = uncrop(d_output, shape.padded_height(), shape.padded_width());
  g.highs.resize(shape.levels - 1);
  for (int i = 0; i < shape.levels - 1; ++i) {
    Tensor<T> next = gaussian_up_adjoint(dx);
    g.highs[i] = std::move(dx);
    dx = std::move(next);
  }
  g.low = std::move(dx);
  return g;
}

template <typename T>
PyramidParams<T> gaussian_pyramid_params(int levels) {
  check_levels(levels);
  static constexpr int kTap[3] = {1, 2, 1};
  PyramidParams<T> pp;
  for (int i = 0; i < levels - 1; ++i) {
    Conv3x3<T> down(3, 3);
    Conv3x3<T> up(3, 3);
    for (int c = 0; c < 3; ++c) {
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) down.at(c, c, ky, kx) = static_cast<T>(kTap[ky] * kTap[kx] / 16.0);
      up.at(c, c, 1, 1) = T(1);
    }
    pp.down.push_back(std::move(down));
    pp.up.push_back(std::move(up));
  }
  return pp;
}

template <typename T>
std::size_t param_count(const PyramidParams<T>& pp) {
  std::size_t n = 0;
  for (const auto& k : pp.down) n += k.param_count();
  for (const auto& k : pp.up) n += k.param_count();
  return n;
}

template <typename T>
LearnableDecomposition<T> decompose_learnable_traced(const Tensor<T>& image, int levels,
                                                     const PyramidParams<T>& pp) {
  check_input(image, levels);
  check_params(pp, levels);
  LearnableDecomposition<T> t;
  t.pyramid.levels = levels;
  t.pyramid.source_height = image.height();
  t.pyramid.source_width = image.width();
  t.gaussians.push_back(pad_to_multiple(image, pyramid_multiple(levels)));
  for (int i = 0; i < levels - 1; ++i) {
    t.gaussians.push_back(conv3x3(t.gaussians[i], pp.down[i], 2, Padding::kReflect));
  }
  t.upsampled.resize(levels - 1);
  for (int i = 0; i < levels - 1; ++i) {
    t.pyramid.highs.push_back(subtract(t.gaussians[i], learnable_up(t.gaussians[i + 1], pp.up[i], &t.upsampled[i])));
  }
  t.pyramid.low = t.gaussians.back();
  return t;
}

template <typename T>
void decompose_learnable_backward(const LearnableDecomposition<T>& trace, const PyramidParams<T>& pp,
                                  const Pyramid<T>& d_layers, PyramidParams<T>* grad) {
  const int n = trace.pyramid.levels;
  check_params(pp, n);
  if (static_cast<int>(d_layers.highs.size()) != n - 1) throw DimensionError("decompose backward: layer count");
  // dg[i] is the gradient w.r.t. G_{i+1}; dg[n-1] starts from L_n.
  std::vector<Tensor<T>> dg(n);
  dg[n - 1] = d_layers.low;
  for (int i = n - 2; i >= 0; --i) {
    // H_i = G_i - up_i(G_{i+1})
    const Tensor<T> neg = scale(d_layers.highs[i], T(-1));
    add_inplace(dg[i + 1], learnable_up_backward(trace.upsampled[i], pp.up[i], neg, &grad->up[i]));
    // G_{i+1} = down_i(G_i)
    Tensor<T> d_prev;
    conv3x3_backward(trace.gaussians[i], pp.down[i], 2, Padding::kReflect, dg[i + 1], &d_prev, &grad->down[i]);
    add_inplace(d_prev, d_layers.highs[i]);
    dg[i] = std::move(d_prev);
  }
}

template <typename T>
LearnableReconstruction<T> reconstruct_learnable_traced(const Pyramid<T>& pyramid, const PyramidParams<T>& pp) {
  check_layers(pyramid);
  check_params(pp, pyramid.levels);
  LearnableReconstruction<T> t;
  t.upsampled.resize(pyramid.levels - 1);
  Tensor<T> x = pyramid.low;
  for (int i = pyramid.levels - 2; i >= 0; --i) {
    x = add(pyramid.highs[i], learnable_up(x, pp.up[i], &t.upsampled[i]));
  }
  t.padded_height = x.height();
  t.padded_width = x.width();
  t.output = crop(x, pyramid.source_height, pyramid.source_width);
  return t;
}

template <typename T>
Pyramid<T> reconstruct_learnable_backward(const LearnableReconstruction<T>& trace, const Pyramid<T>& shape,
                                          const PyramidParams<T>& pp, const Tensor<T>& d_output,
                                          PyramidParams<T>* grad) {
  check_params(pp, shape.levels);
  Pyramid<T> g;
  g.levels = shape.levels;
  g.source_height = shape.source_height;
  g.source_width = shape.source_width;
  g.highs.resize(shape.levels - 1);
  Tensor<T> dx = uncrop(d_output, trace.padded_height, trace.padded_width);
  for (int i = 0; i < shape.levels - 1; ++i) {
    Tensor<T> next = learnable_up_backward(trace.upsampled[i], pp.up[i], dx, &grad->up[i]);
    g.highs[i] = std::move(dx);
    dx = std::move(next);
  }
  g.low = std::move(dx);
  return g;
}

#define MSLT_INSTANTIATE_PYRAMID(T)                                                                              \
  template Tensor<T> pad_to_multiple(const Tensor<T>&, int);                                                    \
  template Tensor<T> crop(const Tensor<T>&, int, int);                                                          \
  template Tensor<T> uncrop(const Tensor<T>&, int, int);                                                        \
  template Tensor<T> gaussian_down(const Tensor<T>&);                                                           \
  template Tensor<T> gaussian_up(const Tensor<T>&);                                                             \
  template Tensor<T> gaussian_up_adjoint(const Tensor<T>&);                                                     \
  template Pyramid<T> decompose_fixed(const Tensor<T>&, int);                                                   \
  template Tensor<T> reconstruct_fixed(const Pyramid<T>&);                                                      \
  template Pyramid<T> reconstruct_fixed_backward(const Pyramid<T>&, const Tensor<T>&);                          \
  template PyramidParams<T> gaussian_pyramid_params(int);                                                       \
  template std::size_t param_count(const PyramidParams<T>&);                                                    \
  template LearnableDecomposition<T> decompose_learnable_traced(const Tensor<T>&, int, const PyramidParams<T>&); \
  template void decompose_learnable_backward(const LearnableDecomposition<T>&, const PyramidParams<T>&,         \
                                             const Pyramid<T>&, PyramidParams<T>*);                             \
  template LearnableReconstruction<T> reconstruct_learnable_traced(const Pyramid<T>&, const PyramidParams<T>&); \
  template Pyramid<T> reconstruct_learnable_backward(const LearnableReconstruction<T>&, const Pyramid<T>&,      \
                                                     const PyramidParams<T>&, const Tensor<T>&, PyramidParams<T>*);

MSLT_INSTANTIATE_PYRAMID(float)
MSLT_INSTANTIATE_PYRAMID(double)

#undef MSLT_INSTANTIATE_PYRAMID

}  // namespace mslt
