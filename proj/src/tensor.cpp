#include "mslt/tensor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "mslt/parallel.hpp"

namespace mslt {

void require_same_shape(const char* what, int h0, int w0, int c0, int h1, int w1, int c1) {
  if (h0 != h1 || w0 != w1 || c0 != c1) {
    throw DimensionError(std::string(what) + ": shape mismatch " + std::to_string(h0) + "x" + std::to_string(w0) +
                         "x" + std::to_string(c0) + " vs " + std::to_string(h1) + "x" + std::to_string(w1) + "x" +
                         std::to_string(c1));
  }
}

template <typename T>
Tensor<T>::Tensor(int height, int width, int channels, T fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 0 || width < 0 || channels < 0) throw DimensionError("Tensor: negative dimension");
  data_.assign(std::size_t(height) * width * channels, fill);
}

template <typename T>
void Tensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

// ---- 1x1 convolution -------------------------------------------------------

template <typename T>
Tensor<T> conv1x1(const Tensor<T>& x, const Matrix<T>& w, std::span<const T> b) {
  const int cin = w.cols;
  const int cout = w.rows;
  if (x.channels() != cin) {
    throw DimensionError("conv1x1: input has " + std::to_string(x.channels()) + " channels, weight expects " +
                         std::to_string(cin));
  }
  if (static_cast<int>(b.size()) != cout) throw DimensionError("conv1x1: bias length != output channels");

  std::vector<T> wt(std::size_t(cin) * cout);
  for (int o = 0; o < cout; ++o)
    for (int i = 0; i < cin; ++i) wt[std::size_t(i) * cout + o] = w(o, i);

  Tensor<T> y(x.height(), x.width(), cout);
  const int width = x.width();
  parallel_rows(x.height(), [&](int r) {
    for (int c = 0; c < width; ++c) {
      const T* xp = x.pixel(r, c);
      T* yp = y.pixel(r, c);
      for (int o = 0; o < cout; ++o) yp[o] = b[o];
      for (int i = 0; i < cin; ++i) {
        const T xi = xp[i];
        const T* wi = wt.data() + std::size_t(i) * cout;
        for (int o = 0; o < cout; ++o) yp[o] += wi[o] * xi;
      }
    }
  });
  return y;
}

template <typename T>
void conv1x1_backward(const Tensor<T>& x, const Conv1x1<T>& layer, const Tensor<T>& dy, Tensor<T>* dx,
                      Conv1x1<T>* grad) {
  const int cin = layer.in_channels();
  const int cout = layer.out_channels();
  if (x.channels() != cin || dy.channels() != cout || dy.height() != x.height() || dy.width() != x.width()) {
    throw DimensionError("conv1x1_backward: shape mismatch");
  }
  const int height = x.height();
  const int width = x.width();

  if (dx != nullptr) {
    *dx = Tensor<T>(height, width, cin);
    parallel_rows(height, [&](int r) {
      for (int c = 0; c < width; ++c) {
        const T* g = dy.pixel(r, c);
        T* d = dx->pixel(r, c);
        for (int o = 0; o < cout; ++o) {
          const T go = g[o];
          const T* wo = layer.weight.data.data() + std::size_t(o) * cin;
          for (int i = 0; i < cin; ++i) d[i] += wo[i] * go;
        }
      }
    });
  }

  if (grad != nullptr) {
    const int chunks = chunk_count(height);
    const std::size_t stride = std::size_t(cout) * (cin + 1);
    std::vector<T> partial(std::size_t(chunks) * stride, T(0));
    parallel_rows(chunks, [&](int k) {
      T* pw = partial.data() + std::size_t(k) * stride;
      T* pb = pw + std::size_t(cout) * cin;
      const int r_end = std::min(height, (k + 1) * kRowChunk);
      for (int r = k * kRowChunk; r < r_end; ++r) {
        for (int c = 0; c < width; ++c) {
          const T* g = dy.pixel(r, c);
          const T* xp = x.pixel(r, c);
          for (int o = 0; o < cout; ++o) {
            const T go = g[o];
            T* row = pw + std::size_t(o) * cin;
            for (int i = 0; i < cin; ++i) row[i] += go * xp[i];
            pb[o] += go;
          }
        }
      }
    });
    for (int k = 0; k < chunks; ++k) {
      const T* pw = partial.data() + std::size_t(k) * stride;
      const T* pb = pw + std::size_t(cout) * cin;
      for (std::size_t j = 0; j < std::size_t(cout) * cin; ++j) grad->weight.data[j] += pw[j];
      for (int o = 0; o < cout; ++o) grad->bias[o] += pb[o];
    }
  }
}

// ---- 3x3 convolution -------------------------------------------------------

namespace {

// Source index for tap k (0..2) of output position o; -1 for a zero-padded tap.
inline int conv_source(int o, int k, int stride, int n, Padding padding) {
  const int i = o * stride + k - 1;
  if (i >= 0 && i < n) return i;
  if (padding == Padding::kZero) return -1;
  return reflect_index(i, n);
}

}  // namespace

template <typename T>
Tensor<T> conv3x3(const Tensor<T>& x, const Conv3x3<T>& layer, int stride, Padding padding) {
  if (x.channels() != layer.in) {
    throw DimensionError("conv3x3: input has " + std::to_string(x.channels()) + " channels, weight expects " +
                         std::to_string(layer.in));
  }
  if (stride != 1 && stride != 2) throw ContractError("conv3x3: stride must be 1 or 2");
  if (padding == Padding::kReflect && (x.height() < 2 || x.width() < 2)) {
    throw SizeError("conv3x3: reflect padding needs at least 2x2 input");
  }
  const int cin = layer.in;
  const int cout = layer.out;
  const int oh = (x.height() + stride - 1) / stride;
  const int ow = (x.width() + stride - 1) / stride;

  // [tap][in][out]
  std::vector<T> wt(std::size_t(9) * cin * cout);
  for (int o = 0; o < cout; ++o)
    for (int i = 0; i < cin; ++i)
      for (int t = 0; t < 9; ++t) wt[(std::size_t(t) * cin + i) * cout + o] = layer.weight[(std::size_t(o) * cin + i) * 9 + t];

  Tensor<T> y(oh, ow, cout);
  parallel_rows(oh, [&](int r) {
    std::array<int, 3> sy{};
    for (int k = 0; k < 3; ++k) sy[k] = conv_source(r, k, stride, x.height(), padding);
    for (int c = 0; c < ow; ++c) {
      T* yp = y.pixel(r, c);
      for (int o = 0; o < cout; ++o) yp[o] = layer.bias[o];
      for (int ky = 0; ky < 3; ++ky) {
        if (sy[ky] < 0) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int sx = conv_source(c, kx, stride, x.width(), padding);
          if (sx < 0) continue;
          const T* xp = x.pixel(sy[ky], sx);
          const T* wtap = wt.data() + std::size_t(ky * 3 + kx) * cin * cout;
          for (int i = 0; i < cin; ++i) {
            const T xi = xp[i];
            const T* wi = wtap + std::size_t(i) * cout;
            for (int o = 0; o < cout; ++o) yp[o] += wi[o] * xi;
          }
        }
      }
    }
  });
  return y;
}

template <typename T>
void conv3x3_backward(const Tensor<T>& x, const Conv3x3<T>& layer, int stride, Padding padding,
                      const Tensor<T>& dy, Tensor<T>* dx, Conv3x3<T>* grad) {
  const int cin = layer.in;
  const int cout = layer.out;
  const int oh = (x.height() + stride - 1) / stride;
  const int ow = (x.width() + stride - 1) / stride;
  if (x.channels() != cin || dy.channels() != cout || dy.height() != oh || dy.width() != ow) {
    throw DimensionError("conv3x3_backward: shape mismatch");
  }

  if (dx != nullptr) {
    // Scatter form; reflected taps land on their mirrored source. Serial so the
    // accumulation order is fixed.
    *dx = Tensor<T>(x.height(), x.width(), cin);
    for (int r = 0; r < oh; ++r) {
      for (int c = 0; c < ow; ++c) {
        const T* g = dy.pixel(r, c);
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = conv_source(r, ky, stride, x.height(), padding);
          if (sy < 0) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = conv_source(c, kx, stride, x.width(), padding);
            if (sx < 0) continue;
            T* d = dx->pixel(sy, sx);
            for (int o = 0; o < cout; ++o) {
              const T go = g[o];
              for (int i = 0; i < cin; ++i) d[i] += layer.weight[((std::size_t(o) * cin + i) * 3 + ky) * 3 + kx] * go;
            }
          }
        }
      }
    }
  }

  if (grad != nullptr) {
    const int chunks = chunk_count(oh);
    const std::size_t stride_p = layer.weight.size() + std::size_t(cout);
    std::vector<T> partial(std::size_t(chunks) * stride_p, T(0));
    parallel_rows(chunks, [&](int k) {
      T* pw = partial.data() + std::size_t(k) * stride_p;
      T* pb = pw + layer.weight.size();
      const int r_end = std::min(oh, (k + 1) * kRowChunk);
      for (int r = k * kRowChunk; r < r_end; ++r) {
        for (int c = 0; c < ow; ++c) {
          const T* g = dy.pixel(r, c);
          for (int o = 0; o < cout; ++o) pb[o] += g[o];
          for (int ky = 0; ky < 3; ++ky) {
            const int sy = conv_source(r, ky, stride, x.height(), padding);
            if (sy < 0) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int sx = conv_source(c, kx, stride, x.width(), padding);
              if (sx < 0) continue;
              const T* xp = x.pixel(sy, sx);
              for (int o = 0; o < cout; ++o) {
                const T go = g[o];
                for (int i = 0; i < cin; ++i) pw[((std::size_t(o) * cin + i) * 3 + ky) * 3 + kx] += go * xp[i];
              }
            }
          }
        }
      }
    });
    for (int k = 0; k < chunks; ++k) {
      const T* pw = partial.data() + std::size_t(k) * stride_p;
      const T* pb = pw + layer.weight.size();
      for (std::size_t j = 0; j < layer.weight.size(); ++j) grad->weight[j] += pw[j];
      for (int o = 0; o < cout; ++o) grad->bias[o] += pb[o];
    }
  }
}

// ---- pooling ---------------------------------------------------------------

template <typename T>
std::vector<T> global_avg_pool(const Tensor<T>& x) {
  if (x.empty()) throw SizeError("global_avg_pool: empty tensor");
  const int ch = x.channels();
  std::vector<double> sum(ch, 0.0);
  const T* p = x.data();
  for (std::size_t n = 0; n < x.pixels(); ++n, p += ch)
    for (int c = 0; c < ch; ++c) sum[c] += static_cast<double>(p[c]);
  std::vector<T> out(ch);
  for (int c = 0; c < ch; ++c) out[c] = static_cast<T>(sum[c] / static_cast<double>(x.pixels()));
  return out;
}

template <typename T>
std::vector<T> global_std_pool(const Tensor<T>& x) {
  if (x.empty()) throw SizeError("global_std_pool: empty tensor");
  const int ch = x.channels();
  const double n = static_cast<double>(x.pixels());
  std::vector<double> mean(ch, 0.0);
  const T* p = x.data();
  for (std::size_t k = 0; k < x.pixels(); ++k, p += ch)
    for (int c = 0; c < ch; ++c) mean[c] += static_cast<double>(p[c]);
  for (double& m : mean) m /= n;
  std::vector<double> var(ch, 0.0);
  p = x.data();
  for (std::size_t k = 0; k < x.pixels(); ++k, p += ch) {
    for (int c = 0; c < ch; ++c) {
      const double d = static_cast<double>(p[c]) - mean[c];
      var[c] += d * d;
    }
  }
  std::vector<T> out(ch);
  for (int c = 0; c < ch; ++c) out[c] = static_cast<T>(std::sqrt(var[c] / n));
  return out;
}

// ---- resampling ------------------------------------------------------------

namespace {

struct LerpTap {
  int i0;
  int i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

std::vector<LerpTap> lerp_taps(int in, int out) {
  std::vector<LerpTap> taps(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double s = (o + 0.5) * scale - 0.5;
    if (s < 0) s = 0;
    int i0 = static_cast<int>(std::floor(s));
    if (i0 > in - 1) i0 = in - 1;
    const int i1 = std::min(i0 + 1, in - 1);
    taps[o] = {i0, i1, s - i0};
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw SizeError("resize_bilinear: output dims must be >= 1");
  if (x.empty()) throw SizeError("resize_bilinear: empty input");
  const auto ty = lerp_taps(x.height(), out_h);
  const auto tx = lerp_taps(x.width(), out_w);
  const int ch = x.channels();
  Tensor<T> y(out_h, out_w, ch);
  parallel_rows(out_h, [&](int r) {
    const LerpTap& vy = ty[r];
    const T wy1 = static_cast<T>(vy.w1);
    const T wy0 = T(1) - wy1;
    for (int c = 0; c < out_w; ++c) {
      const LerpTap& vx = tx[c];
      const T wx1 = static_cast<T>(vx.w1);
      const T wx0 = T(1) - wx1;
      const T* a = x.pixel(vy.i0, vx.i0);
      const T* b = x.pixel(vy.i0, vx.i1);
      const T* d = x.pixel(vy.i1, vx.i0);
      const T* e = x.pixel(vy.i1, vx.i1);
      T* yp = y.pixel(r, c);
      for (int k = 0; k < ch; ++k) yp[k] = wy0 * (wx0 * a[k] + wx1 * b[k]) + wy1 * (wx0 * d[k] + wx1 * e[k]);
    }
  });
  return y;
}

template <typename T>
Tensor<T> resize_bilinear_backward(const Tensor<T>& dy, int in_h, int in_w) {
  const auto ty = lerp_taps(in_h, dy.height());
  const auto tx = lerp_taps(in_w, dy.width());
  const int ch = dy.channels();
  Tensor<T> dx(in_h, in_w, ch);
  for (int r = 0; r < dy.height(); ++r) {
    const LerpTap& vy = ty[r];
    const T wy1 = static_cast<T>(vy.w1);
    const T wy0 = T(1) - wy1;
    for (int c = 0; c < dy.width(); ++c) {
      const LerpTap& vx = tx[c];
      const T wx1 = static_cast<T>(vx.w1);
      const T wx0 = T(1) - wx1;
      const T* g = dy.pixel(r, c);
      T* a = dx.pixel(vy.i0, vx.i0);
      T* b = dx.pixel(vy.i0, vx.i1);
      T* d = dx.pixel(vy.i1, vx.i0);
      T* e = dx.pixel(vy.i1, vx.i1);
      for (int k = 0; k < ch; ++k) {
        a[k] += wy0 * wx0 * g[k];
        b[k] += wy0 * wx1 * g[k];
        d[k] += wy1 * wx0 * g[k];
        e[k] += wy1 * wx1 * g[k];
      }
    }
  }
  return dx;
}

// ---- activations -----------------------------------------------------------

namespace {

template <typename T, typename F>
Tensor<T> map(const Tensor<T>& x, F f) {
  Tensor<T> y(x.height(), x.width(), x.channels());
  const T* in = x.data();
  T* out = y.data();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(in[i]);
  return y;
}

template <typename T, typename F>
Tensor<T> zip(const char* what, const Tensor<T>& a, const Tensor<T>& b, F f) {
  require_same_shape(what, a, b);
  Tensor<T> y(a.height(), a.width(), a.channels());
  const T* pa = a.data();
  const T* pb = b.data();
  T* out = y.data();
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(pa[i], pb[i]);
  return y;
}

}  // namespace

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return map(x, [](T v) { return v > T(0) ? v : T(0); });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  return map(x, [slope](T v) { return v > T(0) ? v : slope * v; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return map(x, [](T v) { return T(1) / (T(1) + std::exp(-v)); });
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& dy) {
  return zip("relu_backward", x, dy, [](T v, T g) { return v > T(0) ? g : T(0); });
}

template <typename T>
Tensor<T> leaky_relu_backward(const Tensor<T>& x, const Tensor<T>& dy, T slope) {
  return zip("leaky_relu_backward", x, dy, [slope](T v, T g) { return v > T(0) ? g : slope * g; });
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& y, const Tensor<T>& dy) {
  return zip("sigmoid_backward", y, dy, [](T s, T g) { return g * s * (T(1) - s); });
}

// ---- elementwise helpers ---------------------------------------------------

template <typename T>
void add_inplace(Tensor<T>& acc, const Tensor<T>& x) {
  require_same_shape("add_inplace", acc, x);
  T* a = acc.data();
  const T* b = x.data();
  for (std::size_t i = 0; i < acc.size(); ++i) a[i] += b[i];
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return zip("add", a, b, [](T u, T v) { return u + v; });
}

template <typename T>
Tensor<T> subtract(const Tensor<T>& a, const Tensor<T>& b) {
  return zip("subtract", a, b, [](T u, T v) { return u - v; });
}

template <typename T>
Tensor<T> multiply(const Tensor<T>& a, const Tensor<T>& b) {
  return zip("multiply", a, b, [](T u, T v) { return u * v; });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  return map(a, [s](T v) { return v * s; });
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> parts) {
  if (parts.empty()) throw DimensionError("concat_channels: nothing to concatenate");
  const int h = parts[0]->height();
  const int w = parts[0]->width();
  int total = 0;
  for (const Tensor<T>* p : parts) {
    if (p->height() != h || p->width() != w) throw DimensionError("concat_channels: spatial mismatch");
    total += p->channels();
  }
  Tensor<T> y(h, w, total);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      T* out = y.pixel(r, c);
      for (const Tensor<T>* p : parts) {
        const T* in = p->pixel(r, c);
        out = std::copy(in, in + p->channels(), out);
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int first, int count) {
  if (first < 0 || count < 0 || first + count > x.channels()) throw DimensionError("slice_channels: out of range");
  Tensor<T> y(x.height(), x.width(), count);
  for (std::size_t p = 0; p < x.pixels(); ++p) {
    const T* in = x.data() + p * x.channels() + first;
    std::copy(in, in + count, y.data() + p * count);
  }
  return y;
}

#define MSLT_INSTANTIATE_TENSOR(T)                                                                             \
  template class Tensor<T>;                                                                                    \
  template Tensor<T> conv1x1(const Tensor<T>&, const Matrix<T>&, std::span<const T>);                         \
  template void conv1x1_backward(const Tensor<T>&, const Conv1x1<T>&, const Tensor<T>&, Tensor<T>*,          \
                                 Conv1x1<T>*);                                                                 \
  template Tensor<T> conv3x3(const Tensor<T>&, const Conv3x3<T>&, int, Padding);                              \
  template void conv3x3_backward(const Tensor<T>&, const Conv3x3<T>&, int, Padding, const Tensor<T>&,        \
                                 Tensor<T>*, Conv3x3<T>*);                                                     \
  template std::vector<T> global_avg_pool(const Tensor<T>&);                                                  \
  template std::vector<T> global_std_pool(const Tensor<T>&);                                                  \
  template Tensor<T> resize_bilinear(const Tensor<T>&, int, int);                                             \
  template Tensor<T> resize_bilinear_backward(const Tensor<T>&, int, int);                                    \
  template Tensor<T> relu(const Tensor<T>&);                                                                  \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                                         \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                               \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> leaky_relu_backward(const Tensor<T>&, const Tensor<T>&, T);                              \
  template Tensor<T> sigmoid_backward(const Tensor<T>&, const Tensor<T>&);                                    \
  template void add_inplace(Tensor<T>&, const Tensor<T>&);                                                    \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                                 \
  template Tensor<T> subtract(const Tensor<T>&, const Tensor<T>&);                                            \
  template Tensor<T> multiply(const Tensor<T>&, const Tensor<T>&);                                            \
  template Tensor<T> scale(const Tensor<T>&, T);                                                              \
  template Tensor<T> concat_channels(std::span<const Tensor<T>* const>);                                      \
  template Tensor<T> slice_channels(const Tensor<T>&, int, int);

MSLT_INSTANTIATE_TENSOR(float)
MSLT_INSTANTIATE_TENSOR(double)

#undef MSLT_INSTANTIATE_TENSOR

}  // namespace mslt
