#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mslt/error.hpp"

namespace mslt {

// Dense H x W x C raster, row-major with channels innermost.
//
// Templated on the scalar so the same kernels run in float32 for inference and
// training, and in float64 for finite-difference gradient checks.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(int height, int width, int channels, T fill = T(0));

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixels() const noexcept { return std::size_t(height_) * width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int y, int x, int c) noexcept { return data_[index(y, x, c)]; }
  const T& operator()(int y, int x, int c) const noexcept { return data_[index(y, x, c)]; }

  T* pixel(int y, int x) noexcept { return data_.data() + index(y, x, 0); }
  const T* pixel(int y, int x) const noexcept { return data_.data() + index(y, x, 0); }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  bool same_shape(const Tensor& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  void fill(T value);

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(height_, width_, channels_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data()[i] = static_cast<U>(data_[i]);
    return out;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (std::size_t(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

using ImageTensor = Tensor<float>;

template <typename T>
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(int r, int c, T fill = T(0)) : rows(r), cols(c), data(std::size_t(r) * c, fill) {}

  T& operator()(int r, int c) noexcept { return data[std::size_t(r) * cols + c]; }
  const T& operator()(int r, int c) const noexcept { return data[std::size_t(r) * cols + c]; }
};

// Weights of a 1x1 convolution: weight is Cout x Cin.
template <typename T>
struct Conv1x1 {
  Matrix<T> weight;
  std::vector<T> bias;

  Conv1x1() = default;
  Conv1x1(int in_channels, int out_channels)
      : weight(out_channels, in_channels), bias(std::size_t(out_channels), T(0)) {}

  int in_channels() const noexcept { return weight.cols; }
  int out_channels() const noexcept { return weight.rows; }
  std::size_t param_count() const noexcept { return weight.data.size() + bias.size(); }
};

// Weights of a 3x3 convolution laid out [out][in][ky][kx].
template <typename T>
struct Conv3x3 {
  int in = 0;
  int out = 0;
  std::vector<T> weight;
  std::vector<T> bias;

  Conv3x3() = default;
  Conv3x3(int in_channels, int out_channels)
      : in(in_channels),
        out(out_channels),
        weight(std::size_t(out_channels) * in_channels * 9, T(0)),
        bias(std::size_t(out_channels), T(0)) {}

  T& at(int o, int i, int ky, int kx) noexcept { return weight[((std::size_t(o) * in + i) * 3 + ky) * 3 + kx]; }
  const T& at(int o, int i, int ky, int kx) const noexcept {
    return weight[((std::size_t(o) * in + i) * 3 + ky) * 3 + kx];
  }
  std::size_t param_count() const noexcept { return weight.size() + bias.size(); }
};

enum class Padding { kZero, kReflect };

// Mirror an index into [0, n) without repeating the edge sample (n >= 2 when it matters).
inline int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

// ---- 1x1 convolution -------------------------------------------------------

template <typename T>
Tensor<T> conv1x1(const Tensor<T>& x, const Matrix<T>& w, std::span<const T> b);

template <typename T>
Tensor<T> conv1x1(const Tensor<T>& x, const Conv1x1<T>& layer) {
  return conv1x1(x, layer.weight, std::span<const T>(layer.bias));
}

// dx is overwritten when non-null; grad (same shapes as layer) is accumulated into.
template <typename T>
void conv1x1_backward(const Tensor<T>& x, const Conv1x1<T>& layer, const Tensor<T>& dy, Tensor<T>* dx,
                      Conv1x1<T>* grad);

// ---- 3x3 convolution (padding 1) -------------------------------------------

template <typename T>
Tensor<T> conv3x3(const Tensor<T>& x, const Conv3x3<T>& layer, int stride, Padding padding);

template <typename T>
void conv3x3_backward(const Tensor<T>& x, const Conv3x3<T>& layer, int stride, Padding padding,
                      const Tensor<T>& dy, Tensor<T>* dx, Conv3x3<T>* grad);

// ---- pooling ---------------------------------------------------------------

template <typename T>
std::vector<T> global_avg_pool(const Tensor<T>& x);

// Population standard deviation (divides by N).
template <typename T>
std::vector<T> global_std_pool(const Tensor<T>& x);

// ---- resampling ------------------------------------------------------------

// Bilinear, half-pixel centres (align_corners = false), edge-clamped.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, int out_h, int out_w);

template <typename T>
Tensor<T> resize_bilinear_backward(const Tensor<T>& dy, int in_h, int in_w);

// ---- activations -----------------------------------------------------------

inline constexpr double kLeakySlope = 0.01;

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope = T(kLeakySlope));
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

// Backward rules take the forward input (relu, leaky) or output (sigmoid).
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& dy);
template <typename T>
Tensor<T> leaky_relu_backward(const Tensor<T>& x, const Tensor<T>& dy, T slope = T(kLeakySlope));
template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& y, const Tensor<T>& dy);

// ---- elementwise helpers ---------------------------------------------------

template <typename T>
void add_inplace(Tensor<T>& acc, const Tensor<T>& x);
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> subtract(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> multiply(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s);
// Channel-wise concatenation of tensors with equal spatial dims.
template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> parts);
// Copies channels [first, first + count) of x.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int first, int count);

void require_same_shape(const char* what, int h0, int w0, int c0, int h1, int w1, int c1);

template <typename T>
void require_same_shape(const char* what, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(what, a.height(), a.width(), a.channels(), b.height(), b.width(), b.channels());
}

}  // namespace mslt
