#pragma once

#include <vector>

#include "mslt/tensor.hpp"

namespace mslt {

// Laplacian pyramid: highs[i - 1] holds H_i (finest first), low holds L_n.
// Layers live on the reflect-padded canvas; source_* record the crop undone at reconstruction.
template <typename T>
struct Pyramid {
  int levels = 0;
  std::vector<Tensor<T>> highs;
  Tensor<T> low;
  int source_height = 0;
  int source_width = 0;

  int padded_height() const { return highs.empty() ? low.height() : highs.front().height(); }
  int padded_width() const { return highs.empty() ? low.width() : highs.front().width(); }
};

// Learnable down/up kernels for levels 1..n-1 (index i-1 serves level i).
// down[i-1]: G_i -> G_{i+1}, 3x3 stride 2. up[i-1]: bilinear x2 of level i+1, then 3x3 stride 1.
template <typename T>
struct PyramidParams {
  std::vector<Conv3x3<T>> down;
  std::vector<Conv3x3<T>> up;
};

// The fixed 5x5 binomial kernel, (1/256) * outer([1,4,6,4,1], [1,4,6,4,1]).
Matrix<float> gaussian_kernel();

// Side length every pyramid input is padded to a multiple of.
constexpr int pyramid_multiple(int levels) { return 1 << (levels - 1); }

// Reflect-pads bottom/right so both dims are multiples of `multiple`.
template <typename T>
Tensor<T> pad_to_multiple(const Tensor<T>& x, int multiple);

template <typename T>
Tensor<T> crop(const Tensor<T>& x, int height, int width);

// Zero-extends dy (cropped shape) back onto the padded canvas; adjoint of crop.
template <typename T>
Tensor<T> uncrop(const Tensor<T>& dy, int padded_height, int padded_width);

// Gaussian blur, stride 2, reflect padding 2.
template <typename T>
Tensor<T> gaussian_down(const Tensor<T>& x);

// Zero insertion followed by the Gaussian kernel scaled by 4; output is 2h x 2w.
template <typename T>
Tensor<T> gaussian_up(const Tensor<T>& x);

// Adjoint of gaussian_up: maps a 2h x 2w gradient back to h x w.
template <typename T>
Tensor<T> gaussian_up_adjoint(const Tensor<T>& dy);

template <typename T>
Pyramid<T> decompose_fixed(const Tensor<T>& image, int levels);

template <typename T>
Tensor<T> reconstruct_fixed(const Pyramid<T>& pyramid);

// Gradients of reconstruct_fixed w.r.t. every layer, returned as a pyramid of the same shape.
template <typename T>
Pyramid<T> reconstruct_fixed_backward(const Pyramid<T>& shape, const Tensor<T>& d_output);

// Kernels that start at the fixed pyramid's operating point: down is the 3x3 binomial
// (the 5x5 kernel truncated and renormalised) per channel, up is a centre delta.
template <typename T>
PyramidParams<T> gaussian_pyramid_params(int levels);

template <typename T>
std::size_t param_count(const PyramidParams<T>& pp);

// Forward caches of the learnable decomposition.
template <typename T>
struct LearnableDecomposition {
  Pyramid<T> pyramid;
  std::vector<Tensor<T>> gaussians;  // G_1..G_n on the padded canvas
  std::vector<Tensor<T>> upsampled;  // bilinear x2 of G_{i+1}, i = 1..n-1
};

template <typename T>
LearnableDecomposition<T> decompose_learnable_traced(const Tensor<T>& image, int levels, const PyramidParams<T>& pp);

template <typename T>
Pyramid<T> decompose_learnable(const Tensor<T>& image, int levels, const PyramidParams<T>& pp) {
  return decompose_learnable_traced(image, levels, pp).pyramid;
}

// Accumulates kernel gradients given gradients w.r.t. every pyramid layer.
template <typename T>
void decompose_learnable_backward(const LearnableDecomposition<T>& trace, const PyramidParams<T>& pp,
                                  const Pyramid<T>& d_layers, PyramidParams<T>* grad);

template <typename T>
struct LearnableReconstruction {
  Tensor<T> output;                  // cropped to the source size
  std::vector<Tensor<T>> upsampled;  // bilinear x2 of X_{i+1}, i = 1..n-1
  int padded_height = 0;
  int padded_width = 0;
};

template <typename T>
LearnableReconstruction<T> reconstruct_learnable_traced(const Pyramid<T>& pyramid, const PyramidParams<T>& pp);

template <typename T>
Tensor<T> reconstruct_learnable(const Pyramid<T>& pyramid, const PyramidParams<T>& pp) {
  return reconstruct_learnable_traced(pyramid, pp).output;
}

// Returns gradients w.r.t. the layers and accumulates kernel gradients into grad.
template <typename T>
Pyramid<T> reconstruct_learnable_backward(const LearnableReconstruction<T>& trace, const Pyramid<T>& shape,
                                          const PyramidParams<T>& pp, const Tensor<T>& d_output,
                                          PyramidParams<T>* grad);

}  // namespace mslt
