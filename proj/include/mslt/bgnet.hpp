#pragma once

#include <array>
#include <optional>
#include <vector>

#include "mslt/tensor.hpp"

namespace mslt {

inline constexpr int kGridCells = 16;     // g_h = g_w
inline constexpr int kGridDepth = 6;      // d
inline constexpr int kAffineCoeffs = 12;  // 3x4 affine per cell
inline constexpr int kHfdInputSize = 48;
inline constexpr int kHfdChannels = 40;
inline constexpr int kFusedChannels = 8;
inline constexpr int kGuidanceChannels = 8;
inline constexpr int kGridBlock = kHfdInputSize / kGridCells;  // 3x3 space-to-depth blocks
inline constexpr int kGridElements = kGridCells * kGridCells * kGridDepth * kAffineCoeffs;

static_assert(kHfdInputSize * kHfdInputSize * kFusedChannels == kGridElements);

// Per-channel statistic CFD multiplies the feature map by.
enum class PoolingMode { kGap, kGsp, kGapGsp };

struct BgnetConfig {
  int cfd_count = 3;
  PoolingMode pooling = PoolingMode::kGapGsp;
};

// 16 x 16 spatial cells x 6 depth bins, each holding a 3x4 affine matrix.
// Coefficient layout per cell: [0..3] R row (r, g, b weights, bias), [4..7] G row, [8..11] B row.
template <typename T>
struct BilateralGrid {
  std::vector<T> data = std::vector<T>(kGridElements, T(0));

  T& at(int i, int j, int k, int c) noexcept { return data[index(i, j, k, c)]; }
  const T& at(int i, int j, int k, int c) const noexcept { return data[index(i, j, k, c)]; }

  static constexpr std::size_t index(int i, int j, int k, int c) noexcept {
    return ((std::size_t(i) * kGridCells + j) * kGridDepth + k) * kAffineCoeffs + c;
  }
};

template <typename T>
struct SfeParams {
  Conv1x1<T> conv_a;
  Conv1x1<T> conv_b;
  std::optional<Conv1x1<T>> head;  // C2 -> 1, only for the guidance instance

  std::size_t param_count() const {
    return conv_a.param_count() + conv_b.param_count() + (head ? head->param_count() : 0);
  }
};

template <typename T>
SfeParams<T> make_sfe_params(int c1, int c2, bool with_head) {
  SfeParams<T> p{Conv1x1<T>(c1, c2), Conv1x1<T>(c2, c2), std::nullopt};
  if (with_head) p.head = Conv1x1<T>(c2, 1);
  return p;
}

// One stem, one refine and one SFE shared by every CFD stage, one fuse.
template <typename T>
struct HfdParams {
  Conv1x1<T> stem = Conv1x1<T>(3, kHfdChannels);
  Conv1x1<T> refine = Conv1x1<T>(kHfdChannels, kHfdChannels);
  SfeParams<T> sfe = make_sfe_params<T>(kHfdChannels, kHfdChannels, false);
  Conv1x1<T> fuse = Conv1x1<T>(kHfdChannels, kFusedChannels);

  std::size_t param_count() const {
    return stem.param_count() + refine.param_count() + sfe.param_count() + fuse.param_count();
  }
};

// ---- SFE -------------------------------------------------------------------

template <typename T>
struct SfeCache {
  Tensor<T> input;
  Tensor<T> pre;        // conv_a output
  Tensor<T> activated;  // relu(pre)
  std::vector<T> mean;  // GAP of activated
  Tensor<T> modulated;  // activated * mean
  Tensor<T> body;       // conv_b output
  Tensor<T> output;     // body, or sigmoid(head(body))
};

// conv_a -> ReLU -> (x channel mean) -> conv_b [-> head -> sigmoid].
template <typename T>
Tensor<T> sfe_forward(const Tensor<T>& x, const SfeParams<T>& p, SfeCache<T>* cache = nullptr);

template <typename T>
Tensor<T> sfe_backward(const SfeCache<T>& cache, const SfeParams<T>& p, const Tensor<T>& dy, SfeParams<T>* grad);

// ---- CFD -------------------------------------------------------------------

template <typename T>
struct CfdResult {
  Tensor<T> context;
  Tensor<T> residual;
  std::vector<T> mean;
  std::vector<T> stdev;
  std::vector<T> scale;  // mean + std (or one of them, per pooling mode)
};

template <typename T>
CfdResult<T> cfd_forward(const Tensor<T>& x, PoolingMode mode = PoolingMode::kGapGsp);

template <typename T>
Tensor<T> cfd_backward(const Tensor<T>& x, const CfdResult<T>& fwd, PoolingMode mode, const Tensor<T>& d_context,
                       const Tensor<T>& d_residual);

// ---- HFD -------------------------------------------------------------------

template <typename T>
struct HfdStage {
  Tensor<T> input;
  CfdResult<T> cfd;
  Tensor<T> refine_pre;
  SfeCache<T> sfe;
};

template <typename T>
struct HfdCache {
  Tensor<T> input;
  std::vector<HfdStage<T>> stages;
  Tensor<T> summed;
  Tensor<T> fused;
};

// Slot of the fused 48x48x8 map feeding grid cell (bi, bj): block position p = r * 3 + c
// and channel ch map to (depth, coefficient). Channels 0-1 carry the diagonal gains,
// channels 2-7 carry one depth plane each of the off-diagonal weights and biases.
struct GridSlot {
  int depth;
  int coeff;
};
GridSlot grid_slot(int block_position, int channel);

template <typename T>
BilateralGrid<T> grid_from_features(const Tensor<T>& fused);

template <typename T>
Tensor<T> features_from_grid(const BilateralGrid<T>& grid);

template <typename T>
BilateralGrid<T> hfd_forward(const Tensor<T>& lhat, const HfdParams<T>& p, const BgnetConfig& cfg = {},
                             HfdCache<T>* cache = nullptr);

template <typename T>
Tensor<T> hfd_backward(const HfdCache<T>& cache, const HfdParams<T>& p, const BgnetConfig& cfg,
                       const BilateralGrid<T>& d_grid, HfdParams<T>* grad);

// ---- slicing and affine application -----------------------------------------

// Linear interpolation kernel tau(t) = max(1 - |t|, 0).
inline double tent(double t) noexcept {
  const double a = t < 0 ? -t : t;
  return a < 1.0 ? 1.0 - a : 0.0;
}

// Grid coordinate of pixel row/column `pos` out of `extent`: pixels map into [0, 15].
inline double grid_coordinate(int pos, int extent) noexcept {
  return (kGridCells - 1) * (pos + 0.5) / extent;
}

// Trilinear sampling of the grid at (pixel position, d * guidance). Guidance must lie in [0, 1].
template <typename T>
Tensor<T> slice(const BilateralGrid<T>& grid, const Tensor<T>& guidance);

template <typename T>
void slice_backward(const BilateralGrid<T>& grid, const Tensor<T>& guidance, const Tensor<T>& d_coeffs,
                    BilateralGrid<T>* d_grid, Tensor<T>* d_guidance);

// out = A [r g b 1]^T per pixel, A read from the 12-channel coefficient map.
template <typename T>
Tensor<T> apply_affine(const Tensor<T>& image, const Tensor<T>& coeffs);

template <typename T>
void apply_affine_backward(const Tensor<T>& image, const Tensor<T>& coeffs, const Tensor<T>& dy, Tensor<T>* d_image,
                           Tensor<T>* d_coeffs);

// ---- low-frequency corrector -------------------------------------------------

template <typename T>
struct LowFreqTrace {
  Tensor<T> input;
  SfeCache<T> guidance_cache;
  Tensor<T> guidance;
  Tensor<T> lhat;
  HfdCache<T> hfd;
  BilateralGrid<T> grid;
  Tensor<T> coeffs;
};

template <typename T>
Tensor<T> correct_low_freq(const Tensor<T>& low, const SfeParams<T>& guidance_p, const HfdParams<T>& hfd_p,
                           const BgnetConfig& cfg = {}, LowFreqTrace<T>* trace = nullptr);

template <typename T>
Tensor<T> correct_low_freq_backward(const LowFreqTrace<T>& trace, const SfeParams<T>& guidance_p,
                                    const HfdParams<T>& hfd_p, const BgnetConfig& cfg, const Tensor<T>& d_output,
                                    SfeParams<T>* guidance_grad, HfdParams<T>* hfd_grad);

}  // namespace mslt
