#pragma once

#include <array>
#include <cstdint>
#include <limits>

#include "mslt/tensor.hpp"

namespace mslt {

// psnr() of identical images.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

// 10 log10(1 / MSE) with peak 1.
double psnr(const ImageTensor& a, const ImageTensor& b);

enum class SsimChannels {
  kLuma,            // Rec.601 luma (default)
  kPerChannelMean,  // mean of per-channel SSIM
};

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

// Mean SSIM over every fully contained 11x11 Gaussian window.
double ssim(const ImageTensor& a, const ImageTensor& b, SsimChannels channels = SsimChannels::kLuma);

// Rec.601 luma Y = 0.299 R + 0.587 G + 0.114 B, one channel.
Tensor<double> luma(const ImageTensor& img);

// sRGB in [0,1] -> CIELAB (D65). XYZ is normalised by the matrix row sums so (1,1,1) is exactly L = 100.
ImageTensor srgb_to_lab(const ImageTensor& img);

struct HeatmapR {
  ImageTensor values;  // H x W x 1 in [-1, 1]
  float r_max = 0.0f;
};

// (O_L - I_L) / max|O_L - I_L|, all zeros when the lightness is unchanged.
HeatmapR correction_heatmap(const ImageTensor& input, const ImageTensor& output);

// Blue (-1) through white (0) to red (+1).
std::array<std::uint8_t, 3> diverging_color(float v);

// RGB rendering of a heatmap through diverging_color.
ImageTensor render_heatmap(const HeatmapR& heatmap);

}  // namespace mslt
