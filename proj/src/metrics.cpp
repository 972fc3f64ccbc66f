#include "mslt/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace mslt {

double psnr(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape("psnr", a, b);
  const auto x = a.values();
  const auto y = b.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    sum += d * d;
  }
  if (sum == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(static_cast<double>(x.size()) / sum);
}

Tensor<double> luma(const ImageTensor& img) {
  if (img.channels() != 3) throw DimensionError("luma: image must have 3 channels");
  Tensor<double> y(img.height(), img.width(), 1);
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    const float* v = img.data() + p * 3;
    y.data()[p] = 0.299 * v[0] + 0.587 * v[1] + 0.114 * v[2];
  }
  return y;
}

namespace {

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> w{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    w[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Separable valid-mode filtering: output is (h - 10) x (w - 10).
Tensor<double> filter_valid(const Tensor<double>& x, const std::array<double, kSsimWindow>& k) {
  const int h = x.height();
  const int w = x.width();
  const int oh = h - kSsimWindow + 1;
  const int ow = w - kSsimWindow + 1;
  Tensor<double> rows(h, ow, 1);
  for (int y = 0; y < h; ++y)
    for (int c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int t = 0; t < kSsimWindow; ++t) s += k[t] * x(y, c + t, 0);
      rows(y, c, 0) = s;
    }
  Tensor<double> out(oh, ow, 1);
  for (int y = 0; y < oh; ++y)
    for (int c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int t = 0; t < kSsimWindow; ++t) s += k[t] * rows(y + t, c, 0);
      out(y, c, 0) = s;
    }
  return out;
}

double ssim_plane(const Tensor<double>& a, const Tensor<double>& b) {
  const auto k = gaussian_window();
  Tensor<double> aa(a.height(), a.width(), 1);
  Tensor<double> bb(a.height(), a.width(), 1);
  Tensor<double> ab(a.height(), a.width(), 1);
  for (std::size_t i = 0; i < a.pixels(); ++i) {
    aa.data()[i] = a.data()[i] * a.data()[i];
    bb.data()[i] = b.data()[i] * b.data()[i];
    ab.data()[i] = a.data()[i] * b.data()[i];
  }
  const Tensor<double> ma = filter_valid(a, k);
  const Tensor<double> mb = filter_valid(b, k);
  const Tensor<double> saa = filter_valid(aa, k);
  const Tensor<double> sbb = filter_valid(bb, k);
  const Tensor<double> sab = filter_valid(ab, k);
  double total = 0.0;
  for (std::size_t i = 0; i < ma.pixels(); ++i) {
    const double mua = ma.data()[i];
    const double mub = mb.data()[i];
    const double va = saa.data()[i] - mua * mua;
    const double vb = sbb.data()[i] - mub * mub;
    const double cov = sab.data()[i] - mua * mub;
    const double num = (2.0 * mua * mub + kSsimC1) * (2.0 * cov + kSsimC2);
    const double den = (mua * mua + mub * mub + kSsimC1) * (va + vb + kSsimC2);
    total += num / den;
  }
  return total / static_cast<double>(ma.pixels());
}

Tensor<double> channel_plane(const ImageTensor& img, int c) {
  Tensor<double> out(img.height(), img.width(), 1);
  for (std::size_t p = 0; p < img.pixels(); ++p) out.data()[p] = img.data()[p * img.channels() + c];
  return out;
}

double srgb_linear(double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); }

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

}  // namespace

double ssim(const ImageTensor& a, const ImageTensor& b, SsimChannels channels) {
  require_same_shape("ssim", a, b);
  if (a.height() < kSsimWindow || a.width() < kSsimWindow) {
    throw SizeError("ssim: images must be at least 11x11");
  }
  if (channels == SsimChannels::kLuma) return ssim_plane(luma(a), luma(b));
  double sum = 0.0;
  for (int c = 0; c < a.channels(); ++c) sum += ssim_plane(channel_plane(a, c), channel_plane(b, c));
  return sum / a.channels();
}

ImageTensor srgb_to_lab(const ImageTensor& img) {
  if (img.channels() != 3) throw DimensionError("srgb_to_lab: image must have 3 channels");
  static constexpr double m[3][3] = {{0.4124564, 0.3575761, 0.1804375},
                                     {0.2126729, 0.7151522, 0.0721750},
                                     {0.0193339, 0.1191920, 0.9503041}};
  double white[3];
  for (int r = 0; r < 3; ++r) white[r] = m[r][0] + m[r][1] + m[r][2];
  ImageTensor out(img.height(), img.width(), 3);
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    const float* v = img.data() + p * 3;
    const double lin[3] = {srgb_linear(v[0]), srgb_linear(v[1]), srgb_linear(v[2])};
    double f[3];
    for (int r = 0; r < 3; ++r) f[r] = lab_f((m[r][0] * lin[0] + m[r][1] * lin[1] + m[r][2] * lin[2]) / white[r]);
    float* o = out.data() + p * 3;
    o[0] = static_cast<float>(116.0 * f[1] - 16.0);
    o[1] = static_cast<float>(500.0 * (f[0] - f[1]));
    o[2] = static_cast<float>(200.0 * (f[1] - f[2]));
  }
  return out;
}

HeatmapR correction_heatmap(const ImageTensor& input, const ImageTensor& output) {
  require_same_shape("correction_heatmap", input, output);
  const ImageTensor li = srgb_to_lab(input);
  const ImageTensor lo = srgb_to_lab(output);
  HeatmapR h;
  h.values = ImageTensor(input.height(), input.width(), 1);
  std::vector<double> r(input.pixels());
  double r_max = 0.0;
  for (std::size_t p = 0; p < r.size(); ++p) {
    r[p] = static_cast<double>(lo.data()[p * 3]) - static_cast<double>(li.data()[p * 3]);
    r_max = std::max(r_max, std::abs(r[p]));
  }
  h.r_max = static_cast<float>(r_max);
  if (r_max == 0.0) return h;
  for (std::size_t p = 0; p < r.size(); ++p) h.values.data()[p] = static_cast<float>(r[p] / r_max);
  return h;
}

std::array<std::uint8_t, 3> diverging_color(float v) {
  const double t = std::clamp(static_cast<double>(v), -1.0, 1.0);
  // Fade from white towards red (positive) or blue (negative).
  static constexpr double kRed[3] = {178, 24, 43};
  static constexpr double kBlue[3] = {33, 102, 172};
  const double* end = t >= 0 ? kRed : kBlue;
  const double a = std::abs(t);
  std::array<std::uint8_t, 3> rgb{};
  for (int c = 0; c < 3; ++c) rgb[c] = static_cast<std::uint8_t>(std::lround(255.0 + a * (end[c] - 255.0)));
  return rgb;
}

ImageTensor render_heatmap(const HeatmapR& heatmap) {
  ImageTensor out(heatmap.values.height(), heatmap.values.width(), 3);
  for (std::size_t p = 0; p < heatmap.values.pixels(); ++p) {
    const auto rgb = diverging_color(heatmap.values.data()[p]);
    for (int c = 0; c < 3; ++c) out.data()[p * 3 + c] = rgb[c] / 255.0f;
  }
  return out;
}

}  // namespace mslt
