#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mslt/bgnet.hpp"
#include "mslt/model.hpp"
#include "mslt/tensor.hpp"

namespace mslt::test {

// Uniform [lo, hi) from the top 53 bits of mt19937_64.
inline double uniform(std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

template <typename T = float>
Tensor<T> random_tensor(int h, int w, int c, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  Tensor<T> t(h, w, c);
  for (T& v : t.values()) v = static_cast<T>(uniform(rng, lo, hi));
  return t;
}

template <typename T>
BilateralGrid<T> random_grid(std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  BilateralGrid<T> g;
  for (T& v : g.data) v = static_cast<T>(uniform(rng, lo, hi));
  return g;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i])));
  }
  return m;
}

// Loss = <y, probe> so dL/dy = probe.
inline double inner(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

// Max relative error of an analytic gradient against central differences. Checks every entry of
// `values`, or `samples` entries drawn with `seed` when samples is nonzero and smaller.
inline double fd_error(std::vector<double>& values, const std::vector<double>& analytic,
                       const std::function<double()>& loss, double eps = 1e-3, std::size_t samples = 0,
                       std::uint64_t seed = 0) {
  std::vector<std::size_t> indices(values.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  if (samples != 0 && samples < values.size()) {
    std::mt19937_64 rng(seed);
    std::shuffle(indices.begin(), indices.end(), rng);
    indices.resize(samples);
  }
  double err = 0.0;
  double scale = 0.0;
  for (std::size_t i : indices) {
    const double keep = values[i];
    values[i] = keep + eps;
    const double up = loss();
    values[i] = keep - eps;
    const double down = loss();
    values[i] = keep;
    const double numeric = (up - down) / (2 * eps);
    err = std::max(err, std::abs(numeric - analytic[i]));
    scale = std::max(scale, std::abs(numeric));
  }
  return err / std::max(scale, 1e-12);
}

inline std::vector<double> to_vec(const Tensor<double>& t) { return {t.data(), t.data() + t.size()}; }

// Literal triple sum over every cell with the tent kernel, no neighbour shortcuts.
template <typename T>
Tensor<double> brute_force_slice(const BilateralGrid<T>& grid, const Tensor<T>& guidance) {
  const int h = guidance.height();
  const int w = guidance.width();
  Tensor<double> out(h, w, kAffineCoeffs);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double u = grid_coordinate(y, h);
      const double v = grid_coordinate(x, w);
      const double t = kGridDepth * static_cast<double>(guidance(y, x, 0));
      for (int i = 0; i < kGridCells; ++i)
        for (int j = 0; j < kGridCells; ++j)
          for (int k = 0; k < kGridDepth; ++k) {
            const double wgt = tent(u - i) * tent(v - j) * tent(t - k);
            for (int c = 0; c < kAffineCoeffs; ++c) out(y, x, c) += wgt * grid.at(i, j, k, c);
          }
    }
  return out;
}

// A smooth, differentiable operating point for finite differences: the identity weights plus small
// noise, with every (Leaky)ReLU-feeding bias pushed 0.5 away from its kink (alternating sign so both
// branches are exercised) and wide sums perturbed gently so the output stays off the clamp.
inline ModelParams<double> make_gradcheck_params(Variant variant, const ModelConfig& config, std::uint64_t seed) {
  ModelParams<double> mp = make_identity<double>(variant, config);
  std::mt19937_64 rng(seed);
  mp.for_each_tensor([&](const std::string& name, std::span<double> values, const Dims&) {
    // Pyramid kernels, the 40-wide grid fuse and the 60-wide baseline sum many noisy taps per
    // output, so they get less.
    const bool wide = name.starts_with("pyramid.") || name.starts_with("cmlp.") || name.starts_with("hfd.fuse.");
    const double a = wide ? 0.01 : 0.05;
    for (double& v : values) v += uniform(rng, -a, a);
  });
  auto push = [](std::vector<double>& b) {
    for (std::size_t c = 0; c < b.size(); ++c) b[c] += c % 2 ? -0.5 : 0.5;
  };
  if (variant == Variant::kChannelMlp) {
    for (std::size_t k = 0; k + 1 < mp.cmlp.size(); ++k) {
      for (std::size_t c = 3; c < mp.cmlp[k].bias.size(); ++c) mp.cmlp[k].bias[c] += c % 2 ? -0.5 : 0.5;
    }
    return mp;
  }
  push(mp.guidance.conv_a.bias);
  push(mp.hfd.refine.bias);
  push(mp.hfd.sfe.conv_a.bias);
  push(mp.hf_first.l1.bias);
  for (auto& mlp : mp.hf_levels) push(mlp.l1.bias);
  return mp;
}

inline std::filesystem::path data_dir() { return std::filesystem::path(MSLT_TEST_DATA_DIR); }

}  // namespace mslt::test
