#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mslt/bgnet.hpp"
#include "support.hpp"

namespace mslt {
namespace {

using test::brute_force_slice;
using test::fd_error;
using test::inner;
using test::max_abs_diff;
using test::random_grid;
using test::random_tensor;
using test::to_vec;
using test::uniform;

using Buffers = std::vector<std::pair<std::string, std::vector<double>*>>;

void add_conv(Buffers& out, const std::string& name, Conv1x1<double>& c) {
  out.emplace_back(name + ".weight", &c.weight.data);
  out.emplace_back(name + ".bias", &c.bias);
}

Buffers buffers(SfeParams<double>& p, const std::string& prefix) {
  Buffers out;
  add_conv(out, prefix + ".conv_a", p.conv_a);
  add_conv(out, prefix + ".conv_b", p.conv_b);
  if (p.head) add_conv(out, prefix + ".head", *p.head);
  return out;
}

Buffers buffers(HfdParams<double>& p) {
  Buffers out;
  add_conv(out, "stem", p.stem);
  add_conv(out, "refine", p.refine);
  for (auto& b : buffers(p.sfe, "sfe")) out.push_back(b);
  add_conv(out, "fuse", p.fuse);
  return out;
}

void randomize(Buffers bufs, std::uint64_t seed, double a) {
  std::mt19937_64 rng(seed);
  for (auto& [name, v] : bufs)
    for (double& x : *v) x = uniform(rng, -a, a);
}

// Same layers with every value zeroed, for gradient accumulation.
template <typename P>
P zeroed(P p) {
  if constexpr (std::is_same_v<P, HfdParams<double>>) {
    for (auto& [name, v] : buffers(p)) std::fill(v->begin(), v->end(), 0.0);
  } else {
    for (auto& [name, v] : buffers(p, "")) std::fill(v->begin(), v->end(), 0.0);
  }
  return p;
}

BilateralGrid<double> identity_grid() {
  BilateralGrid<double> g;
  for (int i = 0; i < kGridCells; ++i)
    for (int j = 0; j < kGridCells; ++j)
      for (int k = 0; k < kGridDepth; ++k)
        for (int r = 0; r < 3; ++r) g.at(i, j, k, r * 5) = 1.0;
  return g;
}

// ---- tent and grid layout ------------------------------------------------------

TEST(Tent, Definition) {
  EXPECT_EQ(tent(0.0), 1.0);
  EXPECT_EQ(tent(1.0), 0.0);
  EXPECT_EQ(tent(-1.0), 0.0);
  EXPECT_EQ(tent(0.5), 0.5);
  EXPECT_EQ(tent(-0.25), 0.75);
  EXPECT_EQ(tent(3.0), 0.0);
}

TEST(GridLayout, ElementCountConservation) {
  EXPECT_EQ(kHfdInputSize * kHfdInputSize * kFusedChannels, 18432);
  EXPECT_EQ(kGridCells * kGridCells * kGridDepth * kAffineCoeffs, 18432);
  EXPECT_EQ(BilateralGrid<float>().data.size(), 18432u);
}

TEST(GridLayout, SlotsCoverEveryCoefficientOnce) {
  std::set<std::pair<int, int>> seen;
  for (int p = 0; p < kGridBlock * kGridBlock; ++p)
    for (int ch = 0; ch < kFusedChannels; ++ch) {
      const GridSlot s = grid_slot(p, ch);
      ASSERT_GE(s.depth, 0);
      ASSERT_LT(s.depth, kGridDepth);
      ASSERT_GE(s.coeff, 0);
      ASSERT_LT(s.coeff, kAffineCoeffs);
      EXPECT_TRUE(seen.insert({s.depth, s.coeff}).second) << "p=" << p << " ch=" << ch;
    }
  EXPECT_EQ(seen.size(), 72u);
}

TEST(GridLayout, GainChannelsCarryDiagonal) {
  for (int p = 0; p < 9; ++p)
    for (int ch = 0; ch < kFusedChannels; ++ch) {
      const bool diagonal = grid_slot(p, ch).coeff % 5 == 0;
      EXPECT_EQ(diagonal, ch < 2) << "p=" << p << " ch=" << ch;
    }
}

TEST(GridLayout, FeatureGridBijection) {
  const Tensor<double> f = random_tensor<double>(48, 48, 8, 3, -1, 1);
  const BilateralGrid<double> g = grid_from_features(f);
  EXPECT_EQ(features_from_grid(g), f);
  const BilateralGrid<double> g2 = random_grid<double>(4);
  EXPECT_EQ(grid_from_features(features_from_grid(g2)).data, g2.data);
}

TEST(GridLayout, CellsReadOnlyTheirOwnBlock) {
  Tensor<double> f(48, 48, 8);
  for (int c = 0; c < 8; ++c) f(7, 40, c) = 1.0;  // block (2, 13)
  const BilateralGrid<double> g = grid_from_features(f);
  for (int i = 0; i < kGridCells; ++i)
    for (int j = 0; j < kGridCells; ++j)
      for (int k = 0; k < kGridDepth; ++k)
        for (int c = 0; c < kAffineCoeffs; ++c) {
          if (i != 2 || j != 13) {
            EXPECT_EQ(g.at(i, j, k, c), 0.0);
          }
        }
}

// ---- SFE ---------------------------------------------------------------------

TEST(Sfe, ZeroInputZeroBiases) {
  SfeParams<double> p = make_sfe_params<double>(3, 8, false);
  randomize(buffers(p, "sfe"), 1, 1.0);
  p.conv_a.bias.assign(8, 0.0);
  p.conv_b.bias.assign(8, 0.0);
  const Tensor<double> zero(5, 5, 3);
  const Tensor<double> plain = sfe_forward(zero, p);
  for (double v : plain.values()) EXPECT_EQ(v, 0.0);

  SfeParams<double> h = make_sfe_params<double>(3, 8, true);
  randomize(buffers(h, "g"), 2, 1.0);
  h.conv_a.bias.assign(8, 0.0);
  h.conv_b.bias.assign(8, 0.0);
  h.head->bias.assign(1, 0.0);
  const Tensor<double> out = sfe_forward(zero, h);
  ASSERT_EQ(out.channels(), 1);
  for (double v : out.values()) EXPECT_EQ(v, 0.5);
}

TEST(Sfe, ConstantInputGivesConstantOutput) {
  SfeParams<double> p = make_sfe_params<double>(3, 8, true);
  randomize(buffers(p, "g"), 3, 1.0);
  const Tensor<double> x(6, 4, 3, 0.3);
  const Tensor<double> y = sfe_forward(x, p);
  for (double v : y.values()) EXPECT_NEAR(v, y(0, 0, 0), 1e-15);
}

TEST(Sfe, GuidanceIsBounded) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SfeParams<double> p = make_sfe_params<double>(3, 8, true);
    randomize(buffers(p, "g"), seed, 3.0);
    const Tensor<double> y = sfe_forward(random_tensor<double>(9, 9, 3, seed, -4, 4), p);
    for (double v : y.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Sfe, GradientsMatchFiniteDifferences) {
  for (bool head : {false, true}) {
    SfeParams<double> p = make_sfe_params<double>(3, 6, head);
    randomize(buffers(p, "sfe"), 5, 1.0);
    for (std::size_t c = 0; c < p.conv_a.bias.size(); ++c) p.conv_a.bias[c] = c % 2 ? -1.5 : 1.5;
    Tensor<double> x = random_tensor<double>(5, 6, 3, 6, -0.2, 0.2);
    SfeCache<double> cache;
    const Tensor<double> y = sfe_forward(x, p, &cache);
    const Tensor<double> probe = random_tensor<double>(y.height(), y.width(), y.channels(), 7, -1, 1);
    SfeParams<double> g = zeroed(p);
    const Tensor<double> dx = sfe_backward(cache, p, probe, &g);
    auto loss = [&] { return inner(sfe_forward(x, p), probe); };
    Buffers bp = buffers(p, "sfe");
    Buffers bg = buffers(g, "sfe");
    for (std::size_t k = 0; k < bp.size(); ++k) {
      EXPECT_LT(fd_error(*bp[k].second, *bg[k].second, loss), 1e-3) << bp[k].first << " head=" << head;
    }
    std::vector<double> xv = to_vec(x);
    auto xloss = [&] {
      std::copy(xv.begin(), xv.end(), x.data());
      return loss();
    };
    EXPECT_LT(fd_error(xv, to_vec(dx), xloss), 1e-3);
  }
}

// ---- CFD ---------------------------------------------------------------------

TEST(Cfd, ConstantChannelHandArithmetic) {
  const Tensor<double> x(3, 3, 2, 0.4);
  const CfdResult<double> r = cfd_forward(x);
  for (int y = 0; y < 3; ++y)
    for (int c = 0; c < 3; ++c)
      for (int ch = 0; ch < 2; ++ch) {
        EXPECT_NEAR(r.context(y, c, ch), 0.16, 1e-15);
        EXPECT_NEAR(r.residual(y, c, ch), 0.4 - 0.16, 1e-15);
      }
}

TEST(Cfd, ZeroInput) {
  const CfdResult<double> r = cfd_forward(Tensor<double>(4, 4, 3));
  for (double v : r.context.values()) EXPECT_EQ(v, 0.0);
  for (double v : r.residual.values()) EXPECT_EQ(v, 0.0);
}

TEST(Cfd, PartsSumToInput) {
  for (PoolingMode mode : {PoolingMode::kGap, PoolingMode::kGsp, PoolingMode::kGapGsp}) {
    const Tensor<float> x = random_tensor<float>(12, 12, 5, 3, -1, 1);
    const CfdResult<float> r = cfd_forward(x, mode);
    EXPECT_LT(max_abs_diff(add(r.context, r.residual), x), 1e-6);
  }
}

TEST(Cfd, PoolingModesSelectStatistic) {
  const Tensor<double> x = random_tensor<double>(8, 8, 2, 4);
  const CfdResult<double> gap = cfd_forward(x, PoolingMode::kGap);
  const CfdResult<double> gsp = cfd_forward(x, PoolingMode::kGsp);
  const CfdResult<double> both = cfd_forward(x, PoolingMode::kGapGsp);
  for (int c = 0; c < 2; ++c) {
    EXPECT_DOUBLE_EQ(gap.scale[c], gap.mean[c]);
    EXPECT_DOUBLE_EQ(gsp.scale[c], gsp.stdev[c]);
    EXPECT_DOUBLE_EQ(both.scale[c], both.mean[c] + both.stdev[c]);
  }
}

TEST(Cfd, GradientsMatchFiniteDifferences) {
  for (PoolingMode mode : {PoolingMode::kGap, PoolingMode::kGsp, PoolingMode::kGapGsp}) {
    Tensor<double> x = random_tensor<double>(5, 4, 3, 8, -1, 1);
    const CfdResult<double> r = cfd_forward(x, mode);
    const Tensor<double> pc = random_tensor<double>(5, 4, 3, 9, -1, 1);
    const Tensor<double> pr = random_tensor<double>(5, 4, 3, 10, -1, 1);
    const Tensor<double> dx = cfd_backward(x, r, mode, pc, pr);
    std::vector<double> xv = to_vec(x);
    auto loss = [&] {
      std::copy(xv.begin(), xv.end(), x.data());
      const CfdResult<double> f = cfd_forward(x, mode);
      return inner(f.context, pc) + inner(f.residual, pr);
    };
    EXPECT_LT(fd_error(xv, to_vec(dx), loss), 1e-3);
  }
}

// ---- HFD ---------------------------------------------------------------------

TEST(Hfd, ZeroWeightsGiveZeroGrid) {
  const HfdParams<double> p;
  const BilateralGrid<double> g = hfd_forward(random_tensor<double>(48, 48, 3, 1), p);
  for (double v : g.data) EXPECT_EQ(v, 0.0);
}

TEST(Hfd, GridSizeIndependentOfStageCount) {
  HfdParams<float> p;
  for (int k = 1; k <= 5; ++k) {
    const BilateralGrid<float> g = hfd_forward(random_tensor<float>(48, 48, 3, 2), p, {k, PoolingMode::kGapGsp});
    EXPECT_EQ(g.data.size(), 18432u);
  }
}

TEST(Hfd, RejectsWrongInputSize) {
  const HfdParams<float> p;
  EXPECT_THROW(hfd_forward(Tensor<float>(32, 32, 3), p), SizeError);
}

TEST(Hfd, GradientsMatchFiniteDifferences) {
  for (PoolingMode mode : {PoolingMode::kGapGsp, PoolingMode::kGap}) {
    const BgnetConfig cfg{2, mode};
    HfdParams<double> p;
    randomize(buffers(p), 11, 0.2);
    for (std::size_t c = 0; c < p.refine.bias.size(); ++c) p.refine.bias[c] = c % 2 ? -0.5 : 0.5;
    for (std::size_t c = 0; c < p.sfe.conv_a.bias.size(); ++c) p.sfe.conv_a.bias[c] = c % 2 ? -0.5 : 0.5;
    Tensor<double> lhat = random_tensor<double>(48, 48, 3, 12);
    HfdCache<double> cache;
    hfd_forward(lhat, p, cfg, &cache);
    const BilateralGrid<double> probe = random_grid<double>(13);
    HfdParams<double> g = zeroed(p);
    const Tensor<double> dl = hfd_backward(cache, p, cfg, probe, &g);
    auto loss = [&] {
      const BilateralGrid<double> grid = hfd_forward(lhat, p, cfg);
      double s = 0;
      for (std::size_t i = 0; i < grid.data.size(); ++i) s += grid.data[i] * probe.data[i];
      return s;
    };
    Buffers bp = buffers(p);
    Buffers bg = buffers(g);
    for (std::size_t k = 0; k < bp.size(); ++k) {
      EXPECT_LT(fd_error(*bp[k].second, *bg[k].second, loss, 1e-4, 6, k), 1e-3) << bp[k].first;
    }
    std::vector<double> lv = to_vec(lhat);
    auto lloss = [&] {
      std::copy(lv.begin(), lv.end(), lhat.data());
      return loss();
    };
    EXPECT_LT(fd_error(lv, to_vec(dl), lloss, 1e-4, 12, 99), 1e-3);
  }
}

// ---- slicing -----------------------------------------------------------------

TEST(Slice, ConstantGridAnyGuidance) {
  BilateralGrid<double> g;
  std::fill(g.data.begin(), g.data.end(), 0.7);
  const Tensor<double> guide = random_tensor<double>(20, 30, 1, 1, 0.0, 5.0 / 6.0);
  const Tensor<double> out = slice(g, guide);
  ASSERT_EQ(out.channels(), kAffineCoeffs);
  for (double v : out.values()) EXPECT_NEAR(v, 0.7, 1e-12);
}

TEST(Slice, MatchesBruteForceTripleSum) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const BilateralGrid<double> g = random_grid<double>(seed);
    const Tensor<double> guide = random_tensor<double>(24, 40, 1, seed + 100);
    EXPECT_LT(max_abs_diff(slice(g, guide), brute_force_slice(g, guide)), 1e-12);
  }
  const BilateralGrid<float> gf = random_grid<float>(7);
  const Tensor<float> guide = random_tensor<float>(16, 16, 1, 8);
  const Tensor<float> got = slice(gf, guide);
  const Tensor<double> ref = brute_force_slice(gf, guide);
  double m = 0;
  for (std::size_t i = 0; i < got.size(); ++i) m = std::max(m, std::abs(got.data()[i] - ref.data()[i]));
  EXPECT_LT(m, 1e-6);
}

TEST(Slice, GuidanceExtremesMatchBruteForce) {
  const BilateralGrid<double> g = random_grid<double>(9);
  Tensor<double> guide(4, 4, 1);
  const double values[] = {0.0, 1.0, 5.0 / 6.0, 0.5, 1.0 / 6.0, 0.999999, 1e-9, 0.25};
  for (std::size_t i = 0; i < guide.size(); ++i) guide.data()[i] = values[i % 8];
  EXPECT_LT(max_abs_diff(slice(g, guide), brute_force_slice(g, guide)), 1e-12);
}

TEST(Slice, IsLinearInGrid) {
  const BilateralGrid<double> g1 = random_grid<double>(1);
  const BilateralGrid<double> g2 = random_grid<double>(2);
  BilateralGrid<double> mix;
  for (std::size_t i = 0; i < mix.data.size(); ++i) mix.data[i] = 0.3 * g1.data[i] - 2.0 * g2.data[i];
  const Tensor<double> guide = random_tensor<double>(17, 13, 1, 3);
  const Tensor<double> expect = add(scale(slice(g1, guide), 0.3), scale(slice(g2, guide), -2.0));
  EXPECT_LT(max_abs_diff(slice(mix, guide), expect), 1e-6);
}

TEST(Slice, DepthWeightsPartitionUnityThenDecay) {
  BilateralGrid<double> ones;
  std::fill(ones.data.begin(), ones.data.end(), 1.0);
  Tensor<double> guide(1, 101, 1);
  for (int i = 0; i <= 100; ++i) guide(0, i, 0) = i / 100.0;
  const Tensor<double> out = slice(ones, guide);
  for (int i = 0; i <= 100; ++i) {
    const double t = kGridDepth * guide(0, i, 0);
    const double expected = t <= kGridDepth - 1 ? 1.0 : kGridDepth - t;
    EXPECT_NEAR(out(0, i, 0), expected, 1e-12) << "G=" << guide(0, i, 0);
  }
}

TEST(Slice, RejectsGuidanceOutsideUnitInterval) {
  const BilateralGrid<float> g;
  Tensor<float> guide(2, 2, 1, 0.5f);
  guide(1, 1, 0) = 1.01f;
  EXPECT_THROW(slice(g, guide), ContractError);
  guide(1, 1, 0) = -0.01f;
  EXPECT_THROW(slice(g, guide), ContractError);
  guide(1, 1, 0) = std::nanf("");
  EXPECT_THROW(slice(g, guide), ContractError);
}

TEST(Slice, BackwardMatchesFiniteDifferences) {
  BilateralGrid<double> g = random_grid<double>(21);
  Tensor<double> guide = random_tensor<double>(12, 10, 1, 22, 0.05, 0.95);
  const Tensor<double> probe = random_tensor<double>(12, 10, kAffineCoeffs, 23, -1, 1);
  BilateralGrid<double> dg;
  Tensor<double> dguide;
  slice_backward(g, guide, probe, &dg, &dguide);
  auto loss = [&] { return inner(slice(g, guide), probe); };
  EXPECT_LT(fd_error(g.data, dg.data, loss, 1e-3, 400, 1), 1e-3);
  std::vector<double> gv = to_vec(guide);
  auto gloss = [&] {
    std::copy(gv.begin(), gv.end(), guide.data());
    return loss();
  };
  // Small step: the tent kernel has kinks at every integer depth.
  EXPECT_LT(fd_error(gv, to_vec(dguide), gloss, 1e-7), 1e-3);
}

// ---- affine ------------------------------------------------------------------

TEST(Affine, IdentityCoefficients) {
  const Tensor<double> img = random_tensor<double>(6, 7, 3, 1);
  const Tensor<double> guide = random_tensor<double>(6, 7, 1, 2);
  const Tensor<double> coeffs = slice(identity_grid(), scale(guide, 5.0 / 6.0));
  EXPECT_LT(max_abs_diff(apply_affine(img, coeffs), img), 1e-12);
}

TEST(Affine, BiasOnlyGivesMidGray) {
  Tensor<double> coeffs(3, 3, kAffineCoeffs);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x)
      for (int r = 0; r < 3; ++r) coeffs(y, x, r * 4 + 3) = 0.5;
  const Tensor<double> out = apply_affine(random_tensor<double>(3, 3, 3, 4), coeffs);
  for (double v : out.values()) EXPECT_EQ(v, 0.5);
}

TEST(Affine, MatchesMatrixVectorOracle) {
  const Tensor<double> img = random_tensor<double>(5, 5, 3, 5);
  const Tensor<double> coeffs = random_tensor<double>(5, 5, kAffineCoeffs, 6, -2, 2);
  const Tensor<double> out = apply_affine(img, coeffs);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x)
      for (int r = 0; r < 3; ++r) {
        double s = coeffs(y, x, r * 4 + 3);
        for (int c = 0; c < 3; ++c) s += coeffs(y, x, r * 4 + c) * img(y, x, c);
        EXPECT_NEAR(out(y, x, r), s, 1e-12);
      }
}

TEST(Affine, BackwardMatchesFiniteDifferences) {
  Tensor<double> img = random_tensor<double>(4, 5, 3, 7);
  Tensor<double> coeffs = random_tensor<double>(4, 5, kAffineCoeffs, 8, -1, 1);
  const Tensor<double> probe = random_tensor<double>(4, 5, 3, 9, -1, 1);
  Tensor<double> di;
  Tensor<double> dc;
  apply_affine_backward(img, coeffs, probe, &di, &dc);
  std::vector<double> iv = to_vec(img);
  std::vector<double> cv = to_vec(coeffs);
  auto loss = [&] {
    std::copy(iv.begin(), iv.end(), img.data());
    std::copy(cv.begin(), cv.end(), coeffs.data());
    return inner(apply_affine(img, coeffs), probe);
  };
  EXPECT_LT(fd_error(iv, to_vec(di), loss), 1e-3);
  EXPECT_LT(fd_error(cv, to_vec(dc), loss), 1e-3);
}

// ---- low-frequency corrector ---------------------------------------------------

struct LowFreqFixture {
  SfeParams<double> guidance = make_sfe_params<double>(3, kGuidanceChannels, true);
  HfdParams<double> hfd;
};

LowFreqFixture smooth_low_freq_params(std::uint64_t seed) {
  LowFreqFixture f;
  randomize(buffers(f.guidance, "g"), seed, 0.3);
  randomize(buffers(f.hfd), seed + 1, 0.05);
  for (std::size_t c = 0; c < f.guidance.conv_a.bias.size(); ++c) f.guidance.conv_a.bias[c] = c % 2 ? -0.5 : 0.5;
  for (std::size_t c = 0; c < f.hfd.refine.bias.size(); ++c) f.hfd.refine.bias[c] = c % 2 ? -0.5 : 0.5;
  for (std::size_t c = 0; c < f.hfd.sfe.conv_a.bias.size(); ++c) f.hfd.sfe.conv_a.bias[c] = c % 2 ? -0.5 : 0.5;
  f.hfd.fuse.bias[0] += 1.0;
  f.hfd.fuse.bias[1] += 1.0;
  return f;
}

TEST(LowFreq, OutputKeepsInputDims) {
  const LowFreqFixture f = smooth_low_freq_params(1);
  for (auto [h, w] : {std::pair{16, 16}, std::pair{27, 40}, std::pair{64, 48}}) {
    const Tensor<double> y = correct_low_freq(random_tensor<double>(h, w, 3, h), f.guidance, f.hfd);
    EXPECT_EQ(y.height(), h);
    EXPECT_EQ(y.width(), w);
    EXPECT_EQ(y.channels(), 3);
  }
}

TEST(LowFreq, IdentityGainBiasReproducesInput) {
  LowFreqFixture f;
  f.hfd.fuse.bias[0] = 1.0;
  f.hfd.fuse.bias[1] = 1.0;
  f.guidance.head->bias[0] = -1.0;  // any bounded guidance works
  const Tensor<double> low = random_tensor<double>(20, 24, 3, 5);
  EXPECT_LT(max_abs_diff(correct_low_freq(low, f.guidance, f.hfd), low), 1e-12);
}

TEST(LowFreq, GradientsMatchFiniteDifferences) {
  LowFreqFixture f = smooth_low_freq_params(3);
  const BgnetConfig cfg{};
  Tensor<double> low = random_tensor<double>(16, 16, 3, 4, 0.1, 0.9);
  LowFreqTrace<double> trace;
  const Tensor<double> y = correct_low_freq(low, f.guidance, f.hfd, cfg, &trace);
  const Tensor<double> probe = random_tensor<double>(16, 16, 3, 5, -1, 1);
  SfeParams<double> gg = zeroed(f.guidance);
  HfdParams<double> gh = zeroed(f.hfd);
  const Tensor<double> dlow = correct_low_freq_backward(trace, f.guidance, f.hfd, cfg, probe, &gg, &gh);
  auto loss = [&] { return inner(correct_low_freq(low, f.guidance, f.hfd, cfg), probe); };
  Buffers bp = buffers(f.guidance, "guidance");
  Buffers bg = buffers(gg, "guidance");
  for (auto& b : buffers(f.hfd)) bp.push_back(b);
  for (auto& b : buffers(gh)) bg.push_back(b);
  for (std::size_t k = 0; k < bp.size(); ++k) {
    EXPECT_LT(fd_error(*bp[k].second, *bg[k].second, loss, 1e-5, 10, k), 1e-3) << bp[k].first;
  }
  std::vector<double> lv = to_vec(low);
  auto lloss = [&] {
    std::copy(lv.begin(), lv.end(), low.data());
    return loss();
  };
  EXPECT_LT(fd_error(lv, to_vec(dlow), lloss, 1e-5, 24, 7), 1e-3);
}

}  // namespace
}  // namespace mslt
