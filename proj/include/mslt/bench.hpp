#pragma once

#include <cstdint>
#include <vector>

#include "mslt/model.hpp"

namespace mslt {

struct BenchOptions {
  int height = 1080;
  int width = 1920;
  int iters = 100;
  int warmup = 5;
  std::uint64_t seed = 0;
};

struct BenchResult {
  std::vector<double> frame_ms;  // one entry per timed iteration
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double fps = 0.0;
  std::uint64_t flops = 0;
  std::size_t params = 0;
};

// Times forward() on a seeded uniform [0,1] image. Only the forward call sits inside the timed region.
BenchResult run_bench(const ModelParams<float>& mp, const BenchOptions& options);

}  // namespace mslt
