#include "mslt/bench.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>

namespace mslt {

BenchResult run_bench(const ModelParams<float>& mp, const BenchOptions& options) {
  if (options.iters < 1 || options.warmup < 0) throw ContractError("bench: iters must be >= 1 and warmup >= 0");
  ImageTensor image(options.height, options.width, 3);
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  for (float& v : image.values()) v = unit(rng);

  BenchResult r;
  r.flops = flop_count(mp, options.height, options.width);
  r.params = mp.param_count();
  for (int i = 0; i < options.warmup; ++i) (void)forward(image, mp);
  r.frame_ms.reserve(options.iters);
  for (int i = 0; i < options.iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const ImageTensor out = forward(image, mp);
    const auto t1 = std::chrono::steady_clock::now();
    r.frame_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  r.mean_ms = std::accumulate(r.frame_ms.begin(), r.frame_ms.end(), 0.0) / r.frame_ms.size();
  std::vector<double> sorted = r.frame_ms;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  r.median_ms = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  r.fps = r.mean_ms > 0.0 ? 1000.0 / r.mean_ms : 0.0;
  return r;
}

}  // namespace mslt
