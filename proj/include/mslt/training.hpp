#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mslt/model.hpp"
#include "mslt/tensor.hpp"

namespace mslt {

struct TrainConfig {
  double lr_max = 1e-3;
  double lr_min = 1e-7;
  int restart_period = 5;  // epochs per cosine cycle
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 8;
  int crop = 512;
  int crops_per_image = 30;
  int epochs = 1;
  std::uint64_t seed = 0;
};

struct SamplePair {
  ImageTensor input;   // improperly exposed
  ImageTensor target;  // properly exposed
};

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad;
};

// mean((O - T)^2) over every element and its gradient 2(O - T)/N.
template <typename T>
LossResult<T> mse_loss(const Tensor<T>& output, const Tensor<T>& target);

// Cosine annealing with warm restarts every restart_period epochs.
double cosine_lr(std::int64_t global_step, std::int64_t steps_per_epoch, const TrainConfig& cfg);

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;  // one buffer per named tensor, in visiting order
  std::vector<std::vector<T>> v;
  std::uint64_t step = 0;
};

template <typename T>
AdamState<T> make_adam_state(const ModelParams<T>& params);

template <typename T>
void adam_step(ModelParams<T>& params, const ModelParams<T>& grads, AdamState<T>& state, double lr,
               const TrainConfig& cfg);

// Gradients of the loss w.r.t. every named tensor, given dL/dO for the clamped output.
// The trace must come from forward() with these exact parameters.
template <typename T>
ModelParams<T> backward(const ModelParams<T>& mp, const ModelTrace<T>& trace, const Tensor<T>& d_output);

// acc += scale * g, tensor by tensor in name order.
template <typename T>
void accumulate(ModelParams<T>& acc, const ModelParams<T>& g, T scale = T(1));

struct HistoryRecord {
  std::int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct FitResult {
  ModelParams<float> params;
  AdamState<float> adam;
  std::vector<HistoryRecord> history;
};

using FitProgress = std::function<void(const HistoryRecord&, std::int64_t total_steps)>;

std::int64_t steps_per_epoch(std::size_t dataset_size, const TrainConfig& cfg);

// Epochs of shuffled random crops; one Adam step per mini-batch. Resumes from `resume` when given.
FitResult fit(const std::vector<SamplePair>& dataset, const ModelParams<float>& initial, const TrainConfig& cfg,
              const AdamState<float>* resume = nullptr, const FitProgress& progress = {});

// ---- gradient check -----------------------------------------------------------

struct TensorGradCheck {
  std::string name;
  std::size_t checked = 0;
  double max_abs_error = 0.0;
  double max_abs_numeric = 0.0;
  double relative_error = 0.0;  // max_abs_error / max(max_abs_numeric, kGradCheckFloor)
};

// Keeps tensors whose true gradient is exactly zero from dividing rounding noise by rounding noise.
inline constexpr double kGradCheckFloor = 1e-8;

struct GradCheckOptions {
  double epsilon = 1e-3;
  std::size_t samples_per_tensor = 16;  // tensors this size or smaller are checked exhaustively
  std::uint64_t seed = 0;
};

// Central differences of mse_loss(forward(input), target) against backward().
std::vector<TensorGradCheck> gradient_check(const ModelParams<double>& mp, const Tensor<double>& input,
                                            const Tensor<double>& target, const GradCheckOptions& options = {});

// ---- files -------------------------------------------------------------------------

struct ManifestEntry {
  std::filesystem::path input;
  std::filesystem::path target;
};

// Tab-separated input/target paths, one pair per line; relative paths resolve against the manifest's folder.
// Blank lines and lines starting with '#' are skipped.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

// Optimizer sidecar in the MSLTW record layout: adam.m.<name>, adam.v.<name>, adam.step.
void save_adam_state(const AdamState<float>& state, const ModelParams<float>& mp, const std::filesystem::path& path);
AdamState<float> load_adam_state(const std::filesystem::path& path, const ModelParams<float>& mp);

}  // namespace mslt
