// mslt: exposure correction front end.
//
// Exit codes: 0 success, 2 usage, 3 file or weight I/O, 4 contract violation (bad sizes, values, shapes).
// Every command that gets past argument parsing writes a JSON run manifest (see --run-manifest).

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mslt/bench.hpp"
#include "mslt/image_io.hpp"
#include "mslt/metrics.hpp"
#include "mslt/model.hpp"
#include "mslt/parallel.hpp"
#include "mslt/pyramid.hpp"
#include "mslt/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitContract = 4;

// Flag combinations CLI11 cannot validate on its own.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Run {
 public:
  explicit Run(std::string command) {
    doc_["command"] = std::move(command);
    doc_["seed"] = nullptr;
  }

  json& config() { return doc_["config"]; }
  void seed(std::uint64_t s) { doc_["seed"] = s; }
  void artifact(const std::string& key, const fs::path& path) { doc_["artifacts"][key] = path.string(); }
  json& results() { return doc_["results"]; }

  // Runs f and records its wall time under `name`.
  template <typename F>
  auto stage(const std::string& name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    auto record = [&] {
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      doc_["timings_ms"].push_back({{"stage", name}, {"ms", ms}});
    };
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      record();
    } else {
      auto r = f();
      record();
      return r;
    }
  }

  void finish(const fs::path& path, int exit_code, const std::string& error) {
    doc_["exit_code"] = exit_code;
    if (!error.empty()) doc_["error"] = error;
    if (!doc_.contains("timings_ms")) doc_["timings_ms"] = json::array();
    std::ofstream out(path);
    if (!out) {
      std::cerr << "warning: cannot write run manifest " << path << "\n";
      return;
    }
    out << doc_.dump(2) << "\n";
  }

 private:
  json doc_;
};

struct ModelFlags {
  std::string variant = "mslt";
  int levels = 4;
  int cfd_count = 3;
  std::string pooling = "gap+gsp";
  bool hf_unshared = false;

  void add(CLI::App* cmd, bool with_config) {
    cmd->add_option("--variant", variant, "Model variant")
        ->check(CLI::IsMember({"mslt", "mslt+", "mslt++", "channel-mlp"}))
        ->capture_default_str();
    if (!with_config) return;
    cmd->add_option("--levels", levels, "Pyramid levels")->check(CLI::Range(2, 5))->capture_default_str();
    cmd->add_option("--cfd-count", cfd_count, "CFD modules in the HFD cascade")
        ->check(CLI::Range(1, 5))
        ->capture_default_str();
    cmd->add_option("--pooling", pooling, "CFD pooling")
        ->check(CLI::IsMember({"gap", "gsp", "gap+gsp"}))
        ->capture_default_str();
    cmd->add_flag("--hf-unshared", hf_unshared, "One high-frequency mask MLP per level");
  }

  mslt::Variant parsed_variant() const { return *mslt::parse_variant(variant); }

  mslt::ModelConfig config() const {
    mslt::ModelConfig c;
    c.levels = levels;
    c.cfd_count = cfd_count;
    c.pooling = *mslt::parse_pooling(pooling);
    c.hf_shared = !hf_unshared;
    return c;
  }
};

json config_json(mslt::Variant v, const mslt::ModelConfig& c) {
  return {{"variant", std::string(mslt::variant_name(v))},
          {"levels", c.levels},
          {"cfd_count", c.cfd_count},
          {"pooling", std::string(mslt::pooling_name(c.pooling))},
          {"hf_shared", c.hf_shared}};
}

std::string format_psnr(double db) {
  if (std::isinf(db)) return "inf";
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << db;
  return s.str();
}

std::string format_fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

fs::path with_suffix(const fs::path& p, const std::string& suffix) { return fs::path(p.string() + suffix); }

// ---- commands ------------------------------------------------------------------

struct InitArgs {
  ModelFlags model;
  fs::path out;
  bool identity = false;
  std::uint64_t seed = 0;
};

void cmd_init(const InitArgs& a, Run& run) {
  const mslt::Variant v = a.model.parsed_variant();
  const mslt::ModelConfig c = a.model.config();
  run.config() = config_json(v, c);
  run.config()["identity"] = a.identity;
  run.seed(a.seed);
  const auto mp = run.stage("init", [&] {
    return a.identity ? mslt::make_identity<float>(v, c) : mslt::make_random<float>(v, c, a.seed);
  });
  run.stage("save_weights", [&] { mslt::save_weights(mp, a.out); });
  run.artifact("weights", a.out);
  run.results()["param_count"] = mp.param_count();
  std::cout << "wrote " << a.out.string() << " (" << mslt::variant_name(v) << ", " << mp.param_count()
            << " parameters)\n";
}

struct CorrectArgs {
  ModelFlags model;
  fs::path input;
  fs::path output;
  fs::path weights;
};

void cmd_correct(const CorrectArgs& a, Run& run) {
  const mslt::Variant v = a.model.parsed_variant();
  run.config() = {{"variant", a.model.variant}, {"weights", a.weights.string()}};
  const auto mp = run.stage("load_weights", [&] { return mslt::load_weights(a.weights, v); });
  run.config() = config_json(v, mp.config);
  run.config()["weights"] = a.weights.string();
  const mslt::ImageTensor image = run.stage("read_input", [&] { return mslt::read_image(a.input); });
  const auto t0 = std::chrono::steady_clock::now();
  const mslt::ImageTensor out = run.stage("forward", [&] { return mslt::forward(image, mp); });
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  run.stage("write_output", [&] { mslt::write_image(out, a.output); });
  run.artifact("input", a.input);
  run.artifact("output", a.output);
  run.results()["forward_ms"] = ms;
  run.results()["height"] = image.height();
  run.results()["width"] = image.width();
  std::cout << "corrected " << image.width() << "x" << image.height() << " in " << format_fixed(ms, 2)
            << " ms -> " << a.output.string() << "\n";
}

struct TrainArgs {
  ModelFlags model;
  fs::path manifest;
  fs::path out_weights;
  fs::path init_weights;
  fs::path resume_adam;
  fs::path history_csv;
  int epochs = 1;
  int batch = 8;
  int crop = 512;
  int crops_per_image = 30;
  int restart_period = 5;
  double lr = 1e-3;
  double lr_min = 1e-7;
  std::uint64_t seed = 0;
  int log_every = 10;
};

void cmd_train(const TrainArgs& a, Run& run) {
  const mslt::Variant v = a.model.parsed_variant();
  mslt::TrainConfig tc;
  tc.lr_max = a.lr;
  tc.lr_min = a.lr_min;
  tc.restart_period = a.restart_period;
  tc.batch_size = a.batch;
  tc.crop = a.crop;
  tc.crops_per_image = a.crops_per_image;
  tc.epochs = a.epochs;
  tc.seed = a.seed;
  if (!a.resume_adam.empty() && a.init_weights.empty()) {
    throw UsageError("--resume-adam needs --init-weights (the weights the optimizer state belongs to)");
  }

  const auto entries = run.stage("read_manifest", [&] { return mslt::read_manifest(a.manifest); });
  if (entries.empty()) throw mslt::ContractError("train: manifest " + a.manifest.string() + " lists no pairs");
  std::vector<mslt::SamplePair> dataset = run.stage("read_images", [&] {
    std::vector<mslt::SamplePair> d;
    for (const auto& e : entries) d.push_back({mslt::read_image(e.input), mslt::read_image(e.target)});
    return d;
  });

  const mslt::ModelParams<float> initial = run.stage("init", [&] {
    return a.init_weights.empty() ? mslt::make_random<float>(v, a.model.config(), a.seed)
                                  : mslt::load_weights(a.init_weights, v);
  });
  std::optional<mslt::AdamState<float>> resume;
  if (!a.resume_adam.empty()) resume = mslt::load_adam_state(a.resume_adam, initial);

  run.config() = config_json(v, initial.config);
  run.config()["train"] = {{"epochs", tc.epochs},       {"batch", tc.batch_size},
                           {"crop", tc.crop},           {"crops_per_image", tc.crops_per_image},
                           {"lr_max", tc.lr_max},       {"lr_min", tc.lr_min},
                           {"restart_period", tc.restart_period},
                           {"pairs", dataset.size()},   {"resumed_step", resume ? resume->step : 0}};
  run.seed(a.seed);

  const int every = std::max(1, a.log_every);
  const auto progress = [&](const mslt::HistoryRecord& r, std::int64_t total) {
    if ((r.step + 1) % every == 0) {
      std::cerr << "step " << r.step + 1 << "/" << total << " lr " << r.lr << " loss " << r.loss << "\n";
    }
  };
  const mslt::FitResult fit =
      run.stage("fit", [&] { return mslt::fit(dataset, initial, tc, resume ? &*resume : nullptr, progress); });

  const fs::path adam_path = with_suffix(a.out_weights, ".adam");
  const fs::path history_path = a.history_csv.empty() ? with_suffix(a.out_weights, ".history.csv") : a.history_csv;
  run.stage("save", [&] {
    mslt::save_weights(fit.params, a.out_weights);
    mslt::save_adam_state(fit.adam, fit.params, adam_path);
    std::ofstream csv(history_path);
    if (!csv) throw mslt::IoError("cannot write " + history_path.string());
    csv << "step,lr,loss\n" << std::setprecision(9);
    for (const auto& r : fit.history) csv << r.step << "," << r.lr << "," << r.loss << "\n";
    if (!csv) throw mslt::IoError("failed writing " + history_path.string());
  });
  run.artifact("weights", a.out_weights);
  run.artifact("adam", adam_path);
  run.artifact("history", history_path);
  run.results()["steps"] = fit.history.size();
  run.results()["final_step"] = fit.adam.step;
  if (!fit.history.empty()) {
    run.results()["first_loss"] = fit.history.front().loss;
    run.results()["last_loss"] = fit.history.back().loss;
  }
  std::cout << "trained " << fit.history.size() << " steps";
  if (!fit.history.empty()) std::cout << ", last loss " << fit.history.back().loss;
  std::cout << " -> " << a.out_weights.string() << "\n";
}

struct BenchArgs {
  ModelFlags model;
  fs::path weights;
  fs::path csv_out;
  int width = 1920;
  int height = 1080;
  int iters = 100;
  int warmup = 5;
  std::uint64_t seed = 0;
};

void cmd_bench(const BenchArgs& a, Run& run) {
  const mslt::Variant v = a.model.parsed_variant();
  const mslt::ModelParams<float> mp = run.stage("init", [&] {
    return a.weights.empty() ? mslt::make_random<float>(v, a.model.config(), a.seed)
                             : mslt::load_weights(a.weights, v);
  });
  run.config() = config_json(v, mp.config);
  run.config()["bench"] = {{"width", a.width}, {"height", a.height}, {"iters", a.iters}, {"warmup", a.warmup},
                           {"threads", mslt::num_threads()}};
  run.seed(a.seed);
  if (a.height < mslt::pyramid_multiple(mp.config.levels) || a.width < mslt::pyramid_multiple(mp.config.levels)) {
    throw mslt::SizeError("bench: dimensions must be at least " +
                          std::to_string(mslt::pyramid_multiple(mp.config.levels)));
  }
  mslt::BenchOptions opt{a.height, a.width, a.iters, a.warmup, a.seed};
  const mslt::BenchResult r = run.stage("bench", [&] { return mslt::run_bench(mp, opt); });
  const mslt::FlopReport flops = mslt::flop_report(mp, a.height, a.width);

  const std::string name(mslt::variant_name(v));
  std::cout << name << " @ " << a.width << "x" << a.height << ", " << a.iters << " iters, " << mslt::num_threads()
            << " threads\n";
  std::cout << "  mean   " << format_fixed(r.mean_ms, 3) << " ms/frame\n";
  std::cout << "  median " << format_fixed(r.median_ms, 3) << " ms/frame\n";
  std::cout << "  fps    " << format_fixed(r.fps, 2) << "\n";
  std::cout << "  flops  " << format_fixed(r.flops / 1e6, 2) << " M (multiply-accumulates; "
            << format_fixed(flops.arithmetic_total / 1e6, 2) << " M arithmetic)";
  if (v == mslt::Variant::kMslt && a.width == 1024 && a.height == 1024) {
    std::cout << ", reference " << mslt::kReferenceMflopsMslt1024 << " M";
  }
  std::cout << "\n  params " << r.params << " (reference " << mslt::reference_param_target(v) << ")\n";

  const std::string header = "variant,width,height,iters,mean_ms,median_ms,fps,flops,params";
  std::ostringstream row;
  row << name << "," << a.width << "," << a.height << "," << a.iters << "," << format_fixed(r.mean_ms, 4) << ","
      << format_fixed(r.median_ms, 4) << "," << format_fixed(r.fps, 3) << "," << r.flops << "," << r.params;
  std::cout << header << "\n" << row.str() << "\n";
  if (!a.csv_out.empty()) {
    std::ofstream csv(a.csv_out);
    if (!csv) throw mslt::IoError("cannot write " + a.csv_out.string());
    csv << header << "\n" << row.str() << "\n";
    run.artifact("csv", a.csv_out);
  }
  run.results() = {{"mean_ms", r.mean_ms},     {"median_ms", r.median_ms},
                   {"fps", r.fps},             {"flops", r.flops},
                   {"arithmetic_flops", flops.arithmetic_total},
                   {"params", r.params},       {"reference_params", mslt::reference_param_target(v)}};
}

struct EvalArgs {
  ModelFlags model;
  fs::path pairs;
  fs::path weights;
  fs::path csv_out;
  std::string ssim_channels = "luma";
};

void cmd_eval(const EvalArgs& a, Run& run) {
  const mslt::Variant v = a.model.parsed_variant();
  std::optional<mslt::ModelParams<float>> mp;
  if (!a.weights.empty()) mp = run.stage("load_weights", [&] { return mslt::load_weights(a.weights, v); });
  run.config() = {{"weights", a.weights.string()}, {"ssim_channels", a.ssim_channels}};
  if (mp) run.config()["model"] = config_json(v, mp->config);
  const auto channels =
      a.ssim_channels == "luma" ? mslt::SsimChannels::kLuma : mslt::SsimChannels::kPerChannelMean;
  const auto entries = run.stage("read_manifest", [&] { return mslt::read_manifest(a.pairs); });
  if (entries.empty()) throw mslt::ContractError("eval: manifest " + a.pairs.string() + " lists no pairs");

  struct Row {
    std::string name;
    double psnr;
    double ssim;
  };
  std::vector<Row> rows;
  run.stage("evaluate", [&] {
    for (const auto& e : entries) {
      mslt::ImageTensor candidate = mslt::read_image(e.input);
      const mslt::ImageTensor reference = mslt::read_image(e.target);
      if (mp) candidate = mslt::forward(candidate, *mp);
      rows.push_back({e.input.filename().string(), mslt::psnr(candidate, reference),
                      mslt::ssim(candidate, reference, channels)});
    }
  });

  double psnr_sum = 0.0;
  double ssim_sum = 0.0;
  for (const Row& r : rows) {
    psnr_sum += r.psnr;
    ssim_sum += r.ssim;
  }
  const double psnr_mean = psnr_sum / rows.size();
  const double ssim_mean = ssim_sum / rows.size();

  std::ostringstream csv;
  csv << "name,psnr_db,ssim\n";
  for (const Row& r : rows) csv << r.name << "," << format_psnr(r.psnr) << "," << format_fixed(r.ssim, 6) << "\n";
  csv << "mean," << format_psnr(psnr_mean) << "," << format_fixed(ssim_mean, 6) << "\n";
  if (a.csv_out.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(a.csv_out);
    if (!out) throw mslt::IoError("cannot write " + a.csv_out.string());
    out << csv.str();
    run.artifact("csv", a.csv_out);
    std::cout << rows.size() << " pairs: mean PSNR " << format_psnr(psnr_mean) << " dB, mean SSIM "
              << format_fixed(ssim_mean, 4) << "\n";
  }
  run.results() = {{"pairs", rows.size()}, {"mean_psnr_db", format_psnr(psnr_mean)}, {"mean_ssim", ssim_mean}};
}

struct HeatmapArgs {
  fs::path input;
  fs::path corrected;
  fs::path out;
};

void cmd_heatmap(const HeatmapArgs& a, Run& run) {
  const mslt::ImageTensor in = run.stage("read_input", [&] { return mslt::read_image(a.input); });
  const mslt::ImageTensor corrected = run.stage("read_corrected", [&] { return mslt::read_image(a.corrected); });
  const mslt::HeatmapR h = run.stage("heatmap", [&] { return mslt::correction_heatmap(in, corrected); });
  run.stage("write", [&] { mslt::write_image(mslt::render_heatmap(h), a.out); });
  run.artifact("heatmap", a.out);
  run.results()["r_max"] = h.r_max;
  std::cout << "R_max " << h.r_max << " (CIELAB L) -> " << a.out.string() << "\n";
}

struct DecomposeArgs {
  fs::path input;
  fs::path out_dir;
  int levels = 4;
};

// High layers are written with a +0.5 offset so zero detail shows as mid-gray.
void cmd_decompose(const DecomposeArgs& a, Run& run) {
  run.config() = {{"levels", a.levels}, {"high_offset", 0.5}};
  const mslt::ImageTensor image = run.stage("read_input", [&] { return mslt::read_image(a.input); });
  const mslt::Pyramid<float> p = run.stage("decompose", [&] { return mslt::decompose_fixed(image, a.levels); });
  fs::create_directories(a.out_dir);
  run.stage("write", [&] {
    for (std::size_t i = 0; i < p.highs.size(); ++i) {
      mslt::ImageTensor shown = p.highs[i];
      for (float& v : shown.values()) v += 0.5f;
      const fs::path path = a.out_dir / ("high" + std::to_string(i + 1) + ".png");
      mslt::write_image(shown, path);
      run.artifact("high" + std::to_string(i + 1), path);
    }
    const fs::path path = a.out_dir / ("low" + std::to_string(a.levels) + ".png");
    mslt::write_image(p.low, path);
    run.artifact("low" + std::to_string(a.levels), path);
  });
  run.results()["layers"] = p.highs.size() + 1;
  std::cout << "wrote " << p.highs.size() + 1 << " layers to " << a.out_dir.string() << "\n";
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return kExitUsage;
  if (dynamic_cast<const mslt::IoError*>(&e)) return kExitIo;
  if (dynamic_cast<const mslt::Error*>(&e)) return kExitContract;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-scale Laplacian exposure correction"};
  app.require_subcommand(1);
  int threads = 0;
  std::string manifest_flag;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--run-manifest", manifest_flag, "Where to write the JSON run manifest");

  // Default manifest location per command, next to its primary artifact.
  std::string command;
  fs::path default_manifest;
  std::function<void(Run&)> action;

  InitArgs init;
  auto* c_init = app.add_subcommand("init", "Write identity or randomly initialised weights");
  init.model.add(c_init, true);
  c_init->add_option("--out", init.out, "Weight file to write")->required();
  c_init->add_flag("--identity", init.identity, "Identity configuration instead of random init");
  c_init->add_option("--seed", init.seed, "Seed for random init")->capture_default_str();
  c_init->callback([&] {
    command = "init";
    default_manifest = with_suffix(init.out, ".run.json");
    action = [&](Run& r) { cmd_init(init, r); };
  });

  CorrectArgs correct;
  auto* c_correct = app.add_subcommand("correct", "Correct the exposure of one image");
  correct.model.add(c_correct, false);
  c_correct->add_option("--input", correct.input, "Input image (PNG or P6 PPM)")->required();
  c_correct->add_option("--output", correct.output, "Output image (.png, otherwise PPM)")->required();
  c_correct->add_option("--weights", correct.weights, "Weight file")->required();
  c_correct->callback([&] {
    command = "correct";
    default_manifest = with_suffix(correct.output, ".run.json");
    action = [&](Run& r) { cmd_correct(correct, r); };
  });

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train on a manifest of input/target pairs");
  train.model.add(c_train, true);
  c_train->add_option("--manifest", train.manifest, "Tab-separated input/target paths")->required();
  c_train->add_option("--out-weights", train.out_weights, "Weight file to write")->required();
  c_train->add_option("--init-weights", train.init_weights, "Start from these weights instead of random init");
  c_train->add_option("--resume-adam", train.resume_adam, "Optimizer state written by an earlier run");
  c_train->add_option("--history-csv", train.history_csv, "Loss history (default <out-weights>.history.csv)");
  c_train->add_option("--epochs", train.epochs)->check(CLI::NonNegativeNumber)->capture_default_str();
  c_train->add_option("--batch", train.batch)->check(CLI::PositiveNumber)->capture_default_str();
  c_train->add_option("--crop", train.crop)->check(CLI::PositiveNumber)->capture_default_str();
  c_train->add_option("--crops-per-image", train.crops_per_image)->check(CLI::PositiveNumber)->capture_default_str();
  c_train->add_option("--restart-period", train.restart_period, "Epochs per cosine cycle")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_train->add_option("--lr", train.lr, "Peak learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  c_train->add_option("--lr-min", train.lr_min)->check(CLI::NonNegativeNumber)->capture_default_str();
  c_train->add_option("--seed", train.seed)->capture_default_str();
  c_train->add_option("--log-every", train.log_every, "Progress line every N steps")->capture_default_str();
  c_train->callback([&] {
    command = "train";
    default_manifest = with_suffix(train.out_weights, ".run.json");
    action = [&](Run& r) { cmd_train(train, r); };
  });

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Time forward passes on a random image");
  bench.model.add(c_bench, true);
  c_bench->add_option("--weights", bench.weights, "Weight file (default: seeded random init)");
  c_bench->add_option("--width", bench.width)->check(CLI::PositiveNumber)->capture_default_str();
  c_bench->add_option("--height", bench.height)->check(CLI::PositiveNumber)->capture_default_str();
  c_bench->add_option("--iters", bench.iters)->check(CLI::PositiveNumber)->capture_default_str();
  c_bench->add_option("--warmup", bench.warmup)->check(CLI::NonNegativeNumber)->capture_default_str();
  c_bench->add_option("--seed", bench.seed)->capture_default_str();
  c_bench->add_option("--csv-out", bench.csv_out, "Also write the CSV row here");
  c_bench->callback([&] {
    command = "bench";
    default_manifest = bench.csv_out.empty() ? fs::path("bench.run.json") : with_suffix(bench.csv_out, ".run.json");
    action = [&](Run& r) { cmd_bench(bench, r); };
  });

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "PSNR/SSIM over a manifest of pairs");
  eval.model.add(c_eval, false);
  c_eval->add_option("--pairs-manifest", eval.pairs, "Tab-separated candidate/reference paths")->required();
  c_eval->add_option("--weights", eval.weights, "Correct each candidate with these weights first");
  c_eval->add_option("--csv-out", eval.csv_out, "CSV path (default: stdout)");
  c_eval->add_option("--ssim-channels", eval.ssim_channels, "SSIM on luma or the mean over RGB channels")
      ->check(CLI::IsMember({"luma", "per-channel"}))
      ->capture_default_str();
  c_eval->callback([&] {
    command = "eval";
    default_manifest = eval.csv_out.empty() ? with_suffix(eval.pairs, ".run.json") : with_suffix(eval.csv_out, ".run.json");
    action = [&](Run& r) { cmd_eval(eval, r); };
  });

  HeatmapArgs heat;
  auto* c_heat = app.add_subcommand("heatmap", "Render the lightness correction-strength map");
  c_heat->add_option("--input", heat.input)->required();
  c_heat->add_option("--corrected", heat.corrected)->required();
  c_heat->add_option("--out", heat.out)->required();
  c_heat->callback([&] {
    command = "heatmap";
    default_manifest = with_suffix(heat.out, ".run.json");
    action = [&](Run& r) { cmd_heatmap(heat, r); };
  });

  DecomposeArgs dec;
  auto* c_dec = app.add_subcommand("decompose", "Write the Laplacian pyramid layers of an image");
  c_dec->add_option("--input", dec.input)->required();
  c_dec->add_option("--levels", dec.levels)->check(CLI::Range(2, 12))->capture_default_str();
  c_dec->add_option("--out-dir", dec.out_dir)->required();
  c_dec->callback([&] {
    command = "decompose";
    default_manifest = dec.out_dir / "decompose.run.json";
    action = [&](Run& r) { cmd_decompose(dec, r); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  if (threads > 0) mslt::set_num_threads(threads);

  Run run(command);
  const fs::path manifest_path = manifest_flag.empty() ? default_manifest : fs::path(manifest_flag);
  int code = 0;
  std::string error;
  try {
    action(run);
  } catch (const std::exception& e) {
    code = exit_code_for(e);
    error = e.what();
    std::cerr << "error: " << error << "\n";
  }
  run.finish(manifest_path, code, error);
  return code;
}
