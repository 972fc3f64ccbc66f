#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "mslt/image_io.hpp"
#include "mslt/metrics.hpp"
#include "support.hpp"

namespace mslt {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mslt_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result run(const std::string& args) const {
    const fs::path out = dir_ / "stdout.txt";
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = "cd '" + dir_.string() + "' && '" + std::string(MSLT_CLI_PATH) + "' " + args + " >'" +
                            out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  std::string data(const std::string& name) const { return (test::data_dir() / name).string(); }
  fs::path path(const std::string& name) const { return dir_ / name; }

  nlohmann::json manifest(const std::string& name) const { return nlohmann::json::parse(slurp(path(name))); }

  void identity_weights(const std::string& variant, const std::string& file) const {
    ASSERT_EQ(run("init --identity --variant " + variant + " --out " + file).code, 0);
  }

  fs::path dir_;
};

TEST_F(Cli, IdentityCorrectionReproducesInput) {
  for (const std::string variant : {"mslt", "mslt+", "mslt++", "channel-mlp"}) {
    identity_weights(variant, "id.msltw");
    const Result r =
        run("correct --variant " + variant + " --weights id.msltw --input " + data("chelsea.png") + " --output o.png");
    ASSERT_EQ(r.code, 0) << variant << r.err;
    const ImageTensor in = read_image(data("chelsea.png"));
    const ImageTensor out = read_image(path("o.png"));
    ASSERT_EQ(out.height(), in.height());
    ASSERT_EQ(out.width(), in.width());
    EXPECT_GT(psnr(in, out), 50.0) << variant;
  }
}

TEST_F(Cli, CorrectIsByteDeterministic) {
  ASSERT_EQ(run("init --variant mslt+ --seed 7 --out r.msltw").code, 0);
  const std::string args = "correct --variant mslt+ --weights r.msltw --input " + data("coffee.png");
  ASSERT_EQ(run(args + " --output a.png").code, 0);
  ASSERT_EQ(run("--threads 1 " + args + " --output b.png").code, 0);
  const std::string a = slurp(path("a.png"));
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(path("b.png")));
  EXPECT_NE(a, slurp(data("coffee.png")));
}

TEST_F(Cli, CorrectErrorPathsMapToExitCodes) {
  identity_weights("mslt+", "id.msltw");
  const std::string in = " --input " + data("chelsea.png") + " --output o.png";
  EXPECT_EQ(run("correct --variant mslt --weights id.msltw" + in).code, 3);
  EXPECT_EQ(run("correct --variant mslt+ --weights missing.msltw" + in).code, 3);
  EXPECT_EQ(run("correct --variant mslt+ --weights id.msltw --input nope.png --output o.png").code, 3);

  Image8 tiny{4, 4, std::vector<std::uint8_t>(48, 100)};
  write_image8(tiny, path("tiny.ppm"));
  const Result r = run("correct --variant mslt+ --weights id.msltw --input tiny.ppm --output o.png");
  EXPECT_EQ(r.code, 4) << r.err;
  EXPECT_NE(r.err.find("error:"), std::string::npos);

  EXPECT_EQ(run("correct --variant mslt+ --weights id.msltw").code, 2);
  EXPECT_EQ(run("correct --variant resnet --weights id.msltw" + in).code, 2);
  EXPECT_EQ(run("").code, 2);
}

TEST_F(Cli, EveryRunWritesAManifest) {
  identity_weights("mslt", "id.msltw");
  const nlohmann::json init = manifest("id.msltw.run.json");
  EXPECT_EQ(init["command"], "init");
  EXPECT_EQ(init["exit_code"], 0);

  ASSERT_EQ(run("correct --weights id.msltw --input " + data("rocket.png") + " --output o.png").code, 0);
  const nlohmann::json m = manifest("o.png.run.json");
  EXPECT_EQ(m["command"], "correct");
  EXPECT_EQ(m["config"]["variant"], "mslt");
  EXPECT_EQ(m["artifacts"]["output"], "o.png");
  ASSERT_FALSE(m["timings_ms"].empty());
  for (const auto& t : m["timings_ms"]) EXPECT_GE(t["ms"].get<double>(), 0.0);

  const Result bad = run("--run-manifest failed.json correct --weights id.msltw --input nope.png --output o2.png");
  EXPECT_EQ(bad.code, 3);
  const nlohmann::json f = manifest("failed.json");
  EXPECT_EQ(f["exit_code"], 3);
  EXPECT_TRUE(f.contains("error"));
}

TEST_F(Cli, TrainWritesWeightsHistoryAndResumes) {
  std::ofstream(path("pairs.tsv")) << data("chelsea.png") << "\t" << data("coffee.png") << "\n";
  const std::string common = "train --manifest pairs.tsv --epochs 1 --batch 2 --crop 32 --crops-per-image 2 --seed 3";
  const Result r = run(common + " --out-weights a.msltw");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(path("a.msltw.adam")));
  const std::string history = slurp(path("a.msltw.history.csv"));
  EXPECT_EQ(history.rfind("step,lr,loss\n", 0), 0u);
  EXPECT_EQ(std::count(history.begin(), history.end(), '\n'), 2);
  EXPECT_EQ(manifest("a.msltw.run.json")["results"]["final_step"], 1);

  ASSERT_EQ(run(common + " --out-weights b.msltw").code, 0);
  EXPECT_EQ(slurp(path("a.msltw")), slurp(path("b.msltw")));

  ASSERT_EQ(run(common + " --out-weights c.msltw --init-weights a.msltw --resume-adam a.msltw.adam").code, 0);
  // One pair, two crops, batch 2: one step per epoch, so the resumed run logs step 1 only.
  EXPECT_EQ(slurp(path("c.msltw.history.csv")).find("\n0,"), std::string::npos);
  EXPECT_NE(slurp(path("c.msltw.history.csv")).find("\n1,"), std::string::npos);
  EXPECT_EQ(manifest("c.msltw.run.json")["results"]["final_step"], 2);

  EXPECT_EQ(run(common + " --out-weights d.msltw --resume-adam a.msltw.adam").code, 2);
}

TEST_F(Cli, TrainAblationFlagRanges) {
  std::ofstream(path("pairs.tsv")) << data("rocket.png") << "\t" << data("rocket.png") << "\n";
  const std::string common = "train --manifest pairs.tsv --out-weights w.msltw --epochs 1 --batch 1 --crop 32 "
                             "--crops-per-image 1";
  for (int levels = 2; levels <= 5; ++levels) {
    EXPECT_EQ(run(common + " --levels " + std::to_string(levels)).code, 0) << levels;
    EXPECT_EQ(manifest("w.msltw.run.json")["config"]["levels"], levels);
  }
  for (int cfd = 1; cfd <= 5; ++cfd) EXPECT_EQ(run(common + " --cfd-count " + std::to_string(cfd)).code, 0) << cfd;
  EXPECT_EQ(run(common + " --levels 1").code, 2);
  EXPECT_EQ(run(common + " --levels 6").code, 2);
  EXPECT_EQ(run(common + " --cfd-count 0").code, 2);
  EXPECT_EQ(run(common + " --cfd-count 6").code, 2);
  EXPECT_EQ(run(common + " --pooling gsp --hf-unshared --variant mslt++").code, 0);
  EXPECT_EQ(manifest("w.msltw.run.json")["config"]["hf_shared"], false);

  const Result bad = run(common + " --pooling max");
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("gap,gsp,gap+gsp"), std::string::npos) << bad.err;

  std::ofstream(path("empty.tsv")) << "# nothing here\n";
  EXPECT_EQ(run("train --manifest empty.tsv --out-weights e.msltw").code, 4);
  EXPECT_EQ(run("train --manifest absent.tsv --out-weights e.msltw").code, 3);
}

TEST_F(Cli, BenchReportsAndDefaultsToHundredIterations) {
  const Result r = run("bench --variant mslt --width 32 --height 32 --warmup 0 --csv-out b.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  const nlohmann::json m = manifest("b.csv.run.json");
  EXPECT_EQ(m["config"]["bench"]["iters"], 100);
  EXPECT_GT(m["results"]["fps"].get<double>(), 0.0);
  EXPECT_EQ(m["results"]["params"], 5665);
  const std::string csv = slurp(path("b.csv"));
  EXPECT_EQ(csv.rfind("variant,width,height,iters,mean_ms,median_ms,fps,flops,params\nmslt,32,32,100,", 0), 0u);
  EXPECT_NE(r.out.find("ms/frame"), std::string::npos);

  const Result ref = run("bench --variant mslt --width 1024 --height 1024 --iters 1 --warmup 0");
  ASSERT_EQ(ref.code, 0);
  EXPECT_NE(ref.out.find("reference 83.45 M"), std::string::npos) << ref.out;

  EXPECT_EQ(run("bench --width 4 --height 4 --iters 1").code, 4);
}

TEST_F(Cli, BenchFlopOrderingAtUhd) {
  auto flops = [&](const std::string& variant) {
    const Result r = run("--run-manifest " + variant + ".json bench --variant " + variant +
                         " --width 3840 --height 2160 --iters 1 --warmup 0");
    EXPECT_EQ(r.code, 0) << r.err;
    return manifest(variant + ".json")["results"]["flops"].get<std::uint64_t>();
  };
  EXPECT_LT(flops("mslt++"), flops("mslt+"));
}

TEST_F(Cli, EvalSelfPairs) {
  std::ofstream(path("pairs.tsv")) << data("astronaut.png") << "\t" << data("astronaut.png") << "\n"
                                   << data("rocket.png") << "\t" << data("rocket.png") << "\n";
  const Result r = run("eval --pairs-manifest pairs.tsv --csv-out e.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(path("e.csv")),
            "name,psnr_db,ssim\nastronaut.png,inf,1.000000\nrocket.png,inf,1.000000\nmean,inf,1.000000\n");

  identity_weights("mslt", "id.msltw");
  const Result w = run("eval --pairs-manifest pairs.tsv --weights id.msltw");
  ASSERT_EQ(w.code, 0) << w.err;
  EXPECT_EQ(w.out.rfind("name,psnr_db,ssim\nastronaut.png,", 0), 0u);

  std::ofstream(path("bad.tsv")) << "missing.png\t" << data("rocket.png") << "\n";
  EXPECT_EQ(run("eval --pairs-manifest bad.tsv").code, 3);
}

TEST_F(Cli, HeatmapOfIdenticalImagesIsNeutral) {
  const Result r = run("heatmap --input " + data("coffee.png") + " --corrected " + data("coffee.png") + " --out h.png");
  ASSERT_EQ(r.code, 0) << r.err;
  const Image8 h = read_image8(path("h.png"));
  for (std::uint8_t v : h.rgb) ASSERT_EQ(v, 255);

  Image8 small{16, 16, std::vector<std::uint8_t>(16 * 16 * 3, 90)};
  write_image8(small, path("s.png"));
  EXPECT_EQ(run("heatmap --input s.png --corrected " + data("coffee.png") + " --out h2.png").code, 4);
}

TEST_F(Cli, DecomposeWritesOneFilePerLayer) {
  for (int levels : {2, 4, 5}) {
    const std::string out = "layers" + std::to_string(levels);
    ASSERT_EQ(run("decompose --input " + data("chelsea.png") + " --levels " + std::to_string(levels) + " --out-dir " +
                  out)
                  .code,
              0);
    int images = 0;
    for (const auto& e : fs::directory_iterator(path(out))) images += e.path().extension() == ".png";
    EXPECT_EQ(images, levels);
    EXPECT_TRUE(fs::exists(path(out) / ("low" + std::to_string(levels) + ".png")));
  }
  // Mid-gray detail layers of a flat image: the +0.5 offset makes zero detail 128.
  Image8 flat{32, 32, std::vector<std::uint8_t>(32 * 32 * 3, 77)};
  write_image8(flat, path("flat.png"));
  ASSERT_EQ(run("decompose --input flat.png --levels 3 --out-dir f").code, 0);
  for (std::uint8_t v : read_image8(path("f/high1.png")).rgb) ASSERT_EQ(v, 128);
}

}  // namespace
}  // namespace mslt
