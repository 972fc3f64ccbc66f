#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "mslt/image_io.hpp"
#include "support.hpp"

namespace mslt {
namespace {

namespace fs = std::filesystem;

class ImageIo : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mslt_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Image8 pattern(int h, int w) const {
    Image8 img{h, w, std::vector<std::uint8_t>(std::size_t(h) * w * 3)};
    for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<std::uint8_t>((i * 37 + 11) % 256);
    return img;
  }

  void write_bytes(const fs::path& p, const std::string& bytes) const {
    std::ofstream out(p, std::ios::binary);
    out << bytes;
  }

  fs::path dir_;
};

TEST_F(ImageIo, PngRoundTrip) {
  const Image8 img = pattern(13, 29);
  write_image8(img, dir_ / "a.png");
  const Image8 back = read_image8(dir_ / "a.png");
  EXPECT_EQ(back.height, 13);
  EXPECT_EQ(back.width, 29);
  EXPECT_EQ(back.rgb, img.rgb);
}

TEST_F(ImageIo, PpmRoundTrip) {
  const Image8 img = pattern(7, 5);
  write_image8(img, dir_ / "a.ppm");
  const Image8 back = read_image8(dir_ / "a.ppm");
  EXPECT_EQ(back.height, 7);
  EXPECT_EQ(back.width, 5);
  EXPECT_EQ(back.rgb, img.rgb);
}

TEST_F(ImageIo, FormatIsSniffedNotGuessedFromExtension) {
  const Image8 img = pattern(4, 6);
  write_image8(img, dir_ / "a.ppm");
  fs::rename(dir_ / "a.ppm", dir_ / "really_ppm.png");
  EXPECT_EQ(read_image8(dir_ / "really_ppm.png").rgb, img.rgb);
}

TEST_F(ImageIo, PpmHeaderWithComments) {
  write_bytes(dir_ / "c.ppm", std::string("P6\n# comment\n2 1\n255\n") + std::string("\x01\x02\x03\x04\x05\x06", 6));
  const Image8 img = read_image8(dir_ / "c.ppm");
  EXPECT_EQ(img.width, 2);
  EXPECT_EQ(img.height, 1);
  EXPECT_EQ(img.rgb, (std::vector<std::uint8_t>{1, 2, 3, 4, 5, 6}));
}

TEST_F(ImageIo, BadFilesRaiseIoError) {
  EXPECT_THROW(read_image8(dir_ / "missing.png"), IoError);
  write_bytes(dir_ / "junk.png", "not an image at all");
  EXPECT_THROW(read_image8(dir_ / "junk.png"), IoError);
  write_bytes(dir_ / "short.ppm", std::string("P6\n4 4\n255\n") + std::string(10, 'x'));
  EXPECT_THROW(read_image8(dir_ / "short.ppm"), IoError);
  write_bytes(dir_ / "deep.ppm", std::string("P6\n1 1\n65535\n") + std::string(6, 'x'));
  EXPECT_THROW(read_image8(dir_ / "deep.ppm"), IoError);
  write_image8(pattern(8, 8), dir_ / "t.png");
  const auto size = fs::file_size(dir_ / "t.png");
  fs::resize_file(dir_ / "t.png", size / 2);
  EXPECT_THROW(read_image8(dir_ / "t.png"), IoError);
  EXPECT_THROW(write_image8(pattern(2, 2), dir_ / "no_such_dir" / "x.png"), IoError);
}

TEST_F(ImageIo, WriteRejectsInconsistentBuffer) {
  Image8 img = pattern(3, 3);
  img.rgb.pop_back();
  EXPECT_THROW(write_image8(img, dir_ / "x.png"), DimensionError);
}

TEST(ImageConvert, TensorRoundTripIsLossless) {
  Image8 img{2, 128, {}};
  for (int i = 0; i < 2 * 128 * 3; ++i) img.rgb.push_back(static_cast<std::uint8_t>(i % 256));
  EXPECT_EQ(to_image8(to_tensor(img)).rgb, img.rgb);
  EXPECT_FLOAT_EQ(to_tensor(img).data()[255], 1.0f);
}

TEST(ImageConvert, RoundsClampsAndZeroesNan) {
  ImageTensor t(1, 2, 3);
  const float v[6] = {0.5f / 255.0f + 1e-4f, 1.49f / 255.0f, -0.3f, 1.7f, std::numeric_limits<float>::quiet_NaN(),
                      0.5f};
  for (int i = 0; i < 6; ++i) t.data()[i] = v[i];
  const Image8 img = to_image8(t);
  EXPECT_EQ(img.rgb, (std::vector<std::uint8_t>{1, 1, 0, 255, 0, 128}));
}

TEST(ImageConvert, RejectsNonRgb) {
  EXPECT_THROW(to_image8(ImageTensor(2, 2, 1)), DimensionError);
}

TEST(ImageConvert, BundledTestImagesLoad) {
  for (const char* name : {"astronaut.png", "chelsea.png", "coffee.png", "rocket.png"}) {
    const ImageTensor img = read_image(test::data_dir() / name);
    EXPECT_EQ(img.channels(), 3);
    EXPECT_GE(img.height(), 256) << name;
    EXPECT_GE(img.width(), 256) << name;
  }
}

}  // namespace
}  // namespace mslt
