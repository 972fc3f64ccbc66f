#include "mslt/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

namespace mslt {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_fail(png_structp png, png_const_charp message) {
  auto* error = static_cast<std::string*>(png_get_error_ptr(png));
  if (error) *error = message;
  png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

Image8 read_png(const std::filesystem::path& path) {
  File fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path.string());
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialisation failed");
  }
  Image8 img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("invalid PNG " + path.string() + ": " + error);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  if (png_get_rowbytes(png, info) != std::size_t(img.width) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("unsupported PNG layout in " + path.string());
  }
  img.rgb.resize(std::size_t(img.width) * img.height * 3);
  rows.resize(img.height);
  for (int y = 0; y < img.height; ++y) rows[y] = img.rgb.data() + std::size_t(y) * img.width * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png(const Image8& img, const std::filesystem::path& path) {
  File fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw IoError("cannot open " + path.string() + " for writing");
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed");
  }
  std::vector<png_bytep> rows(img.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing PNG " + path.string() + ": " + error);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) rows[y] = const_cast<png_bytep>(img.rgb.data() + std::size_t(y) * img.width * 3);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Reads the next whitespace-delimited header integer, skipping '#' comments.
int ppm_header_int(std::istream& in, const std::filesystem::path& path) {
  int c = in.get();
  while (in && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      while (in && c != '\n') c = in.get();
    }
    c = in.get();
  }
  if (!in || !std::isdigit(c)) throw IoError("malformed PPM header in " + path.string());
  long v = 0;
  while (in && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    if (v > 1 << 24) throw IoError("PPM dimension too large in " + path.string());
    c = in.get();
  }
  if (!std::isspace(c)) throw IoError("malformed PPM header in " + path.string());
  return static_cast<int>(v);
}

Image8 read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[2];
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '6') throw IoError("not a binary PPM (P6): " + path.string());
  Image8 img;
  img.width = ppm_header_int(in, path);
  img.height = ppm_header_int(in, path);
  const int maxval = ppm_header_int(in, path);
  if (img.width < 1 || img.height < 1) throw IoError("empty PPM image " + path.string());
  if (maxval != 255) throw IoError("only 8-bit PPM (maxval 255) is supported: " + path.string());
  img.rgb.resize(std::size_t(img.width) * img.height * 3);
  in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.rgb.size())) throw IoError("truncated PPM " + path.string());
  return img;
}

void write_ppm(const Image8& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

Image8 read_image8(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  if (in.gcount() >= 2 && sig[0] == 'P' && sig[1] == '6') return read_ppm(path);
  if (in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
  throw IoError("unrecognised image format (expected PNG or P6 PPM): " + path.string());
}

void write_image8(const Image8& image, const std::filesystem::path& path) {
  if (image.rgb.size() != std::size_t(image.width) * image.height * 3 || image.width < 1 || image.height < 1) {
    throw DimensionError("write_image8: buffer does not match dimensions");
  }
  if (lower_extension(path) == ".png") {
    write_png(image, path);
  } else {
    write_ppm(image, path);
  }
}

ImageTensor to_tensor(const Image8& image) {
  ImageTensor t(image.height, image.width, 3);
  for (std::size_t i = 0; i < image.rgb.size(); ++i) t.data()[i] = image.rgb[i] / 255.0f;
  return t;
}

Image8 to_image8(const ImageTensor& tensor) {
  if (tensor.channels() != 3) throw DimensionError("to_image8: tensor must have 3 channels");
  Image8 img;
  img.height = tensor.height();
  img.width = tensor.width();
  img.rgb.resize(tensor.size());
  for (std::size_t i = 0; i < tensor.size(); ++i) {
    const float v = tensor.data()[i];
    const float q = std::isnan(v) ? 0.0f : std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f);
    img.rgb[i] = static_cast<std::uint8_t>(q);
  }
  return img;
}

}  // namespace mslt
