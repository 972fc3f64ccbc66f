#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mslt/tensor.hpp"

namespace mslt {

// 8-bit interleaved RGB.
struct Image8 {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;
};

// Format is sniffed from the file header: PNG or binary PPM (P6, maxval 255).
Image8 read_image8(const std::filesystem::path& path);
// Format follows the extension: .png, otherwise .ppm/.pnm.
void write_image8(const Image8& image, const std::filesystem::path& path);

// v / 255.
ImageTensor to_tensor(const Image8& image);
// round(v * 255) clamped to [0, 255]; the tensor must have 3 channels.
Image8 to_image8(const ImageTensor& tensor);

inline ImageTensor read_image(const std::filesystem::path& path) { return to_tensor(read_image8(path)); }
inline void write_image(const ImageTensor& tensor, const std::filesystem::path& path) {
  write_image8(to_image8(tensor), path);
}

}  // namespace mslt
