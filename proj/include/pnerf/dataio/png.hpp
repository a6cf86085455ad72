#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace pnerf::io {

// 8-bit image, interleaved channels, row-major.
struct Image8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> data;
};

// Throws IoError when the file cannot be opened or decoded. 16-bit files are
// rejected; palette and low-bit-depth grey images are expanded to 8 bits.
Image8 read_png(const std::filesystem::path& path);
// channels must be 1 (grey) or 3 (RGB).
void write_png(const std::filesystem::path& path, const Image8& image);

// [0, 1] doubles <-> 8 bit, rounding to nearest with clamping.
std::uint8_t to_byte(double v);
std::vector<double> to_unit(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> to_bytes(const std::vector<double>& values);

}  // namespace pnerf::io
