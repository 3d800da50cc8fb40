#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace scriptor {

// 8-bit grayscale image, row-major. 0 = black ink, 255 = white paper.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 255)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& img);

// Reads any libpng-supported PNG, converted to 8-bit grayscale.
GrayImage read_png(const std::filesystem::path& path);

// Dispatches on the file extension (.pgm / .png).
GrayImage read_image(const std::filesystem::path& path);

}  // namespace scriptor
