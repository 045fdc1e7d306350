#pragma once

#include <filesystem>
#include <vector>

namespace novelplan {

struct Raster {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> pixels;  // row-major, top row first, values in [0,1]

  float at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

// Grayscale PFM ("Pf"), little-endian; exact float round-trip.
void write_pfm(const Raster& image, const std::filesystem::path& path);
Raster read_pfm(const std::filesystem::path& path);

// 8-bit binary PGM for viewing.
void write_pgm(const Raster& image, const std::filesystem::path& path);

}  // namespace novelplan
