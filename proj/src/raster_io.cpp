#include "novelplan/raster_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "novelplan/error.hpp"

namespace novelplan {

void write_pfm(const Raster& image, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << "Pf\n" << image.width << ' ' << image.height << "\n-1.0\n";
  // PFM scanlines run bottom to top.
  for (std::size_t r = image.height; r-- > 0;) {
    for (std::size_t c = 0; c < image.width; ++c) {
      const auto bits = std::bit_cast<std::uint32_t>(image.at(r, c));
      const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                             static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
      os.write(bytes, 4);
    }
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

Raster read_pfm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open " + path.string());
  std::string magic;
  Raster img;
  double scale = 0.0;
  is >> magic >> img.width >> img.height >> scale;
  is.get();
  if (magic != "Pf" || !is || scale >= 0.0) throw LoadError(path.string() + ": not a little-endian grayscale PFM");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() != img.width * img.height * 4) throw LoadError(path.string() + ": truncated PFM");
  img.pixels.resize(img.width * img.height);
  std::size_t at = 0;
  for (std::size_t r = img.height; r-- > 0;) {
    for (std::size_t c = 0; c < img.width; ++c, at += 4) {
      const std::uint32_t bits = static_cast<std::uint32_t>(bytes[at]) | (static_cast<std::uint32_t>(bytes[at + 1]) << 8) |
                                 (static_cast<std::uint32_t>(bytes[at + 2]) << 16) |
                                 (static_cast<std::uint32_t>(bytes[at + 3]) << 24);
      img.pixels[r * img.width + c] = std::bit_cast<float>(bits);
    }
  }
  return img;
}

void write_pgm(const Raster& image, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  for (float v : image.pixels) {
    const auto byte = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    os.put(static_cast<char>(byte));
  }
}

}  // namespace novelplan
