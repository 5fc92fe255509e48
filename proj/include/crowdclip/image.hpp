#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace crowdclip {

// Interleaved 8-bit RGB raster, row-major, top-left origin.
class Image {
 public:
  Image() = default;
  Image(int width, int height);
  Image(int width, int height, std::vector<std::uint8_t> rgb);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> mutable_pixels() noexcept { return pixels_; }

  const std::uint8_t* at(int x, int y) const {
    return pixels_.data() + (static_cast<std::size_t>(y) * width_ + x) * 3;
  }
  std::uint8_t* at(int x, int y) {
    return pixels_.data() + (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  void Fill(int x0, int y0, int w, int h, std::uint8_t r, std::uint8_t g,
            std::uint8_t b);

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

// Decodes PNG/JPEG (anything the imgcodecs build supports) into RGB.
Image LoadImage(const std::filesystem::path& path);
void SaveImage(const Image& image, const std::filesystem::path& path);

// Reads only the dimensions; still decodes for formats without a cheap header
// probe.
void ProbeImageSize(const std::filesystem::path& path, int* width, int* height);

// Bilinear resampling to an arbitrary size (identity when sizes match).
Image ResizeBilinear(const Image& src, int width, int height);

// Per-channel arithmetic mean over the whole buffer.
struct MeanColor {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
};
MeanColor ComputeMeanColor(const Image& image);

// 64-bit FNV-1a over the raw pixel bytes, prefixed by the dimensions.
std::uint64_t Checksum(const Image& image);

}  // namespace crowdclip
