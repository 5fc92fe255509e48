#pragma once

#include <string>
#include <variant>
#include <vector>

#include "crowdclip/image.hpp"

namespace crowdclip {

struct ImageRef {
  std::string path;
  int width = 0;
  int height = 0;

  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

// Axis-aligned pixel rectangle, half-open: [x, x + width) x [y, y + height).
struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  long long area() const { return 1LL * width * height; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

// A square crop is described by its nominal center and side.  The pixel
// footprint is derived by ToRect(): left/top = center - side / 2, shifted
// inward when it would cross an image border.
struct SquareCrop {
  int center_x = 0;
  int center_y = 0;
  int side = 0;

  friend bool operator==(const SquareCrop&, const SquareCrop&) = default;
};

struct PatchPyramid {
  ImageRef image;
  std::vector<SquareCrop> crops;  // strictly increasing side, shared center
  int target_side = 224;
};

struct GridSpec {
  int p = 3;
};

inline constexpr int kMinCropSide = 32;
inline constexpr int kDefaultPatchSide = 224;
inline constexpr int kDefaultMaxLongSide = 2048;

PatchPyramid BuildPyramid(const ImageRef& image, int m, double min_ratio,
                          int target_side = kDefaultPatchSide);

// Row-major P x P partition; the last row/column absorbs the remainder.
std::vector<Rect> TileGrid(const ImageRef& image, GridSpec grid);

Rect ToRect(const SquareCrop& crop, const ImageRef& image);

using CropRegion = std::variant<SquareCrop, Rect>;

Image ExtractAndResize(const Image& image, const CropRegion& crop,
                       int target_side);

// Dimensions after the long-side cap: when max(w, h) >= max_long the longer
// side becomes max_long - 1 and the other is scaled with floor rounding.
ImageRef ResizeLongSide(const ImageRef& image, int max_long);

// Pixel-level companion of ResizeLongSide.
Image ApplyLongSideCap(const Image& image, int max_long);

}  // namespace crowdclip
