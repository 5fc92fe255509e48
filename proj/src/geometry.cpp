#include "crowdclip/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "crowdclip/error.hpp"

namespace crowdclip {

namespace {

void CheckImage(const ImageRef& image) {
  if (image.width < 1 || image.height < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "image " + image.path + " has non-positive dimensions");
  }
}

}  // namespace

PatchPyramid BuildPyramid(const ImageRef& image, int m, double min_ratio,
                          int target_side) {
  CheckImage(image);
  if (m < 2) {
    throw Error(ErrorCode::kInvalidArgument, "pyramid needs m >= 2");
  }
  if (!(min_ratio > 0.0 && min_ratio < 1.0)) {
    throw Error(ErrorCode::kInvalidRatio,
                "min_ratio must lie in (0, 1), got " + std::to_string(min_ratio));
  }
  if (target_side < 1) {
    throw Error(ErrorCode::kInvalidArgument, "target_side must be >= 1");
  }
  const int short_side = std::min(image.width, image.height);
  const double smallest = min_ratio * short_side;
  if (std::lround(smallest) < kMinCropSide) {
    throw Error(ErrorCode::kImageTooSmall,
                "smallest crop side " + std::to_string(std::lround(smallest)) +
                    " < " + std::to_string(kMinCropSide) + " px for " +
                    image.path);
  }

  PatchPyramid pyramid;
  pyramid.image = image;
  pyramid.target_side = target_side;
  pyramid.crops.reserve(m);
  const double step = (short_side - smallest) / (m - 1);
  for (int i = 0; i < m; ++i) {
    const int side = i == m - 1
                         ? short_side
                         : static_cast<int>(std::lround(smallest + i * step));
    if (!pyramid.crops.empty() && side <= pyramid.crops.back().side) {
      throw Error(ErrorCode::kDegeneratePyramid,
                  "pyramid sides collapse after rounding; lower m or min_ratio");
    }
    pyramid.crops.push_back({image.width / 2, image.height / 2, side});
  }
  return pyramid;
}

std::vector<Rect> TileGrid(const ImageRef& image, GridSpec grid) {
  CheckImage(image);
  if (grid.p < 1) {
    throw Error(ErrorCode::kInvalidArgument, "grid dimension must be >= 1");
  }
  if (image.width < grid.p || image.height < grid.p) {
    throw Error(ErrorCode::kImageTooSmall,
                "image " + std::to_string(image.width) + "x" +
                    std::to_string(image.height) + " cannot hold a " +
                    std::to_string(grid.p) + "x" + std::to_string(grid.p) +
                    " grid");
  }
  const int tile_w = image.width / grid.p;
  const int tile_h = image.height / grid.p;
  std::vector<Rect> tiles;
  tiles.reserve(static_cast<std::size_t>(grid.p) * grid.p);
  for (int row = 0; row < grid.p; ++row) {
    const int y = row * tile_h;
    const int h = row == grid.p - 1 ? image.height - y : tile_h;
    for (int col = 0; col < grid.p; ++col) {
      const int x = col * tile_w;
      const int w = col == grid.p - 1 ? image.width - x : tile_w;
      tiles.push_back({x, y, w, h});
    }
  }
  return tiles;
}

Rect ToRect(const SquareCrop& crop, const ImageRef& image) {
  if (crop.side < 1) {
    throw Error(ErrorCode::kInvalidArgument, "crop side must be >= 1");
  }
  if (crop.side > image.width || crop.side > image.height) {
    throw Error(ErrorCode::kOutOfBounds,
                "crop side " + std::to_string(crop.side) +
                    " exceeds the image");
  }
  const int x = std::clamp(crop.center_x - crop.side / 2, 0,
                           image.width - crop.side);
  const int y = std::clamp(crop.center_y - crop.side / 2, 0,
                           image.height - crop.side);
  return {x, y, crop.side, crop.side};
}

Image ExtractAndResize(const Image& image, const CropRegion& crop,
                       int target_side) {
  if (target_side < 1) {
    throw Error(ErrorCode::kInvalidArgument, "target_side must be >= 1");
  }
  const ImageRef ref{"", image.width(), image.height()};
  const Rect rect = std::holds_alternative<SquareCrop>(crop)
                        ? ToRect(std::get<SquareCrop>(crop), ref)
                        : std::get<Rect>(crop);
  if (rect.width < 1 || rect.height < 1 || rect.x < 0 || rect.y < 0 ||
      rect.x + rect.width > image.width() ||
      rect.y + rect.height > image.height()) {
    throw Error(ErrorCode::kOutOfBounds, "crop exceeds image bounds");
  }
  Image region(rect.width, rect.height);
  for (int y = 0; y < rect.height; ++y) {
    std::copy_n(image.at(rect.x, rect.y + y), rect.width * 3, region.at(0, y));
  }
  return ResizeBilinear(region, target_side, target_side);
}

ImageRef ResizeLongSide(const ImageRef& image, int max_long) {
  CheckImage(image);
  if (max_long < 1) {
    throw Error(ErrorCode::kInvalidArgument, "max_long must be >= 1");
  }
  const int long_side = std::max(image.width, image.height);
  if (long_side < max_long) return image;
  const long long target = max_long - 1;
  auto scale = [&](int v) {
    return static_cast<int>(std::max<long long>(1, v * target / long_side));
  };
  ImageRef out = image;
  out.width = scale(image.width);
  out.height = scale(image.height);
  return out;
}

Image ApplyLongSideCap(const Image& image, int max_long) {
  const ImageRef in{"", image.width(), image.height()};
  const ImageRef out = ResizeLongSide(in, max_long);
  if (out == in) return image;
  return ResizeBilinear(image, out.width, out.height);
}

}  // namespace crowdclip
