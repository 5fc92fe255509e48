#include "crowdclip/geometry.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "crowdclip/hash.hpp"
#include "crowdclip/image.hpp"
#include "test_util.hpp"

namespace crowdclip {
namespace {

std::vector<int> Sides(const PatchPyramid& p) {
  std::vector<int> out;
  for (const auto& c : p.crops) out.push_back(c.side);
  return out;
}

Image GradientImage(int w, int h) {
  Image img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t* px = img.at(x, y);
      px[0] = static_cast<std::uint8_t>((x * 7 + y * 3) % 256);
      px[1] = static_cast<std::uint8_t>((x * y) % 256);
      px[2] = static_cast<std::uint8_t>((x + 2 * y) % 256);
    }
  }
  return img;
}

TEST(BuildPyramid, LinearSidesFor1200x900) {
  const PatchPyramid p = BuildPyramid({"a.png", 1200, 900}, 6, 0.5);
  EXPECT_EQ(Sides(p), (std::vector<int>{450, 540, 630, 720, 810, 900}));
  for (const auto& c : p.crops) {
    EXPECT_EQ(c.center_x, 600);
    EXPECT_EQ(c.center_y, 450);
  }
  EXPECT_EQ(p.target_side, 224);
}

TEST(BuildPyramid, TwoCropsAreTheEndpoints) {
  EXPECT_EQ(Sides(BuildPyramid({"", 100, 100}, 2, 0.5)),
            (std::vector<int>{50, 100}));
}

TEST(BuildPyramid, RejectsSmallImagesAndBadRatios) {
  EXPECT_CROWDCLIP_ERROR(BuildPyramid({"", 40, 40}, 6, 0.5),
                         ErrorCode::kImageTooSmall);
  EXPECT_CROWDCLIP_ERROR(BuildPyramid({"", 400, 400}, 6, 0.0),
                         ErrorCode::kInvalidRatio);
  EXPECT_CROWDCLIP_ERROR(BuildPyramid({"", 400, 400}, 6, 1.0),
                         ErrorCode::kInvalidRatio);
}

TEST(BuildPyramid, CollapsedSidesAreRejected) {
  // 64 px short side, ratio 0.5 -> sides 32..64 over 40 steps cannot be
  // strictly increasing.
  EXPECT_CROWDCLIP_ERROR(BuildPyramid({"", 64, 64}, 40, 0.5),
                         ErrorCode::kDegeneratePyramid);
}

TEST(BuildPyramid, RandomSizesAreMonotoneAndConcentric) {
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> side(70, 3000);
  std::uniform_int_distribution<int> pick_m(2, 10);
  for (int trial = 0; trial < 300; ++trial) {
    const ImageRef ref{"", side(rng), side(rng)};
    const int m = pick_m(rng);
    PatchPyramid p;
    try {
      p = BuildPyramid(ref, m, 0.5);
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::kDegeneratePyramid);
      continue;
    }
    ASSERT_EQ(static_cast<int>(p.crops.size()), m);
    EXPECT_EQ(p.crops.back().side, std::min(ref.width, ref.height));
    for (int i = 1; i < m; ++i) {
      EXPECT_LT(p.crops[i - 1].side, p.crops[i].side);
      EXPECT_EQ(p.crops[i].center_x, p.crops[0].center_x);
      EXPECT_EQ(p.crops[i].center_y, p.crops[0].center_y);
    }
    for (const auto& c : p.crops) {
      const Rect r = ToRect(c, ref);
      EXPECT_GE(r.x, 0);
      EXPECT_GE(r.y, 0);
      EXPECT_LE(r.x + r.width, ref.width);
      EXPECT_LE(r.y + r.height, ref.height);
    }
  }
}

TEST(TileGrid, ExactDivision) {
  const auto tiles = TileGrid({"", 1024, 1024}, {4});
  ASSERT_EQ(tiles.size(), 16u);
  for (const Rect& r : tiles) {
    EXPECT_EQ(r.width, 256);
    EXPECT_EQ(r.height, 256);
  }
}

TEST(TileGrid, LastRowAndColumnAbsorbRemainder) {
  const auto tiles = TileGrid({"", 1000, 700}, {3});
  ASSERT_EQ(tiles.size(), 9u);
  EXPECT_EQ(tiles[0].width, 333);
  EXPECT_EQ(tiles[1].width, 333);
  EXPECT_EQ(tiles[2].width, 334);
  EXPECT_EQ(tiles[0].height, 233);
  EXPECT_EQ(tiles[3].height, 233);
  EXPECT_EQ(tiles[6].height, 234);
  // Row-major order.
  EXPECT_EQ(tiles[1].x, 333);
  EXPECT_EQ(tiles[1].y, 0);
  EXPECT_EQ(tiles[3].x, 0);
  EXPECT_EQ(tiles[3].y, 233);
}

TEST(TileGrid, SingleTileIsTheImage) {
  const auto tiles = TileGrid({"", 37, 91}, {1});
  ASSERT_EQ(tiles.size(), 1u);
  EXPECT_EQ(tiles[0], (Rect{0, 0, 37, 91}));
}

TEST(TileGrid, TooSmallForGrid) {
  EXPECT_CROWDCLIP_ERROR(TileGrid({"", 3, 100}, {4}), ErrorCode::kImageTooSmall);
}

TEST(TileGrid, RandomGridsPartitionTheImage) {
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> side(1, 400);
  std::uniform_int_distribution<int> pick_p(1, 8);
  for (int trial = 0; trial < 200; ++trial) {
    const int w = side(rng), h = side(rng), p = pick_p(rng);
    if (w < p || h < p) continue;
    const auto tiles = TileGrid({"", w, h}, {p});
    ASSERT_EQ(static_cast<int>(tiles.size()), p * p);
    std::vector<int> cover(static_cast<std::size_t>(w) * h, 0);
    long long area = 0;
    for (const Rect& r : tiles) {
      area += r.area();
      for (int y = r.y; y < r.y + r.height; ++y) {
        for (int x = r.x; x < r.x + r.width; ++x) ++cover[y * w + x];
      }
    }
    EXPECT_EQ(area, 1LL * w * h);
    for (int c : cover) ASSERT_EQ(c, 1);
  }
}

TEST(ExtractAndResize, SameSizeIsByteIdentical) {
  const Image img = GradientImage(300, 200);
  const Image out = ExtractAndResize(img, Rect{40, 30, 100, 100}, 100);
  Image expected(100, 100);
  for (int y = 0; y < 100; ++y) {
    for (int x = 0; x < 100; ++x) {
      std::copy_n(img.at(40 + x, 30 + y), 3, expected.at(x, y));
    }
  }
  EXPECT_EQ(out, expected);
}

TEST(ExtractAndResize, ConstantStaysConstant) {
  Image img(260, 240);
  img.Fill(0, 0, 260, 240, 12, 200, 77);
  const Image out = ExtractAndResize(img, SquareCrop{130, 120, 200}, 224);
  ASSERT_EQ(out.width(), 224);
  ASSERT_EQ(out.height(), 224);
  for (int y = 0; y < 224; ++y) {
    for (int x = 0; x < 224; ++x) {
      const std::uint8_t* px = out.at(x, y);
      ASSERT_EQ(px[0], 12);
      ASSERT_EQ(px[1], 200);
      ASSERT_EQ(px[2], 77);
    }
  }
}

TEST(ExtractAndResize, GoldenBilinearChecksum) {
  // Pinned from the reference resampler (see tests/oracles).
  const Image img = GradientImage(600, 500);
  const Image out = ExtractAndResize(img, SquareCrop{300, 250, 450}, 224);
  EXPECT_EQ(HexDigest(Checksum(out)), "ca91d16e11df21ef");
}

TEST(ExtractAndResize, OutOfBoundsRect) {
  const Image img = GradientImage(50, 50);
  EXPECT_CROWDCLIP_ERROR(ExtractAndResize(img, Rect{30, 30, 40, 10}, 8),
                         ErrorCode::kOutOfBounds);
  EXPECT_CROWDCLIP_ERROR(ExtractAndResize(img, SquareCrop{25, 25, 60}, 8),
                         ErrorCode::kOutOfBounds);
}

TEST(ResizeLongSide, Examples) {
  const ImageRef a = ResizeLongSide({"", 4096, 2048}, 2048);
  EXPECT_EQ(a.width, 2047);
  EXPECT_EQ(a.height, 1023);
  const ImageRef b = ResizeLongSide({"", 800, 600}, 2048);
  EXPECT_EQ(b.width, 800);
  EXPECT_EQ(b.height, 600);
  const ImageRef c = ResizeLongSide({"", 2048, 2048}, 2048);
  EXPECT_EQ(c.width, 2047);
  EXPECT_EQ(c.height, 2047);
}

TEST(ResizeLongSide, Idempotent) {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> side(1, 9000);
  std::uniform_int_distribution<int> cap(2, 4096);
  for (int trial = 0; trial < 500; ++trial) {
    const ImageRef ref{"", side(rng), side(rng)};
    const int m = cap(rng);
    const ImageRef once = ResizeLongSide(ref, m);
    EXPECT_EQ(ResizeLongSide(once, m), once);
    if (std::max(ref.width, ref.height) >= m) {
      EXPECT_LT(std::max(once.width, once.height), m);
    } else {
      EXPECT_EQ(once, ref);
    }
  }
}

TEST(ApplyLongSideCap, MatchesDimensions) {
  const Image img = GradientImage(300, 120);
  const Image capped = ApplyLongSideCap(img, 200);
  const ImageRef expected = ResizeLongSide({"", 300, 120}, 200);
  EXPECT_EQ(capped.width(), expected.width);
  EXPECT_EQ(capped.height(), expected.height);
  EXPECT_EQ(ApplyLongSideCap(img, 2048), img);
}

}  // namespace
}  // namespace crowdclip
