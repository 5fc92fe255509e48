#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "crowdclip/dataset.hpp"
#include "crowdclip/geometry.hpp"
#include "crowdclip/image.hpp"

namespace crowdclip {

// Synthetic images for the mock backend (see MockCountImageEncoder for the
// color code).

struct FixtureTile {
  int scene = 0;  // coarse vocabulary index, 0 = crowd
  int part = 0;   // fine vocabulary index, 0 = human heads
  int count = 0;  // heads planted when scene == 0 && part == 0
  bool counted() const { return scene == 0 && part == 0; }
};

struct FixtureImage {
  ImageRef ref;
  Image pixels;
  int p = 3;
  std::vector<FixtureTile> tiles;  // row-major, matches TileGrid()
  std::vector<Point> points;       // one per planted head
  long long planted_total = 0;
};

// Paints each TileGrid() cell with the mock color of its tile and scatters
// `count` head points inside every counted tile.
FixtureImage MakeTiledFixture(const std::string& path, int width, int height,
                              int p, std::vector<FixtureTile> tiles,
                              std::uint64_t seed);

struct FixtureSetOptions {
  int images = 20;
  int p = 3;
  int min_side = 200;
  int max_side = 320;
  std::vector<int> counts = {20, 55, 90, 125, 160, 195};
  double crowd_probability = 0.6;
  double heads_probability = 0.7;  // given crowd
  std::uint64_t seed = 7;
};

std::vector<FixtureImage> MakeFixtureSet(const FixtureSetOptions& options);

// Concentric square rings around the image center whose i-th pyramid crop
// (BuildPyramid with the same m and min_ratio) has mean blue close to
// crop_means[i].  Red and green stay 0 (crowd, human heads).
Image MakeRingImage(int width, int height, double min_ratio,
                    std::span<const double> crop_means);

// Crop means that are rank-consistent with the default rank prompts under the
// identity mock parameters.
std::vector<double> ConsistentRingMeans(int m);

struct FixtureDataset {
  std::filesystem::path manifest_path;
  DatasetManifest manifest;
  std::vector<FixtureImage> test_images;
};

// Writes PNGs plus a manifest.jsonl: `train_images` ring images (train
// split) and the tiled fixture set (test split).
FixtureDataset WriteFixtureDataset(const std::filesystem::path& dir,
                                   const FixtureSetOptions& options,
                                   int train_images = 8);

}  // namespace crowdclip
