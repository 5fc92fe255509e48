#include "crowdclip/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "crowdclip/error.hpp"
#include "crowdclip/mock_encoders.hpp"

namespace crowdclip {
namespace fs = std::filesystem;

FixtureImage MakeTiledFixture(const std::string& path, int width, int height,
                              int p, std::vector<FixtureTile> tiles,
                              std::uint64_t seed) {
  if (static_cast<int>(tiles.size()) != p * p) {
    throw Error(ErrorCode::kInvalidArgument,
                "fixture needs P*P = " + std::to_string(p * p) + " tiles, got " +
                    std::to_string(tiles.size()));
  }
  FixtureImage fx;
  fx.ref = {path, width, height};
  fx.p = p;
  fx.pixels = Image(width, height);
  const std::vector<Rect> rects = TileGrid(fx.ref, GridSpec{p});
  std::mt19937_64 rng(seed);
  for (std::size_t t = 0; t < rects.size(); ++t) {
    const FixtureTile& tile = tiles[t];
    const Rect& r = rects[t];
    const auto color = MockColor(tile.scene, tile.part, tile.count);
    fx.pixels.Fill(r.x, r.y, r.width, r.height, color[0], color[1], color[2]);
    if (!tile.counted()) continue;
    std::uniform_real_distribution<double> ux(r.x, r.x + r.width);
    std::uniform_real_distribution<double> uy(r.y, r.y + r.height);
    for (int k = 0; k < tile.count; ++k) fx.points.push_back({ux(rng), uy(rng)});
    fx.planted_total += tile.count;
  }
  fx.tiles = std::move(tiles);
  return fx;
}

std::vector<FixtureImage> MakeFixtureSet(const FixtureSetOptions& options) {
  if (options.counts.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "fixture counts are empty");
  }
  const MockSpaceOptions vocab;
  const int scenes = static_cast<int>(vocab.coarse_vocab.size());
  const int parts = static_cast<int>(vocab.fine_vocab.size());
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<int> side(options.min_side, options.max_side);
  std::uniform_int_distribution<std::size_t> pick_count(
      0, options.counts.size() - 1);
  std::uniform_int_distribution<int> pick_scene(1, scenes - 1);
  std::uniform_int_distribution<int> pick_part(1, parts - 1);
  std::bernoulli_distribution crowd(options.crowd_probability);
  std::bernoulli_distribution heads(options.heads_probability);

  std::vector<FixtureImage> out;
  for (int i = 0; i < options.images; ++i) {
    const int w = side(rng);
    const int h = side(rng);
    std::vector<FixtureTile> tiles(options.p * options.p);
    for (FixtureTile& tile : tiles) {
      tile.scene = crowd(rng) ? 0 : pick_scene(rng);
      tile.part = tile.scene == 0 && heads(rng) ? 0 : pick_part(rng);
      // Filtered tiles still carry a count code so a broken filter shows up.
      tile.count = options.counts[pick_count(rng)];
    }
    char name[32];
    std::snprintf(name, sizeof(name), "fixture_%03d.png", i);
    out.push_back(MakeTiledFixture(name, w, h, options.p, std::move(tiles),
                                   options.seed * 1000003ULL + i));
  }
  return out;
}

Image MakeRingImage(int width, int height, double min_ratio,
                    std::span<const double> crop_means) {
  const int m = static_cast<int>(crop_means.size());
  const ImageRef ref{"", width, height};
  const PatchPyramid pyramid = BuildPyramid(ref, m, min_ratio);
  std::vector<Rect> rects;
  for (const SquareCrop& c : pyramid.crops) rects.push_back(ToRect(c, ref));

  // Ring i (crop i minus crop i-1) gets the value that makes crop i's mean
  // equal crop_means[i], given the rings inside it.
  std::vector<double> ring(m);
  for (int i = 0; i < m; ++i) {
    const double area = static_cast<double>(rects[i].area());
    if (i == 0) {
      ring[i] = crop_means[0];
      continue;
    }
    const double inner = static_cast<double>(rects[i - 1].area());
    ring[i] = (crop_means[i] * area - crop_means[i - 1] * inner) / (area - inner);
  }
  auto level = [](double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  };
  Image img(width, height);
  img.Fill(0, 0, width, height, 0, 0, level(ring[m - 1]));
  for (int i = m - 1; i >= 0; --i) {
    const Rect& r = rects[i];
    img.Fill(r.x, r.y, r.width, r.height, 0, 0, level(ring[i]));
  }
  return img;
}

std::vector<double> ConsistentRingMeans(int m) {
  std::vector<double> means(m);
  for (int i = 0; i < m; ++i) means[i] = 20.0 * (i + 1);
  return means;
}

FixtureDataset WriteFixtureDataset(const fs::path& dir,
                                   const FixtureSetOptions& options,
                                   int train_images) {
  fs::create_directories(dir);
  FixtureDataset ds;
  ds.manifest.name = "fixture";
  std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<int> side(
      std::max(options.min_side, 2 * kMinCropSide), options.max_side);
  const std::vector<double> means = ConsistentRingMeans(6);
  for (int i = 0; i < train_images; ++i) {
    const int w = side(rng);
    const int h = side(rng);
    char name[32];
    std::snprintf(name, sizeof(name), "train_%03d.png", i);
    SaveImage(MakeRingImage(w, h, 0.5, means), dir / name);
    AnnotatedImage img;
    img.image = {(dir / name).string(), w, h};
    img.split = Split::kTrain;
    ds.manifest.images.push_back(std::move(img));
  }
  ds.test_images = MakeFixtureSet(options);
  for (FixtureImage& fx : ds.test_images) {
    fx.ref.path = (dir / fx.ref.path).string();
    SaveImage(fx.pixels, fx.ref.path);
    AnnotatedImage img;
    img.image = fx.ref;
    img.points = fx.points;
    img.split = Split::kTest;
    ds.manifest.images.push_back(std::move(img));
  }
  const DatasetPolicy policy = PolicyForDataset(ds.manifest.name);
  ds.manifest.default_p = policy.default_p;
  ds.manifest.resize_max_long = policy.resize_max_long;
  ds.manifest_path = dir / "manifest.jsonl";
  WriteManifest(ds.manifest, ds.manifest_path);
  return ds;
}

}  // namespace crowdclip
