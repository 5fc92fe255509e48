#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crowdclip/geometry.hpp"

namespace crowdclip {

enum class Split { kTrain, kVal, kTest };

std::string_view ToString(Split split);
Split ParseSplit(std::string_view text);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct AnnotatedImage {
  ImageRef image;
  std::vector<Point> points;
  Split split = Split::kTest;

  long long ground_truth() const {
    return static_cast<long long>(points.size());
  }
};

struct DatasetPolicy {
  int default_p = 3;
  std::optional<int> resize_max_long;
};

// Grid and resize policy by dataset name: P = 4 for UCF-QNRF and UCF_CC_50,
// 3 otherwise; the 2048 long-side cap for UCF-QNRF and JHU-Crowd++.
DatasetPolicy PolicyForDataset(const std::string& name);

struct DatasetManifest {
  std::string name;
  std::vector<AnnotatedImage> images;
  std::optional<int> resize_max_long;
  int default_p = 3;

  std::vector<const AnnotatedImage*> Select(Split split) const;
  // Image references only; this is the sole view handed to training.
  std::vector<ImageRef> ImageRefs(Split split) const;
};

// Line-delimited JSON, one record per image:
//   {"image": "rel/or/abs.png", "points": [[x, y], ...], "split": "test"}
// Optional "width"/"height" skip decoding the image to learn its size.
// Relative image paths resolve against the manifest's directory.  Blank lines
// and lines starting with '#' are ignored.
DatasetManifest Ingest(const std::filesystem::path& manifest_path,
                       std::optional<std::string> name = std::nullopt);

void WriteManifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path);

}  // namespace crowdclip
