#include "crowdclip/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "crowdclip/error.hpp"
#include "crowdclip/image.hpp"

namespace crowdclip {
namespace fs = std::filesystem;

std::string_view ToString(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split ParseSplit(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  throw Error(ErrorCode::kParseError,
              "unknown split '" + std::string(text) + "'");
}

DatasetPolicy PolicyForDataset(const std::string& name) {
  std::string key;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  DatasetPolicy policy;
  const bool qnrf = key.find("qnrf") != std::string::npos;
  if (qnrf || key.find("ucfcc50") != std::string::npos) policy.default_p = 4;
  if (qnrf || key.find("jhu") != std::string::npos) {
    policy.resize_max_long = kDefaultMaxLongSide;
  }
  return policy;
}

std::vector<const AnnotatedImage*> DatasetManifest::Select(Split split) const {
  std::vector<const AnnotatedImage*> out;
  for (const auto& img : images) {
    if (img.split == split) out.push_back(&img);
  }
  return out;
}

std::vector<ImageRef> DatasetManifest::ImageRefs(Split split) const {
  std::vector<ImageRef> out;
  for (const auto& img : images) {
    if (img.split == split) out.push_back(img.image);
  }
  return out;
}

DatasetManifest Ingest(const fs::path& manifest_path,
                       std::optional<std::string> name) {
  std::ifstream in(manifest_path);
  if (!in) {
    throw Error(ErrorCode::kIoError,
                "manifest not found: " + manifest_path.string());
  }
  DatasetManifest manifest;
  std::optional<std::string> declared;
  const fs::path base = manifest_path.parent_path();
  std::string line;
  int line_no = 0;
  std::ostringstream bad_points;
  int bad_count = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const std::string locus =
        manifest_path.string() + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, locus + ": " + e.what());
    }
    if (!j.is_object()) {
      throw Error(ErrorCode::kParseError, locus + ": record is not an object");
    }
    if (!j.contains("image") && j.contains("dataset")) {
      declared = j["dataset"].get<std::string>();
      continue;
    }
    AnnotatedImage img;
    try {
      fs::path path = j.at("image").get<std::string>();
      if (path.is_relative()) path = base / path;
      img.image.path = path.lexically_normal().string();
      img.split = j.contains("split")
                      ? ParseSplit(j["split"].get<std::string>())
                      : Split::kTest;
      for (const auto& p : j.value("points", nlohmann::json::array())) {
        img.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      }
      if (j.contains("width") && j.contains("height")) {
        img.image.width = j["width"].get<int>();
        img.image.height = j["height"].get<int>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, locus + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::kParseError, locus + ": " + e.what());
    }
    if (img.image.width <= 0 || img.image.height <= 0) {
      try {
        ProbeImageSize(img.image.path, &img.image.width, &img.image.height);
      } catch (const Error& e) {
        throw Error(ErrorCode::kParseError, locus + ": " + e.what());
      }
    }
    for (const Point& p : img.points) {
      if (!(p.x >= 0 && p.y >= 0 && p.x <= img.image.width &&
            p.y <= img.image.height)) {
        if (bad_count < 20) {
          bad_points << "\n  " << locus << ": (" << p.x << ", " << p.y
                     << ") outside " << img.image.width << "x"
                     << img.image.height;
        }
        ++bad_count;
      }
    }
    manifest.images.push_back(std::move(img));
  }
  if (bad_count > 0) {
    throw Error(ErrorCode::kBoundsError,
                std::to_string(bad_count) + " annotation point(s) out of bounds" +
                    bad_points.str());
  }
  if (name) {
    manifest.name = *name;
  } else if (declared) {
    manifest.name = *declared;
  } else {
    manifest.name = manifest_path.stem().string();
  }
  const DatasetPolicy policy = PolicyForDataset(manifest.name);
  manifest.default_p = policy.default_p;
  manifest.resize_max_long = policy.resize_max_long;
  return manifest;
}

void WriteManifest(const DatasetManifest& manifest, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  }
  nlohmann::ordered_json header;
  header["dataset"] = manifest.name;
  out << header.dump() << "\n";
  const fs::path base = path.parent_path();
  for (const auto& img : manifest.images) {
    nlohmann::ordered_json j;
    fs::path p = img.image.path;
    const fs::path rel =
        fs::absolute(p).lexically_normal().lexically_relative(
            fs::absolute(base.empty() ? fs::path(".") : base).lexically_normal());
    if (!rel.empty() && *rel.begin() != "..") p = rel;
    j["image"] = p.generic_string();
    j["width"] = img.image.width;
    j["height"] = img.image.height;
    j["split"] = std::string(ToString(img.split));
    nlohmann::ordered_json pts = nlohmann::ordered_json::array();
    for (const Point& pt : img.points) pts.push_back({pt.x, pt.y});
    j["points"] = std::move(pts);
    out << j.dump() << "\n";
  }
}

}  // namespace crowdclip
