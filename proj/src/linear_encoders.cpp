#include "crowdclip/linear_encoders.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

#include "crowdclip/checkpoint.hpp"
#include "crowdclip/error.hpp"
#include "crowdclip/hash.hpp"

namespace crowdclip {

LinearProjectionImageEncoder::LinearProjectionImageEncoder(int dim, int grid)
    : dim_(dim), grid_(grid) {
  if (dim < 1 || grid < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "linear encoder needs dim >= 1 and grid >= 1");
  }
  weights_.assign(static_cast<std::size_t>(dim_) * num_features(), 0.0);
}

LinearProjectionImageEncoder LinearProjectionImageEncoder::Random(
    int dim, int grid, std::uint64_t seed) {
  LinearProjectionImageEncoder enc(dim, grid);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(
      0.0, 1.0 / std::sqrt(static_cast<double>(enc.num_features())));
  for (double& w : enc.weights_) w = normal(rng);
  return enc;
}

std::string LinearProjectionImageEncoder::name() const {
  return "linear-projection-g" + std::to_string(grid_) + "-d" +
         std::to_string(dim_);
}

void LinearProjectionImageEncoder::set_parameters(
    std::span<const double> params) {
  if (params.size() != weights_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "linear encoder weight count");
  }
  weights_.assign(params.begin(), params.end());
}

std::unique_ptr<TrainableImageEncoder> LinearProjectionImageEncoder::Clone()
    const {
  return std::make_unique<LinearProjectionImageEncoder>(*this);
}

std::vector<double> LinearProjectionImageEncoder::Features(
    const Image& patch) const {
  std::vector<double> features(num_features(), 0.0);
  std::vector<int> cells(static_cast<std::size_t>(grid_) * grid_, 0);
  for (int y = 0; y < patch.height(); ++y) {
    const int gy = y * grid_ / patch.height();
    for (int x = 0; x < patch.width(); ++x) {
      const int gx = x * grid_ / patch.width();
      const int cell = gy * grid_ + gx;
      const std::uint8_t* px = patch.at(x, y);
      for (int c = 0; c < 3; ++c) features[cell * 3 + c] += px[c];
      ++cells[cell];
    }
  }
  for (std::size_t cell = 0; cell < cells.size(); ++cell) {
    for (int c = 0; c < 3; ++c) {
      features[cell * 3 + c] /= 255.0 * std::max(cells[cell], 1);
    }
  }
  features.back() = 1.0;
  return features;
}

EmbeddingMatrix LinearProjectionImageEncoder::EncodeBatch(
    std::span<const Image> patches) const {
  const int nf = num_features();
  EmbeddingMatrix out(static_cast<int>(patches.size()), dim_);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto f = Features(patches[i]);
    auto row = out.row(static_cast<int>(i));
    for (int d = 0; d < dim_; ++d) {
      row[d] = Dot({weights_.data() + static_cast<std::size_t>(d) * nf,
                    static_cast<std::size_t>(nf)},
                   f);
    }
  }
  return out;
}

std::vector<double> LinearProjectionImageEncoder::Backward(
    std::span<const Image> patches, const EmbeddingMatrix& grad_raw) const {
  if (grad_raw.rows() != static_cast<int>(patches.size()) ||
      grad_raw.dim() != dim_) {
    throw Error(ErrorCode::kShapeMismatch, "gradient shape mismatch");
  }
  const int nf = num_features();
  std::vector<double> grad(weights_.size(), 0.0);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto f = Features(patches[i]);
    auto g = grad_raw.row(static_cast<int>(i));
    for (int d = 0; d < dim_; ++d) {
      double* dst = grad.data() + static_cast<std::size_t>(d) * nf;
      for (int k = 0; k < nf; ++k) dst[k] += g[d] * f[k];
    }
  }
  return grad;
}

std::unique_ptr<LinearProjectionImageEncoder> LoadLinearProjectionEncoder(
    const std::filesystem::path& path) {
  const auto blob = ReadFileBytes(path);
  // The encoder name inside the blob carries the geometry; parse it first.
  constexpr std::size_t kHeader = 8 + 4;
  if (blob.size() < kHeader + 4) {
    throw Error(ErrorCode::kParseError, "truncated weights " + path.string());
  }
  std::uint32_t name_len = 0;
  std::memcpy(&name_len, blob.data() + kHeader, sizeof(name_len));
  if (blob.size() < kHeader + 4 + name_len) {
    throw Error(ErrorCode::kParseError, "truncated weights " + path.string());
  }
  const std::string id(
      reinterpret_cast<const char*>(blob.data() + kHeader + 4), name_len);
  int grid = 0;
  int dim = 0;
  if (std::sscanf(id.c_str(), "linear-projection-g%d-d%d", &grid, &dim) != 2) {
    throw Error(ErrorCode::kParseError,
                "weights were not produced by a linear projection encoder");
  }
  auto enc = std::make_unique<LinearProjectionImageEncoder>(dim, grid);
  enc->LoadState(blob);
  return enc;
}

EmbeddingTableTextEncoder::EmbeddingTableTextEncoder(
    int dim, std::map<std::string, std::vector<double>> table,
    std::string fingerprint)
    : dim_(dim), table_(std::move(table)), fingerprint_(std::move(fingerprint)) {
  for (const auto& [text, v] : table_) {
    if (static_cast<int>(v.size()) != dim_) {
      throw Error(ErrorCode::kShapeMismatch,
                  "table entry \"" + text + "\" has wrong dimension");
    }
  }
}

std::unique_ptr<EmbeddingTableTextEncoder> EmbeddingTableTextEncoder::Load(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIoError, "cannot open text table " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
  if (!doc.contains("dim") || !doc.contains("entries")) {
    throw Error(ErrorCode::kParseError,
                path.string() + ": expected {\"dim\", \"entries\"}");
  }
  std::map<std::string, std::vector<double>> table;
  for (const auto& [key, value] : doc["entries"].items()) {
    table[key] = value.get<std::vector<double>>();
  }
  return std::make_unique<EmbeddingTableTextEncoder>(
      doc["dim"].get<int>(), std::move(table),
      "embedding-table:" + HexDigest(Fnv1a(text)));
}

EmbeddingMatrix EmbeddingTableTextEncoder::EncodeBatch(
    std::span<const std::string> texts) const {
  EmbeddingMatrix out(static_cast<int>(texts.size()), dim_);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto it = table_.find(texts[i]);
    if (it == table_.end()) {
      throw Error(ErrorCode::kEncoderFailure,
                  "prompt \"" + texts[i] + "\" is not in the embedding table");
    }
    std::copy(it->second.begin(), it->second.end(),
              out.row(static_cast<int>(i)).begin());
  }
  return out;
}

}  // namespace crowdclip
