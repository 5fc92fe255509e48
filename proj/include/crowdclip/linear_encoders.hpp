#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "crowdclip/encoders.hpp"

namespace crowdclip {

// Adapter backend for externally produced weights.
//
// LinearProjectionImageEncoder pools a patch into a grid x grid x RGB feature
// vector (values in [0, 1], plus a constant bias feature) and maps it through
// a dense dim x features matrix.  EmbeddingTableTextEncoder serves prompt
// embeddings that were exported ahead of time by a real text tower; text
// embeddings are fixed at inference anyway, so a table is a complete
// representation of a frozen text encoder over a known prompt vocabulary.
class LinearProjectionImageEncoder final : public TrainableImageEncoder {
 public:
  LinearProjectionImageEncoder(int dim, int grid);

  // Random N(0, 1/features) initialization.
  static LinearProjectionImageEncoder Random(int dim, int grid,
                                             std::uint64_t seed);

  int dim() const override { return dim_; }
  Backend backend() const override { return Backend::kPretrained; }
  std::string name() const override;

  int grid() const noexcept { return grid_; }
  int num_features() const noexcept { return 3 * grid_ * grid_ + 1; }

  std::vector<double> parameters() const override { return weights_; }
  void set_parameters(std::span<const double> params) override;
  std::vector<double> Backward(std::span<const Image> patches,
                               const EmbeddingMatrix& grad_raw) const override;
  std::unique_ptr<TrainableImageEncoder> Clone() const override;

  std::vector<double> Features(const Image& patch) const;

 protected:
  EmbeddingMatrix EncodeBatch(std::span<const Image> patches) const override;

 private:
  int dim_;
  int grid_;
  std::vector<double> weights_;  // dim x features, row-major
};

// Encoder name embeds the grid, e.g. "linear-projection-g4"; LoadState()
// rejects blobs from a different geometry.
std::unique_ptr<LinearProjectionImageEncoder> LoadLinearProjectionEncoder(
    const std::filesystem::path& path);

class EmbeddingTableTextEncoder final : public TextEncoder {
 public:
  EmbeddingTableTextEncoder(int dim,
                            std::map<std::string, std::vector<double>> table,
                            std::string fingerprint);

  // JSON: {"dim": C, "entries": {"<prompt text>": [C floats], ...}}
  static std::unique_ptr<EmbeddingTableTextEncoder> Load(
      const std::filesystem::path& path);

  int dim() const override { return dim_; }
  Backend backend() const override { return Backend::kPretrained; }
  std::string name() const override { return "embedding-table-text"; }
  std::string fingerprint() const override { return fingerprint_; }

 protected:
  EmbeddingMatrix EncodeBatch(
      std::span<const std::string> texts) const override;

 private:
  int dim_;
  std::map<std::string, std::vector<double>> table_;
  std::string fingerprint_;
};

}  // namespace crowdclip
