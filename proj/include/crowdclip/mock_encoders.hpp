#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "crowdclip/encoders.hpp"

namespace crowdclip {

// Deterministic stand-in for a vision-language model, used by every test and
// by the "mock" backend.
//
// Patches carry their semantics in their mean color:
//   round(mean R / 32) -> index into the coarse (scene) vocabulary
//   round(mean G / 32) -> index into the fine (body part) vocabulary
//   mean B             -> count value c
// The fixture generator paints constant-color tiles, which bilinear
// resampling leaves untouched, so the code survives patch extraction exactly.
//
// Before a seeded rotation, the embedding space is laid out as
//   [coarse one-hot | fine one-hot | cos(theta c), sin(theta c) | spare]
// and prompts map onto the same blocks:
//   "The object is <coarse class>"   -> coarse one-hot
//   "The objects are <fine class>"   -> fine one-hot
//   any other text with an integer r -> (cos(theta r), sin(theta r))
// Unknown classes land on hashed directions in the spare block.  With
// theta = (pi / 2) / 300 the count similarity cos(theta (a - b)) is strictly
// decreasing in |a - b| for counts in [0, 300].
struct MockSpaceOptions {
  std::vector<std::string> coarse_vocab = {"crowd", "tree",     "car",
                                           "building", "road", "sky"};
  std::vector<std::string> fine_vocab = {"human heads", "human bodies",
                                         "human legs"};
  int dim = 32;
  double max_count = 300.0;
};

inline constexpr int kMockChannelStep = 32;

class MockCountSpace {
 public:
  MockCountSpace(std::uint64_t seed, MockSpaceOptions options);

  int dim() const noexcept { return options_.dim; }
  double theta() const noexcept { return theta_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const MockSpaceOptions& options() const noexcept { return options_; }

  // Unrotated building blocks.
  std::vector<double> CoarseAxis(int index) const;
  std::vector<double> FineAxis(int index) const;
  std::vector<double> CountVector(double count) const;
  std::vector<double> CountDerivative(double count) const;
  std::vector<double> SpareDirection(const std::string& key) const;

  int coarse_offset() const noexcept { return 0; }
  int fine_offset() const noexcept {
    return static_cast<int>(options_.coarse_vocab.size());
  }
  int count_offset() const noexcept {
    return fine_offset() + static_cast<int>(options_.fine_vocab.size());
  }
  int spare_offset() const noexcept { return count_offset() + 2; }

  // Applies the seeded orthogonal rotation.
  std::vector<double> Rotate(std::span<const double> v) const;

  int FindCoarse(const std::string& name) const;
  int FindFine(const std::string& name) const;

 private:
  std::uint64_t seed_;
  MockSpaceOptions options_;
  double theta_;
  std::vector<double> rotation_;  // dim x dim, row-major
};

// RGB color that the mock image encoder decodes back to (scene, part, count).
std::array<std::uint8_t, 3> MockColor(int scene_index, int part_index,
                                      int count);

// Image side of the mock.  Two trainable parameters map the decoded blue
// channel to a count: c = gain * mean_B + offset.  (gain, offset) = (1, 0)
// reproduces planted counts exactly.
class MockCountImageEncoder final : public TrainableImageEncoder {
 public:
  explicit MockCountImageEncoder(std::shared_ptr<const MockCountSpace> space,
                                 double gain = 1.0, double offset = 0.0);

  int dim() const override { return space_->dim(); }
  Backend backend() const override { return Backend::kMock; }
  std::string name() const override { return "mock-count-image"; }

  std::vector<double> parameters() const override { return {gain_, offset_}; }
  void set_parameters(std::span<const double> params) override;
  std::vector<double> Backward(std::span<const Image> patches,
                               const EmbeddingMatrix& grad_raw) const override;
  std::unique_ptr<TrainableImageEncoder> Clone() const override;

  double gain() const noexcept { return gain_; }
  double offset() const noexcept { return offset_; }
  const MockCountSpace& space() const noexcept { return *space_; }

 protected:
  EmbeddingMatrix EncodeBatch(std::span<const Image> patches) const override;

 private:
  std::vector<double> RawEmbedding(const MeanColor& mean) const;

  std::shared_ptr<const MockCountSpace> space_;
  double gain_;
  double offset_;
};

class MockCountTextEncoder final : public TextEncoder {
 public:
  explicit MockCountTextEncoder(std::shared_ptr<const MockCountSpace> space);

  int dim() const override { return space_->dim(); }
  Backend backend() const override { return Backend::kMock; }
  std::string name() const override { return "mock-count-text"; }
  std::string fingerprint() const override;

 protected:
  EmbeddingMatrix EncodeBatch(
      std::span<const std::string> texts) const override;

 private:
  std::shared_ptr<const MockCountSpace> space_;
};

struct MockEncoderPair {
  std::unique_ptr<MockCountImageEncoder> image;
  std::unique_ptr<MockCountTextEncoder> text;
};

MockEncoderPair MakeMockCountEncoders(std::uint64_t seed,
                                      MockSpaceOptions options = {});

}  // namespace crowdclip
