#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdclip/checkpoint.hpp"
#include "crowdclip/encoders.hpp"
#include "crowdclip/geometry.hpp"
#include "crowdclip/optimizer.hpp"
#include "crowdclip/prompts.hpp"
#include "crowdclip/ranking_loss.hpp"

namespace crowdclip {

struct TrainConfig {
  int m = 6;
  double min_ratio = 0.5;
  int patch_side = kDefaultPatchSide;
  RankingPromptSpec ranking;
  int epochs = 100;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double weight_decay = 0.0;
  int batch_pyramids = 8;
  bool freeze_text = true;
  bool freeze_image = false;
  PairSet pair_set = PairSet::kAllPairs;
  bool shuffle = true;
  std::uint64_t seed = 0;
  int max_long_side = 0;  // 0 disables the long-side cap
  std::string dataset_name;
  // Decoded patches are kept in memory across epochs (geometry is fixed).
  bool cache_patches = true;
  int workers = 1;
};

void Validate(const TrainConfig& cfg);

// Stable digest of every field that influences the produced weights.
std::string ConfigHash(const TrainConfig& cfg);

// Flat record of the configuration stored in the checkpoint manifest.
std::vector<std::pair<std::string, std::string>> DescribeConfig(
    const TrainConfig& cfg);

using ImageProvider = std::function<Image(const ImageRef&)>;

// Default provider: decode from ImageRef::path.
Image LoadFromDisk(const ImageRef& ref);

using EpochObserver = std::function<void(const EpochRecord&)>;

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochRecord> log;
};

// Fine-tunes `image_encoder` in place against rank prompts embedded by the
// frozen `text_encoder`.  The trainer only ever sees image references; point
// annotations never reach it.
TrainResult Train(std::span<const ImageRef> images,
                  TrainableImageEncoder& image_encoder,
                  const TextEncoder& text_encoder, const TrainConfig& cfg,
                  const ImageProvider& provider = LoadFromDisk,
                  const EpochObserver& observer = {});

// Mean ranking loss of the current parameters over the first pyramid of every
// image, without touching the parameters.
RankingLossReport EvaluateRankingLoss(std::span<const ImageRef> images,
                                      const ImageEncoder& image_encoder,
                                      const TextEncoder& text_encoder,
                                      const TrainConfig& cfg,
                                      const ImageProvider& provider = LoadFromDisk);

// Patch stack for one image: build the pyramid and resample every crop.
std::vector<Image> PyramidPatches(const Image& image, const ImageRef& ref,
                                  const TrainConfig& cfg);

std::string EncodeTrainingLogLine(const EpochRecord& record);

}  // namespace crowdclip
