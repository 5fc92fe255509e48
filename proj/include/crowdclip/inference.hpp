#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdclip/encoders.hpp"
#include "crowdclip/geometry.hpp"
#include "crowdclip/prompts.hpp"

namespace crowdclip {

struct StageDecision {
  Stage stage = Stage::kCoarse;
  std::vector<double> scores;  // one per prompt
  int chosen_index = 0;
  bool kept = false;  // meaningful for filtering stages only
};

struct TileResult {
  Rect crop;
  std::vector<StageDecision> decisions;
  long long patch_count = 0;
};

struct StageStats {
  int scored = 0;  // patches evaluated at this stage
  int kept = 0;    // survivors passed on
  double seconds = 0.0;
};

struct CountPrediction {
  ImageRef image;
  int p = 0;
  std::vector<TileResult> tiles;
  long long total = 0;
  std::array<StageStats, 3> stages{};  // coarse, fine, ranking
  double seconds = 0.0;
};

struct InferenceConfig {
  GridSpec grid;
  PromptSet coarse_prompts;
  PromptSet fine_prompts;
  PromptSet ranking_prompts;
  bool use_coarse_stage = true;
  bool use_fine_stage = true;
  bool use_finetuned_for_ranking = true;
  // When set, a filtering stage keeps a patch iff the softmax probability of
  // the target class (logits = softmax_scale * cosine) is >= keep_threshold.
  std::optional<double> keep_threshold;
  double softmax_scale = 100.0;
  int patch_side = kDefaultPatchSide;
  int max_long_side = 0;  // 0 disables the long-side cap
};

void Validate(const InferenceConfig& cfg);

// Default configuration for a P x P grid with the standard prompts and
// vocabularies.
InferenceConfig DefaultInferenceConfig(int p, const RankingPromptSpec& ranking);

// Encoders used by the pipeline.  Stage 1 and 2 use `original`; stage 3 uses
// `finetuned` unless the config asks for the zero-shot variant.
// `ranking_embeddings` overrides the text-side rank embeddings (checkpoints
// produced with an unfrozen text side carry their own).
struct InferenceModel {
  const ImageEncoder* original = nullptr;
  const ImageEncoder* finetuned = nullptr;
  const TextEncoder* text = nullptr;
  std::shared_ptr<const EmbeddingMatrix> ranking_embeddings;
  PromptEmbeddingCache* cache = nullptr;  // GlobalPromptCache() when null
};

// Argmax classification of one normalized patch row; ties resolve toward the
// target class.
StageDecision StageFilter(std::span<const double> patch_embedding,
                          const PromptSet& prompts,
                          const EmbeddingMatrix& text_matrix,
                          const InferenceConfig* cfg = nullptr);

// Count of the most similar rank prompt; ties resolve toward the smaller
// count.
long long StageCount(std::span<const double> patch_embedding,
                     const PromptSet& ranking_prompts,
                     const EmbeddingMatrix& text_matrix,
                     StageDecision* decision = nullptr);

CountPrediction Predict(const Image& image, const ImageRef& ref,
                        const InferenceModel& model,
                        const InferenceConfig& cfg);

// JSON object on one line.  Wall-clock fields are emitted only when
// `include_timing` is set so that the default record is reproducible.
std::string EncodePredictionLine(const CountPrediction& prediction,
                                 bool include_timing = false);
CountPrediction DecodePredictionLine(const std::string& line);

}  // namespace crowdclip
