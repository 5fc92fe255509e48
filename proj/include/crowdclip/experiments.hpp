#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "crowdclip/checkpoint.hpp"
#include "crowdclip/dataset.hpp"
#include "crowdclip/encoders.hpp"
#include "crowdclip/inference.hpp"
#include "crowdclip/metrics.hpp"
#include "crowdclip/trainer.hpp"

namespace crowdclip {

// Fresh encoders from the configured backend.
struct EncoderSet {
  std::unique_ptr<TrainableImageEncoder> image;
  std::unique_ptr<TextEncoder> text;
};
using EncoderFactory = std::function<EncoderSet()>;

// Original and fine-tuned image encoders plus the shared text encoder.
struct ModelBundle {
  std::unique_ptr<TrainableImageEncoder> original;
  std::unique_ptr<TrainableImageEncoder> finetuned;
  std::unique_ptr<TextEncoder> text;
  std::optional<EmbeddingMatrix> ranking_override;
  RankingPromptSpec ranking;
  std::string train_dataset;
};

// Both image encoders start from the factory; when a checkpoint is given its
// state is loaded into `finetuned` (and its rank embeddings, if any, become
// the ranking override).
ModelBundle MakeBundle(const EncoderFactory& factory,
                       const Checkpoint* checkpoint);

struct EvalSettings {
  // Prompt vocabularies and stage switches.  grid/max_long_side are taken
  // from the test dataset's policy unless overridden below.
  std::vector<std::string> coarse_classes = DefaultCoarseClasses();
  std::string coarse_target = "crowd";
  std::vector<std::string> fine_classes = DefaultFineClasses();
  std::string fine_target = "human heads";
  bool use_coarse_stage = true;
  bool use_fine_stage = true;
  bool use_finetuned_for_ranking = true;
  std::optional<double> keep_threshold;
  int patch_side = kDefaultPatchSide;
  std::optional<int> p_override;
  std::optional<int> max_long_override;
  Split split = Split::kTest;
  int workers = 1;
};

InferenceConfig MakeInferenceConfig(const EvalSettings& settings,
                                    const DatasetManifest& dataset,
                                    const RankingPromptSpec& ranking);

struct EvalOutcome {
  EvalReport report;
  std::vector<CountPrediction> predictions;  // test-split order
};

EvalOutcome RunEval(const DatasetManifest& dataset, const ModelBundle& bundle,
                    const EvalSettings& settings,
                    const ImageProvider& provider = LoadFromDisk);

// Labelled "<train>→<test>".  A bundle trained on the test dataset itself is
// reported through `warnings`, not rejected.
EvalOutcome RunCrossEval(const DatasetManifest& test_dataset,
                         const ModelBundle& bundle,
                         const EvalSettings& settings,
                         std::vector<std::string>* warnings,
                         const ImageProvider& provider = LoadFromDisk);

enum class AblationKind { kPrompts, kPatchNumber, kFreeze, kDataSize };

std::string_view ToString(AblationKind kind);
AblationKind ParseAblationKind(std::string_view text);

// One grid point.  Fields not relevant to the kind are ignored.
struct AblationSetting {
  RankingPromptSpec ranking;   // prompts
  int p = 0;                   // patch_number
  bool freeze_text = true;     // freeze
  bool freeze_image = false;   // freeze
  double fraction = 1.0;       // data_size
  bool with_extra = false;     // data_size

  std::string Label(AblationKind kind) const;
  double X(AblationKind kind) const;  // swept value for plotting
};

// The grids reported for each kind in the original study.
std::vector<AblationSetting> DefaultAblationGrid(AblationKind kind);

struct AblationContext {
  EncoderFactory factory;
  TrainConfig train;
  EvalSettings eval;
  DatasetManifest train_set;
  DatasetManifest test_set;
  std::optional<DatasetManifest> extra_set;
  // Used as-is by the patch_number sweep; trained once from `train` if absent.
  const Checkpoint* checkpoint = nullptr;
  ImageProvider provider = LoadFromDisk;
  std::ostream* log = nullptr;
};

struct AblationRow {
  AblationSetting setting;
  std::string label;
  double x = 0.0;
  EvalReport report;
};

struct AblationTable {
  AblationKind kind = AblationKind::kPatchNumber;
  std::vector<AblationRow> rows;
};

AblationTable RunAblation(AblationKind kind,
                          const std::vector<AblationSetting>& grid,
                          const AblationContext& context);

// Deterministic subset of the training images: a seeded shuffle, then the
// first round(fraction * n) (at least one).
std::vector<ImageRef> SubsampleImages(std::span<const ImageRef> images,
                                      double fraction, std::uint64_t seed);

std::string AblationTableToJson(const AblationTable& table);
std::string AblationTableToCsv(const AblationTable& table);
AblationTable AblationTableFromJson(const std::string& text);

}  // namespace crowdclip
