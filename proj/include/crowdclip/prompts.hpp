#pragma once

#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "crowdclip/embedding.hpp"
#include "crowdclip/encoders.hpp"

namespace crowdclip {

enum class Stage { kCoarse, kFine, kRanking };

std::string_view ToString(Stage stage);

inline constexpr std::string_view kPlaceholder = "{}";
inline constexpr std::string_view kRankingTemplate =
    "There are {} persons in the crowd";
inline constexpr std::string_view kCoarseTemplate = "The object is {}";
inline constexpr std::string_view kFineTemplate = "The objects are {}";

struct RankingPromptSpec {
  int r0 = 20;  // basic reference count
  int k = 35;   // counting interval
  int n = 6;    // number of classes
  std::string template_text = std::string(kRankingTemplate);
  bool alphabetic = false;  // render "A + <count>" instead of "<count>"

  friend bool operator==(const RankingPromptSpec&,
                         const RankingPromptSpec&) = default;
};

void Validate(const RankingPromptSpec& spec);

struct PromptSet {
  Stage stage = Stage::kRanking;
  std::vector<std::string> texts;
  int target_index = 0;            // filtering stages only
  std::vector<int> counts;         // ranking stage only, strictly increasing

  friend bool operator==(const PromptSet&, const PromptSet&) = default;
};

void Validate(const PromptSet& prompts);

std::string RenderTemplate(std::string_view template_text,
                           std::string_view value);

PromptSet BuildRankingPrompts(const RankingPromptSpec& spec);

PromptSet BuildFilterPrompts(Stage stage,
                             const std::vector<std::string>& classes,
                             const std::string& target);

std::vector<std::string> DefaultCoarseClasses();
std::vector<std::string> DefaultFineClasses();

// Process-lifetime cache of prompt embeddings keyed by (text encoder
// fingerprint, stage, texts).  Many concurrent readers; a miss takes the
// exclusive lock, so each distinct set is encoded at most once.
class PromptEmbeddingCache {
 public:
  std::shared_ptr<const EmbeddingMatrix> Get(const PromptSet& prompts,
                                             const TextEncoder& encoder);

  std::size_t size() const;
  void Clear();

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const EmbeddingMatrix>> entries_;
};

// Shared default instance used by the pipeline.
PromptEmbeddingCache& GlobalPromptCache();

std::shared_ptr<const EmbeddingMatrix> EmbedPromptSet(
    const PromptSet& prompts, const TextEncoder& encoder,
    PromptEmbeddingCache& cache = GlobalPromptCache());

}  // namespace crowdclip
