#include "crowdclip/prompts.hpp"

#include <algorithm>
#include <mutex>

#include "crowdclip/error.hpp"

namespace crowdclip {

std::string_view ToString(Stage stage) {
  switch (stage) {
    case Stage::kCoarse: return "coarse";
    case Stage::kFine: return "fine";
    case Stage::kRanking: return "ranking";
  }
  return "unknown";
}

namespace {

std::size_t CountPlaceholders(std::string_view text) {
  std::size_t n = 0;
  for (auto pos = text.find(kPlaceholder); pos != std::string_view::npos;
       pos = text.find(kPlaceholder, pos + kPlaceholder.size())) {
    ++n;
  }
  return n;
}

}  // namespace

void Validate(const RankingPromptSpec& spec) {
  if (!spec.alphabetic && spec.r0 < 0) {
    throw Error(ErrorCode::kInvalidArgument, "r0 must be >= 0");
  }
  if (spec.k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (spec.n < 2) throw Error(ErrorCode::kInvalidArgument, "n must be >= 2");
  if (CountPlaceholders(spec.template_text) != 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "ranking template needs exactly one {} placeholder: \"" +
                    spec.template_text + "\"");
  }
}

void Validate(const PromptSet& prompts) {
  if (prompts.texts.empty()) {
    throw Error(ErrorCode::kEmptyPromptSet, "prompt set has no texts");
  }
  const int n = static_cast<int>(prompts.texts.size());
  if (prompts.stage == Stage::kRanking) {
    if (static_cast<int>(prompts.counts.size()) != n) {
      throw Error(ErrorCode::kInvalidArgument,
                  "ranking prompts need one count per text");
    }
    for (int j = 1; j < n; ++j) {
      if (prompts.counts[j] <= prompts.counts[j - 1]) {
        throw Error(ErrorCode::kInvalidArgument,
                    "ranking counts must be strictly increasing");
      }
    }
  } else if (prompts.target_index < 0 || prompts.target_index >= n) {
    throw Error(ErrorCode::kTargetMissing, "target index out of range");
  }
}

std::string RenderTemplate(std::string_view template_text,
                           std::string_view value) {
  const auto pos = template_text.find(kPlaceholder);
  if (pos == std::string_view::npos) {
    throw Error(ErrorCode::kInvalidArgument, "template has no placeholder");
  }
  std::string out(template_text.substr(0, pos));
  out += value;
  out += template_text.substr(pos + kPlaceholder.size());
  return out;
}

PromptSet BuildRankingPrompts(const RankingPromptSpec& spec) {
  Validate(spec);
  PromptSet set;
  set.stage = Stage::kRanking;
  for (int j = 0; j < spec.n; ++j) {
    const int count = spec.r0 + j * spec.k;
    const std::string number = std::to_string(count);
    set.texts.push_back(RenderTemplate(
        spec.template_text, spec.alphabetic ? "A + " + number : number));
    set.counts.push_back(count);
  }
  return set;
}

PromptSet BuildFilterPrompts(Stage stage,
                             const std::vector<std::string>& classes,
                             const std::string& target) {
  if (stage == Stage::kRanking) {
    throw Error(ErrorCode::kInvalidArgument,
                "filter prompts are for the coarse or fine stage");
  }
  if (classes.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "a filtering stage needs at least two classes");
  }
  const auto it = std::find(classes.begin(), classes.end(), target);
  if (it == classes.end()) {
    throw Error(ErrorCode::kTargetMissing,
                "target class \"" + target + "\" not in class list");
  }
  PromptSet set;
  set.stage = stage;
  set.target_index = static_cast<int>(it - classes.begin());
  const std::string_view tmpl =
      stage == Stage::kCoarse ? kCoarseTemplate : kFineTemplate;
  for (const auto& name : classes) set.texts.push_back(RenderTemplate(tmpl, name));
  return set;
}

std::vector<std::string> DefaultCoarseClasses() {
  return {"crowd", "tree", "car", "building", "road", "sky"};
}

std::vector<std::string> DefaultFineClasses() {
  return {"human heads", "human bodies", "human legs"};
}

std::shared_ptr<const EmbeddingMatrix> PromptEmbeddingCache::Get(
    const PromptSet& prompts, const TextEncoder& encoder) {
  Validate(prompts);
  std::string key = encoder.fingerprint();
  key += '\x1f';
  key += ToString(prompts.stage);
  for (const auto& text : prompts.texts) {
    key += '\x1e';
    key += text;
  }
  {
    std::shared_lock lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  }
  std::unique_lock lock(mutex_);
  if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  auto matrix =
      std::make_shared<const EmbeddingMatrix>(encoder.Encode(prompts.texts));
  entries_.emplace(std::move(key), matrix);
  return matrix;
}

std::size_t PromptEmbeddingCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

void PromptEmbeddingCache::Clear() {
  std::unique_lock lock(mutex_);
  entries_.clear();
}

PromptEmbeddingCache& GlobalPromptCache() {
  static PromptEmbeddingCache cache;
  return cache;
}

std::shared_ptr<const EmbeddingMatrix> EmbedPromptSet(
    const PromptSet& prompts, const TextEncoder& encoder,
    PromptEmbeddingCache& cache) {
  return cache.Get(prompts, encoder);
}

}  // namespace crowdclip
