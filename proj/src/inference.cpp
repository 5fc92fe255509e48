#include "crowdclip/inference.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "crowdclip/error.hpp"

namespace crowdclip {
namespace {

using Clock = std::chrono::steady_clock;

double SecondsSince(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<double> ScoreRow(std::span<const double> patch,
                             const EmbeddingMatrix& text) {
  if (static_cast<int>(patch.size()) != text.dim()) {
    throw Error(ErrorCode::kDimMismatch,
                "patch embedding has dim " + std::to_string(patch.size()) +
                    ", prompt embeddings have dim " +
                    std::to_string(text.dim()));
  }
  std::vector<double> scores(text.rows());
  for (int j = 0; j < text.rows(); ++j) scores[j] = Dot(patch, text.row(j));
  return scores;
}

void CheckRows(const PromptSet& prompts, const EmbeddingMatrix& text) {
  if (text.rows() != static_cast<int>(prompts.texts.size())) {
    throw Error(ErrorCode::kShapeMismatch,
                "prompt embedding rows do not match the prompt set");
  }
}

double TargetProbability(const std::vector<double>& scores, int target,
                         double scale) {
  double best = scores[0];
  for (double s : scores) best = std::max(best, s);
  double denom = 0.0;
  for (double s : scores) denom += std::exp(scale * (s - best));
  return std::exp(scale * (scores[target] - best)) / denom;
}

Stage ParseStage(const std::string& text) {
  if (text == "coarse") return Stage::kCoarse;
  if (text == "fine") return Stage::kFine;
  if (text == "ranking") return Stage::kRanking;
  throw Error(ErrorCode::kParseError, "unknown stage '" + text + "'");
}

constexpr const char* kStageKeys[3] = {"coarse", "fine", "ranking"};

}  // namespace

void Validate(const InferenceConfig& cfg) {
  if (cfg.grid.p < 1) {
    throw Error(ErrorCode::kConfigError, "grid P must be >= 1");
  }
  if (cfg.patch_side < 1) {
    throw Error(ErrorCode::kConfigError, "patch_side must be >= 1");
  }
  if (cfg.keep_threshold &&
      !(*cfg.keep_threshold > 0.0 && *cfg.keep_threshold <= 1.0)) {
    throw Error(ErrorCode::kConfigError, "keep_threshold must lie in (0, 1]");
  }
  if (cfg.use_coarse_stage) {
    Validate(cfg.coarse_prompts);
    if (cfg.coarse_prompts.stage != Stage::kCoarse) {
      throw Error(ErrorCode::kConfigError, "coarse prompts have wrong stage");
    }
  }
  if (cfg.use_fine_stage) {
    Validate(cfg.fine_prompts);
    if (cfg.fine_prompts.stage != Stage::kFine) {
      throw Error(ErrorCode::kConfigError, "fine prompts have wrong stage");
    }
  }
  Validate(cfg.ranking_prompts);
  if (cfg.ranking_prompts.stage != Stage::kRanking ||
      cfg.ranking_prompts.counts.empty()) {
    throw Error(ErrorCode::kConfigError, "ranking prompts need counts");
  }
}

InferenceConfig DefaultInferenceConfig(int p, const RankingPromptSpec& ranking) {
  InferenceConfig cfg;
  cfg.grid.p = p;
  cfg.coarse_prompts =
      BuildFilterPrompts(Stage::kCoarse, DefaultCoarseClasses(), "crowd");
  cfg.fine_prompts =
      BuildFilterPrompts(Stage::kFine, DefaultFineClasses(), "human heads");
  cfg.ranking_prompts = BuildRankingPrompts(ranking);
  return cfg;
}

StageDecision StageFilter(std::span<const double> patch_embedding,
                          const PromptSet& prompts,
                          const EmbeddingMatrix& text_matrix,
                          const InferenceConfig* cfg) {
  if (prompts.stage == Stage::kRanking) {
    throw Error(ErrorCode::kInvalidArgument,
                "StageFilter needs a coarse or fine prompt set");
  }
  CheckRows(prompts, text_matrix);
  StageDecision d;
  d.stage = prompts.stage;
  d.scores = ScoreRow(patch_embedding, text_matrix);
  const int target = prompts.target_index;
  int best = target;
  for (int j = 0; j < static_cast<int>(d.scores.size()); ++j) {
    if (d.scores[j] > d.scores[best]) best = j;
  }
  d.chosen_index = best;
  if (cfg && cfg->keep_threshold) {
    d.kept = TargetProbability(d.scores, target, cfg->softmax_scale) >=
             *cfg->keep_threshold;
  } else {
    d.kept = best == target;
  }
  return d;
}

long long StageCount(std::span<const double> patch_embedding,
                     const PromptSet& ranking_prompts,
                     const EmbeddingMatrix& text_matrix,
                     StageDecision* decision) {
  if (ranking_prompts.counts.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "ranking prompts carry no counts");
  }
  CheckRows(ranking_prompts, text_matrix);
  auto scores = ScoreRow(patch_embedding, text_matrix);
  // Counts are strictly increasing, so keeping the first maximum breaks ties
  // toward the smaller count.
  int best = 0;
  for (int j = 1; j < static_cast<int>(scores.size()); ++j) {
    if (scores[j] > scores[best]) best = j;
  }
  if (decision) {
    decision->stage = Stage::kRanking;
    decision->scores = std::move(scores);
    decision->chosen_index = best;
    decision->kept = false;
  }
  return ranking_prompts.counts[best];
}

CountPrediction Predict(const Image& image, const ImageRef& ref,
                        const InferenceModel& model,
                        const InferenceConfig& cfg) {
  Validate(cfg);
  if (!model.original || !model.text) {
    throw Error(ErrorCode::kInvalidArgument, "inference model is incomplete");
  }
  const auto start = Clock::now();
  PromptEmbeddingCache& cache = model.cache ? *model.cache : GlobalPromptCache();

  const Image pixels = cfg.max_long_side > 0
                           ? ApplyLongSideCap(image, cfg.max_long_side)
                           : image;
  const ImageRef sized{ref.path, pixels.width(), pixels.height()};
  const std::vector<Rect> rects = TileGrid(sized, cfg.grid);

  CountPrediction pred;
  pred.image = ref;
  pred.p = cfg.grid.p;
  pred.tiles.resize(rects.size());
  std::vector<Image> patches;
  patches.reserve(rects.size());
  for (std::size_t t = 0; t < rects.size(); ++t) {
    pred.tiles[t].crop = rects[t];
    patches.push_back(ExtractAndResize(pixels, rects[t], cfg.patch_side));
  }

  std::vector<int> survivors(rects.size());
  std::iota(survivors.begin(), survivors.end(), 0);
  // E_o rows for every tile, filled once and reused by the later stages.
  EmbeddingMatrix original_rows;
  std::vector<int> row_of(rects.size(), -1);

  auto encode_original = [&](const std::vector<int>& tiles) {
    std::vector<int> missing;
    for (int t : tiles) {
      if (row_of[t] < 0) missing.push_back(t);
    }
    if (missing.empty()) return;
    std::vector<Image> batch;
    batch.reserve(missing.size());
    for (int t : missing) batch.push_back(patches[t]);
    const EmbeddingMatrix e = model.original->Encode(batch);
    EmbeddingMatrix merged(original_rows.rows() + e.rows(), e.dim());
    auto& dst = merged.mutable_values();
    std::copy(original_rows.values().begin(), original_rows.values().end(),
              dst.begin());
    std::copy(e.values().begin(), e.values().end(),
              dst.begin() + original_rows.values().size());
    for (std::size_t k = 0; k < missing.size(); ++k) {
      row_of[missing[k]] = original_rows.rows() + static_cast<int>(k);
    }
    merged.set_normalized(true);
    original_rows = std::move(merged);
  };

  auto run_filter = [&](int slot, const PromptSet& prompts) {
    const auto stage_start = Clock::now();
    StageStats& stats = pred.stages[slot];
    if (!survivors.empty()) {
      const auto text = EmbedPromptSet(prompts, *model.text, cache);
      encode_original(survivors);
      std::vector<int> kept;
      for (int t : survivors) {
        StageDecision d =
            StageFilter(original_rows.row(row_of[t]), prompts, *text, &cfg);
        if (d.kept) kept.push_back(t);
        pred.tiles[t].decisions.push_back(std::move(d));
      }
      stats.scored = static_cast<int>(survivors.size());
      stats.kept = static_cast<int>(kept.size());
      survivors = std::move(kept);
    }
    stats.seconds = SecondsSince(stage_start);
  };

  if (cfg.use_coarse_stage) run_filter(0, cfg.coarse_prompts);
  if (cfg.use_fine_stage) run_filter(1, cfg.fine_prompts);

  {
    const auto stage_start = Clock::now();
    StageStats& stats = pred.stages[2];
    if (!survivors.empty()) {
      const auto text = model.ranking_embeddings
                            ? model.ranking_embeddings
                            : EmbedPromptSet(cfg.ranking_prompts, *model.text,
                                             cache);
      const ImageEncoder* encoder =
          cfg.use_finetuned_for_ranking && model.finetuned ? model.finetuned
                                                           : model.original;
      EmbeddingMatrix rows;
      std::vector<int> index(survivors.size());
      if (encoder == model.original) {
        encode_original(survivors);
        rows = original_rows;
        for (std::size_t k = 0; k < survivors.size(); ++k) {
          index[k] = row_of[survivors[k]];
        }
      } else {
        std::vector<Image> batch;
        batch.reserve(survivors.size());
        for (int t : survivors) batch.push_back(patches[t]);
        rows = encoder->Encode(batch);
        std::iota(index.begin(), index.end(), 0);
      }
      for (std::size_t k = 0; k < survivors.size(); ++k) {
        StageDecision d;
        TileResult& tile = pred.tiles[survivors[k]];
        tile.patch_count =
            StageCount(rows.row(index[k]), cfg.ranking_prompts, *text, &d);
        tile.decisions.push_back(std::move(d));
      }
      stats.scored = static_cast<int>(survivors.size());
      stats.kept = stats.scored;
    }
    stats.seconds = SecondsSince(stage_start);
  }

  for (const TileResult& tile : pred.tiles) pred.total += tile.patch_count;
  pred.seconds = SecondsSince(start);
  return pred;
}

std::string EncodePredictionLine(const CountPrediction& prediction,
                                 bool include_timing) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["image"] = prediction.image.path;
  j["width"] = prediction.image.width;
  j["height"] = prediction.image.height;
  j["P"] = prediction.p;
  j["total"] = prediction.total;
  ordered_json tiles = ordered_json::array();
  for (const TileResult& tile : prediction.tiles) {
    ordered_json t;
    t["crop"] = {tile.crop.x, tile.crop.y, tile.crop.width, tile.crop.height};
    t["patch_count"] = tile.patch_count;
    ordered_json decisions = ordered_json::array();
    for (const StageDecision& d : tile.decisions) {
      ordered_json dj;
      dj["stage"] = std::string(ToString(d.stage));
      dj["scores"] = d.scores;
      dj["chosen_index"] = d.chosen_index;
      if (d.stage != Stage::kRanking) dj["kept"] = d.kept;
      decisions.push_back(std::move(dj));
    }
    t["decisions"] = std::move(decisions);
    tiles.push_back(std::move(t));
  }
  j["tiles"] = std::move(tiles);
  ordered_json stages;
  for (int s = 0; s < 3; ++s) {
    ordered_json sj;
    sj["scored"] = prediction.stages[s].scored;
    sj["kept"] = prediction.stages[s].kept;
    if (include_timing) sj["seconds"] = prediction.stages[s].seconds;
    stages[kStageKeys[s]] = std::move(sj);
  }
  j["stages"] = std::move(stages);
  if (include_timing) j["seconds"] = prediction.seconds;
  return j.dump();
}

CountPrediction DecodePredictionLine(const std::string& line) {
  CountPrediction pred;
  try {
    const auto j = nlohmann::json::parse(line);
    pred.image.path = j.at("image").get<std::string>();
    pred.image.width = j.at("width").get<int>();
    pred.image.height = j.at("height").get<int>();
    pred.p = j.at("P").get<int>();
    pred.total = j.at("total").get<long long>();
    for (const auto& t : j.at("tiles")) {
      TileResult tile;
      const auto& c = t.at("crop");
      tile.crop = {c.at(0).get<int>(), c.at(1).get<int>(), c.at(2).get<int>(),
                   c.at(3).get<int>()};
      tile.patch_count = t.at("patch_count").get<long long>();
      for (const auto& dj : t.at("decisions")) {
        StageDecision d;
        d.stage = ParseStage(dj.at("stage").get<std::string>());
        d.scores = dj.at("scores").get<std::vector<double>>();
        d.chosen_index = dj.at("chosen_index").get<int>();
        d.kept = dj.value("kept", false);
        tile.decisions.push_back(std::move(d));
      }
      pred.tiles.push_back(std::move(tile));
    }
    if (j.contains("stages")) {
      for (int s = 0; s < 3; ++s) {
        const auto& sj = j["stages"].at(kStageKeys[s]);
        pred.stages[s].scored = sj.at("scored").get<int>();
        pred.stages[s].kept = sj.at("kept").get<int>();
        pred.stages[s].seconds = sj.value("seconds", 0.0);
      }
    }
    pred.seconds = j.value("seconds", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError,
                std::string("bad prediction record: ") + e.what());
  }
  return pred;
}

}  // namespace crowdclip
