#include "crowdclip/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

#include "crowdclip/error.hpp"
#include "format.hpp"
#include "parallel.hpp"

namespace crowdclip {

using internal::FormatDouble;

ModelBundle MakeBundle(const EncoderFactory& factory,
                       const Checkpoint* checkpoint) {
  EncoderSet first = factory();
  EncoderSet second = factory();
  if (!first.image || !first.text || !second.image) {
    throw Error(ErrorCode::kEncoderFailure, "encoder factory returned null");
  }
  ModelBundle bundle;
  bundle.original = std::move(first.image);
  bundle.text = std::move(first.text);
  bundle.finetuned = std::move(second.image);
  bundle.original->set_trainable(false);
  bundle.finetuned->set_trainable(false);
  if (checkpoint) {
    bundle.finetuned->LoadState(checkpoint->image_encoder_state);
    bundle.ranking = checkpoint->ranking;
    bundle.train_dataset = checkpoint->train_dataset;
    if (checkpoint->text_rank_embeddings) {
      bundle.ranking_override = NormalizeRows(*checkpoint->text_rank_embeddings);
    }
  }
  return bundle;
}

InferenceConfig MakeInferenceConfig(const EvalSettings& settings,
                                    const DatasetManifest& dataset,
                                    const RankingPromptSpec& ranking) {
  InferenceConfig cfg;
  cfg.grid.p = settings.p_override.value_or(dataset.default_p);
  cfg.coarse_prompts = BuildFilterPrompts(
      Stage::kCoarse, settings.coarse_classes, settings.coarse_target);
  cfg.fine_prompts = BuildFilterPrompts(Stage::kFine, settings.fine_classes,
                                        settings.fine_target);
  cfg.ranking_prompts = BuildRankingPrompts(ranking);
  cfg.use_coarse_stage = settings.use_coarse_stage;
  cfg.use_fine_stage = settings.use_fine_stage;
  cfg.use_finetuned_for_ranking = settings.use_finetuned_for_ranking;
  cfg.keep_threshold = settings.keep_threshold;
  cfg.patch_side = settings.patch_side;
  cfg.max_long_side =
      settings.max_long_override.value_or(dataset.resize_max_long.value_or(0));
  Validate(cfg);
  return cfg;
}

EvalOutcome RunEval(const DatasetManifest& dataset, const ModelBundle& bundle,
                    const EvalSettings& settings,
                    const ImageProvider& provider) {
  const auto images = dataset.Select(settings.split);
  if (images.empty()) {
    throw Error(ErrorCode::kEmpty, "dataset '" + dataset.name + "' has no " +
                                       std::string(ToString(settings.split)) +
                                       " images");
  }
  const InferenceConfig cfg =
      MakeInferenceConfig(settings, dataset, bundle.ranking);
  InferenceModel model;
  model.original = bundle.original.get();
  model.finetuned = bundle.finetuned.get();
  model.text = bundle.text.get();
  if (bundle.ranking_override && settings.use_finetuned_for_ranking) {
    if (bundle.ranking_override->rows() !=
        static_cast<int>(cfg.ranking_prompts.texts.size())) {
      throw Error(ErrorCode::kShapeMismatch,
                  "tuned rank embeddings do not match the ranking prompts");
    }
    model.ranking_embeddings =
        std::make_shared<const EmbeddingMatrix>(*bundle.ranking_override);
  }

  EvalOutcome outcome;
  outcome.predictions.resize(images.size());
  internal::ParallelFor(images.size(), settings.workers, [&](std::size_t i) {
    const AnnotatedImage& img = *images[i];
    outcome.predictions[i] = Predict(provider(img.image), img.image, model, cfg);
  });

  std::vector<double> predicted, truth, seconds;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < images.size(); ++i) {
    predicted.push_back(static_cast<double>(outcome.predictions[i].total));
    truth.push_back(static_cast<double>(images[i]->ground_truth()));
    seconds.push_back(outcome.predictions[i].seconds);
    ids.push_back(images[i]->image.path);
  }
  outcome.report = ComputeMetrics(predicted, truth, ids);
  outcome.report.label = dataset.name;
  outcome.report.throughput_fps = SummarizeThroughput(seconds);
  return outcome;
}

EvalOutcome RunCrossEval(const DatasetManifest& test_dataset,
                         const ModelBundle& bundle,
                         const EvalSettings& settings,
                         std::vector<std::string>* warnings,
                         const ImageProvider& provider) {
  const std::string source =
      bundle.train_dataset.empty() ? "unknown" : bundle.train_dataset;
  if (bundle.train_dataset == test_dataset.name && warnings) {
    warnings->push_back("cross-eval: checkpoint was trained on '" + source +
                        "', the same dataset it is tested on");
  } else if (bundle.train_dataset.empty() && warnings) {
    warnings->push_back(
        "cross-eval: checkpoint does not name its training dataset");
  }
  EvalOutcome outcome = RunEval(test_dataset, bundle, settings, provider);
  outcome.report.label = source + "→" + test_dataset.name;
  return outcome;
}

std::string_view ToString(AblationKind kind) {
  switch (kind) {
    case AblationKind::kPrompts: return "prompts";
    case AblationKind::kPatchNumber: return "patch_number";
    case AblationKind::kFreeze: return "freeze";
    case AblationKind::kDataSize: return "data_size";
  }
  return "?";
}

AblationKind ParseAblationKind(std::string_view text) {
  if (text == "prompts") return AblationKind::kPrompts;
  if (text == "patch_number") return AblationKind::kPatchNumber;
  if (text == "freeze") return AblationKind::kFreeze;
  if (text == "data_size") return AblationKind::kDataSize;
  throw Error(ErrorCode::kParseError,
              "unknown ablation kind '" + std::string(text) + "'");
}

std::string AblationSetting::Label(AblationKind kind) const {
  switch (kind) {
    case AblationKind::kPrompts:
      return std::string("R0=") + (ranking.alphabetic ? "A+" : "") +
             std::to_string(ranking.r0) + ",K=" + std::to_string(ranking.k);
    case AblationKind::kPatchNumber:
      return "P=" + std::to_string(p);
    case AblationKind::kFreeze:
      return std::string("text=") + (freeze_text ? "fixed" : "tuned") +
             ",image=" + (freeze_image ? "fixed" : "tuned");
    case AblationKind::kDataSize:
      return "fraction=" + FormatDouble(fraction) + (with_extra ? "+extra" : "");
  }
  return "?";
}

double AblationSetting::X(AblationKind kind) const {
  switch (kind) {
    case AblationKind::kPrompts: return ranking.k;
    case AblationKind::kPatchNumber: return p;
    case AblationKind::kFreeze:
      return (freeze_text ? 0 : 2) + (freeze_image ? 0 : 1);
    case AblationKind::kDataSize: return fraction;
  }
  return 0.0;
}

std::vector<AblationSetting> DefaultAblationGrid(AblationKind kind) {
  std::vector<AblationSetting> grid;
  switch (kind) {
    case AblationKind::kPrompts: {
      struct Row { int r0, k; bool alpha; };
      for (Row row : {Row{20, 30, false}, Row{20, 35, false}, Row{20, 40, false},
                      Row{20, 35, true}, Row{10, 35, false}, Row{30, 35, false}}) {
        AblationSetting s;
        s.ranking.r0 = row.r0;
        s.ranking.k = row.k;
        s.ranking.alphabetic = row.alpha;
        grid.push_back(s);
      }
      break;
    }
    case AblationKind::kPatchNumber:
      for (int p : {3, 4, 5}) {
        AblationSetting s;
        s.p = p;
        grid.push_back(s);
      }
      break;
    case AblationKind::kFreeze:
      for (auto [text, image] : {std::pair{true, true}, std::pair{true, false},
                                 std::pair{false, true}, std::pair{false, false}}) {
        AblationSetting s;
        s.freeze_text = text;
        s.freeze_image = image;
        grid.push_back(s);
      }
      break;
    case AblationKind::kDataSize:
      for (double f : {0.2, 0.4, 0.6, 0.8, 1.0}) {
        AblationSetting s;
        s.fraction = f;
        grid.push_back(s);
      }
      {
        AblationSetting s;
        s.with_extra = true;
        grid.push_back(s);
      }
      break;
  }
  return grid;
}

std::vector<ImageRef> SubsampleImages(std::span<const ImageRef> images,
                                      double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "fraction must lie in (0, 1]");
  }
  if (images.empty()) return {};
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(fraction * images.size())));
  std::vector<ImageRef> out;
  for (std::size_t i = 0; i < keep; ++i) out.push_back(images[order[i]]);
  return out;
}

namespace {

Checkpoint TrainOnce(const AblationContext& ctx, const TrainConfig& cfg,
                     const std::vector<ImageRef>& refs) {
  if (refs.empty()) {
    throw Error(ErrorCode::kEmpty, "ablation has no training images");
  }
  EncoderSet encoders = ctx.factory();
  return Train(refs, *encoders.image, *encoders.text, cfg, ctx.provider)
      .checkpoint;
}

}  // namespace

AblationTable RunAblation(AblationKind kind,
                          const std::vector<AblationSetting>& grid,
                          const AblationContext& ctx) {
  AblationTable table;
  table.kind = kind;
  const std::vector<ImageRef> train_refs = ctx.train_set.ImageRefs(Split::kTrain);
  std::optional<Checkpoint> shared;
  if (kind == AblationKind::kPatchNumber && !ctx.checkpoint) {
    shared = TrainOnce(ctx, ctx.train, train_refs);
  }
  for (const AblationSetting& setting : grid) {
    TrainConfig cfg = ctx.train;
    EvalSettings eval = ctx.eval;
    Checkpoint ckpt;
    switch (kind) {
      case AblationKind::kPrompts:
        Validate(setting.ranking);
        cfg.ranking = setting.ranking;
        cfg.m = setting.ranking.n;
        ckpt = TrainOnce(ctx, cfg, train_refs);
        break;
      case AblationKind::kPatchNumber:
        if (setting.p < 1) {
          throw Error(ErrorCode::kConfigError, "patch_number setting needs P >= 1");
        }
        eval.p_override = setting.p;
        ckpt = ctx.checkpoint ? *ctx.checkpoint : *shared;
        break;
      case AblationKind::kFreeze:
        cfg.freeze_text = setting.freeze_text;
        cfg.freeze_image = setting.freeze_image;
        ckpt = TrainOnce(ctx, cfg, train_refs);
        break;
      case AblationKind::kDataSize: {
        std::vector<ImageRef> refs =
            SubsampleImages(train_refs, setting.fraction, cfg.seed);
        if (setting.with_extra) {
          if (!ctx.extra_set) {
            throw Error(ErrorCode::kConfigError,
                        "data_size setting with extra data needs extra_data");
          }
          for (const ImageRef& r : ctx.extra_set->ImageRefs(Split::kTrain)) {
            refs.push_back(r);
          }
        }
        ckpt = TrainOnce(ctx, cfg, refs);
        break;
      }
    }
    const ModelBundle bundle = MakeBundle(ctx.factory, &ckpt);
    AblationRow row;
    row.setting = setting;
    row.label = setting.Label(kind);
    row.x = setting.X(kind);
    row.report = RunEval(ctx.test_set, bundle, eval, ctx.provider).report;
    row.report.label = row.label;
    if (ctx.log) {
      *ctx.log << "ablation " << ToString(kind) << " " << row.label
               << ": mae=" << row.report.mae << " mse=" << row.report.mse
               << "\n";
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string AblationTableToJson(const AblationTable& table) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(ToString(table.kind));
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const AblationRow& row : table.rows) {
    const AblationSetting& s = row.setting;
    nlohmann::ordered_json r;
    r["label"] = row.label;
    r["x"] = row.x;
    r["n_images"] = row.report.n_images;
    r["mae"] = row.report.mae;
    r["mse"] = row.report.mse;
    r["setting"] = {{"r0", s.ranking.r0},
                    {"k", s.ranking.k},
                    {"n", s.ranking.n},
                    {"alphabetic", s.ranking.alphabetic},
                    {"template", s.ranking.template_text},
                    {"p", s.p},
                    {"freeze_text", s.freeze_text},
                    {"freeze_image", s.freeze_image},
                    {"fraction", s.fraction},
                    {"with_extra", s.with_extra}};
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

std::string AblationTableToCsv(const AblationTable& table) {
  std::ostringstream out;
  out << "kind,label,x,n_images,mae,mse\n";
  for (const AblationRow& row : table.rows) {
    out << ToString(table.kind) << ",\"" << row.label << "\","
        << FormatDouble(row.x) << "," << row.report.n_images << ","
        << FormatDouble(row.report.mae) << "," << FormatDouble(row.report.mse)
        << "\n";
  }
  return out.str();
}

AblationTable AblationTableFromJson(const std::string& text) {
  AblationTable table;
  try {
    const auto j = nlohmann::json::parse(text);
    table.kind = ParseAblationKind(j.at("kind").get<std::string>());
    for (const auto& r : j.at("rows")) {
      AblationRow row;
      row.label = r.at("label").get<std::string>();
      row.x = r.at("x").get<double>();
      row.report.label = row.label;
      row.report.n_images = r.value("n_images", 0);
      row.report.mae = r.at("mae").get<double>();
      row.report.mse = r.at("mse").get<double>();
      if (r.contains("setting")) {
        const auto& s = r["setting"];
        row.setting.ranking.r0 = s.value("r0", 20);
        row.setting.ranking.k = s.value("k", 35);
        row.setting.ranking.n = s.value("n", 6);
        row.setting.ranking.alphabetic = s.value("alphabetic", false);
        row.setting.ranking.template_text =
            s.value("template", std::string(kRankingTemplate));
        row.setting.p = s.value("p", 0);
        row.setting.freeze_text = s.value("freeze_text", true);
        row.setting.freeze_image = s.value("freeze_image", false);
        row.setting.fraction = s.value("fraction", 1.0);
        row.setting.with_extra = s.value("with_extra", false);
      }
      table.rows.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError,
                std::string("bad ablation table: ") + e.what());
  }
  return table;
}

}  // namespace crowdclip
