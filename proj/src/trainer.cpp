#include "crowdclip/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <optional>
#include <random>

#include "json.hpp"

#include "crowdclip/error.hpp"
#include "crowdclip/hash.hpp"
#include "format.hpp"
#include "parallel.hpp"

namespace crowdclip {

using internal::FormatBool;
using internal::FormatDouble;

void Validate(const TrainConfig& cfg) {
  Validate(cfg.ranking);
  if (cfg.m < 2) throw Error(ErrorCode::kConfigError, "train.m must be >= 2");
  if (cfg.m != cfg.ranking.n) {
    throw Error(ErrorCode::kConfigError,
                "train.m (" + std::to_string(cfg.m) +
                    ") must equal ranking.n (" + std::to_string(cfg.ranking.n) +
                    ") so the similarity matrix is square");
  }
  if (cfg.epochs < 1) {
    throw Error(ErrorCode::kConfigError, "train.epochs must be >= 1");
  }
  if (!(cfg.learning_rate > 0.0)) {
    throw Error(ErrorCode::kConfigError, "train.learning_rate must be > 0");
  }
  if (cfg.batch_pyramids < 1) {
    throw Error(ErrorCode::kConfigError, "train.batch_pyramids must be >= 1");
  }
  if (!(cfg.min_ratio > 0.0 && cfg.min_ratio < 1.0)) {
    throw Error(ErrorCode::kConfigError, "train.min_ratio must lie in (0, 1)");
  }
  if (cfg.patch_side < 1) {
    throw Error(ErrorCode::kConfigError, "train.patch_side must be >= 1");
  }
}

std::vector<std::pair<std::string, std::string>> DescribeConfig(
    const TrainConfig& cfg) {
  return {
      {"m", std::to_string(cfg.m)},
      {"min_ratio", FormatDouble(cfg.min_ratio)},
      {"patch_side", std::to_string(cfg.patch_side)},
      {"ranking.r0", std::to_string(cfg.ranking.r0)},
      {"ranking.k", std::to_string(cfg.ranking.k)},
      {"ranking.n", std::to_string(cfg.ranking.n)},
      {"ranking.template", cfg.ranking.template_text},
      {"ranking.alphabetic", FormatBool(cfg.ranking.alphabetic)},
      {"epochs", std::to_string(cfg.epochs)},
      {"optimizer", "RAdam"},
      {"learning_rate", FormatDouble(cfg.learning_rate)},
      {"beta1", FormatDouble(cfg.beta1)},
      {"beta2", FormatDouble(cfg.beta2)},
      {"adam_epsilon", FormatDouble(cfg.adam_epsilon)},
      {"weight_decay", FormatDouble(cfg.weight_decay)},
      {"batch_pyramids", std::to_string(cfg.batch_pyramids)},
      {"freeze_text", FormatBool(cfg.freeze_text)},
      {"freeze_image", FormatBool(cfg.freeze_image)},
      {"pair_set", std::string(ToString(cfg.pair_set))},
      {"reduction", "mean_pairs_then_mean_batch"},
      {"shuffle", FormatBool(cfg.shuffle)},
      {"seed", std::to_string(cfg.seed)},
      {"max_long_side", std::to_string(cfg.max_long_side)},
      {"dataset", cfg.dataset_name},
  };
}

std::string ConfigHash(const TrainConfig& cfg) {
  std::uint64_t h = kFnvOffset;
  for (const auto& [key, value] : DescribeConfig(cfg)) {
    h = Fnv1a(key, h);
    h = Fnv1a("=", h);
    h = Fnv1a(value, h);
    h = Fnv1a("\n", h);
  }
  return HexDigest(h);
}

Image LoadFromDisk(const ImageRef& ref) { return LoadImage(ref.path); }

std::vector<Image> PyramidPatches(const Image& image, const ImageRef& ref,
                                  const TrainConfig& cfg) {
  Image pixels =
      cfg.max_long_side > 0 ? ApplyLongSideCap(image, cfg.max_long_side) : image;
  const ImageRef sized{ref.path, pixels.width(), pixels.height()};
  const PatchPyramid pyramid =
      BuildPyramid(sized, cfg.m, cfg.min_ratio, cfg.patch_side);
  std::vector<Image> patches;
  patches.reserve(pyramid.crops.size());
  for (const SquareCrop& crop : pyramid.crops) {
    patches.push_back(ExtractAndResize(pixels, crop, pyramid.target_side));
  }
  return patches;
}

std::string EncodeTrainingLogLine(const EpochRecord& record) {
  nlohmann::ordered_json j;
  j["epoch"] = record.epoch;
  j["mean_loss"] = record.mean_loss;
  j["violated_pair_rate"] = record.violated_pair_rate;
  j["wall_time"] = record.wall_time;
  return j.dump();
}

namespace {

class PatchStore {
 public:
  PatchStore(std::span<const ImageRef> images, const TrainConfig& cfg,
             const ImageProvider& provider)
      : images_(images), cfg_(cfg), provider_(provider),
        cache_(cfg.cache_patches ? images.size() : 0) {}

  // Patch stacks for the listed image indices, loaded on cfg.workers threads.
  std::vector<std::vector<Image>> Fetch(std::span<const std::size_t> indices) {
    std::vector<std::vector<Image>> out(indices.size());
    internal::ParallelFor(indices.size(), cfg_.workers, [&](std::size_t k) {
      const std::size_t idx = indices[k];
      if (cfg_.cache_patches && cache_[idx]) {
        out[k] = *cache_[idx];
        return;
      }
      out[k] = PyramidPatches(provider_(images_[idx]), images_[idx], cfg_);
      if (cfg_.cache_patches) cache_[idx] = out[k];
    });
    return out;
  }

 private:
  std::span<const ImageRef> images_;
  const TrainConfig& cfg_;
  const ImageProvider& provider_;
  std::vector<std::optional<std::vector<Image>>> cache_;
};

RankingLossReport MeanLoss(PatchStore& store, std::size_t n,
                           const ImageEncoder& encoder,
                           const EmbeddingMatrix& text, PairSet pairs) {
  RankingLossReport total;
  double sum = 0.0;
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  const auto stacks = store.Fetch(all);
  for (const auto& patches : stacks) {
    const auto report =
        RankingLoss(Similarity(encoder.Encode(patches), text), pairs);
    sum += report.loss;
    total.violated_pairs += report.violated_pairs;
    total.total_pairs += report.total_pairs;
  }
  total.loss = sum / static_cast<double>(n);
  return total;
}

}  // namespace

RankingLossReport EvaluateRankingLoss(std::span<const ImageRef> images,
                                      const ImageEncoder& image_encoder,
                                      const TextEncoder& text_encoder,
                                      const TrainConfig& cfg,
                                      const ImageProvider& provider) {
  Validate(cfg);
  if (images.empty()) {
    throw Error(ErrorCode::kEmptyStream, "no training images");
  }
  TrainConfig no_cache = cfg;
  no_cache.cache_patches = false;
  PatchStore store(images, no_cache, provider);
  const PromptSet prompts = BuildRankingPrompts(cfg.ranking);
  return MeanLoss(store, images.size(), image_encoder,
                  text_encoder.Encode(prompts.texts), cfg.pair_set);
}

TrainResult Train(std::span<const ImageRef> images,
                  TrainableImageEncoder& image_encoder,
                  const TextEncoder& text_encoder, const TrainConfig& cfg,
                  const ImageProvider& provider,
                  const EpochObserver& observer) {
  Validate(cfg);
  if (images.empty()) {
    throw Error(ErrorCode::kEmptyStream, "no training images");
  }
  if (image_encoder.dim() != text_encoder.dim()) {
    throw Error(ErrorCode::kDimMismatch,
                "image and text encoders disagree on embedding dim");
  }
  const auto start = std::chrono::steady_clock::now();
  const bool train_image = !cfg.freeze_image;
  const bool train_text = !cfg.freeze_text;
  image_encoder.set_trainable(train_image);

  const PromptSet prompts = BuildRankingPrompts(cfg.ranking);
  EmbeddingMatrix text_raw = text_encoder.EncodeRaw(prompts.texts);

  const std::size_t num_params = image_encoder.num_parameters();
  RAdamOptions opt;
  opt.learning_rate = cfg.learning_rate;
  opt.beta1 = cfg.beta1;
  opt.beta2 = cfg.beta2;
  opt.epsilon = cfg.adam_epsilon;
  opt.weight_decay = cfg.weight_decay;
  RAdam image_opt(num_params, opt);
  RAdam text_opt(text_raw.values().size(), opt);

  PatchStore store(images, cfg, provider);
  const std::size_t n = images.size();

  TrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  ckpt.initial_loss =
      MeanLoss(store, n, image_encoder, NormalizeRows(text_raw), cfg.pair_set)
          .loss;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    long long violated = 0;
    long long pairs = 0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_pyramids) {
      const std::size_t end =
          std::min(n, begin + static_cast<std::size_t>(cfg.batch_pyramids));
      const auto batch = std::span(order).subspan(begin, end - begin);
      const auto stacks = store.Fetch(batch);
      const double inv_batch = 1.0 / static_cast<double>(batch.size());
      const EmbeddingMatrix text_norm = NormalizeRows(text_raw);

      std::vector<double> image_grad(num_params, 0.0);
      EmbeddingMatrix text_grad(text_raw.rows(), text_raw.dim());
      for (const auto& patches : stacks) {
        const EmbeddingMatrix raw = image_encoder.EncodeRaw(patches);
        const auto grads = RankingLossWithGradients(NormalizeRows(raw),
                                                    text_norm, cfg.pair_set);
        loss_sum += grads.report.loss;
        violated += grads.report.violated_pairs;
        pairs += grads.report.total_pairs;
        if (train_image) {
          const auto g = image_encoder.Backward(
              patches, BackpropNormalize(raw, grads.image));
          for (std::size_t p = 0; p < num_params; ++p) {
            image_grad[p] += g[p] * inv_batch;
          }
        }
        if (train_text) {
          const auto g = BackpropNormalize(text_raw, grads.text);
          auto& dst = text_grad.mutable_values();
          for (std::size_t p = 0; p < dst.size(); ++p) {
            dst[p] += g.values()[p] * inv_batch;
          }
        }
      }
      if (train_image) {
        std::vector<double> params = image_encoder.parameters();
        image_opt.Step(params, image_grad);
        image_encoder.set_parameters(params);
      }
      if (train_text) {
        text_opt.Step(text_raw.mutable_values(), text_grad.values());
      }
    }
    EpochRecord record;
    record.epoch = epoch;
    record.mean_loss = loss_sum / static_cast<double>(n);
    record.violated_pair_rate =
        pairs > 0 ? static_cast<double>(violated) / pairs : 0.0;
    record.wall_time = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - start)
                           .count();
    result.log.push_back(record);
    ckpt.loss_history.push_back(record.mean_loss);
    ckpt.violated_history.push_back(record.violated_pair_rate);
    if (observer) observer(record);
  }

  ckpt.encoder_name = image_encoder.name();
  ckpt.backend = std::string(ToString(image_encoder.backend()));
  ckpt.image_encoder_state = image_encoder.SerializeState();
  if (train_text) ckpt.text_rank_embeddings = text_raw;
  ckpt.ranking = cfg.ranking;
  ckpt.train_dataset = cfg.dataset_name;
  ckpt.epochs_completed = cfg.epochs;
  ckpt.config_hash = ConfigHash(cfg);
  ckpt.settings = DescribeConfig(cfg);
  return result;
}

}  // namespace crowdclip
