#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crowdclip/embedding.hpp"
#include "crowdclip/prompts.hpp"

namespace crowdclip {

inline constexpr int kCheckpointFormatVersion = 1;

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double violated_pair_rate = 0.0;
  double wall_time = 0.0;  // seconds since training started
};

// On disk a checkpoint is a directory:
//   image_encoder.bin  opaque encoder state
//   text_ranking.bin   tuned rank embeddings, only when the text side trained
//   manifest.json      everything else below
struct Checkpoint {
  std::string encoder_name;
  std::string backend;
  std::vector<std::uint8_t> image_encoder_state;
  std::optional<EmbeddingMatrix> text_rank_embeddings;  // raw rows

  RankingPromptSpec ranking;
  std::string train_dataset;
  int epochs_completed = 0;
  std::string config_hash;
  double initial_loss = 0.0;
  std::vector<double> loss_history;  // mean loss per epoch
  std::vector<double> violated_history;
  // Flat key/value record of the producing configuration (optimizer
  // hyperparameters, batch size, pair set, freeze flags, seed, ...).
  std::vector<std::pair<std::string, std::string>> settings;
};

void SaveCheckpoint(const Checkpoint& checkpoint,
                    const std::filesystem::path& dir);
Checkpoint LoadCheckpoint(const std::filesystem::path& dir);

std::vector<std::uint8_t> SerializeEmbeddings(const EmbeddingMatrix& m);
EmbeddingMatrix DeserializeEmbeddings(std::span<const std::uint8_t> blob);

std::vector<std::uint8_t> ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path,
                    std::span<const std::uint8_t> bytes);

}  // namespace crowdclip
