#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "crowdclip/experiments.hpp"
#include "crowdclip/trainer.hpp"

namespace crowdclip {

struct DatasetEntry {
  std::string manifest;
  std::optional<std::string> name;
  std::optional<int> p;
  std::optional<int> resize_max_long;
};

struct BackendConfig {
  std::string kind = "mock";  // mock | pretrained
  std::uint64_t mock_seed = 0;
  int mock_dim = 32;
  double mock_gain = 1.0;
  double mock_offset = 0.0;
  std::string image_weights;  // pretrained
  std::string text_table;     // pretrained
};

struct AblationConfig {
  std::string kind = "patch_number";
  std::vector<AblationSetting> grid;  // empty: the default grid for kind
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "runs/default";
  BackendConfig backend;
  std::optional<DatasetEntry> train_data;
  std::optional<DatasetEntry> test_data;
  std::optional<DatasetEntry> extra_data;
  std::string checkpoint;
  TrainConfig train;
  EvalSettings eval;
  AblationConfig ablation;
  int workers = 1;
  std::string source;  // config file path, empty for built-in defaults
};

using Override = std::pair<std::string, std::string>;

// Precedence: overrides > file > built-in defaults.  Unknown keys, wrong
// types and out-of-range values raise kConfigError before any work starts.
RunConfig LoadRunConfig(const std::optional<std::filesystem::path>& path,
                        const std::vector<Override>& overrides = {});

// "a.b.c=value" -> {"a.b.c", "value"}
Override ParseOverride(const std::string& text);

// The shipped defaults as an annotated YAML document.
std::string DefaultConfigYaml();

// Canonical YAML of the resolved configuration (used for the run manifest).
std::string ResolvedConfigYaml(const RunConfig& cfg);

EncoderFactory MakeEncoderFactory(const RunConfig& cfg);

DatasetManifest LoadDataset(const DatasetEntry& entry);

}  // namespace crowdclip
