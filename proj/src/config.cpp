#include "crowdclip/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "crowdclip/error.hpp"
#include "crowdclip/linear_encoders.hpp"
#include "crowdclip/mock_encoders.hpp"

namespace crowdclip {
namespace fs = std::filesystem;
namespace {

const std::set<std::string> kDatasetKeys = {"manifest", "name", "p",
                                            "resize_max_long"};
const std::set<std::string> kDatasetSlots = {"train", "test", "extra"};

[[noreturn]] void Fail(const std::string& message) {
  throw Error(ErrorCode::kConfigError, message);
}

YAML::Node Null() { return YAML::Node(YAML::NodeType::Null); }

template <typename T>
YAML::Node Optional(const std::optional<T>& v) {
  return v ? YAML::Node(*v) : Null();
}

YAML::Node DatasetNode(const std::optional<DatasetEntry>& entry) {
  if (!entry) return Null();
  YAML::Node n;
  n["manifest"] = entry->manifest;
  n["name"] = Optional(entry->name);
  n["p"] = Optional(entry->p);
  n["resize_max_long"] = Optional(entry->resize_max_long);
  return n;
}

YAML::Node SettingNode(const AblationSetting& s) {
  YAML::Node n;
  n["r0"] = s.ranking.r0;
  n["k"] = s.ranking.k;
  n["n"] = s.ranking.n;
  n["alphabetic"] = s.ranking.alphabetic;
  n["p"] = s.p;
  n["freeze_text"] = s.freeze_text;
  n["freeze_image"] = s.freeze_image;
  n["fraction"] = s.fraction;
  n["with_extra"] = s.with_extra;
  return n;
}

YAML::Node ToNode(const RunConfig& cfg) {
  YAML::Node root;
  root["seed"] = cfg.seed;
  root["out_dir"] = cfg.out_dir;
  root["workers"] = cfg.workers;
  root["checkpoint"] = cfg.checkpoint;

  YAML::Node backend;
  backend["kind"] = cfg.backend.kind;
  backend["mock_seed"] = cfg.backend.mock_seed;
  backend["mock_dim"] = cfg.backend.mock_dim;
  backend["mock_gain"] = cfg.backend.mock_gain;
  backend["mock_offset"] = cfg.backend.mock_offset;
  backend["image_weights"] = cfg.backend.image_weights;
  backend["text_table"] = cfg.backend.text_table;
  root["backend"] = backend;

  YAML::Node data;
  data["train"] = DatasetNode(cfg.train_data);
  data["test"] = DatasetNode(cfg.test_data);
  data["extra"] = DatasetNode(cfg.extra_data);
  root["data"] = data;

  const TrainConfig& t = cfg.train;
  YAML::Node ranking;
  ranking["r0"] = t.ranking.r0;
  ranking["k"] = t.ranking.k;
  ranking["n"] = t.ranking.n;
  ranking["template"] = t.ranking.template_text;
  ranking["alphabetic"] = t.ranking.alphabetic;
  root["ranking"] = ranking;

  YAML::Node train;
  train["m"] = t.m;
  train["min_ratio"] = t.min_ratio;
  train["patch_side"] = t.patch_side;
  train["epochs"] = t.epochs;
  train["learning_rate"] = t.learning_rate;
  train["beta1"] = t.beta1;
  train["beta2"] = t.beta2;
  train["adam_epsilon"] = t.adam_epsilon;
  train["weight_decay"] = t.weight_decay;
  train["batch_pyramids"] = t.batch_pyramids;
  train["freeze_text"] = t.freeze_text;
  train["freeze_image"] = t.freeze_image;
  train["pair_set"] = std::string(ToString(t.pair_set));
  train["shuffle"] = t.shuffle;
  train["max_long_side"] = t.max_long_side > 0 ? YAML::Node(t.max_long_side)
                                               : Null();
  train["cache_patches"] = t.cache_patches;
  root["train"] = train;

  const EvalSettings& e = cfg.eval;
  YAML::Node eval;
  eval["coarse_classes"] = e.coarse_classes;
  eval["coarse_target"] = e.coarse_target;
  eval["fine_classes"] = e.fine_classes;
  eval["fine_target"] = e.fine_target;
  eval["use_coarse_stage"] = e.use_coarse_stage;
  eval["use_fine_stage"] = e.use_fine_stage;
  eval["use_finetuned_for_ranking"] = e.use_finetuned_for_ranking;
  eval["keep_threshold"] = Optional(e.keep_threshold);
  eval["patch_side"] = e.patch_side;
  eval["p"] = Optional(e.p_override);
  eval["max_long_side"] = Optional(e.max_long_override);
  eval["split"] = std::string(ToString(e.split));
  root["eval"] = eval;

  YAML::Node ablation;
  ablation["kind"] = cfg.ablation.kind;
  YAML::Node grid(YAML::NodeType::Sequence);
  for (const AblationSetting& s : cfg.ablation.grid) grid.push_back(SettingNode(s));
  ablation["grid"] = grid;
  root["ablation"] = ablation;
  return root;
}

// Keys of the defaults document that hold nested maps.
bool IsSection(const YAML::Node& defaults, const std::string& key) {
  const YAML::Node child = defaults[key];
  return child && child.IsMap();
}

void Merge(YAML::Node target, const YAML::Node& source,
           const std::string& prefix) {
  if (!source.IsMap()) Fail("config section '" + prefix + "' must be a map");
  for (const auto& item : source) {
    const std::string key = item.first.as<std::string>();
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (prefix == "data") {
      if (!kDatasetSlots.count(key)) Fail("unknown config key '" + path + "'");
      if (item.second.IsNull()) {
        target[key] = Null();
        continue;
      }
      if (!item.second.IsMap()) Fail("'" + path + "' must be a map");
      for (const auto& sub : item.second) {
        const std::string sub_key = sub.first.as<std::string>();
        if (!kDatasetKeys.count(sub_key)) {
          Fail("unknown config key '" + path + "." + sub_key + "'");
        }
      }
      target[key] = YAML::Clone(item.second);
      continue;
    }
    if (!target[key]) Fail("unknown config key '" + path + "'");
    if (IsSection(target, key)) {
      Merge(target[key], item.second, path);
    } else {
      target[key] = YAML::Clone(item.second);
    }
  }
}

void ApplyOverride(YAML::Node root, const Override& ov) {
  std::vector<std::string> parts;
  std::stringstream ss(ov.first);
  for (std::string part; std::getline(ss, part, '.');) parts.push_back(part);
  if (parts.empty()) Fail("empty override key");
  YAML::Node value;
  try {
    value.reset(ov.second.empty() ? Null() : YAML::Load(ov.second));
  } catch (const YAML::Exception& e) {
    Fail("override '" + ov.first + "': " + e.what());
  }
  // Build a one-path document and merge it so the same key checks apply.
  YAML::Node patch;
  patch.reset(value);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    YAML::Node wrap;
    wrap[*it] = patch;
    patch.reset(wrap);
  }
  if (parts.size() >= 2 && parts[0] == "data" && root["data"][parts[1]] &&
      root["data"][parts[1]].IsMap() && parts.size() == 3) {
    // Extend an existing dataset entry instead of replacing it.
    YAML::Node merged = YAML::Clone(root["data"][parts[1]]);
    merged[parts[2]] = value;
    YAML::Node fresh;
    fresh["data"][parts[1]] = merged;
    patch.reset(fresh);
  }
  Merge(root, patch, "");
}

class Reader {
 public:
  explicit Reader(YAML::Node root) : root_(std::move(root)) {}

  YAML::Node At(const std::string& path) const {
    YAML::Node node = YAML::Clone(root_);
    std::stringstream ss(path);
    for (std::string part; std::getline(ss, part, '.');) {
      if (!node.IsMap()) return Null();
      const YAML::Node child = static_cast<const YAML::Node&>(node)[part];
      if (!child) return Null();
      node.reset(child);
    }
    return node;
  }

  template <typename T>
  T Get(const std::string& path) const {
    const YAML::Node n = At(path);
    if (!n || n.IsNull()) Fail("config key '" + path + "' is required");
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      Fail("config key '" + path + "' has the wrong type");
    }
  }

  template <typename T>
  std::optional<T> GetOptional(const std::string& path) const {
    const YAML::Node n = At(path);
    if (!n || n.IsNull()) return std::nullopt;
    return Get<T>(path);
  }

 private:
  YAML::Node root_;
};

std::optional<DatasetEntry> ReadDataset(const Reader& r, const std::string& slot) {
  const std::string base = "data." + slot;
  const YAML::Node n = r.At(base);
  if (!n || n.IsNull()) return std::nullopt;
  DatasetEntry e;
  e.manifest = r.Get<std::string>(base + ".manifest");
  e.name = r.GetOptional<std::string>(base + ".name");
  e.p = r.GetOptional<int>(base + ".p");
  e.resize_max_long = r.GetOptional<int>(base + ".resize_max_long");
  return e;
}

AblationSetting ReadSetting(const YAML::Node& n, int index) {
  const std::set<std::string> known = {"r0", "k", "n", "alphabetic", "template",
                                       "p", "freeze_text", "freeze_image",
                                       "fraction", "with_extra"};
  const std::string where = "ablation.grid[" + std::to_string(index) + "]";
  if (!n.IsMap()) Fail(where + " must be a map");
  AblationSetting s;
  try {
    for (const auto& item : n) {
      const std::string key = item.first.as<std::string>();
      if (!known.count(key)) Fail("unknown config key '" + where + "." + key + "'");
    }
    if (n["r0"]) s.ranking.r0 = n["r0"].as<int>();
    if (n["k"]) s.ranking.k = n["k"].as<int>();
    if (n["n"]) s.ranking.n = n["n"].as<int>();
    if (n["alphabetic"]) s.ranking.alphabetic = n["alphabetic"].as<bool>();
    if (n["template"]) s.ranking.template_text = n["template"].as<std::string>();
    if (n["p"]) s.p = n["p"].as<int>();
    if (n["freeze_text"]) s.freeze_text = n["freeze_text"].as<bool>();
    if (n["freeze_image"]) s.freeze_image = n["freeze_image"].as<bool>();
    if (n["fraction"]) s.fraction = n["fraction"].as<double>();
    if (n["with_extra"]) s.with_extra = n["with_extra"].as<bool>();
  } catch (const YAML::Exception&) {
    Fail(where + " has a value of the wrong type");
  }
  return s;
}

RunConfig FromNode(const YAML::Node& root) {
  const Reader r(root);
  RunConfig cfg;
  cfg.seed = r.Get<std::uint64_t>("seed");
  cfg.out_dir = r.Get<std::string>("out_dir");
  cfg.workers = r.Get<int>("workers");
  cfg.checkpoint = r.GetOptional<std::string>("checkpoint").value_or("");

  BackendConfig& b = cfg.backend;
  b.kind = r.Get<std::string>("backend.kind");
  b.mock_seed = r.Get<std::uint64_t>("backend.mock_seed");
  b.mock_dim = r.Get<int>("backend.mock_dim");
  b.mock_gain = r.Get<double>("backend.mock_gain");
  b.mock_offset = r.Get<double>("backend.mock_offset");
  b.image_weights = r.GetOptional<std::string>("backend.image_weights").value_or("");
  b.text_table = r.GetOptional<std::string>("backend.text_table").value_or("");

  cfg.train_data = ReadDataset(r, "train");
  cfg.test_data = ReadDataset(r, "test");
  cfg.extra_data = ReadDataset(r, "extra");

  TrainConfig& t = cfg.train;
  t.ranking.r0 = r.Get<int>("ranking.r0");
  t.ranking.k = r.Get<int>("ranking.k");
  t.ranking.n = r.Get<int>("ranking.n");
  t.ranking.template_text = r.Get<std::string>("ranking.template");
  t.ranking.alphabetic = r.Get<bool>("ranking.alphabetic");
  t.m = r.Get<int>("train.m");
  t.min_ratio = r.Get<double>("train.min_ratio");
  t.patch_side = r.Get<int>("train.patch_side");
  t.epochs = r.Get<int>("train.epochs");
  t.learning_rate = r.Get<double>("train.learning_rate");
  t.beta1 = r.Get<double>("train.beta1");
  t.beta2 = r.Get<double>("train.beta2");
  t.adam_epsilon = r.Get<double>("train.adam_epsilon");
  t.weight_decay = r.Get<double>("train.weight_decay");
  t.batch_pyramids = r.Get<int>("train.batch_pyramids");
  t.freeze_text = r.Get<bool>("train.freeze_text");
  t.freeze_image = r.Get<bool>("train.freeze_image");
  try {
    t.pair_set = ParsePairSet(r.Get<std::string>("train.pair_set"));
  } catch (const Error& e) {
    Fail(std::string("train.pair_set: ") + e.what());
  }
  t.shuffle = r.Get<bool>("train.shuffle");
  t.max_long_side = r.GetOptional<int>("train.max_long_side").value_or(0);
  t.cache_patches = r.Get<bool>("train.cache_patches");
  t.seed = cfg.seed;
  t.workers = cfg.workers;

  EvalSettings& e = cfg.eval;
  e.coarse_classes = r.Get<std::vector<std::string>>("eval.coarse_classes");
  e.coarse_target = r.Get<std::string>("eval.coarse_target");
  e.fine_classes = r.Get<std::vector<std::string>>("eval.fine_classes");
  e.fine_target = r.Get<std::string>("eval.fine_target");
  e.use_coarse_stage = r.Get<bool>("eval.use_coarse_stage");
  e.use_fine_stage = r.Get<bool>("eval.use_fine_stage");
  e.use_finetuned_for_ranking = r.Get<bool>("eval.use_finetuned_for_ranking");
  e.keep_threshold = r.GetOptional<double>("eval.keep_threshold");
  e.patch_side = r.Get<int>("eval.patch_side");
  e.p_override = r.GetOptional<int>("eval.p");
  e.max_long_override = r.GetOptional<int>("eval.max_long_side");
  try {
    e.split = ParseSplit(r.Get<std::string>("eval.split"));
  } catch (const Error& err) {
    Fail(std::string("eval.split: ") + err.what());
  }
  e.workers = cfg.workers;

  cfg.ablation.kind = r.Get<std::string>("ablation.kind");
  const YAML::Node grid = r.At("ablation.grid");
  if (grid && !grid.IsNull()) {
    if (!grid.IsSequence()) Fail("ablation.grid must be a list");
    for (std::size_t i = 0; i < grid.size(); ++i) {
      cfg.ablation.grid.push_back(ReadSetting(grid[i], static_cast<int>(i)));
    }
  }
  return cfg;
}

void ValidateRunConfig(const RunConfig& cfg) {
  if (cfg.workers < 1) Fail("workers must be >= 1");
  if (cfg.out_dir.empty()) Fail("out_dir must not be empty");
  if (cfg.backend.kind != "mock" && cfg.backend.kind != "pretrained") {
    Fail("backend.kind must be mock or pretrained, got '" + cfg.backend.kind + "'");
  }
  if (cfg.backend.kind == "mock" && cfg.backend.mock_dim < 16) {
    Fail("backend.mock_dim must be >= 16");
  }
  if (cfg.backend.kind == "pretrained" &&
      (cfg.backend.image_weights.empty() || cfg.backend.text_table.empty())) {
    Fail("pretrained backend needs backend.image_weights and backend.text_table");
  }
  try {
    Validate(cfg.train);
  } catch (const Error& e) {
    Fail(e.what());
  }
  if (cfg.eval.p_override && *cfg.eval.p_override < 1) Fail("eval.p must be >= 1");
  if (cfg.eval.keep_threshold &&
      !(*cfg.eval.keep_threshold > 0 && *cfg.eval.keep_threshold <= 1)) {
    Fail("eval.keep_threshold must lie in (0, 1]");
  }
  try {
    ParseAblationKind(cfg.ablation.kind);
    BuildFilterPrompts(Stage::kCoarse, cfg.eval.coarse_classes,
                       cfg.eval.coarse_target);
    BuildFilterPrompts(Stage::kFine, cfg.eval.fine_classes, cfg.eval.fine_target);
  } catch (const Error& e) {
    Fail(e.what());
  }
}

}  // namespace

Override ParseOverride(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    Fail("override must look like key.path=value, got '" + text + "'");
  }
  return {text.substr(0, eq), text.substr(eq + 1)};
}

RunConfig LoadRunConfig(const std::optional<fs::path>& path,
                        const std::vector<Override>& overrides) {
  YAML::Node root = ToNode(RunConfig{});
  if (path) {
    if (!fs::exists(*path)) Fail("config file not found: " + path->string());
    YAML::Node file;
    try {
      file = YAML::LoadFile(path->string());
    } catch (const YAML::Exception& e) {
      Fail("cannot parse " + path->string() + ": " + e.what());
    }
    if (file && !file.IsNull()) Merge(root, file, "");
  }
  for (const Override& ov : overrides) ApplyOverride(root, ov);
  RunConfig cfg = FromNode(root);
  cfg.source = path ? path->string() : "";
  ValidateRunConfig(cfg);
  return cfg;
}

std::string ResolvedConfigYaml(const RunConfig& cfg) {
  YAML::Emitter out;
  out << ToNode(cfg);
  return std::string(out.c_str()) + "\n";
}

std::string DefaultConfigYaml() {
  return R"(# Shipped defaults.  Every key may be overridden with --set key.path=value.
seed: 0
out_dir: runs/default
# Worker threads for image decoding and per-image prediction.
workers: 1
# Fine-tuned checkpoint directory; empty means zero-shot (E_f = E_o).
checkpoint: ""

backend:
  kind: mock          # mock | pretrained
  mock_seed: 0
  mock_dim: 32
  mock_gain: 1
  mock_offset: 0
  image_weights: ""   # pretrained: image encoder state blob
  text_table: ""      # pretrained: exported prompt embedding table (JSON)

# Dataset manifests (line-delimited JSON).  Each entry:
#   {manifest: path, name: optional, p: optional, resize_max_long: optional}
data:
  train: ~
  test: ~
  extra: ~

# Rank prompts: counts r0 + j * k for j < n.
ranking:
  r0: 20
  k: 35
  n: 6
  template: "There are {} persons in the crowd"
  alphabetic: false

train:
  m: 6                # pyramid size; must equal ranking.n
  min_ratio: 0.5
  patch_side: 224
  epochs: 100
  learning_rate: 0.0001
  beta1: 0.9
  beta2: 0.999
  adam_epsilon: 1e-08
  weight_decay: 0
  batch_pyramids: 8
  freeze_text: true
  freeze_image: false
  pair_set: all_pairs # all_pairs | adjacent
  shuffle: true
  max_long_side: ~    # null: dataset policy
  cache_patches: true

eval:
  coarse_classes: [crowd, tree, car, building, road, sky]
  coarse_target: crowd
  fine_classes: [human heads, human bodies, human legs]
  fine_target: human heads
  use_coarse_stage: true
  use_fine_stage: true
  use_finetuned_for_ranking: true
  keep_threshold: ~   # null: argmax keep rule
  patch_side: 224
  p: ~                # null: dataset policy (4 for UCF-QNRF / UCF_CC_50, else 3)
  max_long_side: ~    # null: dataset policy (2048 for UCF-QNRF / JHU-Crowd++)
  split: test

ablation:
  kind: patch_number  # prompts | patch_number | freeze | data_size
  grid: []            # empty: the standard grid for the kind
)";
}

EncoderFactory MakeEncoderFactory(const RunConfig& cfg) {
  const BackendConfig b = cfg.backend;
  if (b.kind == "mock") {
    return [b] {
      MockSpaceOptions options;
      options.dim = b.mock_dim;
      MockEncoderPair pair = MakeMockCountEncoders(b.mock_seed, options);
      const double params[] = {b.mock_gain, b.mock_offset};
      pair.image->set_parameters(params);
      EncoderSet set;
      set.image = std::move(pair.image);
      set.text = std::move(pair.text);
      return set;
    };
  }
  if (!fs::exists(b.image_weights)) {
    Fail("image weights not found: " + b.image_weights);
  }
  if (!fs::exists(b.text_table)) Fail("text table not found: " + b.text_table);
  std::shared_ptr<const TrainableImageEncoder> image =
      LoadLinearProjectionEncoder(b.image_weights);
  {
    auto text = EmbeddingTableTextEncoder::Load(b.text_table);
    if (text->dim() != image->dim()) {
      Fail("image weights and text table disagree on embedding dim");
    }
  }
  return [image, b] {
    EncoderSet set;
    set.image = image->Clone();
    set.text = EmbeddingTableTextEncoder::Load(b.text_table);
    return set;
  };
}

DatasetManifest LoadDataset(const DatasetEntry& entry) {
  if (!fs::exists(entry.manifest)) {
    Fail("manifest not found: " + entry.manifest);
  }
  DatasetManifest manifest = Ingest(entry.manifest, entry.name);
  if (entry.p) manifest.default_p = *entry.p;
  if (entry.resize_max_long) {
    if (*entry.resize_max_long > 0) {
      manifest.resize_max_long = *entry.resize_max_long;
    } else {
      manifest.resize_max_long.reset();
    }
  }
  return manifest;
}

}  // namespace crowdclip
