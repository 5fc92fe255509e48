#include "crowdclip/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "crowdclip/config.hpp"
#include "crowdclip/error.hpp"
#include "crowdclip/experiments.hpp"
#include "crowdclip/fixtures.hpp"
#include "crowdclip/hash.hpp"
#include "crowdclip/plot.hpp"
#include "format.hpp"

#ifndef CROWDCLIP_VERSION
#define CROWDCLIP_VERSION "dev"
#endif

namespace crowdclip {
namespace fs = std::filesystem;
namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exclusive per-directory lock; released on destruction.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".crowdclip.lock") {
    fs::create_directories(dir);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      throw Error(ErrorCode::kIoError,
                  "output directory " + dir.string() +
                      " is in use by another command (delete " +
                      path_.string() + " if it is stale)");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    if (::write(fd_, pid.data(), pid.size()) < 0) {
      // The lock holds even without the pid note.
    }
  }
  ~DirLock() {
    ::close(fd_);
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
}

std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Options shared by every configurable command.
struct CommonOptions {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> checkpoint;
  std::optional<int> workers;

  void Attach(CLI::App* app) {
    app->add_option("-c,--config", config, "YAML run configuration");
    app->add_option("--set", sets, "Override, e.g. train.epochs=10 (repeatable)");
    app->add_option("--seed", seed, "Seed for every random choice");
    app->add_option("-o,--out-dir", out_dir, "Output directory");
    app->add_option("--checkpoint", checkpoint, "Checkpoint directory");
    app->add_option("-j,--workers", workers, "Worker threads");
  }

  RunConfig Load(std::vector<Override> extra = {}) const {
    std::vector<Override> overrides;
    for (const std::string& s : sets) overrides.push_back(ParseOverride(s));
    if (seed) overrides.push_back({"seed", std::to_string(*seed)});
    if (out_dir) overrides.push_back({"out_dir", "\"" + *out_dir + "\""});
    if (checkpoint) overrides.push_back({"checkpoint", "\"" + *checkpoint + "\""});
    if (workers) overrides.push_back({"workers", std::to_string(*workers)});
    for (auto& o : extra) overrides.push_back(std::move(o));
    return LoadRunConfig(config.empty() ? std::nullopt
                                        : std::optional<fs::path>(config),
                         overrides);
  }
};

void WriteRunManifest(const fs::path& dir, const std::string& command,
                      const RunConfig& cfg,
                      const std::vector<std::string>& outputs) {
  const std::string resolved = ResolvedConfigYaml(cfg);
  nlohmann::ordered_json j;
  j["command"] = command;
  j["code_version"] = CROWDCLIP_VERSION;
  j["seed"] = cfg.seed;
  j["config_source"] = cfg.source;
  j["config_hash"] = HexDigest(Fnv1a(resolved));
  j["train_config_hash"] = ConfigHash(cfg.train);
  j["backend"] = cfg.backend.kind;
  j["outputs"] = outputs;
  WriteText(dir / ("run_manifest_" + command + ".json"), j.dump(2) + "\n");
  WriteText(dir / ("config_" + command + ".yaml"), resolved);
}

const DatasetEntry& Require(const std::optional<DatasetEntry>& entry,
                            const std::string& key) {
  if (!entry) throw UsageError("config needs " + key + ".manifest");
  return *entry;
}

std::optional<Checkpoint> LoadOptionalCheckpoint(const RunConfig& cfg) {
  if (cfg.checkpoint.empty()) return std::nullopt;
  if (!fs::exists(fs::path(cfg.checkpoint) / "manifest.json")) {
    throw UsageError("checkpoint not found: " + cfg.checkpoint);
  }
  return LoadCheckpoint(cfg.checkpoint);
}

bool IsImageFile(const fs::path& p) {
  static const std::set<std::string> kExt = {".png", ".jpg", ".jpeg", ".bmp",
                                             ".tif", ".tiff", ".ppm", ".pgm",
                                             ".webp"};
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return kExt.count(ext) > 0;
}

std::vector<fs::path> ListImages(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && IsImageFile(entry.path())) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::string TrainingSummary(const Checkpoint& ckpt) {
  std::ostringstream s;
  s << "loss " << ckpt.initial_loss << " -> "
    << (ckpt.loss_history.empty() ? ckpt.initial_loss : ckpt.loss_history.back())
    << " over " << ckpt.epochs_completed << " epochs";
  return s.str();
}

// ---------------------------------------------------------------- commands

int CmdTrain(const CommonOptions& opts, std::ostream& out, std::ostream& err) {
  RunConfig cfg = opts.Load();
  const DatasetManifest train_set =
      LoadDataset(Require(cfg.train_data, "data.train"));
  TrainConfig tc = cfg.train;
  tc.dataset_name = train_set.name;
  if (tc.max_long_side == 0 && train_set.resize_max_long) {
    tc.max_long_side = *train_set.resize_max_long;
  }
  const std::vector<ImageRef> refs = train_set.ImageRefs(Split::kTrain);
  if (refs.empty()) {
    throw Error(ErrorCode::kEmpty, "dataset '" + train_set.name +
                                       "' has no train images");
  }
  const fs::path dir = cfg.out_dir;
  DirLock lock(dir);
  EncoderSet encoders = MakeEncoderFactory(cfg)();
  std::ofstream log(dir / "train_log.jsonl", std::ios::binary);
  out << "training on " << refs.size() << " images from '" << train_set.name
      << "' for " << tc.epochs << " epochs\n";
  const TrainResult result = Train(
      refs, *encoders.image, *encoders.text, tc, LoadFromDisk,
      [&](const EpochRecord& r) { log << EncodeTrainingLogLine(r) << "\n"; });
  SaveCheckpoint(result.checkpoint, dir / "checkpoint");
  cfg.train = tc;
  WriteRunManifest(dir, "train", cfg, {"checkpoint", "train_log.jsonl"});
  out << TrainingSummary(result.checkpoint) << "\n"
      << "checkpoint written to " << (dir / "checkpoint").string() << "\n";
  (void)err;
  return kExitOk;
}

int CmdInfer(const CommonOptions& opts, const std::string& target,
             std::optional<int> p, const std::string& dataset_name,
             std::ostream& out, std::ostream& err) {
  RunConfig cfg = opts.Load();
  if (p) cfg.eval.p_override = *p;
  if (cfg.eval.p_override && *cfg.eval.p_override < 1) {
    throw UsageError("--p must be >= 1");
  }
  std::vector<fs::path> files;
  if (fs::is_directory(target)) {
    files = ListImages(target);
  } else if (fs::is_regular_file(target)) {
    files.push_back(target);
  } else {
    throw UsageError("no such image or directory: " + target);
  }
  if (files.empty()) throw UsageError("no images found in " + target);

  const std::optional<Checkpoint> ckpt = LoadOptionalCheckpoint(cfg);
  const ModelBundle bundle =
      MakeBundle(MakeEncoderFactory(cfg), ckpt ? &*ckpt : nullptr);
  DatasetManifest policy_only;
  policy_only.name = dataset_name;
  const DatasetPolicy policy = PolicyForDataset(dataset_name);
  policy_only.default_p = policy.default_p;
  policy_only.resize_max_long = policy.resize_max_long;
  const InferenceConfig icfg =
      MakeInferenceConfig(cfg.eval, policy_only, bundle.ranking);
  InferenceModel model;
  model.original = bundle.original.get();
  model.finetuned = bundle.finetuned.get();
  model.text = bundle.text.get();
  if (bundle.ranking_override && cfg.eval.use_finetuned_for_ranking) {
    model.ranking_embeddings =
        std::make_shared<const EmbeddingMatrix>(*bundle.ranking_override);
  }

  const fs::path dir = cfg.out_dir;
  DirLock lock(dir);
  std::ofstream records(dir / "predictions.jsonl", std::ios::binary);
  std::ofstream timings(dir / "timings.jsonl", std::ios::binary);
  int failures = 0;
  for (const fs::path& file : files) {
    try {
      const Image image = LoadImage(file);
      const ImageRef ref{file.string(), image.width(), image.height()};
      const CountPrediction pred = Predict(image, ref, model, icfg);
      records << EncodePredictionLine(pred) << "\n";
      timings << EncodePredictionLine(pred, true) << "\n";
      out << file.string() << ": " << pred.total << "\n";
    } catch (const std::exception& e) {
      ++failures;
      err << "error: " << file.string() << ": " << e.what() << "\n";
    }
  }
  WriteRunManifest(dir, "infer", cfg, {"predictions.jsonl", "timings.jsonl"});
  if (failures > 0) {
    err << failures << " of " << files.size() << " images failed\n";
    return kExitFailure;
  }
  return kExitOk;
}

void WriteEvalOutputs(const fs::path& dir, const std::string& stem,
                      const EvalOutcome& outcome) {
  WriteText(dir / (stem + ".json"), EvalReportToJson(outcome.report));
  WriteText(dir / (stem + ".csv"), EvalReportToCsv(outcome.report));
  std::string records, timings;
  for (const CountPrediction& p : outcome.predictions) {
    records += EncodePredictionLine(p) + "\n";
    timings += EncodePredictionLine(p, true) + "\n";
  }
  WriteText(dir / (stem + "_predictions.jsonl"), records);
  WriteText(dir / (stem + "_timings.jsonl"), timings);
  nlohmann::ordered_json t;
  t["label"] = outcome.report.label;
  t["min"] = outcome.report.throughput_fps.min;
  t["max"] = outcome.report.throughput_fps.max;
  t["mean"] = outcome.report.throughput_fps.mean;
  WriteText(dir / (stem + "_throughput.json"), t.dump(2) + "\n");
}

std::vector<std::string> EvalOutputList(const std::string& stem) {
  return {stem + ".json", stem + ".csv", stem + "_predictions.jsonl",
          stem + "_timings.jsonl", stem + "_throughput.json"};
}

void PrintReport(const EvalReport& r, std::ostream& out) {
  out << r.label << ": n=" << r.n_images << " mae=" << r.mae
      << " mse=" << r.mse << " fps=[" << r.throughput_fps.min << ", "
      << r.throughput_fps.max << "]\n";
}

int CmdEvaluate(const CommonOptions& opts, bool cross, std::ostream& out,
                std::ostream& err) {
  RunConfig cfg = opts.Load();
  const DatasetManifest test_set =
      LoadDataset(Require(cfg.test_data, "data.test"));
  const std::optional<Checkpoint> ckpt = LoadOptionalCheckpoint(cfg);
  if (cross && !ckpt) throw UsageError("cross-eval needs --checkpoint");
  const ModelBundle bundle =
      MakeBundle(MakeEncoderFactory(cfg), ckpt ? &*ckpt : nullptr);
  const fs::path dir = cfg.out_dir;
  DirLock lock(dir);
  EvalOutcome outcome;
  std::string stem = "eval_report";
  if (cross) {
    std::vector<std::string> warnings;
    outcome = RunCrossEval(test_set, bundle, cfg.eval, &warnings);
    for (const std::string& w : warnings) {
      err << "warning: " << w << "\n";
    }
    stem = "cross_eval_report";
  } else {
    outcome = RunEval(test_set, bundle, cfg.eval);
  }
  WriteEvalOutputs(dir, stem, outcome);
  WriteRunManifest(dir, cross ? "cross-eval" : "evaluate", cfg,
                   EvalOutputList(stem));
  PrintReport(outcome.report, out);
  return kExitOk;
}

AblationSetting ParseSettingValue(AblationKind kind, const std::string& text) {
  AblationSetting s;
  auto fail = [&] {
    throw UsageError("bad " + std::string(ToString(kind)) + " value '" + text +
                     "'");
  };
  try {
    switch (kind) {
      case AblationKind::kPatchNumber:
        s.p = std::stoi(text);
        break;
      case AblationKind::kDataSize:
        if (text == "extra" || text == "1+extra") {
          s.with_extra = true;
        } else {
          s.fraction = std::stod(text);
        }
        break;
      case AblationKind::kPrompts: {
        // "r0:k", "A+r0:k"
        std::string body = text;
        if (body.rfind("A+", 0) == 0) {
          s.ranking.alphabetic = true;
          body = body.substr(2);
        }
        const auto colon = body.find(':');
        if (colon == std::string::npos) fail();
        s.ranking.r0 = std::stoi(body.substr(0, colon));
        s.ranking.k = std::stoi(body.substr(colon + 1));
        break;
      }
      case AblationKind::kFreeze: {
        // "<text>:<image>" with fixed|tuned
        const auto colon = text.find(':');
        if (colon == std::string::npos) fail();
        const std::string t = text.substr(0, colon), i = text.substr(colon + 1);
        if ((t != "fixed" && t != "tuned") || (i != "fixed" && i != "tuned")) fail();
        s.freeze_text = t == "fixed";
        s.freeze_image = i == "fixed";
        break;
      }
    }
  } catch (const std::invalid_argument&) {
    fail();
  } catch (const std::out_of_range&) {
    fail();
  }
  return s;
}

int CmdAblate(const CommonOptions& opts, const std::string& kind_text,
              const std::vector<std::string>& values, std::ostream& out,
              std::ostream& err) {
  RunConfig cfg = opts.Load();
  AblationKind kind;
  try {
    kind = ParseAblationKind(kind_text.empty() ? cfg.ablation.kind : kind_text);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  std::vector<AblationSetting> grid;
  for (const std::string& v : values) grid.push_back(ParseSettingValue(kind, v));
  if (grid.empty() && kind_text.empty()) grid = cfg.ablation.grid;
  if (grid.empty()) grid = DefaultAblationGrid(kind);

  AblationContext ctx;
  ctx.factory = MakeEncoderFactory(cfg);
  ctx.train_set = LoadDataset(Require(cfg.train_data, "data.train"));
  ctx.test_set = LoadDataset(Require(cfg.test_data, "data.test"));
  if (cfg.extra_data) ctx.extra_set = LoadDataset(*cfg.extra_data);
  ctx.train = cfg.train;
  ctx.train.dataset_name = ctx.train_set.name;
  if (ctx.train.max_long_side == 0 && ctx.train_set.resize_max_long) {
    ctx.train.max_long_side = *ctx.train_set.resize_max_long;
  }
  ctx.eval = cfg.eval;
  const std::optional<Checkpoint> ckpt = LoadOptionalCheckpoint(cfg);
  ctx.checkpoint = ckpt ? &*ckpt : nullptr;
  ctx.log = &out;

  const fs::path dir = cfg.out_dir;
  DirLock lock(dir);
  const AblationTable table = RunAblation(kind, grid, ctx);
  const std::string stem = "ablation_" + std::string(ToString(kind));
  WriteText(dir / (stem + ".json"), AblationTableToJson(table));
  WriteText(dir / (stem + ".csv"), AblationTableToCsv(table));
  WriteRunManifest(dir, "ablate", cfg, {stem + ".json", stem + ".csv"});
  (void)err;
  return kExitOk;
}

int CmdPlot(const std::vector<std::string>& reports,
            const std::optional<std::string>& out_dir, int worst_k,
            std::ostream& out, std::ostream& err) {
  if (reports.empty()) throw UsageError("plot needs at least one report");
  if (worst_k < 0) throw UsageError("--k must be >= 0");
  int failures = 0;
  for (const std::string& path : reports) {
    try {
      const fs::path report_path(path);
      const fs::path dir = out_dir ? fs::path(*out_dir)
                                   : report_path.parent_path().empty()
                                         ? fs::path(".")
                                         : report_path.parent_path();
      fs::create_directories(dir);
      const std::string text = ReadText(report_path);
      const std::string stem = report_path.stem().string();
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(text);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kParseError, e.what());
      }
      if (j.contains("kind") && j.contains("rows")) {
        const AblationTable table = AblationTableFromJson(text);
        for (const char* metric : {"mae", "mse"}) {
          std::map<std::string, Series> by_name;
          for (const AblationRow& row : table.rows) {
            const std::string name =
                table.kind == AblationKind::kDataSize && row.setting.with_extra
                    ? std::string("with extra data")
                    : std::string(ToString(table.kind));
            Series& s = by_name[name];
            s.name = name;
            s.x.push_back(row.x);
            s.y.push_back(std::string(metric) == "mae" ? row.report.mae
                                                       : row.report.mse);
          }
          std::vector<Series> series;
          for (auto& [name, s] : by_name) series.push_back(std::move(s));
          std::string upper = metric;
          for (char& c : upper) c = static_cast<char>(std::toupper(c));
          const fs::path png = dir / (stem + "_" + metric + ".png");
          WriteLineChart(series, upper + " vs " + std::string(ToString(table.kind)),
                         std::string(ToString(table.kind)), upper, png);
          out << "wrote " << png.string() << "\n";
        }
      } else if (j.contains("per_image")) {
        EvalReport report = EvalReportFromJson(text);
        std::vector<ImageError> rows = report.per_image;
        std::stable_sort(rows.begin(), rows.end(),
                         [](const ImageError& a, const ImageError& b) {
                           return a.abs_err > b.abs_err;
                         });
        const int k = std::min<int>(worst_k, static_cast<int>(rows.size()));
        for (int i = 0; i < k; ++i) {
          const fs::path png =
              dir / (stem + "_worst_" + std::to_string(i + 1) + ".png");
          WriteCountOverlay(LoadImage(rows[i].id), rows[i].estimate,
                            rows[i].ground_truth, png);
          out << "wrote " << png.string() << "\n";
        }
      } else {
        throw Error(ErrorCode::kParseError, "not an eval report or ablation table");
      }
    } catch (const std::exception& e) {
      ++failures;
      err << "error: " << path << ": " << e.what() << "\n";
    }
  }
  return failures > 0 ? kExitFailure : kExitOk;
}

int CmdSynth(const std::string& dir, const FixtureSetOptions& options,
             int train_images, std::ostream& out) {
  if (train_images < 1) throw UsageError("--train-images must be >= 1");
  if (options.images < 1) throw UsageError("--images must be >= 1");
  DirLock lock(dir);
  const FixtureDataset ds = WriteFixtureDataset(dir, options, train_images);
  out << "wrote " << ds.manifest.images.size() << " images and "
      << ds.manifest_path.string() << "\n";
  return kExitOk;
}

std::vector<Point> ReadPointFile(const fs::path& path, bool csv) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::vector<Point> points;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    if (csv) std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    Point p;
    if (!(ss >> p.x >> p.y)) {
      if (csv && line_no == 1) continue;  // header row
      throw Error(ErrorCode::kParseError,
                  path.string() + ":" + std::to_string(line_no) +
                      ": expected two coordinates");
    }
    points.push_back(p);
  }
  return points;
}

int CmdConvert(const std::string& format, const std::string& images_dir,
               const std::string& ann_dir, const std::string& out_path,
               const std::string& split_text, const std::string& name,
               bool append, std::ostream& out, std::ostream& err) {
  if (format != "points-txt" && format != "points-csv") {
    throw UsageError("--format must be points-txt or points-csv");
  }
  Split split;
  try {
    split = ParseSplit(split_text);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (!fs::is_directory(images_dir)) {
    throw UsageError("image directory not found: " + images_dir);
  }
  if (!fs::is_directory(ann_dir)) {
    throw UsageError("annotation directory not found: " + ann_dir);
  }
  const bool csv = format == "points-csv";
  DatasetManifest manifest;
  if (append && fs::exists(out_path)) manifest = Ingest(out_path);
  if (!name.empty()) manifest.name = name;
  if (manifest.name.empty()) manifest.name = fs::path(out_path).stem().string();
  int failures = 0;
  for (const fs::path& image : ListImages(images_dir)) {
    const fs::path ann =
        fs::path(ann_dir) / (image.stem().string() + (csv ? ".csv" : ".txt"));
    try {
      AnnotatedImage rec;
      rec.image.path = fs::absolute(image).lexically_normal().string();
      ProbeImageSize(image, &rec.image.width, &rec.image.height);
      rec.points = ReadPointFile(ann, csv);
      rec.split = split;
      manifest.images.push_back(std::move(rec));
    } catch (const std::exception& e) {
      ++failures;
      err << "error: " << image.string() << ": " << e.what() << "\n";
    }
  }
  const fs::path target = fs::absolute(out_path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  WriteManifest(manifest, target);
  // Validate what was written, including point bounds.
  Ingest(target);
  out << "wrote " << manifest.images.size() << " records to " << out_path << "\n";
  return failures > 0 ? kExitFailure : kExitOk;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Unsupervised crowd counting with vision-language ranking"};
  app.name("crowdclip");
  app.require_subcommand(1);
  app.set_version_flag("--version", CROWDCLIP_VERSION);

  CommonOptions train_opts, infer_opts, eval_opts, cross_opts, ablate_opts,
      config_opts;

  CLI::App* train = app.add_subcommand("train", "Fine-tune the image encoder");
  train_opts.Attach(train);

  CLI::App* infer = app.add_subcommand("infer", "Count people in images");
  infer_opts.Attach(infer);
  std::string infer_target;
  std::optional<int> infer_p;
  std::string infer_dataset;
  infer->add_option("target", infer_target, "Image file or directory")->required();
  infer->add_option("-p,--p", infer_p, "Grid dimension P (overrides config)");
  infer->add_option("--dataset", infer_dataset,
                    "Dataset name used to pick the P/resize policy");

  CLI::App* evaluate = app.add_subcommand("evaluate", "Score a test split");
  eval_opts.Attach(evaluate);
  CLI::App* cross =
      app.add_subcommand("cross-eval", "Score a checkpoint on another dataset");
  cross_opts.Attach(cross);

  CLI::App* ablate = app.add_subcommand("ablate", "Run an ablation sweep");
  ablate_opts.Attach(ablate);
  std::string ablate_kind;
  std::vector<std::string> ablate_values;
  ablate->add_option("kind", ablate_kind,
                     "prompts | patch_number | freeze | data_size");
  ablate->add_option("values", ablate_values,
                     "Grid values, e.g. 3 4 5 | 20:35 A+20:35 | fixed:tuned | 0.5 extra");

  CLI::App* plot = app.add_subcommand("plot", "Render charts and overlays");
  std::vector<std::string> plot_reports;
  std::optional<std::string> plot_out;
  int plot_k = 5;
  plot->add_option("reports", plot_reports, "Eval reports or ablation tables");
  plot->add_option("-o,--out-dir", plot_out, "Output directory");
  plot->add_option("-k,--k", plot_k, "Overlay images for the k worst images");

  CLI::App* synth = app.add_subcommand("synth", "Write the synthetic fixture dataset");
  std::string synth_dir;
  FixtureSetOptions synth_options;
  int synth_train = 8;
  synth->add_option("-o,--out-dir", synth_dir, "Output directory")->required();
  synth->add_option("--images", synth_options.images, "Test images");
  synth->add_option("--train-images", synth_train, "Training images");
  synth->add_option("--p", synth_options.p, "Grid dimension of the fixtures");
  synth->add_option("--seed", synth_options.seed, "Seed");

  CLI::App* convert = app.add_subcommand(
      "convert", "Turn per-image point files into a manifest");
  std::string conv_format = "points-txt", conv_images, conv_ann, conv_out,
              conv_split = "test", conv_name;
  bool conv_append = false;
  convert->add_option("--format", conv_format, "points-txt | points-csv");
  convert->add_option("--images", conv_images, "Image directory")->required();
  convert->add_option("--annotations", conv_ann, "Point file directory")->required();
  convert->add_option("--out", conv_out, "Manifest to write")->required();
  convert->add_option("--split", conv_split, "train | val | test");
  convert->add_option("--name", conv_name, "Dataset name");
  convert->add_flag("--append", conv_append, "Append to an existing manifest");

  CLI::App* config = app.add_subcommand("config", "Print the resolved configuration");
  config_opts.Attach(config);
  bool config_defaults = false;
  config->add_flag("--defaults", config_defaults, "Print the annotated defaults");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    out << CROWDCLIP_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    for (CLI::App* sub : app.get_subcommands()) err << sub->help();
    return kExitUsage;
  }

  try {
    if (*train) return CmdTrain(train_opts, out, err);
    if (*infer) {
      return CmdInfer(infer_opts, infer_target, infer_p, infer_dataset, out, err);
    }
    if (*evaluate) return CmdEvaluate(eval_opts, false, out, err);
    if (*cross) return CmdEvaluate(cross_opts, true, out, err);
    if (*ablate) return CmdAblate(ablate_opts, ablate_kind, ablate_values, out, err);
    if (*plot) return CmdPlot(plot_reports, plot_out, plot_k, out, err);
    if (*synth) return CmdSynth(synth_dir, synth_options, synth_train, out);
    if (*convert) {
      return CmdConvert(conv_format, conv_images, conv_ann, conv_out, conv_split,
                        conv_name, conv_append, out, err);
    }
    if (*config) {
      out << (config_defaults ? DefaultConfigYaml()
                              : ResolvedConfigYaml(config_opts.Load()));
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    const bool usage = e.code() == ErrorCode::kConfigError;
    err << "error: " << e.what() << "\n";
    return usage ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace crowdclip
