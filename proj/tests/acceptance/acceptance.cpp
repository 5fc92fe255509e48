// Acceptance checks for the primary component.  Prints one PASS/FAIL line
// per criterion and exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "crowdclip/checkpoint.hpp"
#include "crowdclip/error.hpp"
#include "crowdclip/cli.hpp"
#include "crowdclip/experiments.hpp"
#include "crowdclip/fixtures.hpp"
#include "crowdclip/geometry.hpp"
#include "crowdclip/metrics.hpp"
#include "crowdclip/mock_encoders.hpp"
#include "crowdclip/ranking_loss.hpp"
#include "crowdclip/trainer.hpp"

namespace fs = std::filesystem;
using namespace crowdclip;

namespace {

struct Verdict {
  bool ok = true;
  std::string detail;
};

using Check = std::function<Verdict()>;

fs::path ScratchDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("crowdclip_accept_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string Fmt(const char* format, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c);
  return buf;
}

EncoderFactory MockFactory() {
  return [] {
    auto pair = MakeMockCountEncoders(0);
    return EncoderSet{std::move(pair.image), std::move(pair.text)};
  };
}

// ------------------------------------------------------------------ checks

Verdict RankingLossCorrectness() {
  std::mt19937 rng(101);
  std::uniform_real_distribution<double> u(-1, 1);
  int mismatches = 0;
  int zero_cases = 0;
  double worst_shift = 0, worst_oracle = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 2 + trial % 9;
    std::vector<double> v(m * m);
    for (double& x : v) x = u(rng);
    // A third of the samples are built to satisfy the ordinal condition so
    // the "loss is zero" direction is exercised.
    if (trial % 3 == 0) {
      for (int i = 0; i < m; ++i) {
        double top = -1e9;
        for (int ip = 0; ip < i; ++ip) top = std::max(top, v[ip * m + i]);
        if (i > 0) v[i * m + i] = std::max(v[i * m + i], top);
      }
    }
    const SimilarityMatrix s(m, m, v);
    const double loss = RankingLoss(s).loss;

    bool ordinal = true;
    double brute = 0;
    int pairs = 0;
    for (int i = 0; i < m; ++i) {
      for (int ip = 0; ip < i; ++ip) {
        const double d = s(ip, i) - s(i, i);
        ordinal = ordinal && d <= 0;
        brute += d > 0 ? d : 0;
        ++pairs;
      }
    }
    brute /= pairs;
    if ((loss == 0.0) != ordinal) ++mismatches;
    if (ordinal) ++zero_cases;
    worst_oracle = std::max(worst_oracle, std::abs(loss - brute));

    SimilarityMatrix shifted = s;
    const int col = trial % m;
    const double c = u(rng);
    for (int r = 0; r < m; ++r) shifted(r, col) += c;
    worst_shift = std::max(worst_shift, std::abs(RankingLoss(shifted).loss - loss));
  }
  Verdict v;
  v.ok = mismatches == 0 && worst_shift <= 1e-12 && worst_oracle <= 1e-12 &&
         zero_cases > 0;
  v.detail = Fmt("zero-iff-ordinal mismatches=%.0f, shift err=%.2e, oracle err=%.2e",
                 mismatches, worst_shift, worst_oracle);
  return v;
}

Verdict GradientCheckSuite() {
  std::mt19937 rng(202);
  std::normal_distribution<double> n(0, 1);
  auto random_rows = [&](int rows, int dim) {
    std::vector<double> v(rows * dim);
    for (double& x : v) x = n(rng);
    return EmbeddingMatrix(rows, dim, std::move(v));
  };
  int points = 0, skipped = 0;
  double worst = 0;
  while (points < 100) {
    const int m = 2 + points % 6;
    const int dim = 4 + points % 5;
    const RankingObjective objective(NormalizeRows(random_rows(m, dim)),
                                     points % 4 == 3 ? PairSet::kAdjacent
                                                     : PairSet::kAllPairs);
    const EmbeddingMatrix point = random_rows(m, dim);
    try {
      worst = std::max(worst, GradientCheck(objective, point, 1e-6).max_relative_error);
      ++points;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kKinkTooClose) throw;
      ++skipped;
    }
  }
  Verdict v;
  v.ok = worst < 1e-4;
  v.detail = Fmt("100 points (%.0f near-kink redraws), max rel err=%.2e", skipped, worst);
  return v;
}

Verdict GeometrySuite() {
  std::mt19937 rng(303);
  std::uniform_int_distribution<int> side(200, 4000), m_dist(2, 8), p_dist(1, 8);
  std::uniform_real_distribution<double> ratio(0.2, 0.9);
  int violations = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const ImageRef img{"x", side(rng), side(rng)};
    const int m = m_dist(rng);
    const int p = p_dist(rng);
    const PatchPyramid pyr = BuildPyramid(img, m, ratio(rng));
    bool ok = static_cast<int>(pyr.crops.size()) == m;
    Rect prev{};
    for (int i = 0; i < m && ok; ++i) {
      const SquareCrop& c = pyr.crops[i];
      const Rect r = ToRect(c, img);
      ok = ok && r.x >= 0 && r.y >= 0 && r.x + r.width <= img.width &&
           r.y + r.height <= img.height && r.width == c.side && r.height == c.side;
      if (i > 0) {
        ok = ok && c.side > pyr.crops[i - 1].side &&
             c.center_x == pyr.crops[0].center_x &&
             c.center_y == pyr.crops[0].center_y &&
             r.x <= prev.x && r.y <= prev.y &&
             r.x + r.width >= prev.x + prev.width &&
             r.y + r.height >= prev.y + prev.height;
      }
      prev = r;
    }
    const std::vector<Rect> tiles = TileGrid(img, {p});
    ok = ok && static_cast<int>(tiles.size()) == p * p;
    long long area = 0;
    for (int row = 0; row < p && ok; ++row) {
      for (int col = 0; col < p; ++col) {
        const Rect& t = tiles[row * p + col];
        area += t.area();
        const int expect_x = col == 0 ? 0 : tiles[row * p + col - 1].x +
                                                tiles[row * p + col - 1].width;
        const int expect_y = row == 0 ? 0 : tiles[(row - 1) * p + col].y +
                                                tiles[(row - 1) * p + col].height;
        ok = ok && t.width > 0 && t.height > 0 && t.x == expect_x && t.y == expect_y;
        if (col == p - 1) ok = ok && t.x + t.width == img.width;
        if (row == p - 1) ok = ok && t.y + t.height == img.height;
      }
    }
    ok = ok && area == 1LL * img.width * img.height;
    if (!ok) ++violations;
  }
  Verdict v;
  v.ok = violations == 0;
  v.detail = Fmt("500 configurations, %.0f violations", violations);
  return v;
}

Verdict OracleEndToEnd() {
  const fs::path dir = ScratchDir("e2e");
  FixtureSetOptions opt;
  opt.images = 20;
  const FixtureDataset data = WriteFixtureDataset(dir, opt, 0);
  const ModelBundle bundle = MakeBundle(MockFactory(), nullptr);
  EvalSettings settings;
  const EvalOutcome out = RunEval(data.manifest, bundle, settings);

  int broken = 0;
  for (const CountPrediction& pred : out.predictions) {
    const int tiles = pred.p * pred.p;
    const auto& s = pred.stages;
    bool ok = s[0].scored == tiles && s[1].scored == s[0].kept &&
              s[2].scored == s[1].kept && s[2].kept == s[2].scored;
    for (const auto& st : s) ok = ok && st.kept <= st.scored;
    // A tile dropped at a stage has no later decisions.
    for (const TileResult& t : pred.tiles) {
      for (std::size_t d = 0; d + 1 < t.decisions.size(); ++d) {
        ok = ok && t.decisions[d].kept;
      }
      if (t.decisions.size() < 3) ok = ok && t.patch_count == 0;
    }
    if (!ok) ++broken;
  }
  fs::remove_all(dir);
  Verdict v;
  v.ok = out.report.n_images == 20 && out.report.mae == 0.0 &&
         out.report.mse == 0.0 && broken == 0;
  v.detail = Fmt("MAE=%g MSE=%g, short-circuit violations on %.0f images",
                 out.report.mae, out.report.mse, broken);
  return v;
}

Verdict FrozenNoOp() {
  std::vector<ImageRef> refs;
  std::vector<Image> pixels;
  const std::vector<double> means = {190, 192, 194, 196, 198, 200};
  for (int k = 0; k < 4; ++k) {
    refs.push_back({std::to_string(k), 300 + 20 * k, 260});
    pixels.push_back(MakeRingImage(refs.back().width, refs.back().height, 0.5, means));
  }
  auto enc = MakeMockCountEncoders(0);
  const std::vector<std::uint8_t> initial = enc.image->SerializeState();
  TrainConfig cfg;
  cfg.freeze_image = true;
  cfg.freeze_text = true;
  cfg.epochs = 10;
  cfg.learning_rate = 1.0;
  cfg.patch_side = 32;
  const TrainResult res = Train(refs, *enc.image, *enc.text, cfg,
                                [&](const ImageRef& r) { return pixels[std::stoi(r.path)]; });
  const fs::path dir = ScratchDir("frozen");
  SaveCheckpoint(res.checkpoint, dir / "ckpt");
  const auto saved = ReadFileBytes(dir / "ckpt" / "image_encoder.bin");
  const Checkpoint back = LoadCheckpoint(dir / "ckpt");
  fs::remove_all(dir);
  Verdict v;
  v.ok = saved == initial && !back.text_rank_embeddings.has_value() &&
         res.checkpoint.initial_loss > 0;
  v.detail = saved == initial ? "saved encoder state identical to initialization"
                              : "encoder state changed";
  return v;
}

Verdict MetricsEquivalence() {
  std::mt19937 rng(606);
  std::uniform_real_distribution<double> u(0, 3000);
  double worst = 0;
  int jensen = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + trial % 60;
    std::vector<double> pred(n), gt(n);
    for (int i = 0; i < n; ++i) {
      pred[i] = std::round(u(rng));
      gt[i] = std::round(u(rng));
    }
    const EvalReport r = ComputeMetrics(pred, gt);
    long double abs_sum = 0, sq_sum = 0;
    for (int i = 0; i < n; ++i) {
      const long double d = static_cast<long double>(pred[i]) - gt[i];
      abs_sum += d < 0 ? -d : d;
      sq_sum += d * d;
    }
    const double mae = static_cast<double>(abs_sum / n);
    const double mse = static_cast<double>(std::sqrt(sq_sum / n));
    auto rel = [](double a, double b) {
      return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
    };
    worst = std::max({worst, rel(r.mae, mae), rel(r.mse, mse)});
    if (r.mse < r.mae) ++jensen;
  }
  Verdict v;
  v.ok = worst < 1e-9 && jensen == 0;
  v.detail = Fmt("max rel err=%.2e, mse<mae on %.0f samples", worst, jensen);
  return v;
}

int Cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = RunCli(args, out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

Verdict Determinism() {
  const fs::path dir = ScratchDir("determinism");
  const std::string data = (dir / "data").string();
  if (Cli({"synth", "-o", data, "--images", "20", "--train-images", "1"}) != 0) {
    return {false, "synth failed"};
  }
  const std::string manifest = (dir / "data" / "manifest.jsonl").string();
  bool same = true;
  std::string failed;
  for (int run = 0; run < 2; ++run) {
    const std::string tag = std::to_string(run);
    if (Cli({"evaluate", "--seed", "5", "--set", "data.test.manifest=" + manifest,
             "-o", (dir / ("eval" + tag)).string()}) != 0 ||
        Cli({"infer", data, "--seed", "5", "-o", (dir / ("infer" + tag)).string()}) != 0) {
      return {false, "command failed"};
    }
  }
  for (const std::string f : {"eval/eval_report.json", "eval/eval_report.csv",
                              "eval/eval_report_predictions.jsonl",
                              "infer/predictions.jsonl"}) {
    const auto slash = f.find('/');
    const std::string sub = f.substr(0, slash), name = f.substr(slash + 1);
    const std::string a = Slurp(dir / (sub + "0") / name);
    const std::string b = Slurp(dir / (sub + "1") / name);
    if (a.empty() || a != b) {
      same = false;
      failed += " " + f;
    }
  }
  fs::remove_all(dir);
  return {same, same ? "evaluate and infer reports byte-identical across runs"
                     : "differs:" + failed};
}

Verdict ToyDescent() {
  std::vector<ImageRef> refs;
  std::vector<Image> pixels;
  // Crop means rise too slowly for the rank prompts: rank-inconsistent.
  const std::vector<double> means = {190, 192, 194, 196, 198, 200};
  for (int k = 0; k < 4; ++k) {
    refs.push_back({std::to_string(k), 240 + 40 * k, 200 + 20 * k});
    pixels.push_back(MakeRingImage(refs.back().width, refs.back().height, 0.5, means));
  }
  auto enc = MakeMockCountEncoders(3);
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.batch_pyramids = 8;  // one optimizer step per epoch
  cfg.learning_rate = 0.05;
  cfg.patch_side = 32;
  const TrainResult res = Train(refs, *enc.image, *enc.text, cfg,
                                [&](const ImageRef& r) { return pixels[std::stoi(r.path)]; });
  const double start = res.checkpoint.initial_loss;
  const double end = res.log.back().mean_loss;
  Verdict v;
  v.ok = start > 0 && end <= 0.5 * start;
  v.detail = Fmt("loss %.3e -> %.3e (%.1f%% reduction)", start, end,
                 start > 0 ? 100.0 * (1.0 - end / start) : 0.0);
  return v;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_seconds;
    Check check;
  };
  const std::vector<Criterion> criteria = {
      {"ranking-loss correctness", 5, RankingLossCorrectness},
      {"gradient check", 30, GradientCheckSuite},
      {"geometry suite", 10, GeometrySuite},
      {"oracle end-to-end", 60, OracleEndToEnd},
      {"frozen-everything no-op", 30, FrozenNoOp},
      {"metrics equivalence", 60, MetricsEquivalence},
      {"determinism", 120, Determinism},
      {"toy descent", 120, ToyDescent},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_seconds) {
      v.ok = false;
      v.detail += Fmt(" [over budget: %.1fs > %.0fs]", secs, c.budget_seconds);
    }
    if (!v.ok) ++failures;
    std::printf("%s  %-26s %6.2fs  %s\n", v.ok ? "PASS" : "FAIL", c.name, secs,
                v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
