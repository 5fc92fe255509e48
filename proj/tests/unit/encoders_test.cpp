#include <gtest/gtest.h>

#include <cmath>
#include <atomic>
#include <fstream>
#include <random>
#include <thread>

#include "crowdclip/embedding.hpp"
#include "crowdclip/encoders.hpp"
#include "crowdclip/linear_encoders.hpp"
#include "crowdclip/mock_encoders.hpp"
#include "crowdclip/prompts.hpp"
#include "test_util.hpp"

namespace crowdclip {
namespace {

Image Patch(int scene, int part, int count, int side = 16) {
  const auto c = MockColor(scene, part, count);
  Image img(side, side);
  img.Fill(0, 0, side, side, c[0], c[1], c[2]);
  return img;
}

std::vector<std::string> One(const std::string& s) { return {s}; }

TEST(Similarity, IdentityBasis) {
  EmbeddingMatrix eye(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}, true);
  const SimilarityMatrix s = Similarity(eye, eye);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_EQ(s(i, j), i == j ? 1.0 : 0.0);
  }
}

TEST(Similarity, DotProductExample) {
  const EmbeddingMatrix a(1, 2, {0.6, 0.8}, true);
  const EmbeddingMatrix b(1, 2, {0.8, 0.6}, true);
  EXPECT_NEAR(Similarity(a, b)(0, 0), 0.96, 1e-15);
}

TEST(Similarity, DimMismatch) {
  EXPECT_CROWDCLIP_ERROR(Similarity(EmbeddingMatrix(2, 512), EmbeddingMatrix(2, 256)),
                         ErrorCode::kDimMismatch);
}

TEST(Similarity, PermutingRowsPermutesSimilarityRows) {
  std::mt19937 rng(1);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> a(5 * 8), b(4 * 8);
  for (double& v : a) v = n(rng);
  for (double& v : b) v = n(rng);
  const EmbeddingMatrix img = NormalizeRows(EmbeddingMatrix(5, 8, a));
  const EmbeddingMatrix txt = NormalizeRows(EmbeddingMatrix(4, 8, b));
  const std::vector<int> perm = {3, 0, 4, 1, 2};
  const SimilarityMatrix s = Similarity(img, txt);
  const SimilarityMatrix sp = Similarity(img.SelectRows(perm), txt);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 4; ++j) EXPECT_EQ(sp(i, j), s(perm[i], j));
  }
}

TEST(NormalizeRows, UnitNormAndZeroRowFailure) {
  const EmbeddingMatrix m = NormalizeRows(EmbeddingMatrix(2, 3, {3, 0, 4, 1, 1, 1}));
  EXPECT_TRUE(m.normalized());
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(L2Norm(m.row(i)), 1.0, 1e-12);
  EXPECT_CROWDCLIP_ERROR(NormalizeRows(EmbeddingMatrix(1, 3, {0, 0, 0})),
                         ErrorCode::kEncoderFailure);
}

TEST(MockEncoders, ImageShapeAndNormalization) {
  auto enc = MakeMockCountEncoders(9);
  std::vector<Image> patches;
  for (int i = 0; i < 6; ++i) patches.push_back(Patch(0, 0, 20 + 35 * i));
  const EmbeddingMatrix e = enc.image->Encode(patches);
  EXPECT_EQ(e.rows(), 6);
  EXPECT_EQ(e.dim(), 32);
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(L2Norm(e.row(i)), 1.0, 1e-5);
  EXPECT_EQ(enc.image->counters().calls, 1u);
  EXPECT_EQ(enc.image->counters().items, 6u);
}

TEST(MockEncoders, IdenticalPatchesGiveIdenticalRows) {
  auto enc = MakeMockCountEncoders(9);
  const std::vector<Image> patches = {Patch(0, 0, 90), Patch(0, 0, 90)};
  const EmbeddingMatrix e = enc.image->Encode(patches);
  for (int c = 0; c < e.dim(); ++c) EXPECT_EQ(e(0, c), e(1, c));
}

TEST(MockEncoders, EmptyAndMixedSizeImages) {
  auto enc = MakeMockCountEncoders(9);
  std::vector<Image> none;
  EXPECT_CROWDCLIP_ERROR(enc.image->Encode(none), ErrorCode::kShapeMismatch);
  const std::vector<Image> mixed = {Patch(0, 0, 1, 8), Patch(0, 0, 1, 9)};
  EXPECT_CROWDCLIP_ERROR(enc.image->Encode(mixed), ErrorCode::kShapeMismatch);
}

TEST(MockEncoders, TextShapeDeterminismAndEmpty) {
  auto enc = MakeMockCountEncoders(9);
  const PromptSet ranking = BuildRankingPrompts({});
  const EmbeddingMatrix e = enc.text->Encode(ranking.texts);
  EXPECT_EQ(e.rows(), 6);
  const std::vector<std::string> twice = {"There are 55 persons in the crowd",
                                          "There are 55 persons in the crowd"};
  const EmbeddingMatrix t = enc.text->Encode(twice);
  for (int c = 0; c < t.dim(); ++c) EXPECT_EQ(t(0, c), t(1, c));
  std::vector<std::string> none;
  EXPECT_CROWDCLIP_ERROR(enc.text->Encode(none), ErrorCode::kEncoderFailure);
}

TEST(MockEncoders, CountSimilarityDecreasesWithDistance) {
  auto enc = MakeMockCountEncoders(21);
  auto text_row = [&](int r) {
    return enc.text->Encode(One("There are " + std::to_string(r) +
                                " persons in the crowd"));
  };
  const std::vector<Image> p55 = {Patch(0, 0, 55)};
  const EmbeddingMatrix img = enc.image->Encode(p55);
  EXPECT_GT(Similarity(img, text_row(55))(0, 0),
            Similarity(img, text_row(90))(0, 0));
  // Strictly decreasing in |a - b| across the whole supported range.
  const std::vector<Image> p100 = {Patch(0, 0, 100)};
  const EmbeddingMatrix base = enc.image->Encode(p100);
  double previous = 2.0;
  for (int d = 0; d <= 150; d += 5) {
    const double s = Similarity(base, text_row(100 + d))(0, 0);
    EXPECT_LT(s, previous);
    previous = s;
  }
}

TEST(MockEncoders, ArgmaxOverRankPromptsRecoversCount) {
  auto enc = MakeMockCountEncoders(5);
  const PromptSet ranking = BuildRankingPrompts({});
  const EmbeddingMatrix txt = enc.text->Encode(ranking.texts);
  for (int j = 0; j < 6; ++j) {
    const std::vector<Image> p = {Patch(0, 0, ranking.counts[j])};
    const SimilarityMatrix s = Similarity(enc.image->Encode(p), txt);
    int best = 0;
    for (int k = 1; k < 6; ++k) {
      if (s(0, k) > s(0, best)) best = k;
    }
    EXPECT_EQ(best, j);
  }
}

TEST(MockEncoders, SceneAndPartMatchTheirPrompts) {
  auto enc = MakeMockCountEncoders(5);
  const PromptSet coarse =
      BuildFilterPrompts(Stage::kCoarse, DefaultCoarseClasses(), "crowd");
  const EmbeddingMatrix txt = enc.text->Encode(coarse.texts);
  for (int scene = 0; scene < 6; ++scene) {
    const std::vector<Image> p = {Patch(scene, 0, 50)};
    const SimilarityMatrix s = Similarity(enc.image->Encode(p), txt);
    for (int k = 0; k < 6; ++k) {
      if (k != scene) EXPECT_GT(s(0, scene), s(0, k));
    }
  }
}

TEST(MockEncoders, ArgmaxInvariantToPositiveScaling) {
  auto enc = MakeMockCountEncoders(5);
  const PromptSet ranking = BuildRankingPrompts({});
  const EmbeddingMatrix txt = enc.text->Encode(ranking.texts);
  std::mt19937 rng(8);
  std::uniform_int_distribution<int> count(0, 255);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<Image> p = {Patch(0, 0, count(rng))};
    EmbeddingMatrix raw = enc.image->EncodeRaw(p);
    EmbeddingMatrix scaled = raw;
    const double a = scale(rng);
    for (double& v : scaled.mutable_values()) v *= a;
    const SimilarityMatrix s1 = Similarity(NormalizeRows(raw), txt);
    const SimilarityMatrix s2 = Similarity(NormalizeRows(scaled), txt);
    int b1 = 0, b2 = 0;
    for (int k = 1; k < 6; ++k) {
      if (s1(0, k) > s1(0, b1)) b1 = k;
      if (s2(0, k) > s2(0, b2)) b2 = k;
    }
    EXPECT_EQ(b1, b2);
  }
}

TEST(MockEncoders, BackwardMatchesFiniteDifferences) {
  auto enc = MakeMockCountEncoders(2);
  const std::vector<Image> patches = {Patch(0, 0, 40), Patch(0, 0, 130)};
  std::mt19937 rng(2);
  std::normal_distribution<double> n(0, 1);
  EmbeddingMatrix g(2, 32);
  for (double& v : g.mutable_values()) v = n(rng);
  auto objective = [&](double gain, double offset) {
    MockCountImageEncoder e(std::make_shared<MockCountSpace>(2, MockSpaceOptions{}),
                            gain, offset);
    const EmbeddingMatrix raw = e.EncodeRaw(patches);
    double acc = 0;
    for (std::size_t i = 0; i < raw.values().size(); ++i) {
      acc += raw.values()[i] * g.values()[i];
    }
    return acc;
  };
  MockCountImageEncoder e(std::make_shared<MockCountSpace>(2, MockSpaceOptions{}),
                          0.8, 3.0);
  const auto grad = e.Backward(patches, g);
  const double h = 1e-6;
  EXPECT_NEAR(grad[0], (objective(0.8 + h, 3) - objective(0.8 - h, 3)) / (2 * h),
              1e-6);
  EXPECT_NEAR(grad[1], (objective(0.8, 3 + h) - objective(0.8, 3 - h)) / (2 * h),
              1e-6);
}

TEST(MockEncoders, EncodeIsSafeConcurrently) {
  auto enc = MakeMockCountEncoders(2);
  const std::vector<Image> patches = {Patch(0, 0, 40), Patch(1, 2, 130)};
  const EmbeddingMatrix expected = enc.image->Encode(patches);
  std::vector<std::thread> threads;
  std::atomic<int> mismatches{0};
  for (int t = 0; t < 6; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 50; ++i) {
        if (!(enc.image->Encode(patches) == expected)) ++mismatches;
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(mismatches.load(), 0);
  EXPECT_EQ(enc.image->counters().calls, 301u);
}

TEST(EncoderState, RoundTripAndRejection) {
  auto enc = MakeMockCountEncoders(2);
  const double params[] = {0.7, -4.0};
  enc.image->set_parameters(params);
  const auto blob = enc.image->SerializeState();
  auto other = MakeMockCountEncoders(2);
  other.image->LoadState(blob);
  EXPECT_EQ(other.image->gain(), 0.7);
  EXPECT_EQ(other.image->offset(), -4.0);
  EXPECT_EQ(other.image->SerializeState(), blob);

  auto truncated = blob;
  truncated.pop_back();
  EXPECT_CROWDCLIP_ERROR(other.image->LoadState(truncated), ErrorCode::kParseError);
  auto linear = LinearProjectionImageEncoder::Random(32, 2, 1);
  EXPECT_CROWDCLIP_ERROR(linear.LoadState(blob), ErrorCode::kParseError);
}

TEST(LinearProjection, ShapesStateAndGradient) {
  auto enc = LinearProjectionImageEncoder::Random(8, 2, 4);
  EXPECT_EQ(enc.name(), "linear-projection-g2-d8");
  EXPECT_EQ(enc.num_features(), 13);
  EXPECT_EQ(enc.num_parameters(), 8u * 13u);
  Image a(20, 20), b(20, 20);
  a.Fill(0, 0, 20, 20, 10, 200, 30);
  b.Fill(0, 0, 10, 20, 250, 0, 30);
  const std::vector<Image> patches = {a, b};
  const EmbeddingMatrix e = enc.Encode(patches);
  EXPECT_EQ(e.rows(), 2);
  EXPECT_EQ(e.dim(), 8);

  std::mt19937 rng(2);
  std::normal_distribution<double> n(0, 1);
  EmbeddingMatrix g(2, 8);
  for (double& v : g.mutable_values()) v = n(rng);
  const auto grad = enc.Backward(patches, g);
  auto params = enc.parameters();
  auto value = [&](const std::vector<double>& p) {
    auto copy = enc;
    copy.set_parameters(p);
    const EmbeddingMatrix raw = copy.EncodeRaw(patches);
    double acc = 0;
    for (std::size_t i = 0; i < raw.values().size(); ++i) {
      acc += raw.values()[i] * g.values()[i];
    }
    return acc;
  };
  for (std::size_t k = 0; k < params.size(); k += 7) {
    auto up = params, down = params;
    up[k] += 1e-6;
    down[k] -= 1e-6;
    EXPECT_NEAR(grad[k], (value(up) - value(down)) / 2e-6, 1e-6);
  }
}

TEST(LinearProjection, LoadsSavedWeights) {
  testing::TempDir dir;
  auto enc = LinearProjectionImageEncoder::Random(16, 3, 9);
  const auto blob = enc.SerializeState();
  std::ofstream(dir / "w.bin", std::ios::binary)
      .write(reinterpret_cast<const char*>(blob.data()), blob.size());
  auto loaded = LoadLinearProjectionEncoder(dir / "w.bin");
  EXPECT_EQ(loaded->dim(), 16);
  EXPECT_EQ(loaded->grid(), 3);
  EXPECT_EQ(loaded->parameters(), enc.parameters());
}

TEST(EmbeddingTable, LoadAndLookup) {
  testing::TempDir dir;
  testing::Spit(dir / "t.json",
                R"({"dim": 2, "entries": {"a": [3, 4], "b": [1, 0]}})");
  auto enc = EmbeddingTableTextEncoder::Load(dir / "t.json");
  EXPECT_EQ(enc->dim(), 2);
  const std::vector<std::string> texts = {"b", "a"};
  const EmbeddingMatrix e = enc->Encode(texts);
  EXPECT_DOUBLE_EQ(e(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(e(1, 0), 0.6);
  EXPECT_DOUBLE_EQ(e(1, 1), 0.8);
  const std::vector<std::string> missing = {"zzz"};
  EXPECT_CROWDCLIP_ERROR(enc->Encode(missing), ErrorCode::kEncoderFailure);
}

}  // namespace
}  // namespace crowdclip
