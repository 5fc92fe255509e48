#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "crowdclip/dataset.hpp"
#include "crowdclip/image.hpp"
#include "crowdclip/metrics.hpp"
#include "test_util.hpp"

namespace crowdclip {
namespace {

std::string PointsJson(int n, int w, int h) {
  std::string s = "[";
  for (int i = 0; i < n; ++i) {
    if (i) s += ",";
    s += "[" + std::to_string((i * 7) % w) + "," + std::to_string((i * 3) % h) + "]";
  }
  return s + "]";
}

TEST(Ingest, CountsComeFromPointLists) {
  testing::TempDir dir;
  testing::Spit(dir / "m.jsonl",
                R"({"image":"a.png","width":100,"height":80,"points":)" +
                    PointsJson(10, 100, 80) + "}\n" +
                    R"({"image":"b.png","width":100,"height":80,"points":[]})" "\n" +
                    R"({"image":"c.png","width":400,"height":300,"points":)" +
                    PointsJson(250, 400, 300) + "}\n");
  const DatasetManifest m = Ingest(dir / "m.jsonl");
  ASSERT_EQ(m.images.size(), 3u);
  EXPECT_EQ(m.images[0].ground_truth(), 10);
  EXPECT_EQ(m.images[1].ground_truth(), 0);
  EXPECT_EQ(m.images[2].ground_truth(), 250);
  EXPECT_EQ(m.name, "m");
  EXPECT_EQ(m.default_p, 3);
  EXPECT_FALSE(m.resize_max_long.has_value());
  EXPECT_EQ(m.images[0].image.path, (dir / "a.png").string());
}

TEST(Ingest, OutOfBoundsPointsAreReported) {
  testing::TempDir dir;
  testing::Spit(dir / "m.jsonl",
                R"({"image":"a.png","width":100,"height":80,"points":[[-1,5],[3,3]]})"
                "\n");
  try {
    Ingest(dir / "m.jsonl");
    FAIL() << "expected BoundsError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBoundsError);
    EXPECT_NE(std::string(e.what()).find("(-1, 5)"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("m.jsonl:1"), std::string::npos);
  }
}

TEST(Ingest, ParseErrorsCarryTheLine) {
  testing::TempDir dir;
  testing::Spit(dir / "m.jsonl",
                R"({"image":"a.png","width":1,"height":1})" "\n\n{oops\n");
  try {
    Ingest(dir / "m.jsonl");
    FAIL() << "expected ParseError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_NE(std::string(e.what()).find("m.jsonl:3"), std::string::npos);
  }
  EXPECT_CROWDCLIP_ERROR(Ingest(dir / "absent.jsonl"), ErrorCode::kIoError);
}

TEST(Ingest, ProbesSizeWhenMissing) {
  testing::TempDir dir;
  Image img(64, 48);
  SaveImage(img, dir / "a.png");
  testing::Spit(dir / "m.jsonl", R"({"image":"a.png","points":[[60,40]]})" "\n");
  const DatasetManifest m = Ingest(dir / "m.jsonl");
  EXPECT_EQ(m.images[0].image.width, 64);
  EXPECT_EQ(m.images[0].image.height, 48);
}

TEST(Ingest, QnrfStyleSplitAndPolicy) {
  testing::TempDir dir;
  std::string text = R"({"dataset":"UCF-QNRF"})" "\n";
  for (int i = 0; i < 1201 + 334; ++i) {
    text += R"({"image":"img_)" + std::to_string(i) + R"(.jpg","width":64,"height":64,"split":")" +
            (i < 1201 ? "train" : "test") + R"(","points":[[1,1]]})" "\n";
  }
  testing::Spit(dir / "qnrf.jsonl", text);
  const DatasetManifest m = Ingest(dir / "qnrf.jsonl");
  EXPECT_EQ(m.name, "UCF-QNRF");
  EXPECT_EQ(m.Select(Split::kTrain).size(), 1201u);
  EXPECT_EQ(m.Select(Split::kTest).size(), 334u);
  EXPECT_EQ(m.ImageRefs(Split::kTest).size(), 334u);
  EXPECT_EQ(m.default_p, 4);
  EXPECT_EQ(m.resize_max_long, 2048);
  EXPECT_EQ(Ingest(dir / "qnrf.jsonl", "custom").name, "custom");
}

TEST(DatasetPolicy, NamedDatasets) {
  EXPECT_EQ(PolicyForDataset("UCF_CC_50").default_p, 4);
  EXPECT_FALSE(PolicyForDataset("UCF_CC_50").resize_max_long.has_value());
  EXPECT_EQ(PolicyForDataset("JHU-Crowd++").default_p, 3);
  EXPECT_EQ(PolicyForDataset("JHU-Crowd++").resize_max_long, 2048);
  EXPECT_EQ(PolicyForDataset("ShanghaiTech Part A").default_p, 3);
}

TEST(Manifest, WriteThenIngestRoundTrips) {
  testing::TempDir dir;
  DatasetManifest m;
  m.name = "round";
  AnnotatedImage a;
  a.image = {(dir / "x.png").string(), 50, 40};
  a.points = {{1, 2}, {3.5, 4}};
  a.split = Split::kTrain;
  m.images.push_back(a);
  WriteManifest(m, dir / "out.jsonl");
  const DatasetManifest back = Ingest(dir / "out.jsonl");
  EXPECT_EQ(back.name, "round");
  ASSERT_EQ(back.images.size(), 1u);
  EXPECT_EQ(back.images[0].image, a.image);
  EXPECT_EQ(back.images[0].split, Split::kTrain);
  EXPECT_EQ(back.images[0].points[1].x, 3.5);
  EXPECT_EQ(testing::Slurp(dir / "out.jsonl").find(dir.path().string()),
            std::string::npos);
}

TEST(Split, ParseRoundTrip) {
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    EXPECT_EQ(ParseSplit(ToString(s)), s);
  }
  EXPECT_THROW(ParseSplit("holdout"), Error);
}

TEST(Metrics, WorkedExample) {
  const std::vector<double> pred = {10, 20}, gt = {0, 0};
  const EvalReport r = ComputeMetrics(pred, gt);
  EXPECT_DOUBLE_EQ(r.mae, 15.0);
  EXPECT_DOUBLE_EQ(r.mse, 15.811388300841896);
  EXPECT_EQ(r.n_images, 2);
  ASSERT_EQ(r.per_image.size(), 2u);
  EXPECT_EQ(r.per_image[1].abs_err, 20.0);
}

TEST(Metrics, Errors) {
  const std::vector<double> one = {1}, two = {1, 2}, none;
  EXPECT_CROWDCLIP_ERROR(ComputeMetrics(one, two), ErrorCode::kLengthMismatch);
  EXPECT_CROWDCLIP_ERROR(ComputeMetrics(none, none), ErrorCode::kEmpty);
}

TEST(Metrics, Properties) {
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> u(0, 500);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 30;
    std::vector<double> pred(n), gt(n);
    for (int i = 0; i < n; ++i) {
      pred[i] = std::round(u(rng));
      gt[i] = std::round(u(rng));
    }
    const EvalReport r = ComputeMetrics(pred, gt);
    EXPECT_GE(r.mae, 0.0);
    EXPECT_GE(r.mse + 1e-9, r.mae);  // root-mean-square dominates the mean
    // Order of images does not matter, bit for bit.
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pp(n), gp(n);
    for (int i = 0; i < n; ++i) {
      pp[i] = pred[perm[i]];
      gp[i] = gt[perm[i]];
    }
    const EvalReport s = ComputeMetrics(pp, gp);
    EXPECT_EQ(s.mae, r.mae);
    EXPECT_EQ(s.mse, r.mse);
    EXPECT_EQ(ComputeMetrics(gt, gt).mae, 0.0);
  }
}

TEST(Throughput, RangeOfFramesPerSecond) {
  const std::vector<double> seconds = {0.5, 0.25, 1.0};
  const ThroughputRange t = SummarizeThroughput(seconds);
  EXPECT_DOUBLE_EQ(t.min, 1.0);
  EXPECT_DOUBLE_EQ(t.max, 4.0);
  EXPECT_DOUBLE_EQ(t.mean, 7.0 / 3.0);
}

TEST(EvalReport, JsonAndCsv) {
  const std::vector<double> pred = {10, 20}, gt = {0, 0};
  const std::vector<std::string> ids = {"a.png", "b.png"};
  EvalReport r = ComputeMetrics(pred, gt, ids);
  r.label = "fixture";
  const std::string json = EvalReportToJson(r);
  EXPECT_EQ(json.find("throughput"), std::string::npos);
  const EvalReport back = EvalReportFromJson(json);
  EXPECT_EQ(back.label, "fixture");
  EXPECT_EQ(back.mae, r.mae);
  EXPECT_EQ(back.mse, r.mse);
  ASSERT_EQ(back.per_image.size(), 2u);
  EXPECT_EQ(back.per_image[0].id, "a.png");
  const std::string csv = EvalReportToCsv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "id,estimate,ground_truth,abs_err");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

}  // namespace
}  // namespace crowdclip
