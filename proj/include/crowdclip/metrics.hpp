#pragma once

#include <span>
#include <string>
#include <vector>

namespace crowdclip {

struct ImageError {
  std::string id;
  double estimate = 0.0;
  double ground_truth = 0.0;
  double abs_err = 0.0;
};

struct ThroughputRange {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

struct EvalReport {
  std::string label;
  int n_images = 0;
  double mae = 0.0;
  double mse = 0.0;  // root of the mean squared error
  std::vector<ImageError> per_image;
  ThroughputRange throughput_fps;
};

// MAE = mean |E - C|, MSE = sqrt(mean |E - C|^2).
EvalReport ComputeMetrics(std::span<const double> predictions,
                          std::span<const double> ground_truth,
                          std::span<const std::string> ids = {});

ThroughputRange SummarizeThroughput(std::span<const double> seconds_per_image);

// Deterministic serializations (throughput is written separately).
std::string EvalReportToJson(const EvalReport& report,
                             bool include_throughput = false);
std::string EvalReportToCsv(const EvalReport& report);
EvalReport EvalReportFromJson(const std::string& text);

}  // namespace crowdclip
