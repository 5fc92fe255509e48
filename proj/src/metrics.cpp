#include "crowdclip/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "crowdclip/error.hpp"
#include "format.hpp"

namespace crowdclip {

EvalReport ComputeMetrics(std::span<const double> predictions,
                          std::span<const double> ground_truth,
                          std::span<const std::string> ids) {
  if (predictions.size() != ground_truth.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                std::to_string(predictions.size()) + " predictions vs " +
                    std::to_string(ground_truth.size()) + " ground truths");
  }
  if (!ids.empty() && ids.size() != predictions.size()) {
    throw Error(ErrorCode::kLengthMismatch, "ids do not match predictions");
  }
  if (predictions.empty()) {
    throw Error(ErrorCode::kEmpty, "no images to score");
  }
  EvalReport report;
  report.n_images = static_cast<int>(predictions.size());
  std::vector<double> errors(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    ImageError e;
    e.id = ids.empty() ? std::to_string(i) : ids[i];
    e.estimate = predictions[i];
    e.ground_truth = ground_truth[i];
    e.abs_err = std::abs(predictions[i] - ground_truth[i]);
    errors[i] = e.abs_err;
    report.per_image.push_back(std::move(e));
  }
  // Summing in sorted order makes the result independent of image order.
  std::sort(errors.begin(), errors.end());
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (double e : errors) {
    abs_sum += e;
    sq_sum += e * e;
  }
  const double n = static_cast<double>(errors.size());
  report.mae = abs_sum / n;
  report.mse = std::sqrt(sq_sum / n);
  return report;
}

ThroughputRange SummarizeThroughput(std::span<const double> seconds_per_image) {
  ThroughputRange range;
  if (seconds_per_image.empty()) return range;
  double sum = 0.0;
  range.min = std::numeric_limits<double>::infinity();
  for (double s : seconds_per_image) {
    const double fps = 1.0 / std::max(s, 1e-9);
    range.min = std::min(range.min, fps);
    range.max = std::max(range.max, fps);
    sum += fps;
  }
  range.mean = sum / static_cast<double>(seconds_per_image.size());
  return range;
}

std::string EvalReportToJson(const EvalReport& report,
                             bool include_throughput) {
  nlohmann::ordered_json j;
  j["label"] = report.label;
  j["n_images"] = report.n_images;
  j["mae"] = report.mae;
  j["mse"] = report.mse;
  if (include_throughput) {
    j["throughput_fps"] = {{"min", report.throughput_fps.min},
                           {"max", report.throughput_fps.max},
                           {"mean", report.throughput_fps.mean}};
  }
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const ImageError& e : report.per_image) {
    nlohmann::ordered_json r;
    r["id"] = e.id;
    r["estimate"] = e.estimate;
    r["ground_truth"] = e.ground_truth;
    r["abs_err"] = e.abs_err;
    rows.push_back(std::move(r));
  }
  j["per_image"] = std::move(rows);
  return j.dump(2) + "\n";
}

std::string EvalReportToCsv(const EvalReport& report) {
  using internal::FormatDouble;
  std::ostringstream out;
  out << "id,estimate,ground_truth,abs_err\n";
  for (const ImageError& e : report.per_image) {
    std::string id = e.id;
    if (id.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : id) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
      id = quoted + "\"";
    }
    out << id << "," << FormatDouble(e.estimate) << ","
        << FormatDouble(e.ground_truth) << "," << FormatDouble(e.abs_err)
        << "\n";
  }
  return out.str();
}

EvalReport EvalReportFromJson(const std::string& text) {
  EvalReport report;
  try {
    const auto j = nlohmann::json::parse(text);
    report.label = j.value("label", std::string());
    report.n_images = j.at("n_images").get<int>();
    report.mae = j.at("mae").get<double>();
    report.mse = j.at("mse").get<double>();
    if (j.contains("throughput_fps")) {
      const auto& t = j["throughput_fps"];
      report.throughput_fps = {t.at("min").get<double>(),
                               t.at("max").get<double>(),
                               t.at("mean").get<double>()};
    }
    for (const auto& r : j.value("per_image", nlohmann::json::array())) {
      report.per_image.push_back({r.at("id").get<std::string>(),
                                  r.at("estimate").get<double>(),
                                  r.at("ground_truth").get<double>(),
                                  r.at("abs_err").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError,
                std::string("bad eval report: ") + e.what());
  }
  return report;
}

}  // namespace crowdclip
