#include "crowdclip/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "crowdclip/error.hpp"

namespace crowdclip {
namespace {

const cv::Scalar kPalette[] = {{180, 119, 31}, {14, 127, 255}, {44, 160, 44},
                               {40, 39, 214},  {189, 103, 148}, {75, 86, 140}};

std::string Tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

void Write(const cv::Mat& bgr, const std::filesystem::path& path) {
  if (!path.parent_path().empty()) {
    std::filesystem::create_directories(path.parent_path());
  }
  if (!cv::imwrite(path.string(), bgr)) {
    throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  }
}

}  // namespace

void WriteLineChart(const std::vector<Series>& series, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::filesystem::path& path) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
  double y0 = x0, y1 = -x0;
  for (const Series& s : series) {
    if (s.x.size() != s.y.size()) {
      throw Error(ErrorCode::kLengthMismatch, "series '" + s.name + "' is ragged");
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) throw Error(ErrorCode::kEmpty, "nothing to plot");
  y0 = std::min(y0, 0.0);
  if (x1 - x0 < 1e-12) { x0 -= 0.5; x1 += 0.5; }
  if (y1 - y0 < 1e-12) y1 = y0 + 1.0;
  y1 += 0.05 * (y1 - y0);

  const int width = 800, height = 500;
  const int left = 80, right = 30, top = 50, bottom = 70;
  cv::Mat canvas(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  const auto px = [&](double x) {
    return left + static_cast<int>(std::lround((x - x0) / (x1 - x0) *
                                               (width - left - right)));
  };
  const auto py = [&](double y) {
    return height - bottom -
           static_cast<int>(std::lround((y - y0) / (y1 - y0) *
                                        (height - top - bottom)));
  };
  const cv::Scalar ink(40, 40, 40), grid(225, 225, 225);
  const int font = cv::FONT_HERSHEY_SIMPLEX;
  for (int t = 0; t <= 5; ++t) {
    const double yv = y0 + (y1 - y0) * t / 5.0;
    const double xv = x0 + (x1 - x0) * t / 5.0;
    cv::line(canvas, {left, py(yv)}, {width - right, py(yv)}, grid, 1);
    cv::line(canvas, {px(xv), top}, {px(xv), height - bottom}, grid, 1);
    cv::putText(canvas, Tick(yv), {8, py(yv) + 5}, font, 0.45, ink, 1, cv::LINE_AA);
    cv::putText(canvas, Tick(xv), {px(xv) - 15, height - bottom + 20}, font, 0.45,
                ink, 1, cv::LINE_AA);
  }
  cv::rectangle(canvas, {left, top}, {width - right, height - bottom}, ink, 1);
  cv::putText(canvas, title, {left, 32}, font, 0.7, ink, 1, cv::LINE_AA);
  cv::putText(canvas, x_label, {width / 2 - 40, height - 20}, font, 0.55, ink,
              1, cv::LINE_AA);
  cv::putText(canvas, y_label, {8, top - 10}, font, 0.5, ink, 1, cv::LINE_AA);

  for (std::size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    const cv::Scalar color = kPalette[si % std::size(kPalette)];
    std::vector<std::size_t> order(s.x.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return s.x[a] < s.x[b]; });
    for (std::size_t k = 0; k < order.size(); ++k) {
      const cv::Point p(px(s.x[order[k]]), py(s.y[order[k]]));
      cv::circle(canvas, p, 4, color, cv::FILLED, cv::LINE_AA);
      if (k > 0) {
        const cv::Point q(px(s.x[order[k - 1]]), py(s.y[order[k - 1]]));
        cv::line(canvas, q, p, color, 2, cv::LINE_AA);
      }
    }
    const int ly = top + 20 + 22 * static_cast<int>(si);
    cv::line(canvas, {width - right - 170, ly}, {width - right - 140, ly}, color,
             2, cv::LINE_AA);
    cv::putText(canvas, s.name, {width - right - 132, ly + 5}, font, 0.5, ink, 1,
                cv::LINE_AA);
  }
  Write(canvas, path);
}

void WriteCountOverlay(const Image& photo, double predicted,
                       double ground_truth, const std::filesystem::path& path) {
  if (photo.empty()) throw Error(ErrorCode::kEmpty, "overlay photo is empty");
  cv::Mat rgb(photo.height(), photo.width(), CV_8UC3,
              const_cast<std::uint8_t*>(photo.pixels().data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  const int banner = std::max(28, photo.height() / 10);
  cv::Mat out(photo.height() + banner, photo.width(), CV_8UC3,
              cv::Scalar(20, 20, 20));
  bgr.copyTo(out(cv::Rect(0, banner, photo.width(), photo.height())));
  const std::string text = "pred " + Tick(predicted) + "  gt " + Tick(ground_truth);
  const double scale = std::clamp(banner / 40.0, 0.35, 1.5);
  cv::putText(out, text, {6, banner - banner / 4}, cv::FONT_HERSHEY_SIMPLEX,
              scale, cv::Scalar(255, 255, 255), 1, cv::LINE_AA);
  Write(out, path);
}

}  // namespace crowdclip
