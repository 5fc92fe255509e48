#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "crowdclip/image.hpp"

namespace crowdclip {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

// Static PNG line chart with labelled axes and a legend.
void WriteLineChart(const std::vector<Series>& series, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::filesystem::path& path);

// The photo with predicted and ground-truth totals drawn in a banner.
void WriteCountOverlay(const Image& photo, double predicted,
                       double ground_truth, const std::filesystem::path& path);

}  // namespace crowdclip
