#include "crowdclip/image.hpp"

#include <cstring>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "crowdclip/error.hpp"
#include "crowdclip/hash.hpp"

namespace crowdclip {

Image::Image(int width, int height)
    : width_(width),
      height_(height),
      pixels_(static_cast<std::size_t>(width) * height * 3, 0) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::kInvalidArgument, "image dimensions must be >= 1");
  }
}

Image::Image(int width, int height, std::vector<std::uint8_t> rgb)
    : width_(width), height_(height), pixels_(std::move(rgb)) {
  if (width < 1 || height < 1 ||
      pixels_.size() != static_cast<std::size_t>(width) * height * 3) {
    throw Error(ErrorCode::kInvalidArgument, "pixel buffer size mismatch");
  }
}

void Image::Fill(int x0, int y0, int w, int h, std::uint8_t r, std::uint8_t g,
                 std::uint8_t b) {
  for (int y = y0; y < y0 + h; ++y) {
    for (int x = x0; x < x0 + w; ++x) {
      std::uint8_t* px = at(x, y);
      px[0] = r;
      px[1] = g;
      px[2] = b;
    }
  }
}

namespace {

Image FromBgr(const cv::Mat& bgr) {
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  std::vector<std::uint8_t> data(rgb.total() * 3);
  for (int y = 0; y < rgb.rows; ++y) {
    std::memcpy(data.data() + static_cast<std::size_t>(y) * rgb.cols * 3,
                rgb.ptr(y), static_cast<std::size_t>(rgb.cols) * 3);
  }
  return Image(rgb.cols, rgb.rows, std::move(data));
}

cv::Mat View(const Image& image) {
  return cv::Mat(image.height(), image.width(), CV_8UC3,
                 const_cast<std::uint8_t*>(image.pixels().data()));
}

}  // namespace

Image LoadImage(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) {
    throw Error(ErrorCode::kIoError, "cannot decode image " + path.string());
  }
  return FromBgr(bgr);
}

void SaveImage(const Image& image, const std::filesystem::path& path) {
  cv::Mat bgr;
  cv::cvtColor(View(image), bgr, cv::COLOR_RGB2BGR);
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  if (!cv::imwrite(path.string(), bgr)) {
    throw Error(ErrorCode::kIoError, "cannot write image " + path.string());
  }
}

void ProbeImageSize(const std::filesystem::path& path, int* width,
                    int* height) {
  Image image = LoadImage(path);
  *width = image.width();
  *height = image.height();
}

Image ResizeBilinear(const Image& src, int width, int height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::kInvalidArgument, "resize target must be >= 1");
  }
  if (src.width() == width && src.height() == height) return src;
  Image dst(width, height);
  cv::Mat out(height, width, CV_8UC3, dst.mutable_pixels().data());
  cv::resize(View(src), out, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
  return dst;
}

MeanColor ComputeMeanColor(const Image& image) {
  std::uint64_t sum[3] = {0, 0, 0};
  auto px = image.pixels();
  for (std::size_t i = 0; i < px.size(); i += 3) {
    sum[0] += px[i];
    sum[1] += px[i + 1];
    sum[2] += px[i + 2];
  }
  const double n = static_cast<double>(px.size() / 3);
  return {sum[0] / n, sum[1] / n, sum[2] / n};
}

std::uint64_t Checksum(const Image& image) {
  const std::string dims =
      std::to_string(image.width()) + "x" + std::to_string(image.height());
  return Fnv1a(image.pixels(), Fnv1a(dims));
}

std::string HexDigest(std::uint64_t h) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = kDigits[h & 0xF];
    h >>= 4;
  }
  return out;
}

}  // namespace crowdclip
