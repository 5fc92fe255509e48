#include "crowdclip/mock_encoders.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <regex>

#include "crowdclip/error.hpp"
#include "crowdclip/hash.hpp"

namespace crowdclip {

namespace {

constexpr int kMinSpareDims = 4;
const std::string kCoarsePrefix = "The object is ";
const std::string kFinePrefix = "The objects are ";

}  // namespace

MockCountSpace::MockCountSpace(std::uint64_t seed, MockSpaceOptions options)
    : seed_(seed), options_(std::move(options)) {
  if (options_.coarse_vocab.empty() || options_.fine_vocab.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "mock vocabularies are empty");
  }
  if (options_.dim < spare_offset() + kMinSpareDims) {
    throw Error(ErrorCode::kInvalidArgument,
                "mock embedding dim " + std::to_string(options_.dim) +
                    " too small; need >= " +
                    std::to_string(spare_offset() + kMinSpareDims));
  }
  if (!(options_.max_count > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "max_count must be positive");
  }
  theta_ = (std::numbers::pi / 2.0) / options_.max_count;

  const int d = options_.dim;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd gaussian(d, d);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) gaussian(r, c) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int c = 0; c < d; ++c) {
    if (r(c, c) < 0) q.col(c) *= -1.0;
  }
  rotation_.resize(static_cast<std::size_t>(d) * d);
  for (int row = 0; row < d; ++row) {
    for (int c = 0; c < d; ++c) rotation_[row * d + c] = q(row, c);
  }
}

std::vector<double> MockCountSpace::CoarseAxis(int index) const {
  std::vector<double> v(dim(), 0.0);
  v[coarse_offset() + index] = 1.0;
  return v;
}

std::vector<double> MockCountSpace::FineAxis(int index) const {
  std::vector<double> v(dim(), 0.0);
  v[fine_offset() + index] = 1.0;
  return v;
}

std::vector<double> MockCountSpace::CountVector(double count) const {
  std::vector<double> v(dim(), 0.0);
  v[count_offset()] = std::cos(theta_ * count);
  v[count_offset() + 1] = std::sin(theta_ * count);
  return v;
}

std::vector<double> MockCountSpace::CountDerivative(double count) const {
  std::vector<double> v(dim(), 0.0);
  v[count_offset()] = -theta_ * std::sin(theta_ * count);
  v[count_offset() + 1] = theta_ * std::cos(theta_ * count);
  return v;
}

std::vector<double> MockCountSpace::SpareDirection(
    const std::string& key) const {
  std::mt19937_64 rng(Fnv1a(key) ^ seed_);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim(), 0.0);
  double norm = 0.0;
  for (int i = spare_offset(); i < dim(); ++i) {
    v[i] = normal(rng);
    norm += v[i] * v[i];
  }
  norm = std::sqrt(norm);
  for (int i = spare_offset(); i < dim(); ++i) v[i] /= norm;
  return v;
}

std::vector<double> MockCountSpace::Rotate(std::span<const double> v) const {
  const int d = dim();
  std::vector<double> out(d, 0.0);
  for (int row = 0; row < d; ++row) {
    double acc = 0.0;
    for (int c = 0; c < d; ++c) acc += rotation_[row * d + c] * v[c];
    out[row] = acc;
  }
  return out;
}

int MockCountSpace::FindCoarse(const std::string& name) const {
  const auto& vocab = options_.coarse_vocab;
  const auto it = std::find(vocab.begin(), vocab.end(), name);
  return it == vocab.end() ? -1 : static_cast<int>(it - vocab.begin());
}

int MockCountSpace::FindFine(const std::string& name) const {
  const auto& vocab = options_.fine_vocab;
  const auto it = std::find(vocab.begin(), vocab.end(), name);
  return it == vocab.end() ? -1 : static_cast<int>(it - vocab.begin());
}

std::array<std::uint8_t, 3> MockColor(int scene_index, int part_index,
                                      int count) {
  constexpr int kMaxIndex = 255 / kMockChannelStep;
  if (scene_index < 0 || scene_index > kMaxIndex || part_index < 0 ||
      part_index > kMaxIndex || count < 0 || count > 255) {
    throw Error(ErrorCode::kInvalidArgument, "mock color code out of range");
  }
  return {static_cast<std::uint8_t>(scene_index * kMockChannelStep),
          static_cast<std::uint8_t>(part_index * kMockChannelStep),
          static_cast<std::uint8_t>(count)};
}

MockCountImageEncoder::MockCountImageEncoder(
    std::shared_ptr<const MockCountSpace> space, double gain, double offset)
    : space_(std::move(space)), gain_(gain), offset_(offset) {}

void MockCountImageEncoder::set_parameters(std::span<const double> params) {
  if (params.size() != 2) {
    throw Error(ErrorCode::kShapeMismatch, "mock image encoder has 2 params");
  }
  gain_ = params[0];
  offset_ = params[1];
}

std::unique_ptr<TrainableImageEncoder> MockCountImageEncoder::Clone() const {
  auto copy = std::make_unique<MockCountImageEncoder>(space_, gain_, offset_);
  copy->set_trainable(trainable());
  return copy;
}

std::vector<double> MockCountImageEncoder::RawEmbedding(
    const MeanColor& mean) const {
  const auto& opts = space_->options();
  const int scene = static_cast<int>(std::lround(mean.r / kMockChannelStep));
  const int part = static_cast<int>(std::lround(mean.g / kMockChannelStep));
  std::vector<double> raw =
      space_->CountVector(gain_ * mean.b + offset_);
  const auto add = [&raw](const std::vector<double>& v) {
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] += v[i];
  };
  add(scene < static_cast<int>(opts.coarse_vocab.size())
          ? space_->CoarseAxis(scene)
          : space_->SpareDirection("scene:" + std::to_string(scene)));
  add(part < static_cast<int>(opts.fine_vocab.size())
          ? space_->FineAxis(part)
          : space_->SpareDirection("part:" + std::to_string(part)));
  return space_->Rotate(raw);
}

EmbeddingMatrix MockCountImageEncoder::EncodeBatch(
    std::span<const Image> patches) const {
  EmbeddingMatrix out(static_cast<int>(patches.size()), dim());
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto raw = RawEmbedding(ComputeMeanColor(patches[i]));
    std::copy(raw.begin(), raw.end(), out.row(static_cast<int>(i)).begin());
  }
  return out;
}

std::vector<double> MockCountImageEncoder::Backward(
    std::span<const Image> patches, const EmbeddingMatrix& grad_raw) const {
  if (grad_raw.rows() != static_cast<int>(patches.size()) ||
      grad_raw.dim() != dim()) {
    throw Error(ErrorCode::kShapeMismatch, "gradient shape mismatch");
  }
  std::vector<double> grad(2, 0.0);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const double blue = ComputeMeanColor(patches[i]).b;
    const auto dc = space_->Rotate(space_->CountDerivative(gain_ * blue + offset_));
    const double g = Dot(grad_raw.row(static_cast<int>(i)), dc);
    grad[0] += g * blue;
    grad[1] += g;
  }
  return grad;
}

MockCountTextEncoder::MockCountTextEncoder(
    std::shared_ptr<const MockCountSpace> space)
    : space_(std::move(space)) {}

std::string MockCountTextEncoder::fingerprint() const {
  std::string key = name() + ":" + std::to_string(space_->seed()) + ":" +
                    std::to_string(space_->dim());
  for (const auto& c : space_->options().coarse_vocab) key += "|" + c;
  for (const auto& f : space_->options().fine_vocab) key += "|" + f;
  return key;
}

EmbeddingMatrix MockCountTextEncoder::EncodeBatch(
    std::span<const std::string> texts) const {
  static const std::regex kInteger("(-?\\d+)");
  EmbeddingMatrix out(static_cast<int>(texts.size()), dim());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const std::string& text = texts[i];
    std::vector<double> raw;
    if (text.rfind(kCoarsePrefix, 0) == 0) {
      const std::string cls = text.substr(kCoarsePrefix.size());
      const int idx = space_->FindCoarse(cls);
      raw = idx >= 0 ? space_->CoarseAxis(idx)
                     : space_->SpareDirection("coarse:" + cls);
    } else if (text.rfind(kFinePrefix, 0) == 0) {
      const std::string cls = text.substr(kFinePrefix.size());
      const int idx = space_->FindFine(cls);
      raw = idx >= 0 ? space_->FineAxis(idx)
                     : space_->SpareDirection("fine:" + cls);
    } else {
      std::string last;
      for (auto it = std::sregex_iterator(text.begin(), text.end(), kInteger);
           it != std::sregex_iterator(); ++it) {
        last = (*it)[1];
      }
      raw = last.empty() ? space_->SpareDirection("text:" + text)
                         : space_->CountVector(std::stod(last));
    }
    const auto rotated = space_->Rotate(raw);
    std::copy(rotated.begin(), rotated.end(),
              out.row(static_cast<int>(i)).begin());
  }
  return out;
}

MockEncoderPair MakeMockCountEncoders(std::uint64_t seed,
                                      MockSpaceOptions options) {
  auto space = std::make_shared<const MockCountSpace>(seed, std::move(options));
  MockEncoderPair pair;
  pair.image = std::make_unique<MockCountImageEncoder>(space);
  pair.text = std::make_unique<MockCountTextEncoder>(space);
  return pair;
}

}  // namespace crowdclip
