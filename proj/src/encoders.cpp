#include "crowdclip/encoders.hpp"

#include <bit>
#include <cstring>
#include <string>

#include "crowdclip/error.hpp"

namespace crowdclip {

std::string_view ToString(Backend backend) {
  return backend == Backend::kMock ? "mock" : "pretrained";
}

namespace {

void CheckEncoded(const EmbeddingMatrix& m, int expected_rows,
                  int expected_dim) {
  if (m.rows() != expected_rows || m.dim() != expected_dim) {
    throw Error(ErrorCode::kEncoderFailure,
                "encoder returned " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.dim()) + ", expected " +
                    std::to_string(expected_rows) + "x" +
                    std::to_string(expected_dim));
  }
}

}  // namespace

EmbeddingMatrix ImageEncoder::EncodeRaw(std::span<const Image> patches) const {
  if (patches.empty()) {
    throw Error(ErrorCode::kShapeMismatch, "no patches to encode");
  }
  for (const Image& patch : patches) {
    if (patch.empty() || patch.width() != patches.front().width() ||
        patch.height() != patches.front().height()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "all patches must share one spatial size");
    }
  }
  calls_.fetch_add(1);
  items_.fetch_add(patches.size());
  EmbeddingMatrix raw = EncodeBatch(patches);
  CheckEncoded(raw, static_cast<int>(patches.size()), dim());
  return raw;
}

EmbeddingMatrix ImageEncoder::Encode(std::span<const Image> patches) const {
  return NormalizeRows(EncodeRaw(patches));
}

EmbeddingMatrix TextEncoder::EncodeRaw(
    std::span<const std::string> texts) const {
  if (texts.empty()) {
    throw Error(ErrorCode::kEncoderFailure, "no texts to encode");
  }
  calls_.fetch_add(1);
  items_.fetch_add(texts.size());
  EmbeddingMatrix raw = EncodeBatch(texts);
  CheckEncoded(raw, static_cast<int>(texts.size()), dim());
  return raw;
}

EmbeddingMatrix TextEncoder::Encode(std::span<const std::string> texts) const {
  return NormalizeRows(EncodeRaw(texts));
}

namespace {

constexpr char kStateMagic[8] = {'C', 'C', 'L', 'P', 'S', 'T', 'A', 'T'};
constexpr std::uint32_t kStateVersion = 1;

template <typename T>
void Append(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::endian::native == std::endian::little,
                "state blobs are written little-endian");
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T Read(std::span<const std::uint8_t> blob, std::size_t& pos) {
  if (pos + sizeof(T) > blob.size()) {
    throw Error(ErrorCode::kParseError, "truncated encoder state");
  }
  T value;
  std::memcpy(&value, blob.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

}  // namespace

std::vector<std::uint8_t> TrainableImageEncoder::SerializeState() const {
  std::vector<std::uint8_t> out(std::begin(kStateMagic), std::end(kStateMagic));
  Append(out, kStateVersion);
  const std::string id = name();
  Append(out, static_cast<std::uint32_t>(id.size()));
  out.insert(out.end(), id.begin(), id.end());
  const std::vector<double> params = parameters();
  Append(out, static_cast<std::uint64_t>(params.size()));
  for (double v : params) Append(out, v);
  return out;
}

void TrainableImageEncoder::LoadState(std::span<const std::uint8_t> blob) {
  if (blob.size() < sizeof(kStateMagic) ||
      std::memcmp(blob.data(), kStateMagic, sizeof(kStateMagic)) != 0) {
    throw Error(ErrorCode::kParseError, "not an encoder state blob");
  }
  std::size_t pos = sizeof(kStateMagic);
  const auto version = Read<std::uint32_t>(blob, pos);
  if (version != kStateVersion) {
    throw Error(ErrorCode::kParseError,
                "unsupported encoder state version " + std::to_string(version));
  }
  const auto name_len = Read<std::uint32_t>(blob, pos);
  if (pos + name_len > blob.size()) {
    throw Error(ErrorCode::kParseError, "truncated encoder state");
  }
  const std::string id(reinterpret_cast<const char*>(blob.data() + pos),
                       name_len);
  pos += name_len;
  if (id != name()) {
    throw Error(ErrorCode::kParseError,
                "state was saved by encoder \"" + id + "\", not \"" + name() +
                    "\"");
  }
  const auto count = Read<std::uint64_t>(blob, pos);
  if (count != num_parameters()) {
    throw Error(ErrorCode::kParseError, "parameter count mismatch");
  }
  std::vector<double> params(count);
  for (auto& v : params) v = Read<double>(blob, pos);
  if (pos != blob.size()) {
    throw Error(ErrorCode::kParseError, "trailing bytes in encoder state");
  }
  set_parameters(params);
}

}  // namespace crowdclip
