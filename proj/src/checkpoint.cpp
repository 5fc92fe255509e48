#include "crowdclip/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"

#include "crowdclip/error.hpp"
#include "crowdclip/hash.hpp"

namespace crowdclip {

using Json = nlohmann::ordered_json;

namespace {

constexpr char kImageStateFile[] = "image_encoder.bin";
constexpr char kTextStateFile[] = "text_ranking.bin";
constexpr char kManifestFile[] = "manifest.json";
constexpr char kEmbeddingMagic[8] = {'C', 'C', 'L', 'P', 'E', 'M', 'B', '1'};

}  // namespace

std::vector<std::uint8_t> ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteFileBytes(const std::filesystem::path& path,
                    std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> SerializeEmbeddings(const EmbeddingMatrix& m) {
  static_assert(std::endian::native == std::endian::little);
  std::vector<std::uint8_t> out(std::begin(kEmbeddingMagic),
                                std::end(kEmbeddingMagic));
  const std::int32_t shape[2] = {m.rows(), m.dim()};
  const auto* p = reinterpret_cast<const std::uint8_t*>(shape);
  out.insert(out.end(), p, p + sizeof(shape));
  const auto* v = reinterpret_cast<const std::uint8_t*>(m.values().data());
  out.insert(out.end(), v, v + m.values().size() * sizeof(double));
  return out;
}

EmbeddingMatrix DeserializeEmbeddings(std::span<const std::uint8_t> blob) {
  constexpr std::size_t kHeader = sizeof(kEmbeddingMagic) + 8;
  if (blob.size() < kHeader ||
      std::memcmp(blob.data(), kEmbeddingMagic, sizeof(kEmbeddingMagic)) != 0) {
    throw Error(ErrorCode::kParseError, "not an embedding blob");
  }
  std::int32_t shape[2];
  std::memcpy(shape, blob.data() + sizeof(kEmbeddingMagic), sizeof(shape));
  if (shape[0] < 0 || shape[1] < 0 ||
      blob.size() != kHeader + static_cast<std::size_t>(shape[0]) * shape[1] *
                                   sizeof(double)) {
    throw Error(ErrorCode::kParseError, "embedding blob size mismatch");
  }
  std::vector<double> values(static_cast<std::size_t>(shape[0]) * shape[1]);
  std::memcpy(values.data(), blob.data() + kHeader,
              values.size() * sizeof(double));
  return EmbeddingMatrix(shape[0], shape[1], std::move(values));
}

void SaveCheckpoint(const Checkpoint& ckpt, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  WriteFileBytes(dir / kImageStateFile, ckpt.image_encoder_state);
  Json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["encoder_name"] = ckpt.encoder_name;
  manifest["backend"] = ckpt.backend;
  manifest["image_encoder_state"] = kImageStateFile;
  manifest["image_encoder_digest"] =
      HexDigest(Fnv1a(std::span<const std::uint8_t>(ckpt.image_encoder_state)));
  if (ckpt.text_rank_embeddings) {
    WriteFileBytes(dir / kTextStateFile,
                   SerializeEmbeddings(*ckpt.text_rank_embeddings));
    manifest["text_rank_embeddings"] = kTextStateFile;
  } else {
    std::filesystem::remove(dir / kTextStateFile);
    manifest["text_rank_embeddings"] = nullptr;
  }
  manifest["ranking"] = {{"r0", ckpt.ranking.r0},
                         {"k", ckpt.ranking.k},
                         {"n", ckpt.ranking.n},
                         {"template", ckpt.ranking.template_text},
                         {"alphabetic", ckpt.ranking.alphabetic}};
  manifest["train_dataset"] = ckpt.train_dataset;
  manifest["epochs_completed"] = ckpt.epochs_completed;
  manifest["config_hash"] = ckpt.config_hash;
  manifest["initial_loss"] = ckpt.initial_loss;
  manifest["loss_history"] = ckpt.loss_history;
  manifest["violated_pair_rate_history"] = ckpt.violated_history;
  Json settings = Json::object();
  for (const auto& [key, value] : ckpt.settings) settings[key] = value;
  manifest["settings"] = settings;

  std::ofstream out(dir / kManifestFile, std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kIoError, "cannot write checkpoint manifest");
  }
  out << manifest.dump(2) << "\n";
}

Checkpoint LoadCheckpoint(const std::filesystem::path& dir) {
  const auto manifest_path = dir / kManifestFile;
  std::ifstream in(manifest_path);
  if (!in) {
    throw Error(ErrorCode::kIoError,
                "checkpoint manifest not found: " + manifest_path.string());
  }
  Json manifest;
  try {
    manifest = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParseError,
                manifest_path.string() + ": " + e.what());
  }
  Checkpoint ckpt;
  try {
    if (manifest.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw Error(ErrorCode::kParseError, "unsupported checkpoint version");
    }
    ckpt.encoder_name = manifest.at("encoder_name").get<std::string>();
    ckpt.backend = manifest.at("backend").get<std::string>();
    ckpt.image_encoder_state = ReadFileBytes(
        dir / manifest.at("image_encoder_state").get<std::string>());
    const auto digest = HexDigest(
        Fnv1a(std::span<const std::uint8_t>(ckpt.image_encoder_state)));
    if (digest != manifest.at("image_encoder_digest").get<std::string>()) {
      throw Error(ErrorCode::kParseError,
                  "image encoder state does not match its manifest digest");
    }
    if (!manifest.at("text_rank_embeddings").is_null()) {
      ckpt.text_rank_embeddings = DeserializeEmbeddings(ReadFileBytes(
          dir / manifest.at("text_rank_embeddings").get<std::string>()));
    }
    const auto& r = manifest.at("ranking");
    ckpt.ranking.r0 = r.at("r0").get<int>();
    ckpt.ranking.k = r.at("k").get<int>();
    ckpt.ranking.n = r.at("n").get<int>();
    ckpt.ranking.template_text = r.at("template").get<std::string>();
    ckpt.ranking.alphabetic = r.at("alphabetic").get<bool>();
    ckpt.train_dataset = manifest.at("train_dataset").get<std::string>();
    ckpt.epochs_completed = manifest.at("epochs_completed").get<int>();
    ckpt.config_hash = manifest.at("config_hash").get<std::string>();
    ckpt.initial_loss = manifest.at("initial_loss").get<double>();
    ckpt.loss_history = manifest.at("loss_history").get<std::vector<double>>();
    ckpt.violated_history =
        manifest.at("violated_pair_rate_history").get<std::vector<double>>();
    for (const auto& [key, value] : manifest.at("settings").items()) {
      ckpt.settings.emplace_back(key, value.get<std::string>());
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParseError,
                manifest_path.string() + ": " + e.what());
  }
  return ckpt;
}

}  // namespace crowdclip
