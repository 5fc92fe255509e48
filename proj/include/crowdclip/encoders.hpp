#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "crowdclip/embedding.hpp"
#include "crowdclip/image.hpp"

namespace crowdclip {

enum class Backend { kPretrained, kMock };

std::string_view ToString(Backend backend);

// Counters are observable so tests can assert how many patches a pipeline
// actually pushed through an encoder.
struct EncoderCounters {
  std::uint64_t calls = 0;
  std::uint64_t items = 0;
};

class ImageEncoder {
 public:
  virtual ~ImageEncoder() = default;

  // One L2-normalized row per patch, order preserved.  All patches must share
  // one spatial size.
  EmbeddingMatrix Encode(std::span<const Image> patches) const;

  // Same validation and bookkeeping as Encode() but without normalization.
  EmbeddingMatrix EncodeRaw(std::span<const Image> patches) const;

  virtual int dim() const = 0;
  virtual Backend backend() const = 0;
  virtual std::string name() const = 0;

  bool trainable() const noexcept { return trainable_; }
  void set_trainable(bool trainable) noexcept { trainable_ = trainable; }

  EncoderCounters counters() const noexcept {
    return {calls_.load(), items_.load()};
  }
  void ResetCounters() noexcept {
    calls_ = 0;
    items_ = 0;
  }

 protected:
  ImageEncoder() = default;
  ImageEncoder(const ImageEncoder& other) : trainable_(other.trainable_) {}

  virtual EmbeddingMatrix EncodeBatch(std::span<const Image> patches) const = 0;

 private:
  bool trainable_ = true;
  mutable std::atomic<std::uint64_t> calls_{0};
  mutable std::atomic<std::uint64_t> items_{0};
};

// An image encoder with a flat parameter vector and a hand-written backward
// pass.  Backward() maps dL/d(raw embedding) to dL/d(parameters).
class TrainableImageEncoder : public ImageEncoder {
 public:
  virtual std::vector<double> parameters() const = 0;
  virtual void set_parameters(std::span<const double> params) = 0;
  virtual std::vector<double> Backward(std::span<const Image> patches,
                                       const EmbeddingMatrix& grad_raw) const = 0;
  virtual std::unique_ptr<TrainableImageEncoder> Clone() const = 0;

  std::size_t num_parameters() const { return parameters().size(); }

  // Opaque versioned blob: magic, encoder name, parameter count, float64 LE.
  std::vector<std::uint8_t> SerializeState() const;
  void LoadState(std::span<const std::uint8_t> blob);
};

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;

  // One L2-normalized row per text.  An empty list is an encoder failure.
  EmbeddingMatrix Encode(std::span<const std::string> texts) const;
  EmbeddingMatrix EncodeRaw(std::span<const std::string> texts) const;

  virtual int dim() const = 0;
  virtual Backend backend() const = 0;
  virtual std::string name() const = 0;

  // Identifies the weights, used as part of the prompt-embedding cache key.
  virtual std::string fingerprint() const { return name(); }

  bool trainable() const noexcept { return trainable_; }
  void set_trainable(bool trainable) noexcept { trainable_ = trainable; }

  EncoderCounters counters() const noexcept {
    return {calls_.load(), items_.load()};
  }
  void ResetCounters() noexcept {
    calls_ = 0;
    items_ = 0;
  }

 protected:
  virtual EmbeddingMatrix EncodeBatch(
      std::span<const std::string> texts) const = 0;

 private:
  bool trainable_ = false;
  mutable std::atomic<std::uint64_t> calls_{0};
  mutable std::atomic<std::uint64_t> items_{0};
};

}  // namespace crowdclip
