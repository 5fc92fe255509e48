#pragma once

#include <span>
#include <vector>

namespace crowdclip {

// Dense row-major matrix of embeddings, one row per patch or prompt.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(int rows, int dim);
  EmbeddingMatrix(int rows, int dim, std::vector<double> values,
                  bool normalized = false);

  int rows() const noexcept { return rows_; }
  int dim() const noexcept { return dim_; }
  bool normalized() const noexcept { return normalized_; }
  void set_normalized(bool normalized) noexcept { normalized_ = normalized; }

  std::span<const double> row(int i) const {
    return {values_.data() + static_cast<std::size_t>(i) * dim_,
            static_cast<std::size_t>(dim_)};
  }
  std::span<double> row(int i) {
    return {values_.data() + static_cast<std::size_t>(i) * dim_,
            static_cast<std::size_t>(dim_)};
  }
  double operator()(int r, int c) const { return values_[Index(r, c)]; }
  double& operator()(int r, int c) { return values_[Index(r, c)]; }

  const std::vector<double>& values() const noexcept { return values_; }
  std::vector<double>& mutable_values() noexcept { return values_; }

  // Copies the listed rows, in order.
  EmbeddingMatrix SelectRows(std::span<const int> indices) const;

  friend bool operator==(const EmbeddingMatrix&,
                         const EmbeddingMatrix&) = default;

 private:
  std::size_t Index(int r, int c) const {
    return static_cast<std::size_t>(r) * dim_ + c;
  }

  int rows_ = 0;
  int dim_ = 0;
  std::vector<double> values_;
  bool normalized_ = false;
};

// Row-wise L2 normalization.  Zero rows raise kEncoderFailure since they have
// no direction.
EmbeddingMatrix NormalizeRows(EmbeddingMatrix m);

double Dot(std::span<const double> a, std::span<const double> b);
double L2Norm(std::span<const double> a);

// s(i, j) = image row i . text row j.
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  SimilarityMatrix(int m, int n, std::vector<double> values);

  int m() const noexcept { return m_; }
  int n() const noexcept { return n_; }
  bool square() const noexcept { return m_ == n_; }
  double operator()(int i, int j) const {
    return values_[static_cast<std::size_t>(i) * n_ + j];
  }
  double& operator()(int i, int j) {
    return values_[static_cast<std::size_t>(i) * n_ + j];
  }
  std::span<const double> row(int i) const {
    return {values_.data() + static_cast<std::size_t>(i) * n_,
            static_cast<std::size_t>(n_)};
  }
  const std::vector<double>& values() const noexcept { return values_; }

 private:
  int m_ = 0;
  int n_ = 0;
  std::vector<double> values_;
};

SimilarityMatrix Similarity(const EmbeddingMatrix& image,
                            const EmbeddingMatrix& text);

}  // namespace crowdclip
