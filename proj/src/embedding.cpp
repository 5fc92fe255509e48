#include "crowdclip/embedding.hpp"

#include <cmath>
#include <string>

#include "crowdclip/error.hpp"

namespace crowdclip {

EmbeddingMatrix::EmbeddingMatrix(int rows, int dim)
    : rows_(rows), dim_(dim), values_(static_cast<std::size_t>(rows) * dim) {
  if (rows < 0 || dim < 0) {
    throw Error(ErrorCode::kInvalidArgument, "negative embedding shape");
  }
}

EmbeddingMatrix::EmbeddingMatrix(int rows, int dim, std::vector<double> values,
                                 bool normalized)
    : rows_(rows), dim_(dim), values_(std::move(values)),
      normalized_(normalized) {
  if (rows < 0 || dim < 0 ||
      values_.size() != static_cast<std::size_t>(rows) * dim) {
    throw Error(ErrorCode::kShapeMismatch, "embedding values do not match " +
                                               std::to_string(rows) + "x" +
                                               std::to_string(dim));
  }
}

EmbeddingMatrix EmbeddingMatrix::SelectRows(
    std::span<const int> indices) const {
  EmbeddingMatrix out(static_cast<int>(indices.size()), dim_);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    auto src = row(indices[k]);
    std::copy(src.begin(), src.end(), out.row(static_cast<int>(k)).begin());
  }
  out.normalized_ = normalized_;
  return out;
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double L2Norm(std::span<const double> a) { return std::sqrt(Dot(a, a)); }

EmbeddingMatrix NormalizeRows(EmbeddingMatrix m) {
  for (int i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    const double norm = L2Norm(r);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw Error(ErrorCode::kEncoderFailure,
                  "embedding row " + std::to_string(i) +
                      " has zero or non-finite norm");
    }
    for (double& v : r) v /= norm;
  }
  m.set_normalized(true);
  return m;
}

SimilarityMatrix::SimilarityMatrix(int m, int n, std::vector<double> values)
    : m_(m), n_(n), values_(std::move(values)) {
  if (values_.size() != static_cast<std::size_t>(m) * n) {
    throw Error(ErrorCode::kShapeMismatch, "similarity values do not match " +
                                               std::to_string(m) + "x" +
                                               std::to_string(n));
  }
}

SimilarityMatrix Similarity(const EmbeddingMatrix& image,
                            const EmbeddingMatrix& text) {
  if (image.dim() != text.dim()) {
    throw Error(ErrorCode::kDimMismatch,
                "image dim " + std::to_string(image.dim()) + " vs text dim " +
                    std::to_string(text.dim()));
  }
  std::vector<double> values(static_cast<std::size_t>(image.rows()) *
                             text.rows());
  for (int i = 0; i < image.rows(); ++i) {
    for (int j = 0; j < text.rows(); ++j) {
      values[static_cast<std::size_t>(i) * text.rows() + j] =
          Dot(image.row(i), text.row(j));
    }
  }
  return SimilarityMatrix(image.rows(), text.rows(), std::move(values));
}

}  // namespace crowdclip
