#pragma once

#include <string_view>

#include "crowdclip/embedding.hpp"

namespace crowdclip {

// Which (i', i) pairs with i' < i enter the hinge sum.
enum class PairSet { kAllPairs, kAdjacent };

std::string_view ToString(PairSet pairs);
PairSet ParsePairSet(std::string_view text);

struct RankingLossReport {
  double loss = 0.0;  // mean of max(0, s(i', i) - s(i, i)) over checked pairs
  int violated_pairs = 0;
  int total_pairs = 0;
};

// Penalizes every smaller patch i' whose similarity to rank prompt i exceeds
// the diagonal s(i, i).  Zero exactly when the matrix is ordinal over the
// checked pairs.
RankingLossReport RankingLoss(const SimilarityMatrix& s,
                              PairSet pairs = PairSet::kAllPairs);

// dL/dS, same shape as S.  At a kink (hinge argument exactly 0) the hinge is
// treated as inactive.
SimilarityMatrix RankingLossGradient(const SimilarityMatrix& s,
                                     PairSet pairs = PairSet::kAllPairs);

// Smallest |s(i', i) - s(i, i)| over the checked pairs.
double MinHingeMargin(const SimilarityMatrix& s,
                      PairSet pairs = PairSet::kAllPairs);

// Backpropagates through row normalization n = r / |r|:
// dL/dr = (g - (g . n) n) / |r|.
EmbeddingMatrix BackpropNormalize(const EmbeddingMatrix& raw,
                                  const EmbeddingMatrix& grad_normalized);

struct RankingGradients {
  RankingLossReport report;
  EmbeddingMatrix image;  // dL/d(normalized image rows)
  EmbeddingMatrix text;   // dL/d(normalized text rows)
};

// Loss plus gradients w.r.t. both normalized embedding matrices.
RankingGradients RankingLossWithGradients(const EmbeddingMatrix& image,
                                          const EmbeddingMatrix& text,
                                          PairSet pairs = PairSet::kAllPairs);

// Loss of raw (unnormalized) image embeddings against fixed text rank
// embeddings, with the analytic gradient w.r.t. the raw rows.
class RankingObjective {
 public:
  RankingObjective(EmbeddingMatrix text, PairSet pairs = PairSet::kAllPairs);

  double Value(const EmbeddingMatrix& image_raw) const;
  EmbeddingMatrix Gradient(const EmbeddingMatrix& image_raw) const;
  double MinMargin(const EmbeddingMatrix& image_raw) const;

  const EmbeddingMatrix& text() const noexcept { return text_; }

 private:
  EmbeddingMatrix text_;
  PairSet pairs_;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  double max_abs_error = 0.0;
  int coordinates = 0;
};

// Central finite differences against RankingObjective::Gradient().  Raises
// kKinkTooClose when a hinge argument is within 10 * epsilon of zero, where
// the loss is not differentiable.  Relative error per coordinate is
// |a - n| / max(|a|, |n|, 1e-8).
GradientCheckResult GradientCheck(const RankingObjective& objective,
                                  const EmbeddingMatrix& point,
                                  double epsilon);

}  // namespace crowdclip
