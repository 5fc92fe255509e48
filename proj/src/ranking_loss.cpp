#include "crowdclip/ranking_loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "crowdclip/error.hpp"

namespace crowdclip {

std::string_view ToString(PairSet pairs) {
  return pairs == PairSet::kAllPairs ? "all_pairs" : "adjacent";
}

PairSet ParsePairSet(std::string_view text) {
  if (text == "all_pairs") return PairSet::kAllPairs;
  if (text == "adjacent") return PairSet::kAdjacent;
  throw Error(ErrorCode::kInvalidArgument,
              "pair set must be all_pairs or adjacent, got " +
                  std::string(text));
}

namespace {

void CheckSquare(const SimilarityMatrix& s) {
  if (!s.square()) {
    throw Error(ErrorCode::kNotSquare,
                "ranking loss needs M == N, got " + std::to_string(s.m()) +
                    "x" + std::to_string(s.n()));
  }
}

// Calls fn(row, column) for every checked pair (i', i), i' < i.
template <typename Fn>
void ForEachPair(int m, PairSet pairs, Fn&& fn) {
  for (int i = 1; i < m; ++i) {
    const int first = pairs == PairSet::kAllPairs ? 0 : i - 1;
    for (int ip = first; ip < i; ++ip) fn(ip, i);
  }
}

int PairCount(int m, PairSet pairs) {
  return pairs == PairSet::kAllPairs ? m * (m - 1) / 2 : m - 1;
}

}  // namespace

RankingLossReport RankingLoss(const SimilarityMatrix& s, PairSet pairs) {
  CheckSquare(s);
  RankingLossReport report;
  report.total_pairs = PairCount(s.m(), pairs);
  double sum = 0.0;
  ForEachPair(s.m(), pairs, [&](int ip, int i) {
    const double hinge = s(ip, i) - s(i, i);
    if (hinge > 0.0) {
      sum += hinge;
      ++report.violated_pairs;
    }
  });
  report.loss = report.total_pairs > 0 ? sum / report.total_pairs : 0.0;
  return report;
}

SimilarityMatrix RankingLossGradient(const SimilarityMatrix& s,
                                     PairSet pairs) {
  CheckSquare(s);
  SimilarityMatrix grad(s.m(), s.n(),
                        std::vector<double>(s.values().size(), 0.0));
  const int total = PairCount(s.m(), pairs);
  if (total == 0) return grad;
  const double w = 1.0 / total;
  ForEachPair(s.m(), pairs, [&](int ip, int i) {
    if (s(ip, i) - s(i, i) > 0.0) {
      grad(ip, i) += w;
      grad(i, i) -= w;
    }
  });
  return grad;
}

double MinHingeMargin(const SimilarityMatrix& s, PairSet pairs) {
  CheckSquare(s);
  double margin = std::numeric_limits<double>::infinity();
  ForEachPair(s.m(), pairs, [&](int ip, int i) {
    margin = std::min(margin, std::abs(s(ip, i) - s(i, i)));
  });
  return margin;
}

EmbeddingMatrix BackpropNormalize(const EmbeddingMatrix& raw,
                                  const EmbeddingMatrix& grad_normalized) {
  if (raw.rows() != grad_normalized.rows() ||
      raw.dim() != grad_normalized.dim()) {
    throw Error(ErrorCode::kShapeMismatch, "gradient shape mismatch");
  }
  EmbeddingMatrix out(raw.rows(), raw.dim());
  for (int r = 0; r < raw.rows(); ++r) {
    auto x = raw.row(r);
    auto g = grad_normalized.row(r);
    const double norm = L2Norm(x);
    if (!(norm > 0.0)) {
      throw Error(ErrorCode::kEncoderFailure, "zero-norm embedding row");
    }
    // g . n with n = x / |x|
    const double gn = Dot(g, x) / norm;
    auto o = out.row(r);
    for (int c = 0; c < raw.dim(); ++c) {
      o[c] = (g[c] - gn * x[c] / norm) / norm;
    }
  }
  return out;
}

RankingGradients RankingLossWithGradients(const EmbeddingMatrix& image,
                                          const EmbeddingMatrix& text,
                                          PairSet pairs) {
  const SimilarityMatrix s = Similarity(image, text);
  RankingGradients out;
  out.report = RankingLoss(s, pairs);
  const SimilarityMatrix g = RankingLossGradient(s, pairs);
  out.image = EmbeddingMatrix(image.rows(), image.dim());
  out.text = EmbeddingMatrix(text.rows(), text.dim());
  // S = I T^T  =>  dI = G T,  dT = G^T I
  for (int i = 0; i < g.m(); ++i) {
    for (int j = 0; j < g.n(); ++j) {
      const double w = g(i, j);
      if (w == 0.0) continue;
      auto di = out.image.row(i);
      auto dt = out.text.row(j);
      auto ti = text.row(j);
      auto ii = image.row(i);
      for (int c = 0; c < image.dim(); ++c) {
        di[c] += w * ti[c];
        dt[c] += w * ii[c];
      }
    }
  }
  return out;
}

RankingObjective::RankingObjective(EmbeddingMatrix text, PairSet pairs)
    : text_(std::move(text)), pairs_(pairs) {}

double RankingObjective::Value(const EmbeddingMatrix& image_raw) const {
  return RankingLoss(Similarity(NormalizeRows(image_raw), text_), pairs_).loss;
}

EmbeddingMatrix RankingObjective::Gradient(
    const EmbeddingMatrix& image_raw) const {
  const auto grads =
      RankingLossWithGradients(NormalizeRows(image_raw), text_, pairs_);
  return BackpropNormalize(image_raw, grads.image);
}

double RankingObjective::MinMargin(const EmbeddingMatrix& image_raw) const {
  return MinHingeMargin(Similarity(NormalizeRows(image_raw), text_), pairs_);
}

GradientCheckResult GradientCheck(const RankingObjective& objective,
                                  const EmbeddingMatrix& point,
                                  double epsilon) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw Error(ErrorCode::kInvalidArgument,
                "epsilon must lie in [1e-7, 1e-3]");
  }
  const double margin = objective.MinMargin(point);
  if (margin < 10.0 * epsilon) {
    throw Error(ErrorCode::kKinkTooClose,
                "hinge argument " + std::to_string(margin) +
                    " within 10 * epsilon of zero");
  }
  const EmbeddingMatrix analytic = objective.Gradient(point);
  GradientCheckResult result;
  EmbeddingMatrix probe = point;
  for (int r = 0; r < point.rows(); ++r) {
    for (int c = 0; c < point.dim(); ++c) {
      const double saved = probe(r, c);
      probe(r, c) = saved + epsilon;
      const double plus = objective.Value(probe);
      probe(r, c) = saved - epsilon;
      const double minus = objective.Value(probe);
      probe(r, c) = saved;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double a = analytic(r, c);
      const double abs_err = std::abs(a - numeric);
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      result.max_abs_error = std::max(result.max_abs_error, abs_err);
      result.max_relative_error =
          std::max(result.max_relative_error, abs_err / denom);
      ++result.coordinates;
    }
  }
  return result;
}

}  // namespace crowdclip
