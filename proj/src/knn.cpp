#include <cmath>

#include "bypass/error.hpp"
#include "bypass/models.hpp"
#include "neighbors.hpp"

namespace bypass {

std::string_view to_string(KnnWeighting w) {
  return w == KnnWeighting::Uniform ? "uniform" : "distance";
}

KnnWeighting parse_knn_weighting(std::string_view text) {
  if (text == "uniform") return KnnWeighting::Uniform;
  if (text == "distance") return KnnWeighting::InverseDistance;
  throw ValidationError("weighting", "expected uniform or distance");
}

KnnModel train_knn(const FeatureMatrix& x, std::span<const double> y, const KnnParams& params) {
  if (x.rows == 0) throw TrainingError("knn needs a non-empty training set");
  if (y.size() != x.rows) throw DimensionError(x.rows, y.size());
  if (params.k < 1) throw ValidationError("k", "must be >= 1");
  if (static_cast<std::size_t>(params.k) > x.rows)
    throw ValidationError("k", "exceeds the number of training samples");
  return KnnModel{x, std::vector<double>(y.begin(), y.end()), params};
}

Prediction KnnModel::predict(std::span<const double> x) const {
  if (x.size() != points.cols) throw DimensionError(points.cols, x.size());
  const auto nn = detail::nearest_k(points.values, points.cols, x, static_cast<std::size_t>(params.k));
  double vote = 0.0;
  double total = 0.0;
  for (const auto& [d2, i] : nn) {
    const double w = params.weighting == KnnWeighting::Uniform
                         ? 1.0
                         : 1.0 / (std::sqrt(d2) + kKnnDistanceEpsilon);
    vote += w * labels[i];
    total += w;
  }
  const double score = vote / total;
  return {label_from_score(score), score};
}

}  // namespace bypass
