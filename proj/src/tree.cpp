#include <algorithm>
#include <numeric>

#include "bypass/error.hpp"
#include "bypass/models.hpp"

namespace bypass {

double gini(const ClassCounts& counts) {
  const std::size_t n = counts.total();
  if (n == 0) throw DomainError("gini of an empty node");
  const double p0 = static_cast<double>(counts.cache) / static_cast<double>(n);
  const double p1 = static_cast<double>(counts.bypass) / static_cast<double>(n);
  return 1.0 - (p0 * p0 + p1 * p1);
}

namespace {

constexpr double kMinGain = 1e-12;

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, std::span<const double> y, const TreeParams& params)
      : x_(x), y_(y), params_(params) {}

  DecisionTree build() {
    std::vector<std::size_t> idx(x_.rows);
    std::iota(idx.begin(), idx.end(), 0);
    tree_.params = params_;
    grow(idx, 0);
    return std::move(tree_);
  }

 private:
  ClassCounts count(const std::vector<std::size_t>& idx) const {
    ClassCounts c;
    for (auto i : idx) (y_[i] > 0.5 ? c.bypass : c.cache)++;
    return c;
  }

  Split best_split(const std::vector<std::size_t>& idx, const ClassCounts& parent) const {
    const double parent_gini = gini(parent);
    const auto n = static_cast<double>(idx.size());
    Split best;
    std::vector<std::pair<double, bool>> column(idx.size());
    for (std::size_t f = 0; f < x_.cols; ++f) {
      for (std::size_t j = 0; j < idx.size(); ++j) column[j] = {x_(idx[j], f), y_[idx[j]] > 0.5};
      std::sort(column.begin(), column.end());
      ClassCounts left;
      for (std::size_t j = 0; j + 1 < column.size(); ++j) {
        (column[j].second ? left.bypass : left.cache)++;
        const double lo = column[j].first;
        const double hi = column[j + 1].first;
        if (lo == hi) continue;
        const ClassCounts right{parent.cache - left.cache, parent.bypass - left.bypass};
        const double gain = parent_gini - (static_cast<double>(left.total()) / n) * gini(left) -
                            (static_cast<double>(right.total()) / n) * gini(right);
        if (gain > best.gain) {
          double t = lo + (hi - lo) / 2.0;
          if (!(t < hi)) t = lo;
          best = Split{static_cast<int>(f), t, gain};
        }
      }
    }
    return best;
  }

  int grow(const std::vector<std::size_t>& idx, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back(TreeNode{});
    const ClassCounts counts = count(idx);
    tree_.nodes[id].counts = counts;

    const double impurity = gini(counts);
    if (depth >= params_.max_depth || impurity <= params_.min_impurity_split || impurity == 0.0)
      return id;
    const Split split = best_split(idx, counts);
    if (split.feature < 0 || split.gain <= kMinGain) return id;

    std::vector<std::size_t> left, right;
    for (auto i : idx) (x_(i, split.feature) <= split.threshold ? left : right).push_back(i);
    tree_.nodes[id].feature = split.feature;
    tree_.nodes[id].threshold = split.threshold;
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    tree_.nodes[id].left = l;
    tree_.nodes[id].right = r;
    return id;
  }

  const FeatureMatrix& x_;
  std::span<const double> y_;
  TreeParams params_;
  DecisionTree tree_;
};

}  // namespace

DecisionTree train_decision_tree(const FeatureMatrix& x, std::span<const double> y,
                                 const TreeParams& params) {
  if (x.rows == 0) throw TrainingError("decision tree needs a non-empty training set");
  if (y.size() != x.rows) throw DimensionError(x.rows, y.size());
  if (params.max_depth < 1) throw ValidationError("max_depth", "must be >= 1");
  if (!(params.min_impurity_split >= 0.0 && params.min_impurity_split <= 0.5))
    throw ValidationError("min_impurity_split", "must be in [0, 0.5]");
  return TreeBuilder(x, y, params).build();
}

std::size_t DecisionTree::internal_nodes() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return !n.is_leaf(); }));
}

std::size_t DecisionTree::leaves() const { return nodes.size() - internal_nodes(); }

int DecisionTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int deepest = 0;
  // Children are always stored after their parent.
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (!nodes[i].is_leaf()) {
      d[nodes[i].left] = d[i] + 1;
      d[nodes[i].right] = d[i] + 1;
    }
  }
  return deepest;
}

const TreeNode& DecisionTree::leaf_for(std::span<const double> x) const {
  const TreeNode* node = &nodes.front();
  while (!node->is_leaf()) node = &nodes[x[node->feature] <= node->threshold ? node->left : node->right];
  return *node;
}

Prediction DecisionTree::predict(std::span<const double> x) const {
  const TreeNode& leaf = leaf_for(x);
  const double score =
      static_cast<double>(leaf.counts.bypass) / static_cast<double>(leaf.counts.total());
  // Majority with ties to Cache, which is the same as thresholding the score.
  return {label_from_score(score), score};
}

}  // namespace bypass
