#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bypass/dataset.hpp"
#include "bypass/exec.hpp"

namespace bypass {

/// Dense row-major feature matrix.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {values.data() + i * cols, cols}; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

/// Per-feature min-max scaling to [0, 1], fitted on training data and then
/// frozen. Constant features map to 0.
struct MinMaxScaler {
  std::vector<double> lo;
  std::vector<double> hi;

  static MinMaxScaler fit(const LabeledDataset& data);
  std::vector<double> transform(std::span<const double> x) const;
  void transform_into(std::span<const double> x, std::span<double> out) const;

  friend bool operator==(const MinMaxScaler&, const MinMaxScaler&) = default;
};

FeatureMatrix to_matrix(const LabeledDataset& data, const MinMaxScaler& scaler);
std::vector<double> label_vector(const LabeledDataset& data);

struct Prediction {
  Label label = Label::Cache;
  double score = 0.0;  // belief that the access should bypass, in [0, 1]

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Ties (score exactly 0.5) resolve to Cache.
inline Label label_from_score(double score) { return score > 0.5 ? Label::Bypass : Label::Cache; }

/// 1 - sum p_i^2. Throws DomainError when both counts are zero.
double gini(const ClassCounts& counts);

// ---------------------------------------------------------------- tree

struct TreeParams {
  int max_depth = 10;
  double min_impurity_split = 0.0;

  friend bool operator==(const TreeParams&, const TreeParams&) = default;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  ClassCounts counts;

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  TreeParams params;

  std::size_t internal_nodes() const;
  std::size_t leaves() const;
  int depth() const;
  const TreeNode& leaf_for(std::span<const double> x) const;
  Prediction predict(std::span<const double> x) const;

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

/// Greedy CART on Gini gain. Candidate thresholds are midpoints between
/// consecutive distinct values. A node splits only when it is above depth
/// max_depth, impure, has Gini > min_impurity_split and a split with
/// positive gain exists.
DecisionTree train_decision_tree(const FeatureMatrix& x, std::span<const double> y,
                                 const TreeParams& params);

// ---------------------------------------------------------------- knn

enum class KnnWeighting { Uniform, InverseDistance };

std::string_view to_string(KnnWeighting w);
KnnWeighting parse_knn_weighting(std::string_view text);

struct KnnParams {
  int k = 5;
  KnnWeighting weighting = KnnWeighting::Uniform;

  friend bool operator==(const KnnParams&, const KnnParams&) = default;
};

inline constexpr double kKnnDistanceEpsilon = 1e-9;

struct KnnModel {
  FeatureMatrix points;
  std::vector<double> labels;
  KnnParams params;

  Prediction predict(std::span<const double> x) const;

  friend bool operator==(const KnnModel&, const KnnModel&) = default;
};

KnnModel train_knn(const FeatureMatrix& x, std::span<const double> y, const KnnParams& params);

// ------------------------------------------------------- logistic regression

enum class LogRegSolver { NewtonIRLS, BatchGD, SAG };

std::string_view to_string(LogRegSolver s);
LogRegSolver parse_logreg_solver(std::string_view text);

struct LogRegParams {
  LogRegSolver solver = LogRegSolver::NewtonIRLS;
  double l2_lambda = 1e-3;
  int max_iters = 0;  // 0: solver default (Newton 100, GD 100000, SAG 2000 epochs)
  double tol = 1e-7;  // on the full gradient norm
  std::uint64_t seed = 0;  // SAG sampling order

  friend bool operator==(const LogRegParams&, const LogRegParams&) = default;
};

struct LogRegModel {
  std::vector<double> weights;
  double bias = 0.0;
  LogRegParams params;
  bool converged = false;
  int iterations = 0;
  double final_loss = 0.0;

  Prediction predict(std::span<const double> x) const;

  friend bool operator==(const LogRegModel&, const LogRegModel&) = default;
};

struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

/// Mean negative log-likelihood plus (lambda/2)|w|^2; the bias is not
/// penalized. Gradient layout: weights, then bias.
LossGradient logreg_objective(const FeatureMatrix& x, std::span<const double> y,
                              std::span<const double> weights, double bias, double l2_lambda);

LogRegModel train_logreg(const FeatureMatrix& x, std::span<const double> y,
                         const LogRegParams& params);

// ---------------------------------------------------------------- mlp

enum class Activation { Logistic, ReLU };
enum class Optimizer { SGD, Adam, BatchGD };

std::string_view to_string(Activation a);
std::string_view to_string(Optimizer o);
Activation parse_activation(std::string_view text);
Optimizer parse_optimizer(std::string_view text);

inline constexpr int kMaxHiddenNeurons = 20;

struct MlpParams {
  int hidden = 3;
  Activation activation = Activation::Logistic;
  Optimizer optimizer = Optimizer::Adam;
  int epochs = 200;
  double learning_rate = 0.01;
  int batch_size = 32;
  std::uint64_t seed = 0;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// One hidden layer. w1 is hidden x inputs, row-major.
struct MlpWeights {
  std::size_t inputs = 0;
  std::size_t hidden = 0;
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;

  std::size_t parameter_count() const { return inputs * hidden + 2 * hidden + 1; }
  /// Layout: w1, b1, w2, b2.
  std::vector<double> flatten() const;
  static MlpWeights unflatten(std::size_t inputs, std::size_t hidden, std::span<const double> p);
  /// Uniform in +-1/sqrt(fan_in) per layer.
  static MlpWeights initialize(std::size_t inputs, std::size_t hidden, std::uint64_t seed);

  friend bool operator==(const MlpWeights&, const MlpWeights&) = default;
};

struct MlpModel {
  MlpWeights weights;
  MlpParams params;
  std::vector<double> loss_curve;  // mean training loss per epoch

  Prediction predict(std::span<const double> x) const;

  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

/// Mean binary cross-entropy of the sigmoid output; gradient in
/// MlpWeights::flatten() order.
LossGradient mlp_objective(const MlpWeights& weights, Activation activation, const FeatureMatrix& x,
                           std::span<const double> y);

MlpModel train_mlp(const FeatureMatrix& x, std::span<const double> y, const MlpParams& params);

// ------------------------------------------------------------ unified model

enum class ModelKind { Tree, Knn, LogReg, Mlp };

std::string_view to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view text);

using ModelParams = std::variant<TreeParams, KnnParams, LogRegParams, MlpParams>;
using Predictor = std::variant<DecisionTree, KnnModel, LogRegModel, MlpModel>;

/// A trained predictor together with the feature scheme and the frozen
/// normalization it expects. Immutable once trained.
struct Model {
  Predictor predictor;
  FeatureScheme scheme = FeatureScheme::raw();
  MinMaxScaler scaler;

  ModelKind kind() const { return static_cast<ModelKind>(predictor.index()); }
  std::size_t width() const { return scaler.lo.size(); }

  friend bool operator==(const Model&, const Model&) = default;
};

/// Fits the scaler on `train`, then trains the predictor named by `params`.
Model train_model(const LabeledDataset& train, const ModelParams& params);

/// `features` are un-normalized, in the model's scheme.
Prediction predict(const Model& model, std::span<const double> features);
std::vector<Prediction> predict_batch(const Model& model, const LabeledDataset& data,
                                      Exec exec = Exec::Parallel);

/// Storage needed for the parameters at 4 bytes per value:
///   logreg 4(d+1); mlp 4(dh+2h+1); tree 10 per internal node + 1 per leaf;
///   knn 4dn + n.
std::uint64_t model_size_bytes(const Model& model);
std::uint64_t model_size_bytes(const Predictor& predictor);

std::string model_to_json(const Model& model);
Model model_from_json(std::string_view text);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace bypass
