#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "bypass/error.hpp"
#include "bypass/models.hpp"
#include "oracles.hpp"

using namespace bypass;

namespace {

struct Data {
  FeatureMatrix x;
  std::vector<double> y;
};

// Two noisy Gaussian blobs.
Data blobs(std::size_t n, std::size_t dim, std::uint64_t seed, double separation = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Data d{FeatureMatrix(n, dim), {}};
  for (std::size_t i = 0; i < n; ++i) {
    const double label = i % 2;
    for (std::size_t j = 0; j < dim; ++j)
      d.x.row(i)[j] = noise(gen) + (label > 0 ? separation : -separation) * (j % 2 ? 0.5 : 1.0);
    d.y.push_back(label);
  }
  return d;
}

LabeledDataset as_dataset(const Data& d) {
  LabeledDataset ds;
  ds.scheme = FeatureScheme::for_width(d.x.cols);
  for (std::size_t i = 0; i < d.x.rows; ++i) {
    auto r = d.x.row(i);
    ds.samples.push_back({{r.begin(), r.end()}, d.y[i] > 0.5 ? Label::Bypass : Label::Cache, i, {}});
  }
  return ds;
}

double accuracy(const auto& model, const Data& d) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < d.x.rows; ++i)
    ok += (model.predict(d.x.row(i)).label == Label::Bypass) == (d.y[i] > 0.5);
  return double(ok) / double(d.x.rows);
}

}  // namespace

TEST_SUITE("models") {

TEST_CASE("gini") {
  CHECK(gini({10, 0}) == 0.0);
  CHECK(gini({5, 5}) == 0.5);
  CHECK(gini({3, 1}) == doctest::Approx(0.375));
  CHECK_THROWS_AS(gini({0, 0}), DomainError);
}

TEST_CASE("tree: single threshold separates 1-D data") {
  Data d{FeatureMatrix(100, 1), {}};
  for (std::size_t i = 0; i < 100; ++i) {
    d.x.row(i)[0] = double(i);
    d.y.push_back(i > 50 ? 1.0 : 0.0);
  }
  const auto tree = train_decision_tree(d.x, d.y, {1, 0.0});
  REQUIRE(tree.internal_nodes() == 1);
  CHECK(tree.nodes[0].threshold == doctest::Approx(50.5));
  CHECK(accuracy(tree, d) == 1.0);
}

TEST_CASE("tree: impurity threshold 0.5 gives a majority leaf") {
  const Data d = blobs(101, 2, 1);
  const auto tree = train_decision_tree(d.x, d.y, {10, 0.5});
  CHECK(tree.nodes.size() == 1);
  CHECK(tree.predict(d.x.row(0)).label == Label::Cache);
}

TEST_CASE("tree: root split is the exhaustive best") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Data d = blobs(30, 2, seed, 0.6);
    const auto tree = train_decision_tree(d.x, d.y, {1, 0.0});
    REQUIRE(tree.internal_nodes() == 1);
    const auto& root = tree.nodes[0];
    const auto& l = tree.nodes[root.left].counts;
    const auto& r = tree.nodes[root.right].counts;
    const double n = 30;
    const double gain = gini(root.counts) - l.total() / n * gini(l) - r.total() / n * gini(r);
    CHECK(gain == doctest::Approx(oracle::best_split_gain(d.x, d.y)).epsilon(1e-12));
  }
}

TEST_CASE("tree: structural invariants and monotone training accuracy") {
  const Data d = blobs(400, 4, 3, 0.4);
  double prev = 0.0;
  for (int depth = 1; depth <= 10; ++depth) {
    const auto tree = train_decision_tree(d.x, d.y, {depth, 0.0});
    CHECK(tree.depth() <= depth);
    for (const auto& node : tree.nodes) CHECK(node.counts.total() > 0);
    const double acc = accuracy(tree, d);
    CHECK(acc >= prev);
    prev = acc;
  }
  prev = 1.0;
  for (int k = 0; k <= 10; ++k) {
    const auto tree = train_decision_tree(d.x, d.y, {10, k / 20.0});
    for (const auto& node : tree.nodes)
      if (!node.is_leaf()) CHECK(gini(node.counts) > k / 20.0);
    const double acc = accuracy(tree, d);
    CHECK(acc <= prev);
    prev = acc;
  }
}

TEST_CASE("tree: leaf score and tie rule") {
  Data d{FeatureMatrix(7, 1), std::vector<double>(7, 1.0)};
  const auto pure = train_decision_tree(d.x, d.y, {3, 0.0});
  CHECK(pure.predict(d.x.row(0)).score == 1.0);
  CHECK(pure.predict(d.x.row(0)).label == Label::Bypass);
  Data tie{FeatureMatrix(2, 1), {0.0, 1.0}};
  const auto t = train_decision_tree(tie.x, tie.y, {3, 0.0});
  CHECK(t.predict(tie.x.row(0)).score == 0.5);
  CHECK(t.predict(tie.x.row(0)).label == Label::Cache);
  CHECK_THROWS_AS(train_decision_tree(FeatureMatrix(0, 1), {}, {}), TrainingError);
}

TEST_CASE("knn: exact match, majority and tie") {
  Data d{FeatureMatrix(4, 1), {1, 1, 0, 0}};
  for (int i = 0; i < 4; ++i) d.x.row(i)[0] = i;
  const auto k1 = train_knn(d.x, d.y, {1, KnnWeighting::Uniform});
  for (int i = 0; i < 4; ++i) CHECK(k1.predict(d.x.row(i)).score == d.y[i]);
  const auto k3 = train_knn(d.x, d.y, {3, KnnWeighting::Uniform});
  const std::vector<double> q{0.4};
  CHECK(k3.predict(q).label == Label::Bypass);
  const auto k4 = train_knn(d.x, d.y, {4, KnnWeighting::Uniform});
  CHECK(k4.predict(q).score == 0.5);
  CHECK(k4.predict(q).label == Label::Cache);
  CHECK_THROWS_AS(k4.predict(std::vector<double>{1.0, 2.0}), DimensionError);
  CHECK_THROWS_AS(train_knn(d.x, d.y, {5, KnnWeighting::Uniform}), ValidationError);
}

TEST_CASE("knn: exact match dominates a weighted vote") {
  Data d{FeatureMatrix(3, 1), {1, 0, 0}};
  d.x.row(0)[0] = 0.0;
  d.x.row(1)[0] = 0.1;
  d.x.row(2)[0] = -0.1;
  const auto m = train_knn(d.x, d.y, {3, KnnWeighting::InverseDistance});
  CHECK(m.predict(std::vector<double>{0.0}).label == Label::Bypass);
}

TEST_CASE("knn: weighted vote matches brute force") {
  const Data d = blobs(50, 2, 8, 0.3);
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-3, 3);
  for (auto w : {KnnWeighting::Uniform, KnnWeighting::InverseDistance}) {
    const auto m = train_knn(d.x, d.y, {5, w});
    for (int t = 0; t < 100; ++t) {
      const std::vector<double> q{u(gen), u(gen)};
      const double ref = oracle::knn_score(d.x, d.y, q, 5, w == KnnWeighting::InverseDistance);
      CHECK(m.predict(q).score == doctest::Approx(ref).epsilon(1e-12));
    }
  }
}

TEST_CASE("knn: K=1 reproduces distinct training points") {
  const Data d = blobs(200, 2, 4);
  CHECK(accuracy(train_knn(d.x, d.y, {1, KnnWeighting::Uniform}), d) == 1.0);
}

TEST_CASE("logreg: gradient matches finite differences") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-2, 2);
  const Data d = blobs(40, 3, 2);
  for (int point = 0; point < 10; ++point) {
    std::vector<double> p(4);
    for (auto& v : p) v = u(gen);
    auto f = [&](const std::vector<double>& q) {
      return logreg_objective(d.x, d.y, std::span(q).first(3), q[3], 0.01).loss;
    };
    const auto analytic = logreg_objective(d.x, d.y, std::span(p).first(3), p[3], 0.01).gradient;
    CHECK(oracle::relative_error(analytic, oracle::numeric_gradient(f, p)) < 1e-6);
  }
}

TEST_CASE("logreg: label-symmetric data drives parameters to zero") {
  Data d{FeatureMatrix(20, 2), {}};
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (std::size_t i = 0; i < 10; ++i) {
    const double a = u(gen), b = u(gen);
    for (int rep = 0; rep < 2; ++rep) {
      d.x.row(2 * i + rep)[0] = a;
      d.x.row(2 * i + rep)[1] = b;
      d.y.push_back(rep);
    }
  }
  for (auto s : {LogRegSolver::NewtonIRLS, LogRegSolver::BatchGD, LogRegSolver::SAG}) {
    CAPTURE(to_string(s));
    LogRegParams p;
    p.solver = s;
    const auto m = train_logreg(d.x, d.y, p);
    for (double w : m.weights) CHECK(std::abs(w) < 1e-6);
    CHECK(std::abs(m.bias) < 1e-6);
  }
  LogRegModel zero;
  zero.weights = {0.0, 0.0};
  const auto p = zero.predict(d.x.row(0));
  CHECK(p.score == 0.5);
  CHECK(p.label == Label::Cache);
}

TEST_CASE("logreg: solvers reach the same optimum") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Data d = blobs(300, 4, seed, 0.5);
    std::vector<double> losses;
    for (auto s : {LogRegSolver::NewtonIRLS, LogRegSolver::BatchGD, LogRegSolver::SAG}) {
      LogRegParams p;
      p.solver = s;
      p.seed = seed;
      const auto m = train_logreg(d.x, d.y, p);
      CHECK(m.converged);
      CHECK(m.weights.size() == 4);
      losses.push_back(m.final_loss);
    }
    for (double l : losses) CHECK(std::abs(l - losses[0]) < 1e-3);
  }
}

TEST_CASE("logreg: single class is a training error") {
  Data d{FeatureMatrix(5, 1), std::vector<double>(5, 1.0)};
  CHECK_THROWS_AS(train_logreg(d.x, d.y, {}), TrainingError);
}

TEST_CASE("mlp: gradient matches finite differences") {
  const Data d = blobs(10, 3, 6);
  for (auto act : {Activation::Logistic, Activation::ReLU}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto w = MlpWeights::initialize(3, 2, seed);
      auto f = [&](const std::vector<double>& q) {
        return mlp_objective(MlpWeights::unflatten(3, 2, q), act, d.x, d.y).loss;
      };
      const auto analytic = mlp_objective(w, act, d.x, d.y).gradient;
      CHECK(oracle::relative_error(analytic, oracle::numeric_gradient(f, w.flatten())) < 1e-4);
    }
  }
}

TEST_CASE("mlp: initialization bounds and determinism") {
  const auto w = MlpWeights::initialize(16, 5, 3);
  CHECK(w == MlpWeights::initialize(16, 5, 3));
  CHECK(w.parameter_count() == 16 * 5 + 2 * 5 + 1);
  for (double v : w.w1) CHECK(std::abs(v) <= 1.0 / std::sqrt(16.0));
  for (double v : w.w2) CHECK(std::abs(v) <= 1.0 / std::sqrt(5.0));
}

TEST_CASE("mlp: constant labels are learned") {
  Data d = blobs(40, 2, 1);
  std::fill(d.y.begin(), d.y.end(), 1.0);
  MlpParams p;
  p.seed = 2;
  CHECK(accuracy(train_mlp(d.x, d.y, p), d) == 1.0);
}

TEST_CASE("mlp: XOR with two hidden neurons") {
  Data d{FeatureMatrix(4, 2), {0, 1, 1, 0}};
  for (int i = 0; i < 4; ++i) {
    d.x.row(i)[0] = i & 1;
    d.x.row(i)[1] = (i >> 1) & 1;
  }
  double best = 0.0;
  for (std::uint64_t seed = 0; seed < 5 && best < 1.0; ++seed) {
    MlpParams p;
    p.hidden = 2;
    p.epochs = 5000;
    p.learning_rate = 0.05;
    p.batch_size = 4;
    p.seed = seed;
    best = std::max(best, accuracy(train_mlp(d.x, d.y, p), d));
  }
  CHECK(best == 1.0);
}

TEST_CASE("mlp: training is deterministic and records a loss curve") {
  const Data d = blobs(100, 2, 9);
  for (auto opt : {Optimizer::SGD, Optimizer::Adam, Optimizer::BatchGD}) {
    MlpParams p;
    p.optimizer = opt;
    p.epochs = 20;
    p.seed = 4;
    const auto a = train_mlp(d.x, d.y, p);
    CHECK(a == train_mlp(d.x, d.y, p));
    CHECK(a.loss_curve.size() == 20);
  }
}

TEST_CASE("mlp: divergence names the epoch") {
  Data d = blobs(50, 2, 1, 3.0);
  for (std::size_t i = 0; i < d.x.rows; ++i) d.x.row(i)[0] *= 1e150;
  MlpParams p;
  p.activation = Activation::ReLU;
  p.optimizer = Optimizer::SGD;
  p.learning_rate = 1e10;
  p.seed = 1;
  try {
    train_mlp(d.x, d.y, p);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.epoch() >= 1);
  }
  p = {};
  p.hidden = 21;
  CHECK_THROWS_AS(train_mlp(d.x, d.y, p), ValidationError);
}

TEST_CASE("model sizes") {
  const Data d1 = blobs(100, 1, 1);
  const auto ds = as_dataset(d1);
  CHECK(model_size_bytes(train_model(ds, LogRegParams{})) == 8);
  MlpParams mp;
  mp.epochs = 1;
  CHECK(model_size_bytes(train_model(ds, mp)) == 40);
  const auto knn = train_model(ds, KnnParams{});
  CHECK(model_size_bytes(knn) == 4 * 1 * 100 + 100);
  const auto tree = train_model(ds, TreeParams{10, 0.0});
  const auto& t = std::get<DecisionTree>(tree.predictor);
  CHECK(model_size_bytes(tree) == 10 * t.internal_nodes() + t.leaves());
  CHECK(model_size_bytes(knn) > model_size_bytes(tree));
}

TEST_CASE("model json round trip preserves predictions") {
  const auto ds = as_dataset(blobs(120, 2, 3));
  MlpParams mp;
  mp.epochs = 5;
  LogRegParams lp;
  lp.solver = LogRegSolver::SAG;
  for (const ModelParams& params :
       {ModelParams{TreeParams{}}, ModelParams{KnnParams{3, KnnWeighting::InverseDistance}},
        ModelParams{lp}, ModelParams{mp}}) {
    const Model m = train_model(ds, params);
    const Model back = model_from_json(model_to_json(m));
    CHECK(back == m);
    CHECK(predict_batch(back, ds) == predict_batch(m, ds));
  }
  CHECK_THROWS_AS(model_from_json("{\"format\":\"other\"}"), ParseError);
}

TEST_CASE("predict_batch: serial equals parallel") {
  const auto ds = as_dataset(blobs(500, 4, 7));
  const Model m = train_model(ds, KnnParams{7, KnnWeighting::InverseDistance});
  CHECK(predict_batch(m, ds, Exec::Serial) == predict_batch(m, ds, Exec::Parallel));
  std::vector<double> bad{1.0};
  CHECK_THROWS_AS(predict(m, bad), DimensionError);
}

}  // TEST_SUITE
