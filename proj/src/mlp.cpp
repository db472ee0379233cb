#include <algorithm>
#include <cmath>
#include <numeric>

#include "bypass/error.hpp"
#include "bypass/models.hpp"
#include "bypass/rng.hpp"

namespace bypass {

std::string_view to_string(Activation a) { return a == Activation::Logistic ? "logistic" : "relu"; }

std::string_view to_string(Optimizer o) {
  switch (o) {
    case Optimizer::SGD: return "sgd";
    case Optimizer::Adam: return "adam";
    case Optimizer::BatchGD: return "batch";
  }
  return "?";
}

Activation parse_activation(std::string_view text) {
  if (text == "logistic") return Activation::Logistic;
  if (text == "relu") return Activation::ReLU;
  throw ValidationError("activation", "expected logistic or relu");
}

Optimizer parse_optimizer(std::string_view text) {
  if (text == "sgd") return Optimizer::SGD;
  if (text == "adam") return Optimizer::Adam;
  if (text == "batch") return Optimizer::BatchGD;
  throw ValidationError("optimizer", "expected sgd, adam or batch");
}

std::vector<double> MlpWeights::flatten() const {
  std::vector<double> p;
  p.reserve(parameter_count());
  p.insert(p.end(), w1.begin(), w1.end());
  p.insert(p.end(), b1.begin(), b1.end());
  p.insert(p.end(), w2.begin(), w2.end());
  p.push_back(b2);
  return p;
}

MlpWeights MlpWeights::unflatten(std::size_t inputs, std::size_t hidden, std::span<const double> p) {
  MlpWeights w;
  w.inputs = inputs;
  w.hidden = hidden;
  if (p.size() != w.parameter_count()) throw DimensionError(w.parameter_count(), p.size());
  auto it = p.begin();
  w.w1.assign(it, it + static_cast<std::ptrdiff_t>(inputs * hidden));
  it += static_cast<std::ptrdiff_t>(inputs * hidden);
  w.b1.assign(it, it + static_cast<std::ptrdiff_t>(hidden));
  it += static_cast<std::ptrdiff_t>(hidden);
  w.w2.assign(it, it + static_cast<std::ptrdiff_t>(hidden));
  it += static_cast<std::ptrdiff_t>(hidden);
  w.b2 = *it;
  return w;
}

MlpWeights MlpWeights::initialize(std::size_t inputs, std::size_t hidden, std::uint64_t seed) {
  Rng rng(seed);
  MlpWeights w;
  w.inputs = inputs;
  w.hidden = hidden;
  const double a1 = 1.0 / std::sqrt(static_cast<double>(inputs));
  const double a2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  w.w1.resize(inputs * hidden);
  w.b1.resize(hidden);
  w.w2.resize(hidden);
  for (auto& v : w.w1) v = rng.uniform(-a1, a1);
  for (auto& v : w.b1) v = rng.uniform(-a1, a1);
  for (auto& v : w.w2) v = rng.uniform(-a2, a2);
  w.b2 = rng.uniform(-a2, a2);
  return w;
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// Scratch space for one forward/backward pass.
struct Pass {
  std::vector<double> pre;
  std::vector<double> act;

  explicit Pass(std::size_t hidden) : pre(hidden), act(hidden) {}

  double forward(const MlpWeights& w, Activation a, std::span<const double> x) {
    double z = w.b2;
    for (std::size_t h = 0; h < w.hidden; ++h) {
      double s = w.b1[h];
      const double* row = w.w1.data() + h * w.inputs;
      for (std::size_t j = 0; j < w.inputs; ++j) s += row[j] * x[j];
      pre[h] = s;
      act[h] = a == Activation::Logistic ? sigmoid(s) : std::max(0.0, s);
      z += w.w2[h] * act[h];
    }
    return z;
  }

  // Adds d(loss)/d(params) for one sample to `grad` (flatten() layout).
  void backward(const MlpWeights& w, Activation a, std::span<const double> x, double dz,
                std::span<double> grad) const {
    const std::size_t off_b1 = w.inputs * w.hidden;
    const std::size_t off_w2 = off_b1 + w.hidden;
    const std::size_t off_b2 = off_w2 + w.hidden;
    for (std::size_t h = 0; h < w.hidden; ++h) {
      grad[off_w2 + h] += dz * act[h];
      const double dact = a == Activation::Logistic ? act[h] * (1.0 - act[h]) : (pre[h] > 0.0 ? 1.0 : 0.0);
      const double dpre = dz * w.w2[h] * dact;
      double* g = grad.data() + h * w.inputs;
      for (std::size_t j = 0; j < w.inputs; ++j) g[j] += dpre * x[j];
      grad[off_b1 + h] += dpre;
    }
    grad[off_b2] += dz;
  }
};

}  // namespace

LossGradient mlp_objective(const MlpWeights& weights, Activation activation, const FeatureMatrix& x,
                           std::span<const double> y) {
  if (x.cols != weights.inputs) throw DimensionError(weights.inputs, x.cols);
  LossGradient out;
  out.gradient.assign(weights.parameter_count(), 0.0);
  Pass pass(weights.hidden);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double z = pass.forward(weights, activation, x.row(i));
    out.loss += softplus(z) - y[i] * z;
    pass.backward(weights, activation, x.row(i), sigmoid(z) - y[i], out.gradient);
  }
  const double n = static_cast<double>(x.rows);
  out.loss /= n;
  for (auto& g : out.gradient) g /= n;
  return out;
}

MlpModel train_mlp(const FeatureMatrix& x, std::span<const double> y, const MlpParams& params) {
  if (x.rows == 0) throw TrainingError("mlp needs a non-empty training set");
  if (y.size() != x.rows) throw DimensionError(x.rows, y.size());
  if (params.hidden < 1 || params.hidden > kMaxHiddenNeurons)
    throw ValidationError("hidden", "must be in [1, 20]");
  if (params.epochs < 1) throw ValidationError("epochs", "must be >= 1");
  if (!(params.learning_rate > 0.0)) throw ValidationError("learning_rate", "must be > 0");
  if (params.batch_size < 1) throw ValidationError("batch_size", "must be >= 1");

  MlpModel model;
  model.params = params;
  model.weights = MlpWeights::initialize(x.cols, static_cast<std::size_t>(params.hidden), params.seed);
  MlpWeights& w = model.weights;

  std::vector<double> theta = w.flatten();
  const std::size_t np = theta.size();
  std::vector<double> grad(np), m(np, 0.0), v(np, 0.0);
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long adam_step = 0;

  const std::size_t n = x.rows;
  const std::size_t batch =
      params.optimizer == Optimizer::BatchGD ? n : std::min<std::size_t>(params.batch_size, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(splitmix64(params.seed));
  Pass pass(w.hidden);
  auto sync = [&w](const std::vector<double>& p) {
    auto it = p.begin();
    for (auto* part : {&w.w1, &w.b1, &w.w2}) {
      std::copy_n(it, part->size(), part->begin());
      it += static_cast<std::ptrdiff_t>(part->size());
    }
    w.b2 = *it;
  };

  for (int epoch = 1; epoch <= params.epochs; ++epoch) {
    if (params.optimizer != Optimizer::BatchGD) rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t t = start; t < stop; ++t) {
        const std::size_t i = order[t];
        const double z = pass.forward(w, params.activation, x.row(i));
        epoch_loss += softplus(z) - y[i] * z;
        pass.backward(w, params.activation, x.row(i), sigmoid(z) - y[i], grad);
      }
      const double scale = 1.0 / static_cast<double>(stop - start);
      if (params.optimizer == Optimizer::Adam) {
        ++adam_step;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam_step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam_step));
        for (std::size_t p = 0; p < np; ++p) {
          const double g = grad[p] * scale;
          m[p] = beta1 * m[p] + (1.0 - beta1) * g;
          v[p] = beta2 * v[p] + (1.0 - beta2) * g * g;
          theta[p] -= params.learning_rate * (m[p] / c1) / (std::sqrt(v[p] / c2) + eps);
        }
      } else {
        for (std::size_t p = 0; p < np; ++p) theta[p] -= params.learning_rate * grad[p] * scale;
      }
      sync(theta);
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) throw DivergenceError(epoch);
    model.loss_curve.push_back(epoch_loss);
  }
  for (double p : theta) {
    if (!std::isfinite(p)) throw DivergenceError(params.epochs);
  }
  return model;
}

Prediction MlpModel::predict(std::span<const double> x) const {
  if (x.size() != weights.inputs) throw DimensionError(weights.inputs, x.size());
  Pass pass(weights.hidden);
  const double score = sigmoid(pass.forward(weights, params.activation, x));
  return {label_from_score(score), score};
}

}  // namespace bypass
