#include <Eigen/Dense>
#include <cmath>

#include "bypass/error.hpp"
#include "bypass/models.hpp"
#include "bypass/rng.hpp"

namespace bypass {

std::string_view to_string(LogRegSolver s) {
  switch (s) {
    case LogRegSolver::NewtonIRLS: return "newton";
    case LogRegSolver::BatchGD: return "gd";
    case LogRegSolver::SAG: return "sag";
  }
  return "?";
}

LogRegSolver parse_logreg_solver(std::string_view text) {
  if (text == "newton") return LogRegSolver::NewtonIRLS;
  if (text == "gd") return LogRegSolver::BatchGD;
  if (text == "sag") return LogRegSolver::SAG;
  throw ValidationError("solver", "expected newton, gd or sag");
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

// Parameters are packed as [w_0 .. w_{d-1}, b].
LossGradient objective(const FeatureMatrix& x, std::span<const double> y,
                       std::span<const double> theta, double lambda) {
  const std::size_t d = x.cols;
  LossGradient out;
  out.gradient.assign(d + 1, 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto row = x.row(i);
    const double z = dot(row, theta.first(d)) + theta[d];
    loss += softplus(z) - y[i] * z;
    const double r = sigmoid(z) - y[i];
    for (std::size_t j = 0; j < d; ++j) out.gradient[j] += r * row[j];
    out.gradient[d] += r;
  }
  const double n = static_cast<double>(x.rows);
  double penalty = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    out.gradient[j] = out.gradient[j] / n + lambda * theta[j];
    penalty += theta[j] * theta[j];
  }
  out.gradient[d] /= n;
  out.loss = loss / n + 0.5 * lambda * penalty;
  return out;
}

struct SolveResult {
  std::vector<double> theta;
  bool converged = false;
  int iterations = 0;
};

SolveResult solve_newton(const FeatureMatrix& x, std::span<const double> y, double lambda,
                         int max_iters, double tol) {
  const std::size_t d = x.cols;
  const double n = static_cast<double>(x.rows);
  SolveResult res;
  res.theta.assign(d + 1, 0.0);
  auto current = objective(x, y, res.theta, lambda);
  for (int it = 0; it < max_iters; ++it) {
    if (norm(current.gradient) < tol) {
      res.converged = true;
      break;
    }
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d + 1, d + 1);
    Eigen::VectorXd xt(d + 1);
    for (std::size_t i = 0; i < x.rows; ++i) {
      const auto row = x.row(i);
      for (std::size_t j = 0; j < d; ++j) xt[j] = row[j];
      xt[d] = 1.0;
      const double p = sigmoid(xt.dot(Eigen::Map<const Eigen::VectorXd>(res.theta.data(), d + 1)));
      h.selfadjointView<Eigen::Lower>().rankUpdate(xt, p * (1.0 - p) / n);
    }
    h = h.selfadjointView<Eigen::Lower>();
    for (std::size_t j = 0; j < d; ++j) h(j, j) += lambda;
    h(d, d) += 1e-12;
    const Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(current.gradient.data(), d + 1);
    const Eigen::VectorXd step = h.ldlt().solve(g);

    // Backtracking keeps every step a descent step.
    double t = 1.0;
    std::vector<double> trial(d + 1);
    LossGradient next;
    const double slope = g.dot(step);
    for (int ls = 0; ls < 50; ++ls) {
      for (std::size_t j = 0; j <= d; ++j) trial[j] = res.theta[j] - t * step[j];
      next = objective(x, y, trial, lambda);
      if (next.loss <= current.loss - 1e-4 * t * slope) break;
      t *= 0.5;
    }
    res.theta = trial;
    current = std::move(next);
    res.iterations = it + 1;
  }
  if (norm(current.gradient) < tol) res.converged = true;
  return res;
}

double lipschitz_bound(const FeatureMatrix& x, double lambda, bool worst_row) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto row = x.row(i);
    const double sq = dot(row, row) + 1.0;
    acc = worst_row ? std::max(acc, sq) : acc + sq;
  }
  if (!worst_row) acc /= static_cast<double>(x.rows);
  return 0.25 * acc + lambda;
}

// Nesterov-accelerated full-batch gradient descent with gradient restart.
SolveResult solve_gd(const FeatureMatrix& x, std::span<const double> y, double lambda,
                     int max_iters, double tol) {
  const std::size_t p = x.cols + 1;
  const double step = 1.0 / lipschitz_bound(x, lambda, false);
  SolveResult res;
  std::vector<double> cur(p, 0.0), prev(p, 0.0), probe(p), next(p);
  double t = 1.0;
  for (int it = 0; it < max_iters; ++it) {
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double momentum = (t - 1.0) / t_next;
    for (std::size_t j = 0; j < p; ++j) probe[j] = cur[j] + momentum * (cur[j] - prev[j]);
    const auto g = objective(x, y, probe, lambda).gradient;
    res.iterations = it + 1;
    if (norm(g) < tol) {
      cur = probe;
      res.converged = true;
      break;
    }
    double restart = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      next[j] = probe[j] - step * g[j];
      restart += g[j] * (next[j] - cur[j]);
    }
    prev = cur;
    cur = next;
    t = restart > 0.0 ? 1.0 : t_next;
  }
  if (!res.converged) res.converged = norm(objective(x, y, cur, lambda).gradient) < tol;
  res.theta = std::move(cur);
  return res;
}

// Stochastic average gradient; convergence is checked on the full gradient
// after every epoch.
SolveResult solve_sag(const FeatureMatrix& x, std::span<const double> y, double lambda,
                      int max_epochs, double tol, std::uint64_t seed) {
  const std::size_t d = x.cols;
  const std::size_t n = x.rows;
  const double step = 1.0 / lipschitz_bound(x, lambda, true);
  SolveResult res;
  res.theta.assign(d + 1, 0.0);
  std::vector<double> memory(n, 0.0);
  std::vector<char> seen(n, 0);
  std::vector<double> sum(d + 1, 0.0);
  std::size_t seen_count = 0;
  Rng rng(seed);
  for (int epoch = 0; epoch < max_epochs; ++epoch) {
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t i = rng.below(n);
      const auto row = x.row(i);
      const double r = sigmoid(dot(row, std::span<const double>(res.theta).first(d)) + res.theta[d]) - y[i];
      const double delta = r - memory[i];
      for (std::size_t j = 0; j < d; ++j) sum[j] += delta * row[j];
      sum[d] += delta;
      memory[i] = r;
      if (!seen[i]) {
        seen[i] = 1;
        ++seen_count;
      }
      const double inv = 1.0 / static_cast<double>(seen_count);
      for (std::size_t j = 0; j < d; ++j)
        res.theta[j] -= step * (sum[j] * inv + lambda * res.theta[j]);
      res.theta[d] -= step * sum[d] * inv;
    }
    res.iterations = epoch + 1;
    if (norm(objective(x, y, res.theta, lambda).gradient) < tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace

LossGradient logreg_objective(const FeatureMatrix& x, std::span<const double> y,
                              std::span<const double> weights, double bias, double l2_lambda) {
  if (weights.size() != x.cols) throw DimensionError(x.cols, weights.size());
  std::vector<double> theta(weights.begin(), weights.end());
  theta.push_back(bias);
  return objective(x, y, theta, l2_lambda);
}

LogRegModel train_logreg(const FeatureMatrix& x, std::span<const double> y,
                         const LogRegParams& params) {
  if (x.rows == 0) throw TrainingError("logistic regression needs a non-empty training set");
  if (y.size() != x.rows) throw DimensionError(x.rows, y.size());
  if (!(params.l2_lambda > 0.0)) throw ValidationError("l2_lambda", "must be > 0");
  if (!(params.tol > 0.0)) throw ValidationError("tol", "must be > 0");
  std::size_t positives = 0;
  for (double v : y) positives += v > 0.5;
  if (positives == 0 || positives == y.size())
    throw TrainingError("logistic regression needs both classes in the training set");

  SolveResult res;
  switch (params.solver) {
    case LogRegSolver::NewtonIRLS:
      res = solve_newton(x, y, params.l2_lambda, params.max_iters > 0 ? params.max_iters : 100,
                         params.tol);
      break;
    case LogRegSolver::BatchGD:
      res = solve_gd(x, y, params.l2_lambda, params.max_iters > 0 ? params.max_iters : 100000,
                     params.tol);
      break;
    case LogRegSolver::SAG:
      res = solve_sag(x, y, params.l2_lambda, params.max_iters > 0 ? params.max_iters : 2000,
                      params.tol, params.seed);
      break;
  }
  for (double v : res.theta) {
    if (!std::isfinite(v)) throw TrainingError("logistic regression produced non-finite weights");
  }
  LogRegModel model;
  model.params = params;
  model.bias = res.theta.back();
  model.weights.assign(res.theta.begin(), res.theta.end() - 1);
  model.converged = res.converged;
  model.iterations = res.iterations;
  model.final_loss = objective(x, y, res.theta, params.l2_lambda).loss;
  return model;
}

Prediction LogRegModel::predict(std::span<const double> x) const {
  if (x.size() != weights.size()) throw DimensionError(weights.size(), x.size());
  const double score = sigmoid(dot(weights, x) + bias);
  return {label_from_score(score), score};
}

}  // namespace bypass
