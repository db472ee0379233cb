#include <fstream>
#include <json.hpp>
#include <sstream>

#include "bypass/error.hpp"
#include "bypass/models.hpp"
#include "parallel.hpp"

namespace bypass {

using nlohmann::json;

MinMaxScaler MinMaxScaler::fit(const LabeledDataset& data) {
  const std::size_t d = data.width();
  MinMaxScaler s;
  s.lo.assign(d, 0.0);
  s.hi.assign(d, 0.0);
  bool first = true;
  for (const auto& sample : data.samples) {
    if (sample.features.size() != d) throw DimensionError(d, sample.features.size());
    for (std::size_t j = 0; j < d; ++j) {
      const double v = sample.features[j];
      if (first || v < s.lo[j]) s.lo[j] = v;
      if (first || v > s.hi[j]) s.hi[j] = v;
    }
    first = false;
  }
  return s;
}

void MinMaxScaler::transform_into(std::span<const double> x, std::span<double> out) const {
  if (x.size() != lo.size()) throw DimensionError(lo.size(), x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double span = hi[j] - lo[j];
    out[j] = span > 0.0 ? (x[j] - lo[j]) / span : 0.0;
  }
}

std::vector<double> MinMaxScaler::transform(std::span<const double> x) const {
  std::vector<double> out(x.size());
  transform_into(x, out);
  return out;
}

FeatureMatrix to_matrix(const LabeledDataset& data, const MinMaxScaler& scaler) {
  FeatureMatrix m(data.size(), scaler.lo.size());
  for (std::size_t i = 0; i < data.size(); ++i) scaler.transform_into(data.samples[i].features, m.row(i));
  return m;
}

std::vector<double> label_vector(const LabeledDataset& data) {
  std::vector<double> y(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) y[i] = static_cast<double>(to_int(data.samples[i].label));
  return y;
}

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Tree: return "tree";
    case ModelKind::Knn: return "knn";
    case ModelKind::LogReg: return "logreg";
    case ModelKind::Mlp: return "mlp";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "tree") return ModelKind::Tree;
  if (text == "knn") return ModelKind::Knn;
  if (text == "logreg") return ModelKind::LogReg;
  if (text == "mlp") return ModelKind::Mlp;
  throw ValidationError("model", "expected tree, knn, logreg or mlp");
}

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

Model train_model(const LabeledDataset& train, const ModelParams& params) {
  if (train.empty()) throw TrainingError("empty training set");
  Model model;
  model.scheme = train.scheme;
  model.scaler = MinMaxScaler::fit(train);
  const FeatureMatrix x = to_matrix(train, model.scaler);
  const std::vector<double> y = label_vector(train);
  model.predictor = std::visit(
      Overloaded{
          [&](const TreeParams& p) -> Predictor { return train_decision_tree(x, y, p); },
          [&](const KnnParams& p) -> Predictor { return train_knn(x, y, p); },
          [&](const LogRegParams& p) -> Predictor { return train_logreg(x, y, p); },
          [&](const MlpParams& p) -> Predictor { return train_mlp(x, y, p); },
      },
      params);
  return model;
}

Prediction predict(const Model& model, std::span<const double> features) {
  if (features.size() != model.width()) throw DimensionError(model.width(), features.size());
  const std::vector<double> x = model.scaler.transform(features);
  return std::visit([&](const auto& p) { return p.predict(x); }, model.predictor);
}

std::vector<Prediction> predict_batch(const Model& model, const LabeledDataset& data, Exec exec) {
  if (data.width() != model.width()) throw DimensionError(model.width(), data.width());
  std::vector<Prediction> out(data.size());
  detail::parallel_for(static_cast<std::ptrdiff_t>(data.size()), exec,
                       [&](std::ptrdiff_t i) { out[i] = predict(model, data.samples[i].features); });
  return out;
}

std::uint64_t model_size_bytes(const Predictor& predictor) {
  return std::visit(
      Overloaded{
          [](const DecisionTree& t) -> std::uint64_t { return 10 * t.internal_nodes() + t.leaves(); },
          [](const KnnModel& k) -> std::uint64_t {
            return 4 * k.points.cols * k.points.rows + k.points.rows;
          },
          [](const LogRegModel& m) -> std::uint64_t { return 4 * (m.weights.size() + 1); },
          [](const MlpModel& m) -> std::uint64_t {
            const auto d = m.weights.inputs, h = m.weights.hidden;
            return 4 * (d * h + 2 * h + 1);
          },
      },
      predictor);
}

std::uint64_t model_size_bytes(const Model& model) { return model_size_bytes(model.predictor); }

// ------------------------------------------------------------ serialization

namespace {

constexpr int kModelFormatVersion = 1;
constexpr const char* kModelFormatTag = "bypasslab-model";

json matrix_json(const FeatureMatrix& m) {
  return json{{"rows", m.rows}, {"cols", m.cols}, {"values", m.values}};
}

FeatureMatrix matrix_from(const json& j) {
  FeatureMatrix m;
  m.rows = j.at("rows").get<std::size_t>();
  m.cols = j.at("cols").get<std::size_t>();
  m.values = j.at("values").get<std::vector<double>>();
  if (m.values.size() != m.rows * m.cols) throw ParseError(0, "matrix size mismatch in model file");
  return m;
}

json predictor_json(const Predictor& p) {
  return std::visit(
      Overloaded{
          [](const DecisionTree& t) {
            json nodes = json::array();
            for (const auto& n : t.nodes)
              nodes.push_back({n.feature, n.threshold, n.left, n.right, n.counts.cache, n.counts.bypass});
            return json{{"max_depth", t.params.max_depth},
                        {"min_impurity_split", t.params.min_impurity_split},
                        {"nodes", nodes}};
          },
          [](const KnnModel& k) {
            return json{{"k", k.params.k},
                        {"weighting", to_string(k.params.weighting)},
                        {"points", matrix_json(k.points)},
                        {"labels", k.labels}};
          },
          [](const LogRegModel& m) {
            return json{{"solver", to_string(m.params.solver)},
                        {"l2_lambda", m.params.l2_lambda},
                        {"max_iters", m.params.max_iters},
                        {"tol", m.params.tol},
                        {"seed", m.params.seed},
                        {"weights", m.weights},
                        {"bias", m.bias},
                        {"converged", m.converged},
                        {"iterations", m.iterations},
                        {"final_loss", m.final_loss}};
          },
          [](const MlpModel& m) {
            return json{{"hidden", m.params.hidden},
                        {"activation", to_string(m.params.activation)},
                        {"optimizer", to_string(m.params.optimizer)},
                        {"epochs", m.params.epochs},
                        {"learning_rate", m.params.learning_rate},
                        {"batch_size", m.params.batch_size},
                        {"seed", m.params.seed},
                        {"inputs", m.weights.inputs},
                        {"w1", m.weights.w1},
                        {"b1", m.weights.b1},
                        {"w2", m.weights.w2},
                        {"b2", m.weights.b2},
                        {"loss_curve", m.loss_curve}};
          },
      },
      p);
}

Predictor predictor_from(ModelKind kind, const json& j) {
  switch (kind) {
    case ModelKind::Tree: {
      DecisionTree t;
      t.params.max_depth = j.at("max_depth").get<int>();
      t.params.min_impurity_split = j.at("min_impurity_split").get<double>();
      for (const auto& n : j.at("nodes")) {
        TreeNode node;
        node.feature = n.at(0).get<int>();
        node.threshold = n.at(1).get<double>();
        node.left = n.at(2).get<int>();
        node.right = n.at(3).get<int>();
        node.counts = {n.at(4).get<std::size_t>(), n.at(5).get<std::size_t>()};
        t.nodes.push_back(node);
      }
      if (t.nodes.empty()) throw ParseError(0, "tree without nodes");
      return t;
    }
    case ModelKind::Knn: {
      KnnModel k;
      k.params.k = j.at("k").get<int>();
      k.params.weighting = parse_knn_weighting(j.at("weighting").get<std::string>());
      k.points = matrix_from(j.at("points"));
      k.labels = j.at("labels").get<std::vector<double>>();
      return k;
    }
    case ModelKind::LogReg: {
      LogRegModel m;
      m.params.solver = parse_logreg_solver(j.at("solver").get<std::string>());
      m.params.l2_lambda = j.at("l2_lambda").get<double>();
      m.params.max_iters = j.at("max_iters").get<int>();
      m.params.tol = j.at("tol").get<double>();
      m.params.seed = j.at("seed").get<std::uint64_t>();
      m.weights = j.at("weights").get<std::vector<double>>();
      m.bias = j.at("bias").get<double>();
      m.converged = j.at("converged").get<bool>();
      m.iterations = j.at("iterations").get<int>();
      m.final_loss = j.at("final_loss").get<double>();
      return m;
    }
    case ModelKind::Mlp: {
      MlpModel m;
      m.params.hidden = j.at("hidden").get<int>();
      m.params.activation = parse_activation(j.at("activation").get<std::string>());
      m.params.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
      m.params.epochs = j.at("epochs").get<int>();
      m.params.learning_rate = j.at("learning_rate").get<double>();
      m.params.batch_size = j.at("batch_size").get<int>();
      m.params.seed = j.at("seed").get<std::uint64_t>();
      m.weights.inputs = j.at("inputs").get<std::size_t>();
      m.weights.hidden = static_cast<std::size_t>(m.params.hidden);
      m.weights.w1 = j.at("w1").get<std::vector<double>>();
      m.weights.b1 = j.at("b1").get<std::vector<double>>();
      m.weights.w2 = j.at("w2").get<std::vector<double>>();
      m.weights.b2 = j.at("b2").get<double>();
      m.loss_curve = j.at("loss_curve").get<std::vector<double>>();
      return m;
    }
  }
  throw ParseError(0, "unknown model kind");
}

}  // namespace

std::string model_to_json(const Model& model) {
  const json j{{"format", kModelFormatTag},
               {"version", kModelFormatVersion},
               {"kind", to_string(model.kind())},
               {"scheme", model.scheme.to_string()},
               {"scaler", {{"lo", model.scaler.lo}, {"hi", model.scaler.hi}}},
               {"model", predictor_json(model.predictor)}};
  return j.dump(1) + "\n";
}

Model model_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kModelFormatTag)
      throw ParseError(0, "not a model file");
    if (j.at("version").get<int>() != kModelFormatVersion)
      throw ParseError(0, "unsupported model file version");
    Model m;
    m.scheme = FeatureScheme::parse(j.at("scheme").get<std::string>());
    m.scaler.lo = j.at("scaler").at("lo").get<std::vector<double>>();
    m.scaler.hi = j.at("scaler").at("hi").get<std::vector<double>>();
    if (m.scaler.lo.size() != m.scheme.width() || m.scaler.hi.size() != m.scheme.width())
      throw ParseError(0, "normalization width does not match the feature scheme");
    m.predictor = predictor_from(parse_model_kind(j.at("kind").get<std::string>()), j.at("model"));
    return m;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("malformed model file: ") + e.what());
  }
}

void save_model(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << model_to_json(model);
  if (!out) throw Error("write failed: " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

}  // namespace bypass
