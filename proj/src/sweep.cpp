#include "bypass/sweep.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "bypass/error.hpp"
#include "bypass/eval.hpp"
#include "parallel.hpp"

namespace bypass {

std::string_view to_string(SweepKind k) {
  switch (k) {
    case SweepKind::TreeDepth: return "tree-depth";
    case SweepKind::TreeImpurity: return "tree-impurity";
    case SweepKind::Knn: return "knn";
    case SweepKind::LogReg: return "logreg";
    case SweepKind::Mlp: return "mlp";
  }
  return "?";
}

SweepKind parse_sweep_kind(std::string_view text) {
  for (auto k : {SweepKind::TreeDepth, SweepKind::TreeImpurity, SweepKind::Knn, SweepKind::LogReg,
                 SweepKind::Mlp}) {
    if (to_string(k) == text) return k;
  }
  throw ValidationError("model", "expected tree-depth, tree-impurity, knn, logreg or mlp");
}

SweepPlan default_plan(SweepKind kind, std::uint64_t seed, const SweepFixed& fixed) {
  SweepPlan plan;
  plan.kind = kind;
  plan.seed = seed;
  switch (kind) {
    case SweepKind::TreeDepth:
      for (int depth = 1; depth <= 10; ++depth)
        plan.grid.push_back(TreeParams{depth, fixed.tree.min_impurity_split});
      break;
    case SweepKind::TreeImpurity:
      for (int k = 0; k <= 10; ++k)
        plan.grid.push_back(TreeParams{fixed.tree.max_depth, k / 20.0});
      break;
    case SweepKind::Knn:
      for (auto w : fixed.knn_weightings) {
        for (int k = 1; k <= 17; ++k) plan.grid.push_back(KnnParams{k, w});
      }
      break;
    case SweepKind::LogReg:
      for (auto s : {LogRegSolver::NewtonIRLS, LogRegSolver::BatchGD, LogRegSolver::SAG}) {
        LogRegParams p = fixed.logreg;
        p.solver = s;
        p.seed = seed;
        plan.grid.push_back(p);
      }
      break;
    case SweepKind::Mlp:
      for (int h = 1; h <= kMaxHiddenNeurons; ++h) {
        MlpParams p = fixed.mlp;
        p.hidden = h;
        p.seed = seed;
        plan.grid.push_back(p);
      }
      break;
  }
  return plan;
}

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

SweepRow describe(SweepKind kind, const ModelParams& params) {
  SweepRow row;
  std::visit(Overloaded{
                 [&](const TreeParams& p) {
                   row.model = "tree";
                   if (kind == SweepKind::TreeImpurity) {
                     row.param = "min_impurity_split";
                     row.value = p.min_impurity_split;
                   } else {
                     row.param = "max_depth";
                     row.value = p.max_depth;
                   }
                 },
                 [&](const KnnParams& p) {
                   row.model = "knn";
                   row.param = "k";
                   row.value = p.k;
                   row.variant = std::string(to_string(p.weighting));
                 },
                 [&](const LogRegParams& p) {
                   row.model = "logreg";
                   row.param = "solver";
                   row.value = static_cast<double>(p.solver);
                   row.variant = std::string(to_string(p.solver));
                 },
                 [&](const MlpParams& p) {
                   row.model = "mlp";
                   row.param = "hidden";
                   row.value = p.hidden;
                   row.variant =
                       std::string(to_string(p.activation)) + "-" + std::string(to_string(p.optimizer));
                 },
             },
             params);
  return row;
}

}  // namespace

SweepResult run_sweep(const SweepPlan& plan, const LabeledDataset& train, const LabeledDataset& test,
                      Exec exec) {
  if (plan.grid.empty()) throw ValidationError("grid", "sweep plan has no grid points");
  if (train.empty() || test.empty()) throw EmptyDatasetError("sweep needs non-empty train and test splits");
  if (!(train.scheme == test.scheme)) throw EvaluationError("train and test schemes differ");

  SweepResult result;
  result.rows.resize(plan.grid.size());
  detail::parallel_for(
      static_cast<std::ptrdiff_t>(plan.grid.size()), exec,
      [&](std::ptrdiff_t i) {
        SweepRow row = describe(plan.kind, plan.grid[i]);
        const auto start = std::chrono::steady_clock::now();
        try {
          const Model model = train_model(train, plan.grid[i]);
          // Inner batches stay serial; the grid is the parallel axis.
          row.train_acc = evaluate(model, train, Exec::Serial).accuracy;
          const Metrics m = evaluate(model, test, Exec::Serial);
          row.test_acc = m.accuracy;
          row.mae = m.mae;
          row.size_bytes = model_size_bytes(model);
        } catch (const Error& e) {
          row.failure = e.what();
          row.train_acc = row.test_acc = row.mae = std::nan("");
        }
        row.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                     .count();
        result.rows[i] = std::move(row);
      },
      true);
  return result;
}

void write_sweep(const SweepResult& result, std::ostream& out, bool with_timing) {
  out << "model,param,value,weighting_or_solver,train_acc,test_acc,mae,size_bytes,ms\n";
  for (const auto& r : result.rows) {
    out << r.model << ',' << r.param << ',' << format_number(r.value) << ',' << r.variant << ','
        << format_number(r.train_acc) << ',' << format_number(r.test_acc) << ','
        << format_number(r.mae) << ',' << r.size_bytes << ','
        << format_number(with_timing ? std::round(r.ms * 1000.0) / 1000.0 : 0.0) << '\n';
  }
}

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

double to_double(const std::string& s, std::size_t lineno) {
  if (s == "nan") return std::nan("");
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParseError(lineno, "bad number '" + s + "'");
  return v;
}

}  // namespace

SweepResult read_sweep(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      line != "model,param,value,weighting_or_solver,train_acc,test_acc,mae,size_bytes,ms")
    throw ParseError(1, "not a sweep CSV");
  SweepResult result;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_row(line);
    if (f.size() != 9) throw ParseError(lineno, "expected 9 fields");
    SweepRow r;
    r.model = f[0];
    r.param = f[1];
    r.value = to_double(f[2], lineno);
    r.variant = f[3];
    r.train_acc = to_double(f[4], lineno);
    r.test_acc = to_double(f[5], lineno);
    r.mae = to_double(f[6], lineno);
    r.size_bytes = static_cast<std::uint64_t>(to_double(f[7], lineno));
    r.ms = to_double(f[8], lineno);
    if (std::isnan(r.test_acc)) r.failure = "failed";
    result.rows.push_back(std::move(r));
  }
  return result;
}

namespace {

std::string panel_name(const SweepRow& r) {
  if (r.model == "tree") return r.param == "max_depth" ? "tree_depth" : "tree_impurity";
  if (r.model == "knn") return r.variant == "distance" ? "knn_weighted" : "knn_uniform";
  if (r.model == "logreg") return "logreg_solvers";
  if (r.model == "mlp") return "mlp_neurons_" + r.variant;
  return r.model + "_" + r.param;
}

}  // namespace

std::vector<std::filesystem::path> write_panels(
    const std::vector<std::pair<std::string, SweepResult>>& sources,
    const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::map<std::string, std::string> panels;  // ordered, so output is stable
  for (const auto& [source, result] : sources) {
    for (const auto& r : result.rows) {
      auto& text = panels[panel_name(r)];
      if (text.empty()) text = "source,value,variant,train_acc,test_acc,mae,size_bytes\n";
      text += source + ',' + format_number(r.value) + ',' + r.variant + ',' +
              format_number(r.train_acc) + ',' + format_number(r.test_acc) + ',' +
              format_number(r.mae) + ',' + std::to_string(r.size_bytes) + '\n';
    }
  }
  std::vector<std::filesystem::path> written;
  for (const auto& [name, text] : panels) {
    const auto path = out_dir / (name + ".csv");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    written.push_back(path);
  }
  return written;
}

}  // namespace bypass
