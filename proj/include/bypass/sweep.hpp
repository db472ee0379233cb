#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bypass/dataset.hpp"
#include "bypass/exec.hpp"
#include "bypass/models.hpp"

namespace bypass {

/// One hyperparameter swept per plan:
///   tree-depth      max_depth 1..10 (impurity fixed)
///   tree-impurity   min_impurity_split 0.00..0.50 step 0.05 (depth fixed)
///   knn             K 1..17, once per weighting
///   logreg          solver in {newton, gd, sag}
///   mlp             hidden neurons 1..20
enum class SweepKind { TreeDepth, TreeImpurity, Knn, LogReg, Mlp };

std::string_view to_string(SweepKind k);
SweepKind parse_sweep_kind(std::string_view text);

/// Settings held constant while a plan sweeps its own parameter.
struct SweepFixed {
  TreeParams tree{10, 0.0};
  std::vector<KnnWeighting> knn_weightings{KnnWeighting::Uniform, KnnWeighting::InverseDistance};
  LogRegParams logreg;
  MlpParams mlp;
};

struct SweepPlan {
  SweepKind kind = SweepKind::TreeDepth;
  std::vector<ModelParams> grid;  // fully specified, in report order
  std::uint64_t seed = 0;
};

/// The default grid for `kind`. The seed is copied into every stochastic
/// trainer (SAG order, MLP init and shuffling).
SweepPlan default_plan(SweepKind kind, std::uint64_t seed, const SweepFixed& fixed = {});

struct SweepRow {
  std::string model;
  std::string param;
  double value = 0.0;
  std::string variant;  // knn weighting, logreg solver or mlp activation-optimizer
  double train_acc = 0.0;
  double test_acc = 0.0;
  double mae = 0.0;
  std::uint64_t size_bytes = 0;
  double ms = 0.0;
  std::optional<std::string> failure;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // grid order
};

/// Trains one model per grid point on `train` and scores it on `test`.
/// A failing point becomes a row with `failure` set; the sweep continues.
/// Grid points run concurrently under Exec::Parallel.
SweepResult run_sweep(const SweepPlan& plan, const LabeledDataset& train,
                      const LabeledDataset& test, Exec exec = Exec::Parallel);

/// Header: model,param,value,weighting_or_solver,train_acc,test_acc,mae,size_bytes,ms.
/// Failed rows carry nan metrics. The ms column is 0 unless `with_timing`,
/// which keeps the file reproducible byte for byte.
void write_sweep(const SweepResult& result, std::ostream& out, bool with_timing = false);
SweepResult read_sweep(std::istream& in);

/// Groups sweep rows by plot panel and writes one CSV per panel into
/// `out_dir`; returns the files written.
/// Columns: source,value,variant,train_acc,test_acc,mae,size_bytes.
std::vector<std::filesystem::path> write_panels(
    const std::vector<std::pair<std::string, SweepResult>>& sources,
    const std::filesystem::path& out_dir);

}  // namespace bypass
