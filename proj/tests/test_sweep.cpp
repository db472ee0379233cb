#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bypass/error.hpp"
#include "bypass/sweep.hpp"
#include "bypass/trace.hpp"

using namespace bypass;

namespace {

std::pair<LabeledDataset, LabeledDataset> region_split(std::uint64_t length, std::uint64_t seed) {
  WorkloadSpec spec;
  spec.kind = WorkloadKind::RegionLabeledMix;
  spec.length = length;
  spec.seed = seed;
  const CacheConfig c;
  return train_test_split(label_trace(generate_trace(spec), c, default_threshold(c)), 0.2, seed);
}

}  // namespace

TEST_SUITE("sweep") {

TEST_CASE("default grid cardinalities") {
  CHECK(default_plan(SweepKind::TreeDepth, 1).grid.size() == 10);
  CHECK(default_plan(SweepKind::TreeImpurity, 1).grid.size() == 11);
  SweepFixed one;
  one.knn_weightings = {KnnWeighting::Uniform};
  CHECK(default_plan(SweepKind::Knn, 1, one).grid.size() == 17);
  CHECK(default_plan(SweepKind::Knn, 1).grid.size() == 34);
  CHECK(default_plan(SweepKind::LogReg, 1).grid.size() == 3);
  CHECK(default_plan(SweepKind::Mlp, 1).grid.size() == 20);
  const auto imp = default_plan(SweepKind::TreeImpurity, 1);
  CHECK(std::get<TreeParams>(imp.grid.back()).min_impurity_split == 0.5);
  CHECK(std::get<TreeParams>(imp.grid[1]).min_impurity_split == 0.05);
}

TEST_CASE("depth sweep rows and determinism") {
  const auto [train, test] = region_split(4000, 1);
  const auto plan = default_plan(SweepKind::TreeDepth, 3);
  const auto a = run_sweep(plan, train, test, Exec::Parallel);
  REQUIRE(a.rows.size() == 10);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].value == double(i + 1));
    CHECK_FALSE(a.rows[i].failure.has_value());
    CHECK(std::isfinite(a.rows[i].test_acc));
  }
  const auto b = run_sweep(plan, train, test, Exec::Serial);
  std::ostringstream sa, sb;
  write_sweep(a, sa);
  write_sweep(b, sb);
  CHECK(sa.str() == sb.str());
}

TEST_CASE("impurity sweep trend and majority row") {
  const auto [train, test] = region_split(5000, 2);
  const auto r = run_sweep(default_plan(SweepKind::TreeImpurity, 1), train, test);
  for (std::size_t i = 1; i < r.rows.size(); ++i) CHECK(r.rows[i].test_acc <= r.rows[i - 1].test_acc + 0.01);
  const auto train_counts = train.class_counts();
  const Label majority = train_counts.bypass > train_counts.cache ? Label::Bypass : Label::Cache;
  const double baseline = double(test.class_counts().of(majority)) / double(test.size());
  CHECK(r.rows.back().test_acc == baseline);
}

TEST_CASE("failed rows are recorded and the sweep continues") {
  const auto [train, test] = region_split(2000, 3);
  SweepPlan plan = default_plan(SweepKind::Knn, 1);
  plan.grid.push_back(KnnParams{1000000, KnnWeighting::Uniform});
  const auto r = run_sweep(plan, train, test);
  REQUIRE(r.rows.size() == 35);
  CHECK(r.rows.back().failure.has_value());
  CHECK(std::isnan(r.rows.back().test_acc));
  for (std::size_t i = 0; i + 1 < r.rows.size(); ++i) CHECK_FALSE(r.rows[i].failure.has_value());
  CHECK_THROWS_AS(run_sweep(SweepPlan{}, train, test), ValidationError);
}

TEST_CASE("logreg solver rows agree") {
  const auto [train, test] = region_split(3000, 4);
  const auto r = run_sweep(default_plan(SweepKind::LogReg, 1), train, test);
  REQUIRE(r.rows.size() == 3);
  for (const auto& row : r.rows) CHECK(std::abs(row.mae - r.rows[0].mae) < 1e-3);
  CHECK(r.rows[0].variant == "newton");
  CHECK(r.rows[2].variant == "sag");
}

TEST_CASE("csv round trip and timing switch") {
  const auto [train, test] = region_split(2000, 5);
  const auto r = run_sweep(default_plan(SweepKind::TreeDepth, 1), train, test);
  std::stringstream buf;
  write_sweep(r, buf);
  CHECK(buf.str().rfind("model,param,value,weighting_or_solver,train_acc,test_acc,mae,size_bytes,ms\n", 0) == 0);
  const auto back = read_sweep(buf);
  REQUIRE(back.rows.size() == r.rows.size());
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    CHECK(back.rows[i].test_acc == r.rows[i].test_acc);
    CHECK(back.rows[i].size_bytes == r.rows[i].size_bytes);
    CHECK(back.rows[i].ms == 0.0);
  }
  std::ostringstream timed;
  write_sweep(r, timed, true);
  CHECK(timed.str() != buf.str());
}

TEST_CASE("panels group rows by plot") {
  const auto [train, test] = region_split(2000, 6);
  const auto depth = run_sweep(default_plan(SweepKind::TreeDepth, 1), train, test);
  const auto imp = run_sweep(default_plan(SweepKind::TreeImpurity, 1), train, test);
  const auto dir = std::filesystem::temp_directory_path() / "bypass_panels_test";
  std::filesystem::remove_all(dir);
  const auto files = write_panels({{"a", depth}, {"b", depth}, {"a", imp}}, dir);
  REQUIRE(files.size() == 2);
  CHECK(files[0].filename() == "tree_depth.csv");
  CHECK(files[1].filename() == "tree_impurity.csv");
  std::ifstream in(files[0]);
  std::size_t lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  CHECK(lines == 1 + 20);
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
