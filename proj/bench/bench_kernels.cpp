// Serial vs OpenMP timings of the batch kernels.
#include <benchmark/benchmark.h>

#include "bypass/eval.hpp"
#include "bypass/sweep.hpp"

using namespace bypass;

namespace {

const LabeledDataset& raw_dataset() {
  static const LabeledDataset ds = [] {
    WorkloadSpec spec;
    spec.kind = WorkloadKind::RegionLabeledMix;
    spec.length = 20000;
    spec.seed = 1;
    const CacheConfig c;
    return label_trace(generate_trace(spec), c, default_threshold(c));
  }();
  return ds;
}

const std::pair<LabeledDataset, LabeledDataset>& digits_split() {
  static const auto split = train_test_split(featurize(raw_dataset(), FeatureScheme::digits()), 0.2, 1);
  return split;
}

Exec exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? Exec::Serial : Exec::Parallel;
}

void BM_Featurize(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(featurize(raw_dataset(), FeatureScheme::digits(), exec_of(state)));
}

void BM_Smote(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(smote_balance(raw_dataset(), 5, 3, exec_of(state)));
}

void BM_KnnPredictBatch(benchmark::State& state) {
  const auto& [train, test] = digits_split();
  const Model m = train_model(train, KnnParams{5, KnnWeighting::InverseDistance});
  for (auto _ : state) benchmark::DoNotOptimize(predict_batch(m, test, exec_of(state)));
}

void BM_TreeSweep(benchmark::State& state) {
  const auto& [train, test] = digits_split();
  const auto plan = default_plan(SweepKind::TreeDepth, 1);
  for (auto _ : state) benchmark::DoNotOptimize(run_sweep(plan, train, test, exec_of(state)));
}

void BM_ComparePolicies(benchmark::State& state) {
  const Trace t = generate_trace(zipf_stream_mix_spec(50000, 2));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        compare_policies(t, CacheConfig{}, nullptr, 0.3, 1, std::nullopt, exec_of(state)));
}

}  // namespace

// Argument 0 runs the serial reference, 1 the parallel kernel.
BENCHMARK(BM_Featurize)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Smote)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KnnPredictBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TreeSweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ComparePolicies)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
