#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bypass/cachesim.hpp"
#include "bypass/dataset.hpp"
#include "bypass/exec.hpp"
#include "bypass/models.hpp"

namespace bypass {

/// Positive class is Bypass.
struct Confusion {
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tp = 0;

  std::size_t total() const { return tn + fp + fn + tp; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct Metrics {
  double accuracy = 0.0;
  double mae = 0.0;  // mean |label - score|
  Confusion confusion;
  double precision_cache = 0.0;
  double recall_cache = 0.0;
  double precision_bypass = 0.0;
  double recall_bypass = 0.0;
};

Metrics compute_metrics(std::span<const Label> truth, std::span<const Prediction> predicted);

/// Throws EvaluationError when the test set's scheme differs from the model's.
Metrics evaluate(const Model& model, const LabeledDataset& test, Exec exec = Exec::Parallel);

/// Featurizes the missing line's base address under the model's scheme.
class ModelClassifier final : public LineClassifier {
 public:
  explicit ModelClassifier(std::shared_ptr<const Model> model);
  bool should_bypass(std::uint64_t line_address, int line_size_log2) const override;

 private:
  std::shared_ptr<const Model> model_;
};

BypassPolicy policy_from_model(std::shared_ptr<const Model> model);
/// Same, but rejects a model trained under a different scheme.
BypassPolicy policy_from_model(std::shared_ptr<const Model> model, const FeatureScheme& scheme);

struct PolicyRow {
  std::string policy;
  CacheStats stats;
  double delta_vs_baseline = 0.0;  // (miss_rate - never_miss_rate) / never_miss_rate
};

struct ComparisonReport {
  std::vector<PolicyRow> rows;  // never, always, random, [model], oracle

  const PolicyRow& row(std::string_view policy) const;
};

/// Simulates every policy on the identical trace and geometry. `model` may
/// be null, in which case the model row is omitted.
ComparisonReport compare_policies(const Trace& trace, const CacheConfig& config,
                                  std::shared_ptr<const Model> model, double p_random,
                                  std::uint64_t seed,
                                  std::optional<std::uint64_t> threshold = std::nullopt,
                                  Exec exec = Exec::Parallel);

// CSV: policy,miss_rate,delta_vs_baseline,bypasses,evictions
void write_report(const ComparisonReport& report, std::ostream& out);
// CSV: accuracy,mae,tn,fp,fn,tp,precision_cache,recall_cache,precision_bypass,recall_bypass
void write_metrics(const Metrics& metrics, std::ostream& out);
// CSV: policy,accesses,hits,misses,bypasses,evictions,miss_rate
void write_stats(std::string_view policy, const CacheStats& stats, std::ostream& out);

}  // namespace bypass
