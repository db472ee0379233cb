#include "bypass/eval.hpp"

#include <cmath>
#include <ostream>

#include "bypass/error.hpp"
#include "parallel.hpp"

namespace bypass {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

Metrics compute_metrics(std::span<const Label> truth, std::span<const Prediction> predicted) {
  if (truth.size() != predicted.size()) throw DimensionError(truth.size(), predicted.size());
  if (truth.empty()) throw EvaluationError("no samples to evaluate");
  Metrics m;
  double abs_err = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool actual = truth[i] == Label::Bypass;
    const bool guess = predicted[i].label == Label::Bypass;
    if (actual) {
      (guess ? m.confusion.tp : m.confusion.fn)++;
    } else {
      (guess ? m.confusion.fp : m.confusion.tn)++;
    }
    abs_err += std::abs((actual ? 1.0 : 0.0) - predicted[i].score);
  }
  const auto& c = m.confusion;
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.mae = truth.empty() ? 0.0 : abs_err / static_cast<double>(truth.size());
  m.precision_bypass = ratio(c.tp, c.tp + c.fp);
  m.recall_bypass = ratio(c.tp, c.tp + c.fn);
  m.precision_cache = ratio(c.tn, c.tn + c.fn);
  m.recall_cache = ratio(c.tn, c.tn + c.fp);
  return m;
}

Metrics evaluate(const Model& model, const LabeledDataset& test, Exec exec) {
  if (!(test.scheme == model.scheme))
    throw EvaluationError("test set uses scheme " + test.scheme.to_string() +
                          " but the model was trained on " + model.scheme.to_string());
  const auto predicted = predict_batch(model, test, exec);
  std::vector<Label> truth(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) truth[i] = test.samples[i].label;
  return compute_metrics(truth, predicted);
}

ModelClassifier::ModelClassifier(std::shared_ptr<const Model> model) : model_(std::move(model)) {
  if (!model_) throw ValidationError("model", "null model");
}

bool ModelClassifier::should_bypass(std::uint64_t line_address, int line_size_log2) const {
  const std::uint64_t base = line_address << line_size_log2;
  return predict(*model_, model_->scheme.featurize(base)).label == Label::Bypass;
}

BypassPolicy policy_from_model(std::shared_ptr<const Model> model) {
  return BypassPolicy::model(std::make_shared<const ModelClassifier>(std::move(model)));
}

BypassPolicy policy_from_model(std::shared_ptr<const Model> model, const FeatureScheme& scheme) {
  if (!model || !(model->scheme == scheme))
    throw EvaluationError("model was not trained under scheme " + scheme.to_string());
  return policy_from_model(std::move(model));
}

const PolicyRow& ComparisonReport::row(std::string_view policy) const {
  for (const auto& r : rows) {
    if (r.policy == policy) return r;
  }
  throw Error("no report row for policy " + std::string(policy));
}

ComparisonReport compare_policies(const Trace& trace, const CacheConfig& config,
                                  std::shared_ptr<const Model> model, double p_random,
                                  std::uint64_t seed, std::optional<std::uint64_t> threshold,
                                  Exec exec) {
  validate(config);
  if (trace.line_size_log2 != config.line_size_log2)
    throw ConfigError("trace and cache line sizes differ");
  std::vector<BypassPolicy> policies{BypassPolicy::never(), BypassPolicy::always(),
                                     BypassPolicy::random(p_random, seed)};
  if (model) policies.push_back(policy_from_model(std::move(model)));
  policies.push_back(oracle_bypass_policy(trace, config, threshold));

  ComparisonReport report;
  report.rows.resize(policies.size());
  // Each simulation owns its cache state; policies are read-only.
  detail::parallel_for(
      static_cast<std::ptrdiff_t>(policies.size()), exec,
      [&](std::ptrdiff_t i) {
        report.rows[i].policy = std::string(policies[i].name());
        report.rows[i].stats = simulate(trace, config, policies[i]);
      },
      true);
  const double base = report.rows.front().stats.miss_rate();
  for (auto& r : report.rows)
    r.delta_vs_baseline = base > 0.0 ? (r.stats.miss_rate() - base) / base : 0.0;
  return report;
}

void write_report(const ComparisonReport& report, std::ostream& out) {
  out << "policy,miss_rate,delta_vs_baseline,bypasses,evictions\n";
  for (const auto& r : report.rows) {
    out << r.policy << ',' << format_number(r.stats.miss_rate()) << ','
        << format_number(r.delta_vs_baseline) << ',' << r.stats.bypasses << ','
        << r.stats.evictions << '\n';
  }
}

void write_metrics(const Metrics& m, std::ostream& out) {
  out << "accuracy,mae,tn,fp,fn,tp,precision_cache,recall_cache,precision_bypass,recall_bypass\n"
      << format_number(m.accuracy) << ',' << format_number(m.mae) << ',' << m.confusion.tn << ','
      << m.confusion.fp << ',' << m.confusion.fn << ',' << m.confusion.tp << ','
      << format_number(m.precision_cache) << ',' << format_number(m.recall_cache) << ','
      << format_number(m.precision_bypass) << ',' << format_number(m.recall_bypass) << '\n';
}

void write_stats(std::string_view policy, const CacheStats& s, std::ostream& out) {
  out << "policy,accesses,hits,misses,bypasses,evictions,miss_rate\n"
      << policy << ',' << s.accesses << ',' << s.hits << ',' << s.misses << ',' << s.bypasses << ','
      << s.evictions << ',' << format_number(s.miss_rate()) << '\n';
}

}  // namespace bypass
