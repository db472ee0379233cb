#include "bypass/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "bypass/cachesim.hpp"
#include "bypass/dataset.hpp"
#include "bypass/error.hpp"
#include "bypass/eval.hpp"
#include "bypass/models.hpp"
#include "bypass/sweep.hpp"
#include "bypass/trace.hpp"

namespace bypass::cli {
namespace {

namespace fs = std::filesystem;

struct MissingInput : Error {
  explicit MissingInput(const fs::path& p) : Error("input not found: " + p.string()) {}
};

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw MissingInput(p);
}

std::ofstream open_output(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

// Writes to `path`, or to `fallback` when no path was given.
void emit(const std::string& path, std::ostream& fallback,
          const std::function<void(std::ostream&)>& write) {
  if (path.empty()) {
    write(fallback);
    return;
  }
  auto out = open_output(path);
  write(out);
}

int line_log2(std::uint32_t line_bytes) {
  if (!std::has_single_bit(line_bytes)) throw ValidationError("line", "must be a power of two");
  return std::countr_zero(line_bytes);
}

template <class T>
T parse_value(std::string_view key, std::string_view text) {
  T v{};
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size())
    throw ValidationError(std::string(key), "bad value '" + std::string(text) + "'");
  return v;
}

std::vector<std::pair<std::string, std::string>> parse_pairs(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> pairs;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto item = text.substr(0, comma);
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0)
      throw ValidationError("params", "expected key=value, got '" + std::string(item) + "'");
    pairs.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  return pairs;
}

[[noreturn]] void unknown_key(std::string_view model, const std::string& key) {
  throw ValidationError("params", "unknown " + std::string(model) + " parameter '" + key + "'");
}

bool apply(TreeParams& p, const std::string& key, const std::string& value) {
  if (key == "max_depth") p.max_depth = parse_value<int>(key, value);
  else if (key == "min_impurity_split") p.min_impurity_split = parse_value<double>(key, value);
  else return false;
  return true;
}

bool apply(KnnParams& p, const std::string& key, const std::string& value) {
  if (key == "k") p.k = parse_value<int>(key, value);
  else if (key == "weighting") p.weighting = parse_knn_weighting(value);
  else return false;
  return true;
}

bool apply(LogRegParams& p, const std::string& key, const std::string& value) {
  if (key == "solver") p.solver = parse_logreg_solver(value);
  else if (key == "lambda") p.l2_lambda = parse_value<double>(key, value);
  else if (key == "max_iters") p.max_iters = parse_value<int>(key, value);
  else if (key == "tol") p.tol = parse_value<double>(key, value);
  else return false;
  return true;
}

bool apply(MlpParams& p, const std::string& key, const std::string& value) {
  if (key == "hidden") p.hidden = parse_value<int>(key, value);
  else if (key == "activation") p.activation = parse_activation(value);
  else if (key == "optimizer") p.optimizer = parse_optimizer(value);
  else if (key == "epochs") p.epochs = parse_value<int>(key, value);
  else if (key == "lr") p.learning_rate = parse_value<double>(key, value);
  else if (key == "batch_size") p.batch_size = parse_value<int>(key, value);
  else return false;
  return true;
}

ModelParams parse_model_params(ModelKind kind, std::string_view text, std::uint64_t seed) {
  ModelParams params;
  switch (kind) {
    case ModelKind::Tree: params = TreeParams{}; break;
    case ModelKind::Knn: params = KnnParams{}; break;
    case ModelKind::LogReg: params = LogRegParams{}; break;
    case ModelKind::Mlp: params = MlpParams{}; break;
  }
  for (const auto& [key, value] : parse_pairs(text)) {
    const bool known = std::visit([&](auto& p) { return apply(p, key, value); }, params);
    if (!known) unknown_key(to_string(kind), key);
  }
  if (auto* p = std::get_if<LogRegParams>(&params)) p->seed = seed;
  if (auto* p = std::get_if<MlpParams>(&params)) p->seed = seed;
  return params;
}

SweepFixed parse_fixed(SweepKind kind, std::string_view text) {
  SweepFixed fixed;
  for (const auto& [key, value] : parse_pairs(text)) {
    bool known = false;
    switch (kind) {
      case SweepKind::TreeDepth:
      case SweepKind::TreeImpurity: known = apply(fixed.tree, key, value); break;
      case SweepKind::Knn:
        if (key == "weighting") {
          fixed.knn_weightings = {parse_knn_weighting(value)};
          known = true;
        }
        break;
      case SweepKind::LogReg: known = key != "solver" && apply(fixed.logreg, key, value); break;
      case SweepKind::Mlp: known = key != "hidden" && apply(fixed.mlp, key, value); break;
    }
    if (!known) unknown_key(to_string(kind), key);
  }
  return fixed;
}

struct Geometry {
  std::uint32_t sets = 32;
  std::uint32_t ways = 4;
  std::uint32_t line = 128;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--sets", sets, "Number of sets (power of two)")->capture_default_str();
    cmd->add_option("--ways", ways, "Associativity")->capture_default_str();
    cmd->add_option("--line", line, "Line size in bytes")->capture_default_str();
  }

  CacheConfig config() const {
    CacheConfig c{sets, ways, line_log2(line)};
    validate(c);
    return c;
  }
};

Trace load_trace(const std::string& path, const CacheConfig& config) {
  require_file(path);
  return read_trace(fs::path(path), config.line_size_log2);
}

LabeledDataset load_dataset(const std::string& path) {
  require_file(path);
  return read_dataset(fs::path(path));
}

std::shared_ptr<const Model> load_model_file(const std::string& path) {
  require_file(path);
  return std::make_shared<const Model>(load_model(path));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cache-bypassing lab: traces, oracle labels, predictors and miss-rate comparison",
               "bypasslab"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  std::function<void()> action;

  // gen-trace
  auto* gen = app.add_subcommand("gen-trace", "Generate a synthetic memory trace");
  std::string gen_kind, gen_out;
  std::uint64_t gen_length = 0, gen_seed = 0;
  std::uint32_t gen_line = 128;
  WorkloadParams wp;
  std::vector<double> region_reuse;
  gen->add_option("--kind", gen_kind,
                  "streaming | strided | zipf | gather | region-mix | zipf-stream")
      ->required();
  gen->add_option("--length", gen_length, "Number of accesses")->required();
  gen->add_option("--seed", gen_seed, "RNG seed")->required();
  gen->add_option("--out", gen_out, "Output trace CSV")->required();
  gen->add_option("--line", gen_line, "Line size in bytes")->capture_default_str();
  gen->add_option("--base", wp.base_address, "Base address")->capture_default_str();
  gen->add_option("--store-fraction", wp.store_fraction)->capture_default_str();
  gen->add_option("--stride", wp.stride_bytes, "strided: stride in bytes")->capture_default_str();
  gen->add_option("--strided-footprint", wp.strided_footprint_bytes)->capture_default_str();
  gen->add_option("--zipf-exponent", wp.zipf_exponent)->capture_default_str();
  gen->add_option("--hot-lines", wp.hot_set_lines, "zipf: hot-set size")->capture_default_str();
  gen->add_option("--stream-fraction", wp.stream_fraction)->capture_default_str();
  gen->add_option("--gather-footprint", wp.gather_footprint_bytes)->capture_default_str();
  gen->add_option("--regions", wp.region_count)->capture_default_str();
  gen->add_option("--region-bytes", wp.region_bytes)->capture_default_str();
  gen->add_option("--hot-lines-per-region", wp.hot_lines_per_region)->capture_default_str();
  gen->add_option("--region-reuse", region_reuse, "Per-region reuse probabilities")
      ->delimiter(',');
  gen->callback([&] {
    action = [&] {
      WorkloadSpec spec;
      const bool preset = gen_kind == "zipf-stream";
      if (preset) {
        spec = zipf_stream_mix_spec(gen_length, gen_seed);
        if (gen->count("--stream-fraction") == 0) wp.stream_fraction = spec.params.stream_fraction;
        if (gen->count("--hot-lines") == 0) wp.hot_set_lines = spec.params.hot_set_lines;
        if (gen->count("--zipf-exponent") == 0) wp.zipf_exponent = spec.params.zipf_exponent;
      }
      spec.kind = preset ? WorkloadKind::ZipfHotSet : parse_workload_kind(gen_kind);
      spec.length = gen_length;
      spec.seed = gen_seed;
      wp.line_size_log2 = line_log2(gen_line);
      wp.region_reuse = region_reuse;
      spec.params = wp;
      const Trace trace = generate_trace(spec);
      auto o = open_output(gen_out);
      write_trace(trace, o);
    };
  });

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate one bypass policy on a trace");
  Geometry sim_geo;
  std::string sim_trace, sim_policy = "never", sim_out;
  sim->add_option("--trace", sim_trace)->required();
  sim_geo.add_to(sim);
  sim->add_option("--policy", sim_policy,
                  "never | always | random:p:seed | oracle[:T] | model:path")
      ->capture_default_str();
  sim->add_option("--out", sim_out, "Stats CSV (stdout if omitted)");
  sim->callback([&] {
    action = [&] {
      const CacheConfig config = sim_geo.config();
      const Trace trace = load_trace(sim_trace, config);
      const BypassPolicy policy = sim_policy.rfind("model:", 0) == 0
                                      ? policy_from_model(load_model_file(sim_policy.substr(6)))
                                      : parse_policy(sim_policy, trace, config);
      const CacheStats stats = simulate(trace, config, policy);
      emit(sim_out, out, [&](std::ostream& o) { write_stats(policy.name(), stats, o); });
    };
  });

  // label
  auto* lab = app.add_subcommand("label", "Label every access by forward reuse distance");
  Geometry lab_geo;
  std::string lab_trace, lab_out;
  std::optional<std::uint64_t> lab_threshold;
  lab->add_option("--trace", lab_trace)->required();
  lab_geo.add_to(lab);
  lab->add_option("--threshold", lab_threshold, "Reuse threshold T (default: capacity in lines)");
  lab->add_option("--out", lab_out, "Raw dataset CSV")->required();
  lab->callback([&] {
    action = [&] {
      const CacheConfig config = lab_geo.config();
      const Trace trace = load_trace(lab_trace, config);
      const auto ds = label_trace(trace, config, lab_threshold.value_or(default_threshold(config)));
      auto o = open_output(lab_out);
      write_dataset(ds, o);
    };
  });

  // balance
  auto* bal = app.add_subcommand("balance", "SMOTE-balance a dataset");
  std::string bal_in, bal_out;
  int bal_k = 5;
  std::uint64_t bal_seed = 0;
  bal->add_option("--in,--data", bal_in)->required();
  bal->add_option("--k", bal_k, "Neighbor count")->capture_default_str();
  bal->add_option("--seed", bal_seed)->required();
  bal->add_option("--out", bal_out)->required();
  bal->callback([&] {
    action = [&] {
      const auto ds = smote_balance(load_dataset(bal_in), bal_k, bal_seed);
      auto o = open_output(bal_out);
      write_dataset(ds, o);
    };
  });

  // featurize
  auto* fea = app.add_subcommand("featurize", "Re-express raw addresses under a feature scheme");
  std::string fea_in, fea_out, fea_scheme;
  fea->add_option("--in,--data", fea_in)->required();
  fea->add_option("--scheme", fea_scheme, "raw | digits | chunks:c")->required();
  fea->add_option("--out", fea_out)->required();
  fea->callback([&] {
    action = [&] {
      const auto ds = featurize(load_dataset(fea_in), FeatureScheme::parse(fea_scheme));
      auto o = open_output(fea_out);
      write_dataset(ds, o);
    };
  });

  // split
  auto* spl = app.add_subcommand("split", "Stratified train/test split");
  std::string spl_in, spl_train, spl_test;
  double spl_frac = 0.2;
  std::uint64_t spl_seed = 0;
  spl->add_option("--in,--data", spl_in)->required();
  spl->add_option("--test-frac", spl_frac)->capture_default_str();
  spl->add_option("--seed", spl_seed)->required();
  spl->add_option("--train-out", spl_train)->required();
  spl->add_option("--test-out", spl_test)->required();
  spl->callback([&] {
    action = [&] {
      const auto [train, test] = train_test_split(load_dataset(spl_in), spl_frac, spl_seed);
      auto a = open_output(spl_train);
      write_dataset(train, a);
      auto b = open_output(spl_test);
      write_dataset(test, b);
    };
  });

  // train
  auto* trn = app.add_subcommand("train", "Train one predictor");
  std::string trn_in, trn_model, trn_params, trn_out;
  std::uint64_t trn_seed = 0;
  trn->add_option("--in,--data", trn_in)->required();
  trn->add_option("--model", trn_model, "tree | knn | logreg | mlp")->required();
  trn->add_option("--params", trn_params, "Comma-separated key=value hyperparameters");
  trn->add_option("--seed", trn_seed)->required();
  trn->add_option("--out", trn_out, "Model file (JSON)")->required();
  trn->callback([&] {
    action = [&] {
      const auto params = parse_model_params(parse_model_kind(trn_model), trn_params, trn_seed);
      const Model model = train_model(load_dataset(trn_in), params);
      if (fs::path(trn_out).has_parent_path()) fs::create_directories(fs::path(trn_out).parent_path());
      save_model(model, trn_out);
    };
  });

  // sweep
  auto* swp = app.add_subcommand("sweep", "Train and score a hyperparameter grid");
  std::string swp_model, swp_grid = "default", swp_data, swp_test, swp_params, swp_out;
  double swp_frac = 0.2;
  std::uint64_t swp_seed = 0;
  bool swp_timing = false;
  swp->add_option("--model", swp_model, "tree-depth | tree-impurity | knn | logreg | mlp")
      ->required();
  swp->add_option("--grid", swp_grid)->capture_default_str();
  swp->add_option("--data", swp_data, "Training data, or the full dataset without --test")
      ->required();
  swp->add_option("--test", swp_test, "Test data");
  swp->add_option("--test-frac", swp_frac, "Split fraction when --test is absent")
      ->capture_default_str();
  swp->add_option("--params", swp_params, "Fixed key=value settings");
  swp->add_option("--seed", swp_seed)->required();
  swp->add_option("--out", swp_out, "Sweep CSV (stdout if omitted)");
  swp->add_flag("--timing", swp_timing, "Record wall time per row in the ms column");
  swp->callback([&] {
    action = [&] {
      if (swp_grid != "default") throw ValidationError("grid", "only 'default' is supported");
      const SweepKind kind = parse_sweep_kind(swp_model);
      LabeledDataset train = load_dataset(swp_data), test;
      if (swp_test.empty()) {
        std::tie(train, test) = train_test_split(train, swp_frac, swp_seed);
      } else {
        test = load_dataset(swp_test);
      }
      const SweepPlan plan = default_plan(kind, swp_seed, parse_fixed(kind, swp_params));
      const SweepResult result = run_sweep(plan, train, test);
      for (const auto& row : result.rows) {
        if (row.failure)
          err << "sweep: " << row.model << ' ' << row.param << '=' << format_number(row.value)
              << " failed: " << *row.failure << '\n';
      }
      emit(swp_out, out, [&](std::ostream& o) { write_sweep(result, o, swp_timing); });
    };
  });

  // eval
  auto* evl = app.add_subcommand("eval", "Score a trained model on a dataset");
  std::string evl_model, evl_data, evl_out;
  evl->add_option("--model", evl_model)->required();
  evl->add_option("--data", evl_data)->required();
  evl->add_option("--out", evl_out, "Metrics CSV (stdout if omitted)");
  evl->callback([&] {
    action = [&] {
      const auto model = load_model_file(evl_model);
      const Metrics m = evaluate(*model, load_dataset(evl_data));
      emit(evl_out, out, [&](std::ostream& o) { write_metrics(m, o); });
    };
  });

  // compare
  auto* cmp = app.add_subcommand("compare", "Miss rates of never/always/random/model/oracle");
  Geometry cmp_geo;
  std::string cmp_trace, cmp_model, cmp_out;
  double cmp_p = 0.3;
  std::uint64_t cmp_seed = 0;
  std::optional<std::uint64_t> cmp_threshold;
  cmp->add_option("--trace", cmp_trace)->required();
  cmp->add_option("--model", cmp_model, "Model file; the model row is omitted without it");
  cmp->add_option("--p-random", cmp_p, "Random-bypass probability")->capture_default_str();
  cmp->add_option("--seed", cmp_seed)->required();
  cmp->add_option("--threshold", cmp_threshold, "Oracle threshold T");
  cmp_geo.add_to(cmp);
  cmp->add_option("--out", cmp_out, "Report CSV (stdout if omitted)");
  cmp->callback([&] {
    action = [&] {
      const CacheConfig config = cmp_geo.config();
      const Trace trace = load_trace(cmp_trace, config);
      const auto model = cmp_model.empty() ? nullptr : load_model_file(cmp_model);
      const auto report = compare_policies(trace, config, model, cmp_p, cmp_seed, cmp_threshold);
      emit(cmp_out, out, [&](std::ostream& o) { write_report(report, o); });
    };
  });

  // report
  auto* rep = app.add_subcommand("report", "Regroup sweep CSVs into per-panel plot data");
  std::vector<std::string> rep_in;
  std::string rep_dir;
  rep->add_option("--in", rep_in, "Sweep CSVs; each file's stem names its source")->required();
  rep->add_option("--out-dir", rep_dir)->required();
  rep->callback([&] {
    action = [&] {
      std::vector<std::pair<std::string, SweepResult>> sources;
      for (const auto& path : rep_in) {
        require_file(path);
        std::ifstream in(path, std::ios::binary);
        sources.emplace_back(fs::path(path).stem().string(), read_sweep(in));
      }
      for (const auto& p : write_panels(sources, rep_dir)) out << p.string() << '\n';
    };
  });

  // run
  auto* run = app.add_subcommand("run", "Replay a manifest");
  std::string run_manifest;
  PipelineOptions run_opts;
  run->add_option("manifest", run_manifest)->required();
  run->add_option("--write-completed", run_opts.write_completed,
                  "Write the manifest back with every output digest filled in");
  int run_status = kExitOk;
  run->callback([&] {
    action = [&] { run_status = run_pipeline(run_manifest, run_opts, out, err); };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    action();
  } catch (const MissingInput& e) {
    err << "error: " << e.what() << '\n';
    return kExitMissingInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  return run_status;
}

}  // namespace bypass::cli
