#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bypass/trace.hpp"

namespace bypass {

/// Set-associative geometry. Default: 32 sets x 4 ways x 128 B = 16 KB.
struct CacheConfig {
  std::uint32_t sets = 32;
  std::uint32_t ways = 4;
  int line_size_log2 = kDefaultLineSizeLog2;

  std::uint64_t capacity_lines() const { return std::uint64_t{sets} * ways; }
  std::uint64_t capacity_bytes() const { return capacity_lines() << line_size_log2; }
  std::uint32_t set_index(std::uint64_t line_address) const {
    return static_cast<std::uint32_t>(line_address & (sets - 1));
  }
};

/// Throws ConfigError unless sets is a power of two, ways >= 1 and the
/// line size is within [16, 256] bytes.
void validate(const CacheConfig& config);

struct CacheStats {
  std::uint64_t accesses = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t bypasses = 0;
  std::uint64_t evictions = 0;

  double miss_rate() const {
    return accesses == 0 ? 0.0 : static_cast<double>(misses) / static_cast<double>(accesses);
  }

  friend bool operator==(const CacheStats&, const CacheStats&) = default;
};

enum class Decision { Insert, Bypass };

struct SetOccupancy {
  std::uint32_t set_index = 0;
  std::uint32_t valid_lines = 0;
  std::uint32_t ways = 0;
};

/// Next-use distance in distinct lines; kNoReuse when the line never recurs.
inline constexpr std::uint64_t kNoReuse = UINT64_MAX;
using ReuseDistances = std::vector<std::uint64_t>;

/// Bypass iff the line never recurs or recurs beyond `threshold` distinct lines.
inline bool exceeds_threshold(std::uint64_t distance, std::uint64_t threshold) {
  return distance == kNoReuse || distance > threshold;
}

/// Capacity in lines: the default oracle and labeling threshold.
inline std::uint64_t default_threshold(const CacheConfig& config) { return config.capacity_lines(); }

/// Address-based predictor plugged into a policy. Implementations must be
/// immutable and safe to call concurrently.
class LineClassifier {
 public:
  virtual ~LineClassifier() = default;
  virtual bool should_bypass(std::uint64_t line_address, int line_size_log2) const = 0;
};

/// Immutable bypass decision rule, consulted on misses only.
class BypassPolicy {
 public:
  struct Never {};
  struct Always {};
  struct Random {
    double probability = 0.0;
    std::uint64_t seed = 0;
  };
  struct OracleThreshold {
    std::uint64_t threshold = 0;
    std::shared_ptr<const ReuseDistances> distances;  // indexed by seq
  };
  struct Model {
    std::shared_ptr<const LineClassifier> classifier;
  };
  using Variant = std::variant<Never, Always, Random, OracleThreshold, Model>;

  static BypassPolicy never() { return BypassPolicy(Never{}); }
  static BypassPolicy always() { return BypassPolicy(Always{}); }
  static BypassPolicy random(double probability, std::uint64_t seed);
  static BypassPolicy oracle(std::uint64_t threshold, std::shared_ptr<const ReuseDistances> d);
  static BypassPolicy model(std::shared_ptr<const LineClassifier> classifier);

  Decision decide(const MemoryAccess& access, std::uint64_t line_address,
                  const SetOccupancy& occupancy, int line_size_log2) const;

  /// Short tag used in report rows: never, always, random, oracle, model.
  std::string_view name() const;
  const Variant& variant() const { return policy_; }

 private:
  explicit BypassPolicy(Variant v) : policy_(std::move(v)) {}
  Variant policy_;
};

/// Parses never | always | random:p:seed | oracle[:T]. The oracle variant
/// needs the trace it will run on; `model:` specs are resolved by the caller.
BypassPolicy parse_policy(std::string_view spec, const Trace& trace, const CacheConfig& config);

struct MissDecision {
  std::uint64_t seq = 0;
  Decision decision = Decision::Insert;
};

/// LRU set-associative simulation with a bypass hook. When `log` is given,
/// every miss's decision is appended to it in seq order.
CacheStats simulate(const Trace& trace, const CacheConfig& config, const BypassPolicy& policy,
                    std::vector<MissDecision>* log = nullptr);

/// Per access: number of distinct lines touched before the same line is
/// touched again, or kNoReuse. O(n log n).
ReuseDistances forward_reuse_distances(const Trace& trace);

/// Bypass on a miss iff the incoming access's forward distance exceeds the
/// threshold (default: capacity in lines).
BypassPolicy oracle_bypass_policy(const Trace& trace, const CacheConfig& config,
                                  std::optional<std::uint64_t> threshold = std::nullopt);

}  // namespace bypass
