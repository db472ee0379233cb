#include "bypass/cachesim.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "bypass/error.hpp"
#include "bypass/rng.hpp"

namespace bypass {

void validate(const CacheConfig& config) {
  if (config.sets == 0 || !std::has_single_bit(config.sets))
    throw ConfigError("sets must be a positive power of two");
  if (config.ways == 0) throw ConfigError("ways must be >= 1");
  if (config.line_size_log2 < kMinLineSizeLog2 || config.line_size_log2 > kMaxLineSizeLog2)
    throw ConfigError("line size must be 16..256 bytes");
}

BypassPolicy BypassPolicy::random(double probability, std::uint64_t seed) {
  if (!(probability >= 0.0 && probability <= 1.0))
    throw ValidationError("p", "bypass probability must be in [0, 1]");
  return BypassPolicy(Random{probability, seed});
}

BypassPolicy BypassPolicy::oracle(std::uint64_t threshold,
                                  std::shared_ptr<const ReuseDistances> distances) {
  if (threshold < 1) throw ValidationError("threshold", "must be >= 1");
  if (!distances) throw ValidationError("distances", "oracle needs reuse distances");
  return BypassPolicy(OracleThreshold{threshold, std::move(distances)});
}

BypassPolicy BypassPolicy::model(std::shared_ptr<const LineClassifier> classifier) {
  if (!classifier) throw ValidationError("model", "null classifier");
  return BypassPolicy(Model{std::move(classifier)});
}

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

Decision BypassPolicy::decide(const MemoryAccess& access, std::uint64_t line_address,
                              const SetOccupancy& /*occupancy*/, int line_size_log2) const {
  const bool bypass = std::visit(
      Overloaded{
          [](const Never&) { return false; },
          [](const Always&) { return true; },
          [&](const Random& r) {
            // Keyed on seq, so the decision for an access does not depend on
            // how many misses came before it.
            return unit_interval(splitmix64(r.seed ^ splitmix64(access.seq))) < r.probability;
          },
          [&](const OracleThreshold& o) {
            if (access.seq >= o.distances->size())
              throw ConfigError("oracle policy was built for a shorter trace");
            return exceeds_threshold((*o.distances)[access.seq], o.threshold);
          },
          [&](const Model& m) { return m.classifier->should_bypass(line_address, line_size_log2); },
      },
      policy_);
  return bypass ? Decision::Bypass : Decision::Insert;
}

std::string_view BypassPolicy::name() const {
  switch (policy_.index()) {
    case 0: return "never";
    case 1: return "always";
    case 2: return "random";
    case 3: return "oracle";
    default: return "model";
  }
}

BypassPolicy parse_policy(std::string_view spec, const Trace& trace, const CacheConfig& config) {
  auto bad = [&] { return ValidationError("policy", "cannot parse '" + std::string(spec) + "'"); };
  auto fields = [&] {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
      const auto pos = spec.find(':', start);
      out.push_back(spec.substr(start, pos - start));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
    return out;
  }();
  const auto& head = fields[0];
  if (head == "never" && fields.size() == 1) return BypassPolicy::never();
  if (head == "always" && fields.size() == 1) return BypassPolicy::always();
  if (head == "random" && fields.size() == 3) {
    double p = 0.0;
    std::uint64_t seed = 0;
    auto [p1, e1] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), p);
    auto [p2, e2] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), seed);
    if (e1 != std::errc() || e2 != std::errc() || p1 != fields[1].data() + fields[1].size() ||
        p2 != fields[2].data() + fields[2].size())
      throw bad();
    return BypassPolicy::random(p, seed);
  }
  if (head == "oracle" && fields.size() <= 2) {
    std::optional<std::uint64_t> t;
    if (fields.size() == 2) {
      std::uint64_t v = 0;
      auto [ptr, ec] =
          std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), v);
      if (ec != std::errc() || ptr != fields[1].data() + fields[1].size()) throw bad();
      t = v;
    }
    return oracle_bypass_policy(trace, config, t);
  }
  throw bad();
}

CacheStats simulate(const Trace& trace, const CacheConfig& config, const BypassPolicy& policy,
                    std::vector<MissDecision>* log) {
  validate(config);
  if (trace.line_size_log2 != config.line_size_log2)
    throw ConfigError("trace line size (2^" + std::to_string(trace.line_size_log2) +
                      ") does not match cache line size (2^" +
                      std::to_string(config.line_size_log2) + ")");

  const std::size_t ways = config.ways;
  std::vector<std::uint64_t> tags(std::size_t{config.sets} * ways, 0);
  // 0 marks an invalid way; otherwise the time of last touch.
  std::vector<std::uint64_t> stamps(tags.size(), 0);
  std::vector<std::uint32_t> valid(config.sets, 0);
  std::uint64_t clock = 0;

  CacheStats stats;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const MemoryAccess& access = trace.accesses[i];
    const std::uint64_t line = trace.line_address(i);
    const std::uint32_t set = config.set_index(line);
    const std::size_t base = std::size_t{set} * ways;
    ++stats.accesses;
    ++clock;

    std::size_t hit_way = ways;
    for (std::size_t w = 0; w < ways; ++w) {
      if (stamps[base + w] != 0 && tags[base + w] == line) {
        hit_way = w;
        break;
      }
    }
    if (hit_way != ways) {
      ++stats.hits;
      stamps[base + hit_way] = clock;
      continue;
    }

    ++stats.misses;
    const Decision d =
        policy.decide(access, line, SetOccupancy{set, valid[set], config.ways}, trace.line_size_log2);
    if (log) log->push_back({access.seq, d});
    if (d == Decision::Bypass) {
      ++stats.bypasses;
      continue;
    }
    std::size_t victim = 0;
    std::uint64_t oldest = std::numeric_limits<std::uint64_t>::max();
    for (std::size_t w = 0; w < ways; ++w) {
      if (stamps[base + w] < oldest) {
        oldest = stamps[base + w];
        victim = w;
      }
    }
    if (oldest != 0) {
      ++stats.evictions;
    } else {
      ++valid[set];
    }
    tags[base + victim] = line;
    stamps[base + victim] = clock;
  }
  return stats;
}

BypassPolicy oracle_bypass_policy(const Trace& trace, const CacheConfig& config,
                                  std::optional<std::uint64_t> threshold) {
  auto distances = std::make_shared<const ReuseDistances>(forward_reuse_distances(trace));
  return BypassPolicy::oracle(threshold.value_or(default_threshold(config)), std::move(distances));
}

}  // namespace bypass
