#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace bypass {

enum class AccessKind : std::uint8_t { Load, Store };

struct MemoryAccess {
  std::uint64_t seq = 0;
  std::uint64_t address = 0;
  AccessKind kind = AccessKind::Load;

  friend bool operator==(const MemoryAccess&, const MemoryAccess&) = default;
};

inline constexpr int kDefaultLineSizeLog2 = 7;  // 128-byte lines
inline constexpr int kMinLineSizeLog2 = 4;
inline constexpr int kMaxLineSizeLog2 = 8;

/// An ordered access stream. Immutable once built; seq runs 0..n-1.
struct Trace {
  std::vector<MemoryAccess> accesses;
  int line_size_log2 = kDefaultLineSizeLog2;
  std::string source;

  std::size_t size() const noexcept { return accesses.size(); }
  bool empty() const noexcept { return accesses.empty(); }

  /// The only address-to-line mapping in the project.
  std::uint64_t line_address(std::size_t i) const {
    return accesses[i].address >> line_size_log2;
  }

  /// `source` is a label only and does not take part in equality.
  friend bool operator==(const Trace& a, const Trace& b) {
    return a.line_size_log2 == b.line_size_log2 && a.accesses == b.accesses;
  }
};

/// Throws IntegrityError if seq has gaps or line_size_log2 is out of range.
void check_trace(const Trace& trace);

enum class WorkloadKind { Streaming, Strided, ZipfHotSet, GatherRandom, RegionLabeledMix };

std::string_view to_string(WorkloadKind kind);
WorkloadKind parse_workload_kind(std::string_view name);

inline constexpr std::uint64_t kDefaultBaseAddress = 1'000'000'000ULL;

/// Kind-specific knobs. Fields irrelevant to a kind are ignored.
struct WorkloadParams {
  int line_size_log2 = kDefaultLineSizeLog2;
  std::uint64_t base_address = kDefaultBaseAddress;
  double store_fraction = 0.0;

  // Strided: cyclic walk over a footprint.
  std::uint64_t stride_bytes = 256;
  std::uint64_t strided_footprint_bytes = 32 * 1024;

  // ZipfHotSet: Zipf-popular lines, optionally interleaved with a stream of
  // never-reused lines placed in a separate address range.
  double zipf_exponent = 0.9;
  std::uint64_t hot_set_lines = 96;
  double stream_fraction = 0.0;

  // GatherRandom: uniform lines over a footprint.
  std::uint64_t gather_footprint_bytes = 1024 * 1024;

  // RegionLabeledMix: `region_count` contiguous regions of `region_bytes`.
  // Per access a region is drawn uniformly; with the region's reuse
  // probability the access touches one of its `hot_lines_per_region` pool
  // lines, otherwise the next never-touched line of the region. Empty
  // `region_reuse` selects the default pattern (see default_region_reuse).
  std::uint32_t region_count = 40;
  std::uint64_t region_bytes = 10'000'000;
  std::uint64_t hot_lines_per_region = 1;
  std::vector<double> region_reuse;
};

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::Streaming;
  std::uint64_t length = 1;
  std::uint64_t seed = 0;
  WorkloadParams params;
};

/// Regions whose index has decimal units digit 0-4 are hot (reuse 0.99),
/// the rest are touched once. With decimal-aligned regions the label then
/// depends on a single decimal digit of the address.
std::vector<double> default_region_reuse(std::uint32_t region_count);

/// Reuse probability of every region after defaults are applied.
std::vector<double> region_reuse_probabilities(const WorkloadParams& params);

/// Index of the region holding `address`, or -1 when outside every region.
long region_of(const WorkloadParams& params, std::uint64_t address);

/// 64 Zipf(0.5) hot lines interleaved 50/50 with a never-reused stream; the
/// workload the bypass comparison is run on.
WorkloadSpec zipf_stream_mix_spec(std::uint64_t length, std::uint64_t seed);

/// Throws ValidationError naming the offending field.
void validate(const WorkloadSpec& spec);

/// Pure function of `spec`: equal WorkloadSpecs give bit-identical traces.
Trace generate_trace(const WorkloadSpec& spec);

// CSV format: header "seq,address,kind", address 0x-prefixed lowercase hex,
// kind L or S. The file carries no geometry; the caller supplies the line size.
void write_trace(const Trace& trace, std::ostream& out);
void write_trace(const Trace& trace, const std::filesystem::path& path);
Trace read_trace(std::istream& in, int line_size_log2 = kDefaultLineSizeLog2,
                 std::string source = {});
Trace read_trace(const std::filesystem::path& path, int line_size_log2 = kDefaultLineSizeLog2);

}  // namespace bypass
