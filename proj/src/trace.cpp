#include "bypass/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "bypass/error.hpp"
#include "bypass/rng.hpp"

namespace bypass {

namespace {

constexpr std::uint64_t kStreamRegionOffset = 1ULL << 32;

std::uint64_t checked_span_end(std::uint64_t base, std::uint64_t span, const char* field) {
  if (span > UINT64_MAX - base) throw ValidationError(field, "address range overflows 64 bits");
  return base + span;
}

}  // namespace

void check_trace(const Trace& trace) {
  if (trace.line_size_log2 < kMinLineSizeLog2 || trace.line_size_log2 > kMaxLineSizeLog2)
    throw IntegrityError("line_size_log2 out of range [4, 8]");
  for (std::size_t i = 0; i < trace.accesses.size(); ++i) {
    if (trace.accesses[i].seq != i)
      throw IntegrityError("seq gap at position " + std::to_string(i) + ": found " +
                           std::to_string(trace.accesses[i].seq));
  }
}

std::string_view to_string(WorkloadKind kind) {
  switch (kind) {
    case WorkloadKind::Streaming: return "streaming";
    case WorkloadKind::Strided: return "strided";
    case WorkloadKind::ZipfHotSet: return "zipf";
    case WorkloadKind::GatherRandom: return "gather";
    case WorkloadKind::RegionLabeledMix: return "region-mix";
  }
  return "?";
}

WorkloadKind parse_workload_kind(std::string_view name) {
  for (auto k : {WorkloadKind::Streaming, WorkloadKind::Strided, WorkloadKind::ZipfHotSet,
                 WorkloadKind::GatherRandom, WorkloadKind::RegionLabeledMix}) {
    if (to_string(k) == name) return k;
  }
  throw ValidationError("kind", "unknown workload kind '" + std::string(name) + "'");
}

std::vector<double> default_region_reuse(std::uint32_t region_count) {
  std::vector<double> probs(region_count);
  for (std::uint32_t r = 0; r < region_count; ++r) probs[r] = (r % 10 < 5) ? 0.99 : 0.0;
  return probs;
}

std::vector<double> region_reuse_probabilities(const WorkloadParams& params) {
  return params.region_reuse.empty() ? default_region_reuse(params.region_count)
                                     : params.region_reuse;
}

long region_of(const WorkloadParams& params, std::uint64_t address) {
  if (address < params.base_address) return -1;
  const std::uint64_t r = (address - params.base_address) / params.region_bytes;
  return r < params.region_count ? static_cast<long>(r) : -1;
}

WorkloadSpec zipf_stream_mix_spec(std::uint64_t length, std::uint64_t seed) {
  WorkloadSpec spec;
  spec.kind = WorkloadKind::ZipfHotSet;
  spec.length = length;
  spec.seed = seed;
  spec.params.stream_fraction = 0.5;
  spec.params.hot_set_lines = 64;
  spec.params.zipf_exponent = 0.5;
  return spec;
}

void validate(const WorkloadSpec& spec) {
  const auto& p = spec.params;
  if (spec.length < 1) throw ValidationError("length", "must be >= 1");
  if (p.line_size_log2 < kMinLineSizeLog2 || p.line_size_log2 > kMaxLineSizeLog2)
    throw ValidationError("line_size_log2", "must be in [4, 8]");
  if (!(p.store_fraction >= 0.0 && p.store_fraction <= 1.0))
    throw ValidationError("store_fraction", "must be in [0, 1]");
  const std::uint64_t line = 1ULL << p.line_size_log2;
  switch (spec.kind) {
    case WorkloadKind::Streaming:
      if (spec.length > (UINT64_MAX - p.base_address) / line)
        throw ValidationError("length", "stream runs past the 64-bit address space");
      break;
    case WorkloadKind::Strided:
      if (p.stride_bytes == 0) throw ValidationError("stride_bytes", "must be > 0");
      if (p.strided_footprint_bytes < line)
        throw ValidationError("strided_footprint_bytes", "must hold at least one line");
      checked_span_end(p.base_address, p.strided_footprint_bytes, "strided_footprint_bytes");
      break;
    case WorkloadKind::ZipfHotSet:
      if (!(p.zipf_exponent > 0.0) || !std::isfinite(p.zipf_exponent))
        throw ValidationError("zipf_exponent", "must be > 0");
      if (p.hot_set_lines < 1) throw ValidationError("hot_set_lines", "must be >= 1");
      if (!(p.stream_fraction >= 0.0 && p.stream_fraction <= 1.0))
        throw ValidationError("stream_fraction", "must be in [0, 1]");
      if (p.hot_set_lines > kStreamRegionOffset / line)
        throw ValidationError("hot_set_lines", "hot set overlaps the stream range");
      checked_span_end(p.base_address, kStreamRegionOffset + spec.length * line,
                       "base_address");
      break;
    case WorkloadKind::GatherRandom:
      if (p.gather_footprint_bytes < line)
        throw ValidationError("gather_footprint_bytes", "must hold at least one line");
      checked_span_end(p.base_address, p.gather_footprint_bytes, "gather_footprint_bytes");
      break;
    case WorkloadKind::RegionLabeledMix: {
      if (p.region_count < 2) throw ValidationError("region_count", "must be >= 2");
      if (p.hot_lines_per_region < 1)
        throw ValidationError("hot_lines_per_region", "must be >= 1");
      if (p.region_bytes % line != 0)
        throw ValidationError("region_bytes", "must be a multiple of the line size");
      if (p.region_bytes / line <= p.hot_lines_per_region)
        throw ValidationError("region_bytes", "region must hold more lines than its hot pool");
      if (p.base_address % line != 0)
        throw ValidationError("base_address", "must be line aligned");
      if (p.region_bytes > UINT64_MAX / p.region_count)
        throw ValidationError("region_bytes", "regions overflow 64 bits");
      checked_span_end(p.base_address, p.region_bytes * p.region_count, "region_count");
      if (!p.region_reuse.empty() && p.region_reuse.size() != p.region_count)
        throw ValidationError("region_reuse", "needs exactly region_count entries");
      for (double q : p.region_reuse) {
        if (!(q >= 0.0 && q <= 1.0))
          throw ValidationError("region_reuse", "probabilities must be in [0, 1]");
      }
      break;
    }
  }
}

Trace generate_trace(const WorkloadSpec& spec) {
  validate(spec);
  const auto& p = spec.params;
  const std::uint64_t line = 1ULL << p.line_size_log2;

  Trace trace;
  trace.line_size_log2 = p.line_size_log2;
  trace.source = std::string(to_string(spec.kind));
  trace.accesses.resize(spec.length);

  Rng rng(spec.seed);
  Rng kind_rng(splitmix64(spec.seed ^ 0x5354524b494e44ULL));

  std::vector<double> zipf_cdf;
  if (spec.kind == WorkloadKind::ZipfHotSet) {
    zipf_cdf.resize(p.hot_set_lines);
    double acc = 0.0;
    for (std::uint64_t r = 0; r < p.hot_set_lines; ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), p.zipf_exponent);
      zipf_cdf[r] = acc;
    }
    for (auto& c : zipf_cdf) c /= acc;
  }

  std::vector<double> reuse;
  std::vector<std::uint64_t> cursor;
  std::uint64_t fresh_lines = 0;
  if (spec.kind == WorkloadKind::RegionLabeledMix) {
    reuse = region_reuse_probabilities(p);
    cursor.assign(p.region_count, 0);
    fresh_lines = p.region_bytes / line - p.hot_lines_per_region;
  }

  std::uint64_t stream_next = 0;
  for (std::uint64_t i = 0; i < spec.length; ++i) {
    std::uint64_t addr = 0;
    switch (spec.kind) {
      case WorkloadKind::Streaming:
        addr = p.base_address + i * line;
        break;
      case WorkloadKind::Strided: {
        const auto off = static_cast<unsigned __int128>(i) * p.stride_bytes %
                         p.strided_footprint_bytes;
        addr = p.base_address + static_cast<std::uint64_t>(off);
        break;
      }
      case WorkloadKind::ZipfHotSet:
        if (p.stream_fraction > 0.0 && rng.uniform() < p.stream_fraction) {
          addr = p.base_address + kStreamRegionOffset + stream_next++ * line;
        } else {
          const double u = rng.uniform();
          const auto it = std::upper_bound(zipf_cdf.begin(), zipf_cdf.end(), u);
          const auto rank = static_cast<std::uint64_t>(
              std::min<std::ptrdiff_t>(it - zipf_cdf.begin(), zipf_cdf.size() - 1));
          addr = p.base_address + rank * line;
        }
        break;
      case WorkloadKind::GatherRandom:
        addr = p.base_address + rng.below(p.gather_footprint_bytes / line) * line;
        break;
      case WorkloadKind::RegionLabeledMix: {
        const auto r = static_cast<std::uint32_t>(rng.below(p.region_count));
        const std::uint64_t start = p.base_address + r * p.region_bytes;
        if (rng.uniform() < reuse[r]) {
          addr = start + rng.below(p.hot_lines_per_region) * line;
        } else {
          addr = start + (p.hot_lines_per_region + cursor[r]) * line;
          cursor[r] = (cursor[r] + 1) % fresh_lines;
        }
        break;
      }
    }
    const bool store = p.store_fraction > 0.0 && kind_rng.uniform() < p.store_fraction;
    trace.accesses[i] = MemoryAccess{i, addr, store ? AccessKind::Store : AccessKind::Load};
  }
  return trace;
}

void write_trace(const Trace& trace, std::ostream& out) {
  out << "seq,address,kind\n";
  char buf[32];
  for (const auto& a : trace.accesses) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, a.address, 16);
    out << a.seq << ",0x" << std::string_view(buf, end - buf) << ','
        << (a.kind == AccessKind::Load ? 'L' : 'S') << '\n';
  }
}

void write_trace(const Trace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_trace(trace, out);
  if (!out) throw Error("write failed: " + path.string());
}

namespace {

template <class T>
bool parse_uint(std::string_view text, T& value, int base = 10) {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, base);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

Trace read_trace(std::istream& in, int line_size_log2, std::string source) {
  Trace trace;
  trace.line_size_log2 = line_size_log2;
  trace.source = std::move(source);
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "seq,address,kind") throw ParseError(1, "expected header seq,address,kind");

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string_view row(line);
    const auto c1 = row.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : row.find(',', c1 + 1);
    if (c2 == std::string_view::npos || row.find(',', c2 + 1) != std::string_view::npos)
      throw ParseError(lineno, "expected 3 fields");
    MemoryAccess a;
    if (!parse_uint(row.substr(0, c1), a.seq)) throw ParseError(lineno, "bad seq");
    auto addr = row.substr(c1 + 1, c2 - c1 - 1);
    if (addr.size() < 3 || addr[0] != '0' || (addr[1] != 'x' && addr[1] != 'X') ||
        !parse_uint(addr.substr(2), a.address, 16))
      throw ParseError(lineno, "bad address '" + std::string(addr) + "'");
    const auto kind = row.substr(c2 + 1);
    if (kind == "L") {
      a.kind = AccessKind::Load;
    } else if (kind == "S") {
      a.kind = AccessKind::Store;
    } else {
      throw ParseError(lineno, "bad kind '" + std::string(kind) + "'");
    }
    trace.accesses.push_back(a);
  }
  check_trace(trace);
  return trace;
}

Trace read_trace(const std::filesystem::path& path, int line_size_log2) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_trace(in, line_size_log2, path.stem().string());
}

}  // namespace bypass
