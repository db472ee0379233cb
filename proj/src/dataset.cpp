#include "bypass/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "bypass/error.hpp"
#include "bypass/rng.hpp"

namespace bypass {

FeatureScheme FeatureScheme::chunks(int chunk_bytes) {
  if (chunk_bytes != 1 && chunk_bytes != 2 && chunk_bytes != 4)
    throw ValidationError("chunk_bytes", "must divide 8 (1, 2 or 4)");
  return FeatureScheme(Kind::ByteChunks, chunk_bytes);
}

FeatureScheme FeatureScheme::parse(std::string_view text) {
  if (text == "raw") return raw();
  if (text == "digits") return digits();
  if (text.starts_with("chunks:")) {
    int c = 0;
    const auto arg = text.substr(7);
    auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), c);
    if (ec == std::errc() && ptr == arg.data() + arg.size()) return chunks(c);
  }
  throw ValidationError("scheme", "expected raw, digits or chunks:c, got '" + std::string(text) +
                                      "'");
}

FeatureScheme FeatureScheme::for_width(std::size_t width) {
  switch (width) {
    case 1: return raw();
    case 2: return chunks(4);
    case 4: return chunks(2);
    case 8: return chunks(1);
    case kDecimalDigitsWidth: return digits();
    default:
      throw ValidationError("scheme", "no feature scheme has " + std::to_string(width) +
                                          " features");
  }
}

std::size_t FeatureScheme::width() const {
  switch (kind_) {
    case Kind::RawAddress: return 1;
    case Kind::DecimalDigits: return kDecimalDigitsWidth;
    case Kind::ByteChunks: return static_cast<std::size_t>(8 / chunk_bytes_);
  }
  return 0;
}

std::string FeatureScheme::to_string() const {
  switch (kind_) {
    case Kind::RawAddress: return "raw";
    case Kind::DecimalDigits: return "digits";
    case Kind::ByteChunks: return "chunks:" + std::to_string(chunk_bytes_);
  }
  return "?";
}

std::vector<double> FeatureScheme::featurize(std::uint64_t address) const {
  switch (kind_) {
    case Kind::RawAddress: return {static_cast<double>(address)};
    case Kind::DecimalDigits: {
      const auto d = split_digits(address);
      return std::vector<double>(d.begin(), d.end());
    }
    case Kind::ByteChunks: {
      const auto c = split_chunks(address, chunk_bytes_);
      std::vector<double> out(c.size());
      std::transform(c.begin(), c.end(), out.begin(),
                     [](std::uint64_t v) { return static_cast<double>(v); });
      return out;
    }
  }
  return {};
}

std::array<std::uint8_t, kDecimalDigitsWidth> split_digits(std::uint64_t address) {
  std::array<std::uint8_t, kDecimalDigitsWidth> digits{};
  for (std::size_t i = 0; address != 0; ++i) {
    digits[i] = static_cast<std::uint8_t>(address % 10);
    address /= 10;
  }
  return digits;
}

std::vector<std::uint64_t> split_chunks(std::uint64_t address, int chunk_bytes) {
  if (chunk_bytes <= 0 || chunk_bytes > 8 || 8 % chunk_bytes != 0)
    throw ValidationError("chunk_bytes", "must divide 8");
  const int bits = 8 * chunk_bytes;
  const std::uint64_t mask = bits == 64 ? UINT64_MAX : (1ULL << bits) - 1;
  std::vector<std::uint64_t> out(static_cast<std::size_t>(8 / chunk_bytes));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = bits * i >= 64 ? 0 : (address >> (bits * i)) & mask;
  }
  return out;
}

ClassCounts LabeledDataset::class_counts() const {
  ClassCounts c;
  for (const auto& s : samples) (s.label == Label::Cache ? c.cache : c.bypass)++;
  return c;
}

LabeledDataset label_trace(const Trace& trace, const CacheConfig& config, std::uint64_t threshold) {
  if (threshold < 1) throw ValidationError("threshold", "must be >= 1");
  if (trace.empty()) throw EmptyDatasetError("cannot label an empty trace");
  validate(config);
  if (trace.line_size_log2 != config.line_size_log2)
    throw ConfigError("trace and cache line sizes differ");
  const ReuseDistances dist = forward_reuse_distances(trace);
  LabeledDataset out;
  out.scheme = FeatureScheme::raw();
  out.samples.resize(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& a = trace.accesses[i];
    out.samples[i] = LabeledSample{{static_cast<double>(a.address)},
                                   exceeds_threshold(dist[i], threshold) ? Label::Bypass
                                                                         : Label::Cache,
                                   a.seq,
                                   a.address};
  }
  return out;
}

LabeledDataset featurize(const LabeledDataset& raw, const FeatureScheme& scheme, Exec exec) {
  for (const auto& s : raw.samples) {
    if (!s.address)
      throw ValidationError("dataset", "featurize needs a raw-address dataset");
  }
  LabeledDataset out;
  out.scheme = scheme;
  out.samples.resize(raw.size());
  const auto n = static_cast<std::ptrdiff_t>(raw.size());
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& s = raw.samples[i];
    out.samples[i] = LabeledSample{scheme.featurize(*s.address), s.label, s.origin_seq, s.address};
  }
  return out;
}

std::pair<LabeledDataset, LabeledDataset> train_test_split(const LabeledDataset& dataset,
                                                           double test_fraction,
                                                           std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ValidationError("test_fraction", "must be in (0, 1)");
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    by_class[to_int(dataset.samples[i].label)].push_back(i);
  for (int c = 0; c < 2; ++c) {
    if (by_class[c].size() < 2)
      throw StratificationError("class " + std::to_string(c) + " has " +
                                std::to_string(by_class[c].size()) +
                                " samples; stratification needs at least 2");
  }

  // Largest-remainder apportionment keeps the total exact and each class
  // within one sample of its proportional share.
  const auto total_test =
      static_cast<std::size_t>(std::llround(static_cast<double>(dataset.size()) * test_fraction));
  std::array<std::size_t, 2> take{};
  std::array<double, 2> remainder{};
  std::size_t assigned = 0;
  for (int c = 0; c < 2; ++c) {
    const double exact = static_cast<double>(by_class[c].size()) * test_fraction;
    take[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - std::floor(exact);
    assigned += take[c];
  }
  for (std::size_t left = total_test > assigned ? total_test - assigned : 0; left > 0; --left) {
    const int c = remainder[1] > remainder[0] ? 1 : 0;
    ++take[c];
    remainder[c] = -1.0;
  }

  Rng rng(seed);
  std::vector<bool> in_test(dataset.size(), false);
  for (int c = 0; c < 2; ++c) {
    auto idx = by_class[c];
    rng.shuffle(idx.begin(), idx.end());
    for (std::size_t j = 0; j < take[c]; ++j) in_test[idx[j]] = true;
  }
  LabeledDataset train, test;
  train.scheme = test.scheme = dataset.scheme;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    (in_test[i] ? test : train).samples.push_back(dataset.samples[i]);
  return {std::move(train), std::move(test)};
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

void write_dataset(const LabeledDataset& dataset, std::ostream& out) {
  const std::size_t w = dataset.width();
  for (std::size_t j = 0; j < w; ++j) out << 'f' << j << ',';
  out << "label\n";
  const bool raw = dataset.scheme.kind() == FeatureScheme::Kind::RawAddress;
  for (const auto& s : dataset.samples) {
    if (s.features.size() != w) throw DimensionError(w, s.features.size());
    if (raw && s.address) {
      out << *s.address << ',';
    } else {
      for (double v : s.features) out << format_number(v) << ',';
    }
    out << to_int(s.label) << '\n';
  }
}

void write_dataset(const LabeledDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_dataset(dataset, out);
  if (!out) throw Error("write failed: " + path.string());
}

namespace {

std::vector<std::string_view> split_commas(std::string_view row) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = row.find(',', start);
    out.push_back(row.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

LabeledDataset read_dataset(std::istream& in, std::optional<FeatureScheme> scheme) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  if (header.size() < 2 || header.back() != "label") throw ParseError(1, "header must end in label");
  const std::size_t width = header.size() - 1;
  for (std::size_t j = 0; j < width; ++j) {
    if (header[j] != "f" + std::to_string(j)) throw ParseError(1, "expected column f" + std::to_string(j));
  }
  LabeledDataset ds;
  ds.scheme = scheme ? *scheme : FeatureScheme::for_width(width);
  if (ds.scheme.width() != width) throw DimensionError(ds.scheme.width(), width);
  const bool raw = ds.scheme.kind() == FeatureScheme::Kind::RawAddress;

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != width + 1) throw ParseError(lineno, "expected " + std::to_string(width + 1) + " fields");
    LabeledSample s;
    s.features.resize(width);
    for (std::size_t j = 0; j < width; ++j) {
      const auto f = fields[j];
      if (raw) {
        std::uint64_t addr = 0;
        auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), addr);
        if (ec == std::errc() && p == f.data() + f.size()) {
          s.address = addr;
          s.features[j] = static_cast<double>(addr);
          continue;
        }
      }
      double v = 0.0;
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || p != f.data() + f.size() || !std::isfinite(v))
        throw ParseError(lineno, "bad feature value '" + std::string(f) + "'");
      s.features[j] = v;
    }
    if (fields.back() == "0") {
      s.label = Label::Cache;
    } else if (fields.back() == "1") {
      s.label = Label::Bypass;
    } else {
      throw ParseError(lineno, "label must be 0 or 1");
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

LabeledDataset read_dataset(const std::filesystem::path& path, std::optional<FeatureScheme> scheme) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_dataset(in, scheme);
}

}  // namespace bypass
