#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bypass/cachesim.hpp"
#include "bypass/exec.hpp"
#include "bypass/trace.hpp"

namespace bypass {

enum class Label : std::uint8_t { Cache = 0, Bypass = 1 };

inline int to_int(Label l) { return static_cast<int>(l); }

struct LabeledSample {
  std::vector<double> features;
  Label label = Label::Cache;
  std::optional<std::uint64_t> origin_seq;
  // Exact source address, kept so a raw dataset can be re-featurized
  // without going through a double.
  std::optional<std::uint64_t> address;

  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

/// How an address becomes a feature vector.
///   raw        one feature, the address as a real number
///   digits     20 decimal digits, least significant first, zero padded
///   chunks:c   8/c little-endian chunks of c bytes, least significant first
class FeatureScheme {
 public:
  enum class Kind { RawAddress, DecimalDigits, ByteChunks };

  static FeatureScheme raw() { return FeatureScheme(Kind::RawAddress, 0); }
  static FeatureScheme digits() { return FeatureScheme(Kind::DecimalDigits, 0); }
  static FeatureScheme chunks(int chunk_bytes);
  static FeatureScheme parse(std::string_view text);
  /// Inverse of width(): every scheme has a distinct feature count.
  static FeatureScheme for_width(std::size_t width);

  Kind kind() const { return kind_; }
  int chunk_bytes() const { return chunk_bytes_; }
  std::size_t width() const;
  std::string to_string() const;
  std::vector<double> featurize(std::uint64_t address) const;

  friend bool operator==(const FeatureScheme&, const FeatureScheme&) = default;

 private:
  FeatureScheme(Kind k, int c) : kind_(k), chunk_bytes_(c) {}
  Kind kind_ = Kind::RawAddress;
  int chunk_bytes_ = 0;
};

inline constexpr std::size_t kDecimalDigitsWidth = 20;

std::array<std::uint8_t, kDecimalDigitsWidth> split_digits(std::uint64_t address);
std::vector<std::uint64_t> split_chunks(std::uint64_t address, int chunk_bytes);

struct ClassCounts {
  std::size_t cache = 0;
  std::size_t bypass = 0;

  std::size_t total() const { return cache + bypass; }
  std::size_t of(Label l) const { return l == Label::Cache ? cache : bypass; }
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

struct LabeledDataset {
  std::vector<LabeledSample> samples;
  FeatureScheme scheme = FeatureScheme::raw();

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t width() const { return scheme.width(); }
  ClassCounts class_counts() const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

/// One raw-address sample per access, labeled Bypass iff the access's
/// forward reuse distance is infinite or exceeds `threshold`.
LabeledDataset label_trace(const Trace& trace, const CacheConfig& config, std::uint64_t threshold);

/// Re-featurizes a raw dataset (every sample must carry its address).
LabeledDataset featurize(const LabeledDataset& raw, const FeatureScheme& scheme,
                         Exec exec = Exec::Parallel);

/// SMOTE oversampling of the minority class up to exact balance. Synthetic
/// samples are appended after the untouched originals. When `parents` is
/// given it receives, per synthetic sample, the dataset indices of the base
/// sample and the neighbor it was interpolated towards (equal when the
/// minority has a single member).
LabeledDataset smote_balance(const LabeledDataset& dataset, int k, std::uint64_t seed,
                             Exec exec = Exec::Parallel,
                             std::vector<std::pair<std::size_t, std::size_t>>* parents = nullptr);

/// Stratified split; both halves keep the input order.
std::pair<LabeledDataset, LabeledDataset> train_test_split(const LabeledDataset& dataset,
                                                           double test_fraction,
                                                           std::uint64_t seed);

// CSV: header f0,...,f{n-1},label; label 0 (cache) or 1 (bypass). Raw
// datasets write f0 as the exact integer address.
void write_dataset(const LabeledDataset& dataset, std::ostream& out);
void write_dataset(const LabeledDataset& dataset, const std::filesystem::path& path);
/// The scheme is inferred from the column count unless given.
LabeledDataset read_dataset(std::istream& in, std::optional<FeatureScheme> scheme = std::nullopt);
LabeledDataset read_dataset(const std::filesystem::path& path,
                            std::optional<FeatureScheme> scheme = std::nullopt);

/// Shortest round-trip decimal text, independent of the global locale.
std::string format_number(double value);

}  // namespace bypass
