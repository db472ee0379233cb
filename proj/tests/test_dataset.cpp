#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "bypass/cachesim.hpp"
#include "bypass/dataset.hpp"
#include "bypass/error.hpp"
#include "bypass/trace.hpp"
#include "oracles.hpp"

using namespace bypass;

namespace {

LabeledDataset make_dataset(std::size_t n_cache, std::size_t n_bypass, std::size_t dim,
                            std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  LabeledDataset ds;
  ds.scheme = FeatureScheme::for_width(dim);
  for (std::size_t i = 0; i < n_cache + n_bypass; ++i) {
    LabeledSample s;
    for (std::size_t j = 0; j < dim; ++j) s.features.push_back(std::round(u(gen) * 100) / 100);
    s.label = i < n_cache ? Label::Cache : Label::Bypass;
    ds.samples.push_back(s);
  }
  std::shuffle(ds.samples.begin(), ds.samples.end(), gen);
  return ds;
}

LabeledDataset region_dataset(std::uint64_t length, std::uint64_t seed) {
  WorkloadSpec spec;
  spec.kind = WorkloadKind::RegionLabeledMix;
  spec.length = length;
  spec.seed = seed;
  const CacheConfig c;
  return label_trace(generate_trace(spec), c, default_threshold(c));
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("split_digits examples") {
  const auto d = split_digits(1234);
  CHECK(d[0] == 4);
  CHECK(d[1] == 3);
  CHECK(d[2] == 2);
  CHECK(d[3] == 1);
  for (std::size_t i = 4; i < d.size(); ++i) CHECK(d[i] == 0);
  for (auto v : split_digits(0)) CHECK(v == 0);
  const std::array<std::uint8_t, 20> max{5, 1, 6, 1, 5, 5, 9, 0, 7, 3, 7, 0, 4, 4, 7, 6, 4, 4, 8, 1};
  CHECK(split_digits(UINT64_MAX) == max);
}

TEST_CASE("split_chunks examples") {
  CHECK(split_chunks(0x1122334455667788ULL, 4) == std::vector<std::uint64_t>{0x55667788, 0x11223344});
  CHECK(split_chunks(0, 1) == std::vector<std::uint64_t>(8, 0));
  CHECK(split_chunks(0xFF00, 1) == std::vector<std::uint64_t>{0x00, 0xFF, 0, 0, 0, 0, 0, 0});
  CHECK_THROWS_AS(split_chunks(1, 3), ValidationError);
  CHECK_THROWS_AS(FeatureScheme::parse("chunks:5"), ValidationError);
}

TEST_CASE("digit and chunk splits reassemble the address") {
  std::mt19937_64 gen(2024);
  for (int i = 0; i < 10000; ++i) {
    const std::uint64_t a = gen() >> (gen() % 64);
    const auto d = split_digits(a);
    unsigned __int128 acc = 0, pow = 1;
    for (auto v : d) {
      REQUIRE(v <= 9);
      acc += pow * v;
      pow *= 10;
    }
    REQUIRE(acc == a);
    for (int c : {1, 2, 4}) {
      const auto ch = split_chunks(a, c);
      REQUIRE(ch.size() == std::size_t(8 / c));
      std::uint64_t back = 0;
      for (std::size_t k = 0; k < ch.size(); ++k) {
        REQUIRE(ch[k] < (c == 8 ? 0 : (1ULL << (8 * c))));
        back |= ch[k] << (8 * c * k);
      }
      REQUIRE(back == a);
    }
  }
}

TEST_CASE("scheme names and widths") {
  CHECK(FeatureScheme::parse("raw").width() == 1);
  CHECK(FeatureScheme::parse("digits").width() == 20);
  CHECK(FeatureScheme::parse("chunks:4").width() == 2);
  CHECK(FeatureScheme::parse("chunks:2").width() == 4);
  CHECK(FeatureScheme::parse("chunks:1").width() == 8);
  for (auto text : {"raw", "digits", "chunks:1", "chunks:2", "chunks:4"}) {
    const auto s = FeatureScheme::parse(text);
    CHECK(s.to_string() == text);
    CHECK(FeatureScheme::for_width(s.width()) == s);
  }
}

TEST_CASE("streaming trace labels every access bypass") {
  WorkloadSpec spec;
  spec.length = 300;
  const auto ds = label_trace(generate_trace(spec), CacheConfig{}, 128);
  CHECK(ds.class_counts().bypass == 300);
}

TEST_CASE("single repeated line labels everything cache except the last") {
  Trace t;
  for (std::uint64_t i = 0; i < 6; ++i) t.accesses.push_back({i, 0x4000, AccessKind::Load});
  const auto ds = label_trace(t, CacheConfig{}, 4);
  for (std::size_t i = 0; i + 1 < ds.size(); ++i) CHECK(ds.samples[i].label == Label::Cache);
  // The final touch has no next use.
  CHECK(ds.samples.back().label == Label::Bypass);
}

TEST_CASE("zipf labels agree with the quadratic reuse scan") {
  WorkloadSpec spec;
  spec.kind = WorkloadKind::ZipfHotSet;
  spec.length = 1500;
  spec.seed = 3;
  const Trace t = generate_trace(spec);
  const auto ds = label_trace(t, CacheConfig{}, 16);
  const auto ref = oracle::reuse_distances(t);
  REQUIRE(ds.size() == t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const bool bypass = ref[i] == kNoReuse || ref[i] > 16;
    CHECK((ds.samples[i].label == Label::Bypass) == bypass);
    CHECK(ds.samples[i].origin_seq == i);
    CHECK(ds.samples[i].features[0] == double(t.accesses[i].address));
  }
}

TEST_CASE("labeling errors") {
  CHECK_THROWS_AS(label_trace(Trace{}, CacheConfig{}, 4), EmptyDatasetError);
  CHECK_THROWS_AS(label_trace(oracle::random_trace(10, 3, 1), CacheConfig{}, 0), ValidationError);
}

TEST_CASE("featurize maps every sample under the scheme") {
  const auto raw = region_dataset(2000, 1);
  for (auto scheme : {FeatureScheme::digits(), FeatureScheme::chunks(2)}) {
    const auto f = featurize(raw, scheme, Exec::Serial);
    CHECK(f == featurize(raw, scheme, Exec::Parallel));
    REQUIRE(f.size() == raw.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      CHECK(f.samples[i].features == scheme.featurize(*raw.samples[i].address));
      CHECK(f.samples[i].label == raw.samples[i].label);
    }
  }
}

TEST_CASE("smote: balanced input is returned unchanged") {
  const auto ds = make_dataset(30, 30, 2, 1);
  CHECK(smote_balance(ds, 5, 1) == ds);
}

TEST_CASE("smote: singleton minority is duplicated") {
  const auto ds = make_dataset(10, 1, 4, 2);
  const auto out = smote_balance(ds, 5, 1);
  CHECK(out.class_counts() == ClassCounts{10, 10});
  const auto it = std::find_if(ds.samples.begin(), ds.samples.end(),
                               [](auto& s) { return s.label == Label::Bypass; });
  for (std::size_t i = ds.size(); i < out.size(); ++i) CHECK(out.samples[i].features == it->features);
}

TEST_CASE("smote: 100/40 balances and stays between parents") {
  const auto ds = make_dataset(100, 40, 4, 7);
  std::vector<std::pair<std::size_t, std::size_t>> parents;
  const auto out = smote_balance(ds, 5, 11, Exec::Parallel, &parents);
  CHECK(out.class_counts() == ClassCounts{100, 100});
  REQUIRE(parents.size() == 60);
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(out.samples[i] == ds.samples[i]);
  for (std::size_t s = 0; s < parents.size(); ++s) {
    const auto& syn = out.samples[ds.size() + s];
    const auto& a = ds.samples[parents[s].first];
    const auto& b = ds.samples[parents[s].second];
    CHECK(syn.label == Label::Bypass);
    CHECK(a.label == Label::Bypass);
    CHECK(b.label == Label::Bypass);
    for (std::size_t j = 0; j < syn.features.size(); ++j) {
      CHECK(syn.features[j] >= std::min(a.features[j], b.features[j]));
      CHECK(syn.features[j] <= std::max(a.features[j], b.features[j]));
    }
  }
  CHECK(smote_balance(ds, 5, 11, Exec::Serial) == out);
}

TEST_CASE("smote: raw addresses interpolate as integers") {
  const auto raw = region_dataset(3000, 2);
  const auto out = smote_balance(raw, 5, 3);
  const auto c = out.class_counts();
  CHECK(c.cache == c.bypass);
  for (const auto& s : out.samples) {
    REQUIRE(s.address.has_value());
    CHECK(s.features[0] == double(*s.address));
  }
}

TEST_CASE("smote: empty class is a labeling error") {
  const auto ds = make_dataset(10, 0, 2, 1);
  CHECK_THROWS_AS(smote_balance(ds, 5, 1), LabelingError);
  CHECK_THROWS_AS(smote_balance(make_dataset(5, 3, 2, 1), 0, 1), ValidationError);
}

TEST_CASE("split: sizes, stratification and determinism") {
  const auto ds = make_dataset(50, 50, 2, 4);
  const auto [train, test] = train_test_split(ds, 0.2, 9);
  CHECK(train.size() == 80);
  CHECK(test.size() == 20);
  CHECK(std::abs(long(test.class_counts().cache) - 10) <= 1);
  CHECK(std::abs(long(test.class_counts().bypass) - 10) <= 1);
  const auto again = train_test_split(ds, 0.2, 9);
  CHECK(again.first == train);
  CHECK(again.second == test);

  const auto skew = make_dataset(73, 27, 2, 5);
  const auto [tr2, te2] = train_test_split(skew, 0.3, 1);
  CHECK(tr2.size() + te2.size() == 100);
  CHECK(std::abs(double(te2.class_counts().bypass) - 27 * 0.3) <= 1.0);
  std::multiset<std::vector<double>> all, parts;
  for (auto& s : skew.samples) all.insert(s.features);
  for (auto& s : tr2.samples) parts.insert(s.features);
  for (auto& s : te2.samples) parts.insert(s.features);
  CHECK(all == parts);
}

TEST_CASE("split errors") {
  CHECK_THROWS_AS(train_test_split(make_dataset(10, 1, 2, 1), 0.2, 1), StratificationError);
  CHECK_THROWS_AS(train_test_split(make_dataset(10, 10, 2, 1), 1.0, 1), ValidationError);
  CHECK_THROWS_AS(train_test_split(make_dataset(10, 10, 2, 1), 0.0, 1), ValidationError);
}

TEST_CASE("dataset csv round trip") {
  const auto raw = region_dataset(500, 3);
  std::stringstream buf;
  write_dataset(raw, buf);
  CHECK(buf.str().rfind("f0,label\n", 0) == 0);
  const auto back = read_dataset(buf);
  REQUIRE(back.size() == raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    CHECK(back.samples[i].address == raw.samples[i].address);
    CHECK(back.samples[i].label == raw.samples[i].label);
  }
  const auto dig = featurize(raw, FeatureScheme::digits());
  std::stringstream b2;
  write_dataset(dig, b2);
  const auto back2 = read_dataset(b2);
  CHECK(back2.scheme == FeatureScheme::digits());
  for (std::size_t i = 0; i < dig.size(); ++i) CHECK(back2.samples[i].features == dig.samples[i].features);

  std::istringstream bad("f0,label\n1,2\n");
  CHECK_THROWS_AS(read_dataset(bad), ParseError);
}

}  // TEST_SUITE
