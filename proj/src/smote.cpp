#include <algorithm>
#include <cmath>

#include "bypass/dataset.hpp"
#include "bypass/error.hpp"
#include "bypass/rng.hpp"
#include "neighbors.hpp"

namespace bypass {

namespace {

struct Draw {
  std::size_t base = 0;  // position within the minority list
  std::size_t rank = 0;  // which of the base's neighbors
  double u = 0.0;
};

// Interpolates addresses in integer arithmetic so raw datasets keep exact
// addresses; the result stays between the two parents.
std::uint64_t lerp_address(std::uint64_t a, std::uint64_t b, double u) {
  const auto diff = static_cast<__int128>(b) - static_cast<__int128>(a);
  const auto step = static_cast<__int128>(std::llroundl(static_cast<long double>(u) *
                                                        static_cast<long double>(diff)));
  return static_cast<std::uint64_t>(static_cast<__int128>(a) + step);
}

}  // namespace

LabeledDataset smote_balance(const LabeledDataset& dataset, int k, std::uint64_t seed, Exec exec,
                             std::vector<std::pair<std::size_t, std::size_t>>* parents) {
  if (k < 1) throw ValidationError("k", "must be >= 1");
  const ClassCounts counts = dataset.class_counts();
  if (counts.cache == counts.bypass) {
    if (counts.cache == 0) throw EmptyDatasetError("cannot balance an empty dataset");
    return dataset;
  }
  const Label minority = counts.cache < counts.bypass ? Label::Cache : Label::Bypass;
  if (counts.of(minority) == 0)
    throw LabelingError("class " + std::to_string(to_int(minority)) +
                        " has no samples; re-label with a different threshold");

  const std::size_t dim = dataset.width();
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.samples[i].features.size() != dim)
      throw DimensionError(dim, dataset.samples[i].features.size());
    if (dataset.samples[i].label == minority) members.push_back(i);
  }
  const std::size_t m = members.size();
  const std::size_t deficit = std::max(counts.cache, counts.bypass) - m;
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), m - 1);

  Rng rng(seed);
  std::vector<Draw> draws(deficit);
  for (auto& d : draws) {
    d.base = rng.below(m);
    d.rank = kk == 0 ? 0 : rng.below(kk);
    d.u = rng.uniform();
  }

  std::vector<double> lo(dim, INFINITY), hi(dim, -INFINITY);
  for (const auto& s : dataset.samples) {
    for (std::size_t j = 0; j < dim; ++j) {
      lo[j] = std::min(lo[j], s.features[j]);
      hi[j] = std::max(hi[j], s.features[j]);
    }
  }
  std::vector<double> scaled(m * dim);
  for (std::size_t r = 0; r < m; ++r) {
    const auto& f = dataset.samples[members[r]].features;
    for (std::size_t j = 0; j < dim; ++j) {
      const double span = hi[j] - lo[j];
      scaled[r * dim + j] = span > 0.0 ? (f[j] - lo[j]) / span : 0.0;
    }
  }

  // Neighbor lists only for minority samples that were actually drawn.
  std::vector<std::vector<std::size_t>> neighbors(m);
  if (kk > 0) {
    std::vector<char> needed(m, 0);
    for (const auto& d : draws) needed[d.base] = 1;
    std::vector<std::size_t> todo;
    for (std::size_t r = 0; r < m; ++r) {
      if (needed[r]) todo.push_back(r);
    }
    const auto count = static_cast<std::ptrdiff_t>(todo.size());
    const std::span<const double> points(scaled);
#pragma omp parallel for schedule(dynamic, 16) if (exec == Exec::Parallel)
    for (std::ptrdiff_t t = 0; t < count; ++t) {
      const std::size_t r = todo[t];
      const auto nn = detail::nearest_k(points, dim, points.subspan(r * dim, dim), kk, r);
      auto& out = neighbors[r];
      out.reserve(nn.size());
      for (const auto& [dist, idx] : nn) out.push_back(idx);
    }
  }

  if (parents) parents->clear();
  LabeledDataset out = dataset;
  out.samples.reserve(dataset.size() + deficit);
  for (const auto& d : draws) {
    const LabeledSample& x = dataset.samples[members[d.base]];
    LabeledSample s;
    s.label = minority;
    if (kk == 0) {
      s.features = x.features;
      s.address = x.address;
      if (parents) parents->emplace_back(members[d.base], members[d.base]);
    } else {
      const std::size_t other = members[neighbors[d.base][d.rank]];
      if (parents) parents->emplace_back(members[d.base], other);
      const LabeledSample& y = dataset.samples[other];
      if (dataset.scheme.kind() == FeatureScheme::Kind::RawAddress && x.address && y.address) {
        s.address = lerp_address(*x.address, *y.address, d.u);
        s.features = {static_cast<double>(*s.address)};
      } else {
        s.features.resize(dim);
        for (std::size_t j = 0; j < dim; ++j) {
          const double v = x.features[j] + d.u * (y.features[j] - x.features[j]);
          // Keep rounding from stepping outside the parents' range.
          s.features[j] = std::clamp(v, std::min(x.features[j], y.features[j]),
                                     std::max(x.features[j], y.features[j]));
        }
      }
    }
    out.samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace bypass
