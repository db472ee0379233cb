// Independent brute-force references sharing no code with the library
// beyond the plain data types.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <list>
#include <random>
#include <set>
#include <vector>

#include "bypass/cachesim.hpp"
#include "bypass/dataset.hpp"
#include "bypass/models.hpp"
#include "bypass/trace.hpp"

namespace oracle {

/// Random trace over `distinct` lines drawn uniformly, with random byte
/// offsets inside each line.
inline bypass::Trace random_trace(std::size_t n, std::uint64_t distinct, std::uint64_t seed,
                                  int line_size_log2 = 7) {
  std::mt19937_64 gen(seed);
  bypass::Trace t;
  t.line_size_log2 = line_size_log2;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t line = 1000 + gen() % distinct;
    const std::uint64_t offset = gen() % (std::uint64_t{1} << line_size_log2);
    t.accesses.push_back({i, (line << line_size_log2) | offset,
                          gen() % 4 == 0 ? bypass::AccessKind::Store : bypass::AccessKind::Load});
  }
  return t;
}

/// Per-access hit flags of an LRU cache kept as explicit recency lists,
/// front = most recent.
inline std::vector<bool> lru_hits(const bypass::Trace& t, std::uint32_t sets, std::uint32_t ways) {
  std::vector<std::list<std::uint64_t>> lists(sets);
  std::vector<bool> hits;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const std::uint64_t line = t.accesses[i].address >> t.line_size_log2;
    auto& l = lists[line % sets];
    bool hit = false;
    for (auto it = l.begin(); it != l.end(); ++it) {
      if (*it == line) {
        l.erase(it);
        hit = true;
        break;
      }
    }
    l.push_front(line);
    if (l.size() > ways) l.pop_back();
    hits.push_back(hit);
  }
  return hits;
}

/// O(n^2) forward scan: distinct lines strictly between i and the next use
/// of the same line.
inline std::vector<std::uint64_t> reuse_distances(const bypass::Trace& t) {
  std::vector<std::uint64_t> out(t.size(), bypass::kNoReuse);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const std::uint64_t line = t.accesses[i].address >> t.line_size_log2;
    std::set<std::uint64_t> seen;
    for (std::size_t j = i + 1; j < t.size(); ++j) {
      const std::uint64_t other = t.accesses[j].address >> t.line_size_log2;
      if (other == line) {
        out[i] = seen.size();
        break;
      }
      seen.insert(other);
    }
  }
  return out;
}

inline double gini2(double a, double b) {
  const double n = a + b;
  return 1.0 - (a / n) * (a / n) - (b / n) * (b / n);
}

/// Best Gini gain over every (feature, midpoint) pair, by exhaustive
/// enumeration.
inline double best_split_gain(const bypass::FeatureMatrix& x, const std::vector<double>& y) {
  double pos = 0;
  for (double v : y) pos += v;
  const double parent = gini2(y.size() - pos, pos);
  double best = 0.0;
  for (std::size_t f = 0; f < x.cols; ++f) {
    std::set<double> values;
    for (std::size_t i = 0; i < x.rows; ++i) values.insert(x(i, f));
    for (auto it = values.begin(); std::next(it) != values.end(); ++it) {
      const double thr = (*it + *std::next(it)) / 2.0;
      double l0 = 0, l1 = 0, r0 = 0, r1 = 0;
      for (std::size_t i = 0; i < x.rows; ++i) {
        const bool left = x(i, f) <= thr;
        (left ? (y[i] > 0.5 ? l1 : l0) : (y[i] > 0.5 ? r1 : r0)) += 1;
      }
      const double n = x.rows;
      const double gain =
          parent - (l0 + l1) / n * gini2(l0, l1) - (r0 + r1) / n * gini2(r0, r1);
      best = std::max(best, gain);
    }
  }
  return best;
}

/// Weighted KNN vote by full sort of all distances. Returns the Bypass
/// score; ties in distance are broken by index.
inline double knn_score(const bypass::FeatureMatrix& pts, const std::vector<double>& labels,
                        const std::vector<double>& q, int k, bool inverse_distance) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t i = 0; i < pts.rows; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < pts.cols; ++j) s += (pts(i, j) - q[j]) * (pts(i, j) - q[j]);
    d.emplace_back(std::sqrt(s), i);
  }
  std::sort(d.begin(), d.end());
  double w_pos = 0, w_all = 0;
  for (int i = 0; i < k; ++i) {
    const double w = inverse_distance ? 1.0 / (d[i].first + 1e-9) : 1.0;
    w_all += w;
    if (labels[d[i].second] > 0.5) w_pos += w;
  }
  return w_pos / w_all;
}

/// Central differences of f around p.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> p, double h = 1e-5) {
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + h;
    const double up = f(p);
    p[i] = keep - h;
    const double down = f(p);
    p[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||) in the Euclidean norm.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? std::sqrt(diff) : std::sqrt(diff) / scale;
}

}  // namespace oracle
