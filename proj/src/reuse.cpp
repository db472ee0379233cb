#include <unordered_map>

#include "bypass/cachesim.hpp"

namespace bypass {

namespace {

// Fenwick tree over trace positions. A position is marked while it holds the
// most recent access to its line, so a range sum counts distinct lines.
class Fenwick {
 public:
  explicit Fenwick(std::size_t n) : tree_(n + 1, 0) {}

  void add(std::size_t pos, int delta) {
    for (std::size_t i = pos + 1; i < tree_.size(); i += i & (~i + 1)) tree_[i] += delta;
  }

  std::int64_t prefix(std::size_t count) const {
    std::int64_t s = 0;
    for (std::size_t i = count; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

 private:
  std::vector<std::int64_t> tree_;
};

}  // namespace

ReuseDistances forward_reuse_distances(const Trace& trace) {
  const std::size_t n = trace.size();
  ReuseDistances dist(n, kNoReuse);
  Fenwick marks(n);
  std::unordered_map<std::uint64_t, std::size_t> last;
  last.reserve(n);
  // The forward distance of access i equals the backward (stack) distance of
  // the next access to the same line.
  for (std::size_t j = 0; j < n; ++j) {
    const std::uint64_t line = trace.line_address(j);
    auto [it, inserted] = last.try_emplace(line, j);
    if (!inserted) {
      const std::size_t prev = it->second;
      dist[prev] = static_cast<std::uint64_t>(marks.prefix(j) - marks.prefix(prev + 1));
      marks.add(prev, -1);
      it->second = j;
    }
    marks.add(j, +1);
  }
  return dist;
}

}  // namespace bypass
