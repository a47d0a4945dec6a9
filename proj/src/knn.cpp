#include "voices/knn.hpp"

#include "voices/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace voices
{

namespace
{

double squared_distance(const Points& data, Index a, Index b)
{
  return (data.row(a) - data.row(b)).squaredNorm();
}

struct Candidate
{
  double d2;
  Index j;
  bool operator<(const Candidate& o) const { return d2 < o.d2 || (d2 == o.d2 && j < o.j); }
};

}  // namespace

KnnGraph exact_knn(const Points& data, Index k)
{
  const Index n = data.rows();
  if (k < 1 || k >= n) throw ConfigError("k-NN: k must lie in [1, rows)");

  KnnGraph g;
  g.n = n;
  g.k = k;
  g.indices.resize(static_cast<std::size_t>(n * k));
  g.distances.resize(static_cast<std::size_t>(n * k));

  // Gram-matrix distances screen candidates; survivors are re-scored exactly so the
  // final order does not depend on cancellation error.
  const Index margin = std::min<Index>(n - 1, k + 16);
  const Eigen::VectorXd norms = data.rowwise().squaredNorm();
  const Index block = 256;
  std::vector<Candidate> pool;
  for (Index start = 0; start < n; start += block) {
    const Index rows = std::min(block, n - start);
    Eigen::MatrixXd gram = data.middleRows(start, rows) * data.transpose();
    for (Index r = 0; r < rows; ++r) {
      const Index i = start + r;
      pool.clear();
      pool.reserve(static_cast<std::size_t>(n - 1));
      for (Index j = 0; j < n; ++j)
        if (j != i) pool.push_back({norms(i) + norms(j) - 2.0 * gram(r, j), j});
      std::nth_element(pool.begin(), pool.begin() + (margin - 1), pool.end());
      // Include every candidate tied (within rounding) with the screening cut-off.
      const double cut = pool[static_cast<std::size_t>(margin - 1)].d2;
      const double slack = 1e-9 * (norms(i) + norms.maxCoeff()) + 1e-12;
      auto keep_end = std::partition(pool.begin() + margin, pool.end(),
                                     [&](const Candidate& c) { return c.d2 <= cut + slack; });
      pool.erase(keep_end, pool.end());
      for (auto& c : pool) c.d2 = squared_distance(data, i, c.j);
      std::partial_sort(pool.begin(), pool.begin() + k, pool.end());
      for (Index m = 0; m < k; ++m) {
        g.indices[static_cast<std::size_t>(i * k + m)] = pool[static_cast<std::size_t>(m)].j;
        g.distances[static_cast<std::size_t>(i * k + m)] = std::sqrt(pool[static_cast<std::size_t>(m)].d2);
      }
    }
  }
  return g;
}

namespace
{

/// Bounded max-heap kept as a sorted vector; k is small enough that insertion is cheap.
struct NeighborList
{
  std::vector<Candidate> items;
  std::vector<bool> is_new;

  bool push(Candidate c, Index k)
  {
    if (static_cast<Index>(items.size()) == k && !(c < items.back())) return false;
    for (const auto& x : items)
      if (x.j == c.j) return false;
    auto pos = std::upper_bound(items.begin(), items.end(), c);
    auto idx = pos - items.begin();
    items.insert(pos, c);
    is_new.insert(is_new.begin() + idx, true);
    if (static_cast<Index>(items.size()) > k) {
      items.pop_back();
      is_new.pop_back();
    }
    return true;
  }
};

}  // namespace

KnnGraph nn_descent(const Points& data, Index k, std::uint64_t seed, const NnDescentOptions& options)
{
  const Index n = data.rows();
  if (k < 1 || k >= n) throw ConfigError("k-NN: k must lie in [1, rows)");

  std::vector<NeighborList> lists(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    Rng rng(seed, "nnd_init", static_cast<std::uint64_t>(i));
    auto& list = lists[static_cast<std::size_t>(i)];
    while (static_cast<Index>(list.items.size()) < k) {
      auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
      if (j != i) list.push({squared_distance(data, i, j), j}, k);
    }
  }

  const Index cap = options.max_candidates;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    std::vector<std::vector<Index>> new_c(static_cast<std::size_t>(n)), old_c(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      auto& list = lists[static_cast<std::size_t>(i)];
      for (std::size_t m = 0; m < list.items.size(); ++m) {
        const Index j = list.items[m].j;
        if (list.is_new[m]) {
          new_c[static_cast<std::size_t>(i)].push_back(j);
          new_c[static_cast<std::size_t>(j)].push_back(i);
          list.is_new[m] = false;
        } else {
          old_c[static_cast<std::size_t>(i)].push_back(j);
          old_c[static_cast<std::size_t>(j)].push_back(i);
        }
      }
    }
    auto trim = [&](std::vector<Index>& v, Index i, std::uint64_t salt) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
      if (static_cast<Index>(v.size()) > cap) {
        Rng rng(seed, static_cast<std::uint64_t>(iter) * 2 + salt, static_cast<std::uint64_t>(i));
        rng.shuffle(v.begin(), v.end());
        v.resize(static_cast<std::size_t>(cap));
        std::sort(v.begin(), v.end());
      }
    };
    for (Index i = 0; i < n; ++i) {
      trim(new_c[static_cast<std::size_t>(i)], i, 0);
      trim(old_c[static_cast<std::size_t>(i)], i, 1);
    }

    std::size_t updates = 0;
    auto try_pair = [&](Index a, Index b) {
      if (a == b) return;
      const double d2 = squared_distance(data, a, b);
      updates += lists[static_cast<std::size_t>(a)].push({d2, b}, k);
      updates += lists[static_cast<std::size_t>(b)].push({d2, a}, k);
    };
    for (Index i = 0; i < n; ++i) {
      const auto& nc = new_c[static_cast<std::size_t>(i)];
      const auto& oc = old_c[static_cast<std::size_t>(i)];
      for (std::size_t x = 0; x < nc.size(); ++x) {
        for (std::size_t y = x + 1; y < nc.size(); ++y) try_pair(nc[x], nc[y]);
        for (Index o : oc) try_pair(nc[x], o);
      }
    }
    if (static_cast<double>(updates) < options.delta * static_cast<double>(n * k)) break;
  }

  KnnGraph g;
  g.n = n;
  g.k = k;
  g.exact = false;
  g.indices.resize(static_cast<std::size_t>(n * k));
  g.distances.resize(static_cast<std::size_t>(n * k));
  for (Index i = 0; i < n; ++i) {
    const auto& list = lists[static_cast<std::size_t>(i)];
    for (Index m = 0; m < k; ++m) {
      g.indices[static_cast<std::size_t>(i * k + m)] = list.items[static_cast<std::size_t>(m)].j;
      g.distances[static_cast<std::size_t>(i * k + m)] = std::sqrt(list.items[static_cast<std::size_t>(m)].d2);
    }
  }
  return g;
}

KnnGraph nearest_neighbors(const Points& data, Index k, std::uint64_t seed, Index exact_max_rows)
{
  if (data.rows() <= exact_max_rows) return exact_knn(data, k);
  return nn_descent(data, k, seed);
}

double knn_recall(const KnnGraph& approx, const KnnGraph& exact)
{
  if (approx.n != exact.n || approx.k != exact.k) throw ConfigError("knn_recall: graph shapes differ");
  std::size_t hits = 0;
  for (Index i = 0; i < exact.n; ++i) {
    std::set<Index> truth;
    for (Index m = 0; m < exact.k; ++m) truth.insert(exact.neighbor(i, m));
    for (Index m = 0; m < approx.k; ++m) hits += truth.contains(approx.neighbor(i, m));
  }
  return static_cast<double>(hits) / static_cast<double>(exact.n * exact.k);
}

}  // namespace voices
