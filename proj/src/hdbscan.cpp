#include "voices/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace voices
{

std::vector<double> core_distances(const Points& data, int min_samples)
{
  const Index n = data.rows();
  if (min_samples < 1 || min_samples >= n)
    throw ConfigError("cluster.hdbscan_min_samples: must lie in [1, rows)");
  std::vector<double> core(static_cast<std::size_t>(n));
  std::vector<double> dist(static_cast<std::size_t>(n - 1));
  for (Index i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (Index j = 0; j < n; ++j)
      if (j != i) dist[m++] = (data.row(i) - data.row(j)).norm();
    std::nth_element(dist.begin(), dist.begin() + (min_samples - 1), dist.end());
    core[static_cast<std::size_t>(i)] = dist[static_cast<std::size_t>(min_samples - 1)];
  }
  return core;
}

double mutual_reachability(const Points& data, const std::vector<double>& core, Index a, Index b)
{
  const double d = (data.row(a) - data.row(b)).norm();
  return std::max({core[static_cast<std::size_t>(a)], core[static_cast<std::size_t>(b)], d});
}

std::vector<MstEdge> mutual_reachability_mst(const Points& data, const std::vector<double>& core)
{
  const Index n = data.rows();
  std::vector<MstEdge> edges;
  if (n < 2) return edges;
  edges.reserve(static_cast<std::size_t>(n - 1));
  std::vector<bool> in_tree(static_cast<std::size_t>(n), false);
  std::vector<double> best(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<Index> from(static_cast<std::size_t>(n), 0);
  Index current = 0;
  in_tree[0] = true;
  for (Index step = 1; step < n; ++step) {
    Index next = -1;
    double next_w = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < n; ++j) {
      if (in_tree[static_cast<std::size_t>(j)]) continue;
      const double w = mutual_reachability(data, core, current, j);
      if (w < best[static_cast<std::size_t>(j)]) {
        best[static_cast<std::size_t>(j)] = w;
        from[static_cast<std::size_t>(j)] = current;
      }
      if (best[static_cast<std::size_t>(j)] < next_w) {
        next_w = best[static_cast<std::size_t>(j)];
        next = j;
      }
    }
    in_tree[static_cast<std::size_t>(next)] = true;
    edges.push_back({from[static_cast<std::size_t>(next)], next, next_w});
    current = next;
  }
  return edges;
}

namespace
{

struct LinkageNode
{
  Index left;
  Index right;
  double distance;
  Index size;
};

/// Single-linkage merges from the MST; node n + i is created by merges[i].
std::vector<LinkageNode> single_linkage(Index n, std::vector<MstEdge> mst)
{
  std::stable_sort(mst.begin(), mst.end(), [](const MstEdge& a, const MstEdge& b) { return a.weight < b.weight; });
  std::vector<Index> parent(static_cast<std::size_t>(2 * n - 1));
  std::iota(parent.begin(), parent.end(), Index{0});
  std::vector<Index> size(static_cast<std::size_t>(2 * n - 1), 1);
  auto find = [&](Index x) {
    Index root = x;
    while (parent[static_cast<std::size_t>(root)] != root) root = parent[static_cast<std::size_t>(root)];
    while (parent[static_cast<std::size_t>(x)] != root) {
      Index next = parent[static_cast<std::size_t>(x)];
      parent[static_cast<std::size_t>(x)] = root;
      x = next;
    }
    return root;
  };
  std::vector<LinkageNode> merges;
  merges.reserve(mst.size());
  Index next_node = n;
  for (const auto& e : mst) {
    const Index a = find(e.a), b = find(e.b);
    const Index s = size[static_cast<std::size_t>(a)] + size[static_cast<std::size_t>(b)];
    merges.push_back({a, b, e.weight, s});
    parent[static_cast<std::size_t>(a)] = next_node;
    parent[static_cast<std::size_t>(b)] = next_node;
    size[static_cast<std::size_t>(next_node)] = s;
    ++next_node;
  }
  return merges;
}

double to_lambda(double distance)
{
  return distance > 0.0 ? 1.0 / distance : std::numeric_limits<double>::infinity();
}

std::vector<CondensedEdge> condense(Index n, const std::vector<LinkageNode>& merges, Index min_cluster_size)
{
  const Index root = 2 * n - 2;
  auto node_size = [&](Index node) { return node < n ? Index{1} : merges[static_cast<std::size_t>(node - n)].size; };
  auto leaves_of = [&](Index node, std::vector<Index>& out) {
    std::vector<Index> stack{node};
    while (!stack.empty()) {
      Index x = stack.back();
      stack.pop_back();
      if (x < n) {
        out.push_back(x);
      } else {
        stack.push_back(merges[static_cast<std::size_t>(x - n)].right);
        stack.push_back(merges[static_cast<std::size_t>(x - n)].left);
      }
    }
  };

  std::vector<CondensedEdge> tree;
  std::vector<Index> relabel(static_cast<std::size_t>(2 * n - 1), -1);
  relabel[static_cast<std::size_t>(root)] = n;
  Index next_label = n + 1;
  std::deque<Index> queue{root};
  std::vector<Index> leaves;
  while (!queue.empty()) {
    const Index node = queue.front();
    queue.pop_front();
    if (node < n) continue;
    const auto& m = merges[static_cast<std::size_t>(node - n)];
    const double lambda = to_lambda(m.distance);
    const Index label = relabel[static_cast<std::size_t>(node)];
    const Index ls = node_size(m.left), rs = node_size(m.right);
    const bool left_big = ls >= min_cluster_size, right_big = rs >= min_cluster_size;

    auto fall_out = [&](Index child) {
      leaves.clear();
      leaves_of(child, leaves);
      for (Index p : leaves) tree.push_back({label, p, lambda, 1});
    };
    if (left_big && right_big) {
      for (Index child : {m.left, m.right}) {
        relabel[static_cast<std::size_t>(child)] = next_label++;
        tree.push_back({label, relabel[static_cast<std::size_t>(child)], lambda, node_size(child)});
        queue.push_back(child);
      }
    } else if (!left_big && !right_big) {
      fall_out(m.left);
      fall_out(m.right);
    } else {
      const Index big = left_big ? m.left : m.right;
      const Index small = left_big ? m.right : m.left;
      fall_out(small);
      relabel[static_cast<std::size_t>(big)] = label;
      queue.push_back(big);
    }
  }
  return tree;
}

}  // namespace

ClusterAssignment hdbscan(const Points& data, const ClusterConfig& cfg)
{
  const Index n = data.rows();
  if (cfg.hdbscan_min_samples < 1 || n <= cfg.hdbscan_min_samples)
    throw ConfigError("cluster.hdbscan_min_samples: rows (" + std::to_string(n) +
                      ") must exceed min_samples (" + std::to_string(cfg.hdbscan_min_samples) + ")");
  if (cfg.hdbscan_min_cluster_size < 2) throw ConfigError("cluster.hdbscan_min_cluster_size: must be >= 2");

  HdbscanDetail detail;
  detail.core_distances = core_distances(data, cfg.hdbscan_min_samples);
  detail.mst = mutual_reachability_mst(data, detail.core_distances);
  for (const auto& e : detail.mst) detail.mst_weight += e.weight;
  const auto merges = single_linkage(n, detail.mst);
  detail.condensed_tree = condense(n, merges, cfg.hdbscan_min_cluster_size);
  const auto& tree = detail.condensed_tree;

  const Index root = n;
  Index max_cluster = root;
  for (const auto& e : tree) max_cluster = std::max(max_cluster, e.parent);
  for (const auto& e : tree)
    if (e.child_size > 1) max_cluster = std::max(max_cluster, e.child);
  const auto clusters = static_cast<std::size_t>(max_cluster - root + 1);
  auto slot = [&](Index c) { return static_cast<std::size_t>(c - root); };

  // Stability: sum over everything leaving a cluster of (lambda - birth lambda) * size.
  std::vector<double> birth(clusters, 0.0), stability(clusters, 0.0);
  std::vector<Index> parent_of(clusters, -1);
  std::vector<std::vector<Index>> children(clusters);
  for (const auto& e : tree)
    if (e.child_size > 1) {
      birth[slot(e.child)] = e.lambda;
      parent_of[slot(e.child)] = e.parent;
      children[slot(e.parent)].push_back(e.child);
    }
  for (const auto& e : tree) {
    const double b = birth[slot(e.parent)];
    const double gain = (std::isinf(e.lambda) && std::isinf(b)) ? 0.0 : e.lambda - b;
    stability[slot(e.parent)] += gain * static_cast<double>(e.child_size);
  }

  // Excess-of-mass selection, leaves first (children always carry larger ids).
  const bool root_eligible = cfg.hdbscan_allow_single_cluster && n >= cfg.hdbscan_min_cluster_size;
  std::vector<bool> selected(clusters, false);
  std::vector<double> subtree = stability;
  for (Index c = max_cluster; c >= root; --c) {
    if (c == root && !root_eligible) break;
    double child_sum = 0.0;
    for (Index ch : children[slot(c)]) child_sum += subtree[slot(ch)];
    if (!children[slot(c)].empty() && child_sum > subtree[slot(c)]) {
      subtree[slot(c)] = child_sum;
    } else {
      selected[slot(c)] = true;
      std::vector<Index> stack(children[slot(c)]);
      while (!stack.empty()) {
        Index x = stack.back();
        stack.pop_back();
        selected[slot(x)] = false;
        for (Index ch : children[slot(x)]) stack.push_back(ch);
      }
    }
  }

  // Epsilon: a selection born below eps (in distance) is replaced by its first ancestor
  // born at or above eps.
  if (cfg.hdbscan_eps > 0.0) {
    std::vector<bool> eps_selected(clusters, false), processed(clusters, false);
    for (Index c = root; c <= max_cluster; ++c) {
      if (!selected[slot(c)] || processed[slot(c)]) continue;
      Index chosen = c;
      if (c != root && 1.0 / birth[slot(c)] < cfg.hdbscan_eps) {
        Index leaf = c;
        while (true) {
          const Index parent = parent_of[slot(leaf)];
          if (parent == root) {
            chosen = root_eligible ? root : leaf;
            break;
          }
          if (1.0 / birth[slot(parent)] > cfg.hdbscan_eps) {
            chosen = parent;
            break;
          }
          leaf = parent;
        }
      }
      eps_selected[slot(chosen)] = true;
      std::vector<Index> stack(children[slot(chosen)]);
      while (!stack.empty()) {
        Index x = stack.back();
        stack.pop_back();
        processed[slot(x)] = true;
        eps_selected[slot(x)] = false;
        for (Index ch : children[slot(x)]) stack.push_back(ch);
      }
    }
    selected = eps_selected;
  }

  // Each point belongs to the nearest selected ancestor of the cluster it fell out of.
  std::vector<int> raw(static_cast<std::size_t>(n), kNoise);
  std::vector<int> label_of(clusters, kNoise);
  int n_selected = 0;
  for (Index c = root; c <= max_cluster; ++c)
    if (selected[slot(c)]) label_of[slot(c)] = n_selected++;

  double root_max_lambda = 0.0;
  for (const auto& e : tree)
    if (e.parent == root) root_max_lambda = std::max(root_max_lambda, e.lambda);

  for (const auto& e : tree) {
    if (e.child >= n) continue;
    Index c = e.parent;
    while (c != -1 && !selected[slot(c)]) c = parent_of[slot(c)];
    if (c == -1) continue;
    if (c == root) {
      // The root as sole cluster keeps only points that persist to its last split.
      const bool keep = cfg.hdbscan_eps > 0.0 ? e.lambda >= 1.0 / cfg.hdbscan_eps : e.lambda >= root_max_lambda;
      if (!keep) continue;
    }
    raw[static_cast<std::size_t>(e.child)] = label_of[slot(c)];
  }

  ClusterAssignment out;
  out.algorithm = ClusterAlgorithm::hdbscan;
  out.labels = std::move(raw);
  auto mapping = canonicalize_labels(out.labels, n_selected);
  int used = 0;
  for (int m : mapping) used += m != kNoise;
  out.n_clusters = used;
  detail.stabilities.assign(static_cast<std::size_t>(used), 0.0);
  for (Index c = root; c <= max_cluster; ++c) {
    const int l = label_of[slot(c)];
    if (l != kNoise && mapping[static_cast<std::size_t>(l)] != kNoise)
      detail.stabilities[static_cast<std::size_t>(mapping[static_cast<std::size_t>(l)])] = stability[slot(c)];
  }
  if (used > 0) out.centroids = cluster_means(data, out.labels, used);
  out.model_detail = std::move(detail);
  flag_degenerate(out);
  return out;
}

}  // namespace voices
