#include "voices/cluster.hpp"

#include "voices/rng.hpp"

#include <cmath>
#include <limits>

namespace voices
{

namespace
{

/// Greedy k-means++: each new centre is the best of 2 + ln(k) D^2-weighted candidates.
Points plus_plus_seeds(const Points& data, int k, Rng& rng)
{
  const Index n = data.rows();
  Points centers(k, data.cols());
  const auto first = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
  centers.row(0) = data.row(first);
  Eigen::VectorXd closest = (data.rowwise() - centers.row(0)).rowwise().squaredNorm();

  const int trials = 2 + static_cast<int>(std::log(static_cast<double>(k)));
  std::vector<double> weights(static_cast<std::size_t>(n));
  for (int c = 1; c < k; ++c) {
    for (Index i = 0; i < n; ++i) weights[static_cast<std::size_t>(i)] = closest(i);
    double total = closest.sum();
    Index best = -1;
    double best_potential = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_closest;
    for (int t = 0; t < trials; ++t) {
      Index cand;
      if (total > 0.0) {
        cand = static_cast<Index>(rng.categorical(weights));
      } else {
        cand = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
      }
      Eigen::VectorXd updated =
          closest.cwiseMin((data.rowwise() - data.row(cand)).rowwise().squaredNorm());
      const double potential = updated.sum();
      if (potential < best_potential) {
        best_potential = potential;
        best = cand;
        best_closest = std::move(updated);
      }
    }
    centers.row(c) = data.row(best);
    closest = std::move(best_closest);
  }
  return centers;
}

double assign(const Points& data, const Points& centers, std::vector<int>& labels, Eigen::VectorXd& dist2)
{
  const Index n = data.rows();
  double inertia = 0.0;
  for (Index i = 0; i < n; ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index c = 0; c < centers.rows(); ++c) {
      const double d = (data.row(i) - centers.row(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
    dist2(i) = best_d;
    inertia += best_d;
  }
  return inertia;
}

struct LloydRun
{
  Points centers;
  std::vector<int> labels;
  KmeansDetail detail;
};

LloydRun lloyd(const Points& data, Points centers, const ClusterConfig& cfg)
{
  const Index n = data.rows();
  const int k = static_cast<int>(centers.rows());
  LloydRun run;
  run.labels.assign(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd dist2(n);

  for (int it = 0; it < cfg.max_iter; ++it) {
    run.detail.inertia_trace.push_back(assign(data, centers, run.labels, dist2));
    run.detail.iterations = it + 1;

    Points updated = Points::Zero(k, data.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      const int c = run.labels[static_cast<std::size_t>(i)];
      updated.row(c) += data.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    // Empty clusters take the point currently farthest from its centre.
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Index far = 0;
      for (Index i = 1; i < n; ++i)
        if (dist2(i) > dist2(far)) far = i;
      const int donor = run.labels[static_cast<std::size_t>(far)];
      if (counts[static_cast<std::size_t>(donor)] <= 1) continue;
      updated.row(donor) -= data.row(far);
      --counts[static_cast<std::size_t>(donor)];
      updated.row(c) = data.row(far);
      counts[static_cast<std::size_t>(c)] = 1;
      run.labels[static_cast<std::size_t>(far)] = c;
      dist2(far) = 0.0;
    }
    for (int c = 0; c < k; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0) updated.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
      else updated.row(c) = centers.row(c);

    const double shift = (updated - centers).norm();
    centers = std::move(updated);
    if (shift < cfg.tol) {
      run.detail.converged = true;
      break;
    }
  }
  run.detail.inertia = assign(data, centers, run.labels, dist2);
  run.detail.inertia_trace.push_back(run.detail.inertia);
  run.centers = std::move(centers);
  return run;
}

}  // namespace

ClusterAssignment kmeans(const Points& data, const ClusterConfig& cfg)
{
  const Index n = data.rows();
  if (cfg.k < 1) throw ConfigError("cluster.k: must be >= 1");
  if (cfg.k > n)
    throw ConfigError("cluster.k: " + std::to_string(cfg.k) + " exceeds the row count " + std::to_string(n));

  LloydRun best;
  bool have = false;
  for (int init = 0; init < std::max(cfg.n_init, 1); ++init) {
    Rng rng(cfg.seed, "kmeans_init", static_cast<std::uint64_t>(init));
    LloydRun run = lloyd(data, plus_plus_seeds(data, cfg.k, rng), cfg);
    if (!have || run.detail.inertia < best.detail.inertia) {
      best = std::move(run);
      have = true;
    }
  }

  ClusterAssignment out;
  out.algorithm = ClusterAlgorithm::kmeans;
  out.labels = std::move(best.labels);
  auto mapping = canonicalize_labels(out.labels, cfg.k);
  int used = 0;
  for (int m : mapping) used += m != kNoise;
  Points centroids(used, data.cols());
  for (int old = 0; old < cfg.k; ++old)
    if (mapping[static_cast<std::size_t>(old)] != kNoise) centroids.row(mapping[static_cast<std::size_t>(old)]) = best.centers.row(old);
  out.n_clusters = used;
  out.centroids = std::move(centroids);
  out.model_detail = std::move(best.detail);
  flag_degenerate(out);
  return out;
}

}  // namespace voices
