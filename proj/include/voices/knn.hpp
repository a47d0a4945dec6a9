#pragma once

#include "voices/types.hpp"

#include <cstdint>
#include <vector>

namespace voices
{

/// k nearest neighbours per row, self excluded, ascending by distance (ties by index).
struct KnnGraph
{
  Index n = 0;
  Index k = 0;
  std::vector<Index> indices;     // n * k, row-major
  std::vector<double> distances;  // Euclidean, matching indices
  bool exact = true;

  Index neighbor(Index i, Index j) const { return indices[static_cast<std::size_t>(i * k + j)]; }
  double distance(Index i, Index j) const { return distances[static_cast<std::size_t>(i * k + j)]; }
};

KnnGraph exact_knn(const Points& data, Index k);

struct NnDescentOptions
{
  int max_iterations = 20;
  /// Stop when fewer than delta * n * k heap updates happen in an iteration.
  double delta = 0.001;
  Index max_candidates = 40;
};

/// Randomized neighbour descent (Dong, Moses & Li). Deterministic given the seed.
KnnGraph nn_descent(const Points& data, Index k, std::uint64_t seed, const NnDescentOptions& options = {});

/// Exact search up to exact_max_rows, neighbour descent above.
KnnGraph nearest_neighbors(const Points& data, Index k, std::uint64_t seed, Index exact_max_rows = 5000);

/// Fraction of true k-neighbours recovered by an approximate graph.
double knn_recall(const KnnGraph& approx, const KnnGraph& exact);

}  // namespace voices
