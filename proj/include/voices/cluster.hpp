#pragma once

#include "voices/dimred.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace voices
{

enum class ClusterAlgorithm
{
  kmeans,
  gmm,
  hdbscan
};

std::string to_string(ClusterAlgorithm algorithm);
ClusterAlgorithm cluster_algorithm_from_string(const std::string& name);

enum class CovarianceType
{
  full,
  diagonal
};

std::string to_string(CovarianceType type);
CovarianceType covariance_type_from_string(const std::string& name);

struct ClusterConfig
{
  ClusterAlgorithm algorithm = ClusterAlgorithm::kmeans;
  int k = 2;
  int hdbscan_min_cluster_size = 5;
  int hdbscan_min_samples = 5;
  double hdbscan_eps = 0.0;
  /// Lets the root of the condensed tree be selected as the only cluster.
  bool hdbscan_allow_single_cluster = true;
  int max_iter = 300;
  double tol = 1e-4;
  std::uint64_t seed = 0;
  /// Independent k-means++ restarts; the lowest-inertia run wins.
  int n_init = 3;
  CovarianceType covariance = CovarianceType::full;
  double gmm_ridge = 1e-6;
  /// Accept k and HDBSCAN parameters outside the published sweep ranges.
  bool allow_out_of_range = false;

  friend bool operator==(const ClusterConfig&, const ClusterConfig&) = default;
};

void check_cluster_config(const ClusterConfig& cfg, Index rows);

struct KmeansDetail
{
  double inertia = 0.0;
  /// Inertia after every assignment step of the winning restart.
  std::vector<double> inertia_trace;
  int iterations = 0;
  bool converged = false;
};

struct GmmDetail
{
  Eigen::VectorXd weights;
  Points means;
  std::vector<Eigen::MatrixXd> covariances;
  std::vector<double> log_likelihood_trace;
  int iterations = 0;
  bool converged = false;
};

struct MstEdge
{
  Index a = 0;
  Index b = 0;
  double weight = 0.0;
};

/// Row of the condensed tree: `child` is a point id (< n) or a cluster id (>= n).
struct CondensedEdge
{
  Index parent = 0;
  Index child = 0;
  double lambda = 0.0;
  Index child_size = 0;
};

struct HdbscanDetail
{
  std::vector<double> core_distances;
  std::vector<MstEdge> mst;
  double mst_weight = 0.0;
  std::vector<CondensedEdge> condensed_tree;
  /// Stability of each selected cluster, indexed by final label.
  std::vector<double> stabilities;
};

using ModelDetail = std::variant<std::monostate, KmeansDetail, GmmDetail, HdbscanDetail>;

struct ClusterAssignment
{
  ClusterAlgorithm algorithm = ClusterAlgorithm::kmeans;
  /// Per-row cluster id in [0, n_clusters), or kNoise (HDBSCAN only).
  std::vector<int> labels;
  int n_clusters = 0;
  std::optional<Points> centroids;
  ModelDetail model_detail;
  bool degenerate = false;
  std::string degenerate_reason;

  std::size_t rows() const { return labels.size(); }
};

/**
 * Relabel clusters in order of first appearance; kNoise stays kNoise.
 * Returns old id -> new id (kNoise for ids that never appear).
 */
std::vector<int> canonicalize_labels(std::vector<int>& labels, int n_old);

/// Marks all-noise and n_clusters > rows / 2 results as degenerate.
void flag_degenerate(ClusterAssignment& assignment);

ClusterAssignment kmeans(const Points& data, const ClusterConfig& cfg);
ClusterAssignment gmm(const Points& data, const ClusterConfig& cfg);
ClusterAssignment hdbscan(const Points& data, const ClusterConfig& cfg);

/// Dispatches on cfg.algorithm after validating the configuration.
ClusterAssignment cluster(const Points& data, const ClusterConfig& cfg);
inline ClusterAssignment cluster(const ReducedMatrix& data, const ClusterConfig& cfg)
{
  return cluster(data.values, cfg);
}

/// Per-cluster means over non-noise rows; n_clusters x dim.
Points cluster_means(const Points& data, const std::vector<int>& labels, int n_clusters);

// HDBSCAN building blocks.

/// Distance to the min_samples-th nearest other point.
std::vector<double> core_distances(const Points& data, int min_samples);
double mutual_reachability(const Points& data, const std::vector<double>& core, Index a, Index b);
/// Prim's algorithm on the dense mutual-reachability graph.
std::vector<MstEdge> mutual_reachability_mst(const Points& data, const std::vector<double>& core);

void save_assignment(const std::filesystem::path& path, const std::vector<RowKey>& row_index,
                     const ClusterAssignment& assignment, const ClusterConfig& cfg);
/// Loads labels (and the sidecar when present); row order must match row_index.
ClusterAssignment load_assignment(const std::filesystem::path& path, const std::vector<RowKey>& row_index);

}  // namespace voices
