#pragma once

#include "voices/cluster.hpp"
#include "voices/dimred.hpp"
#include "voices/validate.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace voices
{

enum class SweepMode
{
  /// Seeded draws from the grid without repeats.
  random,
  /// Every grid point in enumeration order.
  grid
};

std::string to_string(SweepMode mode);
SweepMode sweep_mode_from_string(const std::string& name);

enum class ScoreSpace
{
  reduced,
  original
};

std::string to_string(ScoreSpace space);
ScoreSpace score_space_from_string(const std::string& name);

/**
 * Search space and budget. Each list is one grid axis; reduction axes apply only to
 * methods that use them, and the HDBSCAN axes only to hdbscan.
 */
struct SweepSpec
{
  std::vector<ReductionMethod> methods{ReductionMethod::umap};
  std::vector<Index> n_components{2};
  std::vector<Index> umap_neighbors{90};
  std::vector<double> umap_min_dist{0.9};
  std::vector<ClusterAlgorithm> algorithms{ClusterAlgorithm::kmeans};
  std::vector<int> k{2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19};
  std::vector<double> hdbscan_eps{0.0};
  std::vector<int> hdbscan_min_samples{5};
  std::vector<int> hdbscan_min_cluster_size{5};

  SweepMode mode = SweepMode::random;
  /// Without a budget the sweep stops once every grid point has been tried.
  std::optional<double> budget_seconds;
  std::optional<std::size_t> max_trials;
  std::uint64_t seed = 0;
  int parallelism = 1;
  bool allow_out_of_range = false;
  /// Reduced matrices kept in memory for reuse across trials.
  std::size_t cache_size = 16;

  /// Fields not swept (epochs, iterations, covariance type, ...) come from these.
  ReductionConfig reduction_base;
  ClusterConfig cluster_base;
  ValidationOptions validation;
  ScoreSpace score_space = ScoreSpace::reduced;
};

/// Throws ConfigError for empty axes, out-of-range values or a non-positive budget.
void check_sweep_spec(const SweepSpec& spec, Index rows, Index dim);

/// Number of distinct trial configurations in the grid.
std::size_t grid_size(const SweepSpec& spec);

struct TrialConfig
{
  ReductionConfig reduction;
  ClusterConfig cluster;

  friend bool operator==(const TrialConfig&, const TrialConfig&) = default;
};

/// FNV-1a of the configuration's canonical JSON.
std::uint64_t config_hash(const TrialConfig& config);

struct TrialResult
{
  std::size_t index = 0;
  TrialConfig config;
  std::uint64_t hash = 0;
  ValidationReport report;
  double wall_time = 0.0;
  bool degenerate = false;
  std::string reason;
};

/**
 * Total order used for ranking: non-degenerate before degenerate; then higher silhouette,
 * lower Davies-Bouldin, fewer clusters, smaller config hash; degenerate trials by index.
 */
bool trial_before(const TrialResult& a, const TrialResult& b);

/// Best non-degenerate trial under trial_before. Throws DegenerateError when there is none.
const TrialResult& select_best(const std::vector<TrialResult>& trials);

/// The trial configuration drawn at a given position of the sweep sequence.
std::vector<TrialConfig> trial_sequence(const SweepSpec& spec, std::size_t count);

struct SweepOptions
{
  /// JSONL log; existing lines with matching configs are reused instead of re-run.
  std::optional<std::filesystem::path> log_path;
  /// Planted labels, when known, so every report carries an ARI.
  const std::vector<int>* ground_truth = nullptr;
};

/// Runs reduce -> cluster -> validate for each trial; results ranked by trial_before.
std::vector<TrialResult> run_sweep(const Dataset& ds, const SweepSpec& spec, const SweepOptions& options = {});

/// Evaluates one configuration exactly as a sweep trial would.
TrialResult evaluate_trial(const Dataset& ds, const ReducedMatrix& reduced, const TrialConfig& config,
                           const SweepSpec& spec, const std::vector<int>* ground_truth = nullptr);

}  // namespace voices
