#pragma once

#include "voices/corpus.hpp"
#include "voices/knn.hpp"

#include <Eigen/SparseCore>

#include <cstdint>
#include <string>
#include <vector>

namespace voices
{

enum class ReductionMethod
{
  none,
  pca,
  umap
};

std::string to_string(ReductionMethod method);
ReductionMethod reduction_method_from_string(const std::string& name);

struct ReductionConfig
{
  ReductionMethod method = ReductionMethod::none;
  Index n_components = 2;
  Index umap_neighbors = 90;
  double umap_min_dist = 0.9;
  int umap_epochs = 200;
  /// Experimental: discard this many leading principal components before keeping n_components.
  Index pca_drop_top = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const ReductionConfig&, const ReductionConfig&) = default;
};

/// Throws ConfigError when cfg cannot be applied to a rows x dim input.
void check_reduction_config(const ReductionConfig& cfg, Index rows, Index dim);

struct ReducedMatrix
{
  Points values;
  std::vector<RowKey> row_index;
  ReductionConfig provenance;

  Index rows() const { return values.rows(); }
};

ReducedMatrix reduce(const EmbeddingMatrix& emb, const ReductionConfig& cfg);

/// Writes the matrix in an embedding format and provenance to `<path>.json`.
void save_reduced(const std::filesystem::path& path, const ReducedMatrix& reduced, EmbeddingFormat format);
ReducedMatrix load_reduced(const std::filesystem::path& path, EmbeddingFormat format);

// ---------------------------------------------------------------------------
// PCA

struct PcaModel
{
  /// n_components x dim, orthonormal rows, ordered by decreasing variance.
  Eigen::MatrixXd components;
  /// Variance (n-1 denominator) along each component; nonincreasing.
  Eigen::VectorXd explained_variance;
  Eigen::VectorXd mean;

  Points transform(const Points& data) const;
};

/**
 * Principal components of the rows of `data`.
 *
 * Uses a covariance eigendecomposition up to 512 columns and a thin SVD of the centred
 * data beyond. Component signs are fixed so each component's largest-magnitude entry is
 * positive. When the data has lower rank than requested, the trailing components are an
 * orthonormal completion with zero variance.
 */
PcaModel pca_fit(const Points& data, Index n_components, Index drop_top = 0);

// ---------------------------------------------------------------------------
// UMAP

struct UmapConfig
{
  Index n_neighbors = 90;
  Index n_components = 2;
  double min_dist = 0.9;
  double spread = 1.0;
  int n_epochs = 200;
  int negative_sample_rate = 5;
  double learning_rate = 1.0;
  double repulsion_strength = 1.0;
  std::uint64_t seed = 0;
  Index exact_knn_max_rows = 5000;
};

/// Per-point smoothing: rho = distance to the nearest neighbour, sigma from bisection.
struct SmoothKnn
{
  std::vector<double> rho;
  std::vector<double> sigma;
  /// |sum_j exp(-max(0, d_ij - rho_i) / sigma_i) - log2(k)| per point.
  std::vector<double> residual;
};

SmoothKnn smooth_knn_distances(const KnnGraph& knn, double tolerance = 1e-5, int max_iterations = 64);

/// Symmetrized fuzzy graph: w_ij + w_ji - w_ij * w_ji.
Eigen::SparseMatrix<double> fuzzy_simplicial_set(const KnnGraph& knn, const SmoothKnn& smooth);

/// Least-squares (a, b) so that 1 / (1 + a d^(2b)) follows the min_dist-shaped target curve.
std::pair<double, double> fit_ab(double spread, double min_dist);

/// Component id per vertex; returns the number of components.
Index connected_components(const Eigen::SparseMatrix<double>& graph, std::vector<Index>& labels);

struct SpectralLayout
{
  Points coords;
  bool ok = true;
};

/**
 * Spectral embedding from the normalized Laplacian's smallest nontrivial eigenvectors,
 * computed per connected component. Components are placed in disjoint regions.
 */
SpectralLayout spectral_layout(const Eigen::SparseMatrix<double>& graph, Index n_components,
                               std::uint64_t seed);

struct UmapResult
{
  Points embedding;
  SmoothKnn smoothing;
  double a = 0.0;
  double b = 0.0;
  Index graph_components = 1;
  bool spectral_init = true;
  std::vector<std::string> warnings;
};

UmapResult umap_fit(const Points& data, const UmapConfig& cfg);

}  // namespace voices
