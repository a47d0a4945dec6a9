#pragma once

#include "voices/cluster.hpp"
#include "voices/corpus.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace voices
{

namespace detail
{

/// Maps arbitrary non-negative labels to 0..m-1 (noise excluded); returns m.
int compact_labels(std::span<const int> labels, std::vector<int>& compact);

/**
 * Calls sink(i, j, d) with the Euclidean distance of every ordered pair i != j among
 * `rows`. Wide inputs go through blocked Gram products of the centred data.
 */
template <typename Scalar, typename Sink>
void for_each_distance(const RowMatrix<Scalar>& data, const std::vector<Index>& rows, Sink&& sink)
{
  const auto n = static_cast<Index>(rows.size());
  const Index dim = data.cols();
  RowMatrix<Scalar> x(n, dim);
  for (Index r = 0; r < n; ++r) x.row(r) = data.row(rows[static_cast<std::size_t>(r)]);
  if (dim <= 16) {
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) {
        const double d = static_cast<double>((x.row(i) - x.row(j)).norm());
        sink(i, j, d);
        sink(j, i, d);
      }
    return;
  }
  x.rowwise() -= x.colwise().mean();
  const Vector<Scalar> norms = x.rowwise().squaredNorm();
  const Index block = 256;
  for (Index start = 0; start < n; start += block) {
    const Index len = std::min(block, n - start);
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> gram = x.middleRows(start, len) * x.transpose();
    for (Index r = 0; r < len; ++r) {
      const Index i = start + r;
      for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double d2 = static_cast<double>(norms(i) + norms(j) - Scalar(2) * gram(r, j));
        sink(i, j, d2 > 0.0 ? std::sqrt(d2) : 0.0);
      }
    }
  }
}

}  // namespace detail

/**
 * Mean silhouette over non-noise rows. Points in singleton clusters score 0.
 * Throws DegenerateError ("silhouette undefined") with fewer than two clusters.
 */
template <typename Derived>
double silhouette(const Eigen::MatrixBase<Derived>& data, std::span<const int> labels)
{
  using Scalar = typename Derived::Scalar;
  if (static_cast<std::size_t>(data.rows()) != labels.size())
    throw DataError("silhouette: label count does not match rows");
  std::vector<int> compact;
  const int k = detail::compact_labels(labels, compact);
  if (k < 2) throw DegenerateError("silhouette undefined: fewer than 2 clusters");

  std::vector<Index> rows;
  std::vector<int> cluster_of;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (compact[i] != kNoise) {
      rows.push_back(static_cast<Index>(i));
      cluster_of.push_back(compact[i]);
    }
  const auto n = rows.size();
  std::vector<double> sizes(static_cast<std::size_t>(k), 0.0);
  for (int c : cluster_of) sizes[static_cast<std::size_t>(c)] += 1.0;

  // sums(i, c) = total distance from point i to members of cluster c.
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Index>(n), k);
  const RowMatrix<Scalar> dense = data;
  detail::for_each_distance<Scalar>(dense, rows, [&](Index i, Index j, double d) {
    sums(i, cluster_of[static_cast<std::size_t>(j)]) += d;
  });

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int own = cluster_of[i];
    if (sizes[static_cast<std::size_t>(own)] <= 1.0) continue;
    const double a = sums(static_cast<Index>(i), own) / (sizes[static_cast<std::size_t>(own)] - 1.0);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c)
      if (c != own) b = std::min(b, sums(static_cast<Index>(i), c) / sizes[static_cast<std::size_t>(c)]);
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

/**
 * Davies-Bouldin index over non-noise rows. Coincident centroids give +inf.
 */
template <typename Derived>
double davies_bouldin(const Eigen::MatrixBase<Derived>& data, std::span<const int> labels)
{
  if (static_cast<std::size_t>(data.rows()) != labels.size())
    throw DataError("davies_bouldin: label count does not match rows");
  std::vector<int> compact;
  const int k = detail::compact_labels(labels, compact);
  if (k < 2) throw DegenerateError("davies-bouldin undefined: fewer than 2 clusters");

  const Index dim = data.cols();
  Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(k, dim);
  std::vector<double> sizes(static_cast<std::size_t>(k), 0.0);
  for (Index i = 0; i < data.rows(); ++i) {
    const int c = compact[static_cast<std::size_t>(i)];
    if (c == kNoise) continue;
    centroids.row(c) += data.row(i).template cast<double>();
    sizes[static_cast<std::size_t>(c)] += 1.0;
  }
  for (int c = 0; c < k; ++c) centroids.row(c) /= sizes[static_cast<std::size_t>(c)];

  std::vector<double> scatter(static_cast<std::size_t>(k), 0.0);
  for (Index i = 0; i < data.rows(); ++i) {
    const int c = compact[static_cast<std::size_t>(i)];
    if (c == kNoise) continue;
    scatter[static_cast<std::size_t>(c)] += (data.row(i).template cast<double>() - centroids.row(c)).norm();
  }
  for (int c = 0; c < k; ++c) scatter[static_cast<std::size_t>(c)] /= sizes[static_cast<std::size_t>(c)];

  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    double worst = 0.0;
    for (int j = 0; j < k; ++j) {
      if (j == i) continue;
      const double sep = (centroids.row(i) - centroids.row(j)).norm();
      const double ratio = sep > 0.0 ? (scatter[static_cast<std::size_t>(i)] + scatter[static_cast<std::size_t>(j)]) / sep
                                     : std::numeric_limits<double>::infinity();
      worst = std::max(worst, ratio);
    }
    total += worst;
  }
  return total / static_cast<double>(k);
}

// ---------------------------------------------------------------------------
// External validity

enum class PurityAveraging
{
  unweighted,
  size_weighted
};

enum class PrototypeRule
{
  /// |cluster majority share - baseline share of that value| > threshold.
  majority_share,
  /// Total-variation distance between cluster and baseline distributions > threshold.
  total_variation
};

std::string to_string(PurityAveraging averaging);
PurityAveraging purity_averaging_from_string(const std::string& name);
std::string to_string(PrototypeRule rule);
PrototypeRule prototype_rule_from_string(const std::string& name);

enum class VoiceType
{
  none,
  majority,
  minority,
  inter_minority
};

std::string to_string(VoiceType type);
VoiceType voice_type_from_string(const std::string& name);

struct ClusterComposition
{
  int cluster_id = 0;
  std::size_t size = 0;
  std::string majority_value;
  double purity = 0.0;
  Distribution distribution;
  bool prototypical = false;
  /// Signed share difference of the majority value against the baseline.
  double deviation = 0.0;
  VoiceType voice_type = VoiceType::none;
};

/**
 * Attribute-value composition of every non-empty cluster. `values` holds one attribute
 * value per row. Noise rows are skipped unless include_noise is set, in which case they
 * form a pseudo-cluster with id kNoise.
 */
std::vector<ClusterComposition> purity_per_cluster(std::span<const int> labels,
                                                   const std::vector<std::string>& values,
                                                   bool include_noise = false);
std::vector<ClusterComposition> purity_per_cluster(const ClusterAssignment& assignment, const Dataset& ds,
                                                   const std::string& attribute, bool include_noise = false);

double average_purity(const std::vector<ClusterComposition>& clusters,
                      PurityAveraging averaging = PurityAveraging::unweighted);

/// Sets each cluster's prototypical flag; returns the prototypical fraction.
double prototypical_flags(std::vector<ClusterComposition>& clusters, const Distribution& baseline,
                          PrototypeRule rule = PrototypeRule::majority_share, double threshold = 0.10);

/// Evidence about one cluster under one attribute, as used for voice typing.
struct VoiceEvidence
{
  bool prototypical = false;
  std::string value;
  double share = 0.0;
  Distribution baseline;
};

/**
 * inter-minority: over-represents a baseline-minority value on two or more attributes;
 * minority: on exactly one; majority: prototypical only through the baseline-majority
 * value; none otherwise. A value counts as over-represented when the cluster is
 * prototypical for the attribute and the value's share exceeds its baseline share.
 */
VoiceType voice_type(const std::vector<VoiceEvidence>& evidence);

struct ApcsResult
{
  double value = 0.0;
  double standard_error = 0.0;
  bool exact = true;
  std::size_t pairs = 0;
};

/// Mean pairwise cosine similarity; exact below exact_max_rows, else sampled pairs.
ApcsResult apcs(const Points& data, std::uint64_t seed = 0, Index exact_max_rows = 2000,
                std::size_t samples = 200000);

/// Unweighted mean of per-label F1; labels absent from both gold and predictions are skipped.
double f1_macro(const std::vector<AnnotationRecord>& records);

/// Adjusted Rand index; every distinct label (kNoise included) is a class.
double adjusted_rand(std::span<const int> a, std::span<const int> b);

struct AttributeReport
{
  double average_purity = 0.0;
  double prototypical_pct = 0.0;
  Distribution baseline;
  std::vector<ClusterComposition> per_cluster;
};

struct ValidationOptions
{
  /// Attributes to evaluate; all dataset attributes when empty.
  std::vector<std::string> attributes;
  PurityAveraging averaging = PurityAveraging::unweighted;
  PrototypeRule rule = PrototypeRule::majority_share;
  double threshold = 0.10;
  DistributionWeighting baseline_weighting = DistributionWeighting::per_row;
  bool noise_in_external = false;
  bool compute_apcs = false;
  std::uint64_t seed = 0;
};

struct ValidationReport
{
  int n_clusters = 0;
  double silhouette = 0.0;
  double davies_bouldin = 0.0;
  std::map<std::string, AttributeReport> per_attribute;
  /// Voice type per cluster id.
  std::vector<VoiceType> voice_types;
  std::optional<ApcsResult> apcs;
  double noise_fraction = 0.0;
  std::optional<double> ari;
  std::optional<double> f1;
  bool degenerate = false;
  std::string degenerate_reason;
};

/**
 * Full metric bundle. `scored` is the space internal metrics are computed in (normally
 * the clustered, reduced space). Throws DegenerateError when fewer than two clusters
 * remain after noise removal.
 */
ValidationReport validate(const Points& scored, const ClusterAssignment& assignment, const Dataset& ds,
                          const ValidationOptions& options, const std::vector<int>* ground_truth = nullptr);

}  // namespace voices
