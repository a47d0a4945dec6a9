#include "voices/cluster.hpp"

#include "voices/csv.hpp"
#include "voices/serialize.hpp"

#include <fstream>

namespace voices
{

std::string to_string(ClusterAlgorithm algorithm)
{
  switch (algorithm) {
    case ClusterAlgorithm::kmeans: return "kmeans";
    case ClusterAlgorithm::gmm: return "gmm";
    case ClusterAlgorithm::hdbscan: return "hdbscan";
  }
  return "kmeans";
}

ClusterAlgorithm cluster_algorithm_from_string(const std::string& name)
{
  if (name == "kmeans") return ClusterAlgorithm::kmeans;
  if (name == "gmm") return ClusterAlgorithm::gmm;
  if (name == "hdbscan") return ClusterAlgorithm::hdbscan;
  throw ConfigError("unknown clustering algorithm '" + name + "' (expected kmeans, gmm or hdbscan)");
}

std::string to_string(CovarianceType type)
{
  return type == CovarianceType::full ? "full" : "diagonal";
}

CovarianceType covariance_type_from_string(const std::string& name)
{
  if (name == "full") return CovarianceType::full;
  if (name == "diagonal" || name == "diag") return CovarianceType::diagonal;
  throw ConfigError("unknown covariance type '" + name + "' (expected full or diagonal)");
}

void check_cluster_config(const ClusterConfig& cfg, Index rows)
{
  if (!(cfg.tol > 0.0)) throw ConfigError("cluster.tol: must be > 0");
  if (cfg.max_iter < 1) throw ConfigError("cluster.max_iter: must be >= 1");
  if (cfg.algorithm == ClusterAlgorithm::hdbscan) {
    if (!cfg.allow_out_of_range) {
      if (cfg.hdbscan_min_cluster_size < 2 || cfg.hdbscan_min_cluster_size > 100)
        throw ConfigError("cluster.hdbscan_min_cluster_size: must lie in [2, 100]");
      if (cfg.hdbscan_min_samples < 2 || cfg.hdbscan_min_samples > 100)
        throw ConfigError("cluster.hdbscan_min_samples: must lie in [2, 100]");
      if (!(cfg.hdbscan_eps >= 0.0 && cfg.hdbscan_eps <= 1.0))
        throw ConfigError("cluster.hdbscan_eps: must lie in [0, 1]");
    }
    if (rows <= cfg.hdbscan_min_samples)
      throw ConfigError("cluster.hdbscan_min_samples: rows (" + std::to_string(rows) +
                        ") must exceed min_samples (" + std::to_string(cfg.hdbscan_min_samples) + ")");
    return;
  }
  if (cfg.k < 1) throw ConfigError("cluster.k: must be >= 1");
  if (!cfg.allow_out_of_range && cfg.k > 19) throw ConfigError("cluster.k: must lie in [1, 19]");
  if (cfg.k > rows)
    throw ConfigError("cluster.k: " + std::to_string(cfg.k) + " exceeds the row count " + std::to_string(rows));
  if (cfg.n_init < 1) throw ConfigError("cluster.n_init: must be >= 1");
  if (cfg.algorithm == ClusterAlgorithm::gmm && !(cfg.gmm_ridge > 0.0))
    throw ConfigError("cluster.gmm_ridge: must be > 0");
}

std::vector<int> canonicalize_labels(std::vector<int>& labels, int n_old)
{
  std::vector<int> mapping(static_cast<std::size_t>(std::max(n_old, 0)), kNoise);
  int next = 0;
  for (int& l : labels) {
    if (l == kNoise) continue;
    if (l < 0 || l >= n_old) throw DataError("cluster label " + std::to_string(l) + " out of range");
    auto& m = mapping[static_cast<std::size_t>(l)];
    if (m == kNoise) m = next++;
    l = m;
  }
  return mapping;
}

void flag_degenerate(ClusterAssignment& assignment)
{
  const auto rows = assignment.labels.size();
  if (assignment.n_clusters == 0) {
    assignment.degenerate = true;
    assignment.degenerate_reason = "all points are noise";
  } else if (static_cast<std::size_t>(assignment.n_clusters) * 2 > rows) {
    assignment.degenerate = true;
    assignment.degenerate_reason = "more clusters than half the rows";
  }
}

Points cluster_means(const Points& data, const std::vector<int>& labels, int n_clusters)
{
  Points means = Points::Zero(n_clusters, data.cols());
  std::vector<double> counts(static_cast<std::size_t>(n_clusters), 0.0);
  for (Index i = 0; i < data.rows(); ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    if (l == kNoise) continue;
    means.row(l) += data.row(i);
    counts[static_cast<std::size_t>(l)] += 1.0;
  }
  for (int c = 0; c < n_clusters; ++c)
    if (counts[static_cast<std::size_t>(c)] > 0.0) means.row(c) /= counts[static_cast<std::size_t>(c)];
  return means;
}

ClusterAssignment cluster(const Points& data, const ClusterConfig& cfg)
{
  check_cluster_config(cfg, data.rows());
  switch (cfg.algorithm) {
    case ClusterAlgorithm::kmeans: return kmeans(data, cfg);
    case ClusterAlgorithm::gmm: return gmm(data, cfg);
    case ClusterAlgorithm::hdbscan: return hdbscan(data, cfg);
  }
  throw ConfigError("unknown clustering algorithm");
}

void save_assignment(const std::filesystem::path& path, const std::vector<RowKey>& row_index,
                     const ClusterAssignment& assignment, const ClusterConfig& cfg)
{
  if (row_index.size() != assignment.labels.size())
    throw DataError("assignment has " + std::to_string(assignment.labels.size()) + " labels for " +
                    std::to_string(row_index.size()) + " rows");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "annotator_id,item_id,label\n";
  for (std::size_t r = 0; r < row_index.size(); ++r)
    out << csv::join({row_index[r].annotator_id, row_index[r].item_id, std::to_string(assignment.labels[r])}) << '\n';

  std::ofstream side(path.string() + ".json");
  if (!side) throw DataError("cannot write " + path.string() + ".json");
  Json j = assignment;
  j["config"] = cfg;
  side << j.dump(2) << '\n';
}

ClusterAssignment load_assignment(const std::filesystem::path& path, const std::vector<RowKey>& row_index)
{
  auto rows = csv::read_file(path);
  std::size_t first = (!rows.empty() && rows[0].size() == 3 && rows[0][0] == "annotator_id") ? 1 : 0;
  if (rows.size() - first != row_index.size())
    throw DataError(path.string() + ": " + std::to_string(rows.size() - first) + " labels for " +
                    std::to_string(row_index.size()) + " rows");

  ClusterAssignment out;
  const std::filesystem::path sidecar = path.string() + ".json";
  if (std::filesystem::exists(sidecar)) {
    std::ifstream in(sidecar);
    try {
      out = Json::parse(in).get<ClusterAssignment>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(sidecar.string() + ": " + e.what());
    }
  }
  out.labels.clear();
  int max_label = -1;
  for (std::size_t r = first; r < rows.size(); ++r) {
    const auto& rec = rows[r];
    const auto& key = row_index[r - first];
    if (rec.size() != 3 || rec[0] != key.annotator_id || rec[1] != key.item_id)
      throw DataError(path.string() + ": record " + std::to_string(r - first) + " does not match row (" +
                      key.annotator_id + ", " + key.item_id + ")");
    int label;
    try {
      label = std::stoi(rec[2]);
    } catch (const std::exception&) {
      throw DataError(path.string() + ": bad label '" + rec[2] + "'");
    }
    if (label < kNoise) throw DataError(path.string() + ": bad label '" + rec[2] + "'");
    out.labels.push_back(label);
    max_label = std::max(max_label, label);
  }
  std::vector<bool> present(static_cast<std::size_t>(max_label + 1), false);
  for (int l : out.labels)
    if (l != kNoise) present[static_cast<std::size_t>(l)] = true;
  for (std::size_t c = 0; c < present.size(); ++c)
    if (!present[c]) throw DataError(path.string() + ": cluster ids must be contiguous; " + std::to_string(c) + " is unused");
  out.n_clusters = max_label + 1;
  out.degenerate = false;
  out.degenerate_reason.clear();
  flag_degenerate(out);
  return out;
}

}  // namespace voices
