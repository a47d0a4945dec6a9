#include "voices/serialize.hpp"

#include <cmath>
#include <limits>

namespace voices
{

Json points_to_json(const Points& m)
{
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(real_to_json(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Points points_from_json(const Json& j)
{
  const auto rows = static_cast<Index>(j.size());
  const Index cols = rows == 0 ? 0 : static_cast<Index>(j.at(0).size());
  Points m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Index>(row.size()) != cols) throw DataError("ragged matrix in JSON");
    for (Index c = 0; c < cols; ++c) m(i, c) = real_from_json(row.at(static_cast<std::size_t>(c)));
  }
  return m;
}

Json matrix_to_json(const Eigen::MatrixXd& m) { return points_to_json(m); }
Eigen::MatrixXd matrix_from_json(const Json& j) { return points_from_json(j); }

Json vector_to_json(const Eigen::VectorXd& v)
{
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(real_to_json(v(i)));
  return out;
}

Eigen::VectorXd vector_from_json(const Json& j)
{
  Eigen::VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = real_from_json(j[i]);
  return v;
}

Json real_to_json(double x)
{
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double real_from_json(const Json& j)
{
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw DataError("expected a number, got " + j.dump());
}

namespace
{

template <typename T>
void read_if(const Json& j, const char* key, T& out)
{
  if (auto it = j.find(key); it != j.end()) out = it->template get<T>();
}

std::vector<double> reals_from_json(const Json& j)
{
  std::vector<double> out;
  for (const auto& x : j) out.push_back(real_from_json(x));
  return out;
}

Json reals_to_json(const std::vector<double>& xs)
{
  Json out = Json::array();
  for (double x : xs) out.push_back(real_to_json(x));
  return out;
}

}  // namespace

void to_json(Json& j, const ReductionConfig& cfg)
{
  j = Json{{"method", to_string(cfg.method)},
           {"n_components", cfg.n_components},
           {"umap_neighbors", cfg.umap_neighbors},
           {"umap_min_dist", cfg.umap_min_dist},
           {"umap_epochs", cfg.umap_epochs},
           {"pca_drop_top", cfg.pca_drop_top},
           {"seed", cfg.seed}};
}

void from_json(const Json& j, ReductionConfig& cfg)
{
  if (auto it = j.find("method"); it != j.end()) cfg.method = reduction_method_from_string(it->get<std::string>());
  read_if(j, "n_components", cfg.n_components);
  read_if(j, "umap_neighbors", cfg.umap_neighbors);
  read_if(j, "umap_min_dist", cfg.umap_min_dist);
  read_if(j, "umap_epochs", cfg.umap_epochs);
  read_if(j, "pca_drop_top", cfg.pca_drop_top);
  read_if(j, "seed", cfg.seed);
}

void to_json(Json& j, const ClusterConfig& cfg)
{
  j = Json{{"algorithm", to_string(cfg.algorithm)},
           {"k", cfg.k},
           {"hdbscan_min_cluster_size", cfg.hdbscan_min_cluster_size},
           {"hdbscan_min_samples", cfg.hdbscan_min_samples},
           {"hdbscan_eps", cfg.hdbscan_eps},
           {"hdbscan_allow_single_cluster", cfg.hdbscan_allow_single_cluster},
           {"max_iter", cfg.max_iter},
           {"tol", cfg.tol},
           {"seed", cfg.seed},
           {"n_init", cfg.n_init},
           {"covariance", to_string(cfg.covariance)},
           {"gmm_ridge", cfg.gmm_ridge},
           {"allow_out_of_range", cfg.allow_out_of_range}};
}

void from_json(const Json& j, ClusterConfig& cfg)
{
  if (auto it = j.find("algorithm"); it != j.end()) cfg.algorithm = cluster_algorithm_from_string(it->get<std::string>());
  read_if(j, "k", cfg.k);
  read_if(j, "hdbscan_min_cluster_size", cfg.hdbscan_min_cluster_size);
  read_if(j, "hdbscan_min_samples", cfg.hdbscan_min_samples);
  read_if(j, "hdbscan_eps", cfg.hdbscan_eps);
  read_if(j, "hdbscan_allow_single_cluster", cfg.hdbscan_allow_single_cluster);
  read_if(j, "max_iter", cfg.max_iter);
  read_if(j, "tol", cfg.tol);
  read_if(j, "seed", cfg.seed);
  read_if(j, "n_init", cfg.n_init);
  if (auto it = j.find("covariance"); it != j.end()) cfg.covariance = covariance_type_from_string(it->get<std::string>());
  read_if(j, "gmm_ridge", cfg.gmm_ridge);
  read_if(j, "allow_out_of_range", cfg.allow_out_of_range);
}

void to_json(Json& j, const KmeansDetail& d)
{
  j = Json{{"inertia", d.inertia},
           {"inertia_trace", d.inertia_trace},
           {"iterations", d.iterations},
           {"converged", d.converged}};
}

void from_json(const Json& j, KmeansDetail& d)
{
  j.at("inertia").get_to(d.inertia);
  j.at("inertia_trace").get_to(d.inertia_trace);
  j.at("iterations").get_to(d.iterations);
  j.at("converged").get_to(d.converged);
}

void to_json(Json& j, const GmmDetail& d)
{
  Json covs = Json::array();
  for (const auto& c : d.covariances) covs.push_back(matrix_to_json(c));
  j = Json{{"weights", vector_to_json(d.weights)},
           {"means", points_to_json(d.means)},
           {"covariances", std::move(covs)},
           {"log_likelihood_trace", reals_to_json(d.log_likelihood_trace)},
           {"iterations", d.iterations},
           {"converged", d.converged}};
}

void from_json(const Json& j, GmmDetail& d)
{
  d.weights = vector_from_json(j.at("weights"));
  d.means = points_from_json(j.at("means"));
  d.covariances.clear();
  for (const auto& c : j.at("covariances")) d.covariances.push_back(matrix_from_json(c));
  d.log_likelihood_trace = reals_from_json(j.at("log_likelihood_trace"));
  j.at("iterations").get_to(d.iterations);
  j.at("converged").get_to(d.converged);
}

void to_json(Json& j, const HdbscanDetail& d)
{
  Json mst = Json::array();
  for (const auto& e : d.mst) mst.push_back(Json::array({e.a, e.b, real_to_json(e.weight)}));
  Json tree = Json::array();
  for (const auto& e : d.condensed_tree)
    tree.push_back(Json::array({e.parent, e.child, real_to_json(e.lambda), e.child_size}));
  j = Json{{"core_distances", reals_to_json(d.core_distances)},
           {"mst_weight", d.mst_weight},
           {"stabilities", reals_to_json(d.stabilities)},
           {"mst", std::move(mst)},
           {"condensed_tree", std::move(tree)}};
}

void from_json(const Json& j, HdbscanDetail& d)
{
  d.core_distances = reals_from_json(j.at("core_distances"));
  d.mst_weight = real_from_json(j.at("mst_weight"));
  d.stabilities = reals_from_json(j.at("stabilities"));
  d.mst.clear();
  for (const auto& e : j.at("mst"))
    d.mst.push_back({e.at(0).get<Index>(), e.at(1).get<Index>(), real_from_json(e.at(2))});
  d.condensed_tree.clear();
  for (const auto& e : j.at("condensed_tree"))
    d.condensed_tree.push_back(
        {e.at(0).get<Index>(), e.at(1).get<Index>(), real_from_json(e.at(2)), e.at(3).get<Index>()});
}

void to_json(Json& j, const ClusterAssignment& a)
{
  j = Json{{"algorithm", to_string(a.algorithm)},
           {"n_clusters", a.n_clusters},
           {"rows", a.labels.size()},
           {"degenerate", a.degenerate},
           {"degenerate_reason", a.degenerate_reason}};
  j["centroids"] = a.centroids ? points_to_json(*a.centroids) : Json(nullptr);
  std::visit(
      [&](const auto& detail) {
        using T = std::decay_t<decltype(detail)>;
        if constexpr (std::is_same_v<T, std::monostate>)
          j["model_detail"] = nullptr;
        else
          j["model_detail"] = detail;
      },
      a.model_detail);
}

void from_json(const Json& j, ClusterAssignment& a)
{
  a.algorithm = cluster_algorithm_from_string(j.at("algorithm").get<std::string>());
  j.at("n_clusters").get_to(a.n_clusters);
  read_if(j, "degenerate", a.degenerate);
  read_if(j, "degenerate_reason", a.degenerate_reason);
  a.centroids.reset();
  if (auto it = j.find("centroids"); it != j.end() && !it->is_null()) a.centroids = points_from_json(*it);
  a.model_detail = std::monostate{};
  if (auto it = j.find("model_detail"); it != j.end() && !it->is_null()) {
    switch (a.algorithm) {
    case ClusterAlgorithm::kmeans: a.model_detail = it->get<KmeansDetail>(); break;
    case ClusterAlgorithm::gmm: a.model_detail = it->get<GmmDetail>(); break;
    case ClusterAlgorithm::hdbscan: a.model_detail = it->get<HdbscanDetail>(); break;
    }
  }
}

void to_json(Json& j, const ClusterComposition& c)
{
  j = Json{{"cluster_id", c.cluster_id},
           {"size", c.size},
           {"majority_value", c.majority_value},
           {"purity", c.purity},
           {"distribution", c.distribution},
           {"prototypical", c.prototypical},
           {"deviation", c.deviation},
           {"voice_type", to_string(c.voice_type)}};
}

void from_json(const Json& j, ClusterComposition& c)
{
  j.at("cluster_id").get_to(c.cluster_id);
  j.at("size").get_to(c.size);
  j.at("majority_value").get_to(c.majority_value);
  j.at("purity").get_to(c.purity);
  c.distribution = j.at("distribution").get<Distribution>();
  j.at("prototypical").get_to(c.prototypical);
  read_if(j, "deviation", c.deviation);
  c.voice_type = voice_type_from_string(j.at("voice_type").get<std::string>());
}

void to_json(Json& j, const AttributeReport& r)
{
  j = Json{{"average_purity", r.average_purity},
           {"prototypical_pct", r.prototypical_pct},
           {"baseline", r.baseline},
           {"per_cluster", r.per_cluster}};
}

void from_json(const Json& j, AttributeReport& r)
{
  j.at("average_purity").get_to(r.average_purity);
  j.at("prototypical_pct").get_to(r.prototypical_pct);
  r.baseline = j.at("baseline").get<Distribution>();
  j.at("per_cluster").get_to(r.per_cluster);
}

void to_json(Json& j, const ApcsResult& r)
{
  j = Json{{"value", r.value}, {"standard_error", r.standard_error}, {"exact", r.exact}, {"pairs", r.pairs}};
}

void from_json(const Json& j, ApcsResult& r)
{
  j.at("value").get_to(r.value);
  j.at("standard_error").get_to(r.standard_error);
  j.at("exact").get_to(r.exact);
  j.at("pairs").get_to(r.pairs);
}

void to_json(Json& j, const ValidationReport& r)
{
  Json voices = Json::array();
  for (auto v : r.voice_types) voices.push_back(to_string(v));
  j = Json{{"n_clusters", r.n_clusters},
           {"silhouette", real_to_json(r.silhouette)},
           {"davies_bouldin", real_to_json(r.davies_bouldin)},
           {"noise_fraction", r.noise_fraction},
           {"degenerate", r.degenerate},
           {"degenerate_reason", r.degenerate_reason},
           {"voice_types", std::move(voices)},
           {"per_attribute", r.per_attribute}};
  j["apcs"] = r.apcs ? Json(*r.apcs) : Json(nullptr);
  j["ari"] = r.ari ? Json(*r.ari) : Json(nullptr);
  j["f1_macro"] = r.f1 ? Json(*r.f1) : Json(nullptr);
}

void from_json(const Json& j, ValidationReport& r)
{
  j.at("n_clusters").get_to(r.n_clusters);
  r.silhouette = real_from_json(j.at("silhouette"));
  r.davies_bouldin = real_from_json(j.at("davies_bouldin"));
  j.at("noise_fraction").get_to(r.noise_fraction);
  read_if(j, "degenerate", r.degenerate);
  read_if(j, "degenerate_reason", r.degenerate_reason);
  r.voice_types.clear();
  for (const auto& v : j.at("voice_types")) r.voice_types.push_back(voice_type_from_string(v.get<std::string>()));
  r.per_attribute = j.at("per_attribute").get<std::map<std::string, AttributeReport>>();
  r.apcs.reset();
  r.ari.reset();
  r.f1.reset();
  if (auto it = j.find("apcs"); it != j.end() && !it->is_null()) r.apcs = it->get<ApcsResult>();
  if (auto it = j.find("ari"); it != j.end() && !it->is_null()) r.ari = it->get<double>();
  if (auto it = j.find("f1_macro"); it != j.end() && !it->is_null()) r.f1 = it->get<double>();
}

void to_json(Json& j, const TrialConfig& c) { j = Json{{"reduction", c.reduction}, {"cluster", c.cluster}}; }

void from_json(const Json& j, TrialConfig& c)
{
  c.reduction = j.at("reduction").get<ReductionConfig>();
  c.cluster = j.at("cluster").get<ClusterConfig>();
}

void to_json(Json& j, const TrialResult& r)
{
  j = Json{{"index", r.index},
           {"config", r.config},
           {"config_hash", r.hash},
           {"wall_time", r.wall_time},
           {"degenerate", r.degenerate},
           {"reason", r.reason},
           {"report", r.report}};
}

void from_json(const Json& j, TrialResult& r)
{
  j.at("index").get_to(r.index);
  r.config = j.at("config").get<TrialConfig>();
  j.at("config_hash").get_to(r.hash);
  j.at("wall_time").get_to(r.wall_time);
  j.at("degenerate").get_to(r.degenerate);
  j.at("reason").get_to(r.reason);
  r.report = j.at("report").get<ValidationReport>();
}

void to_json(Json& j, const ValidationOptions& o)
{
  j = Json{{"attributes", o.attributes},
           {"averaging", to_string(o.averaging)},
           {"rule", to_string(o.rule)},
           {"threshold", o.threshold},
           {"baseline_weighting", to_string(o.baseline_weighting)},
           {"noise_in_external", o.noise_in_external},
           {"apcs", o.compute_apcs},
           {"seed", o.seed}};
}

void from_json(const Json& j, ValidationOptions& o)
{
  read_if(j, "attributes", o.attributes);
  if (auto it = j.find("averaging"); it != j.end()) o.averaging = purity_averaging_from_string(it->get<std::string>());
  if (auto it = j.find("rule"); it != j.end()) o.rule = prototype_rule_from_string(it->get<std::string>());
  read_if(j, "threshold", o.threshold);
  if (auto it = j.find("baseline_weighting"); it != j.end())
    o.baseline_weighting = distribution_weighting_from_string(it->get<std::string>());
  read_if(j, "noise_in_external", o.noise_in_external);
  read_if(j, "apcs", o.compute_apcs);
  read_if(j, "seed", o.seed);
}

void to_json(Json& j, const SweepSpec& s)
{
  Json methods = Json::array();
  for (auto m : s.methods) methods.push_back(to_string(m));
  Json algorithms = Json::array();
  for (auto a : s.algorithms) algorithms.push_back(to_string(a));
  j = Json{{"mode", to_string(s.mode)},
           {"methods", std::move(methods)},
           {"n_components", s.n_components},
           {"umap_neighbors", s.umap_neighbors},
           {"umap_min_dist", s.umap_min_dist},
           {"algorithms", std::move(algorithms)},
           {"k", s.k},
           {"hdbscan_eps", s.hdbscan_eps},
           {"hdbscan_min_samples", s.hdbscan_min_samples},
           {"hdbscan_min_cluster_size", s.hdbscan_min_cluster_size}};
  j["budget_seconds"] = s.budget_seconds ? Json(*s.budget_seconds) : Json(nullptr);
  j["max_trials"] = s.max_trials ? Json(*s.max_trials) : Json(nullptr);
  j["seed"] = s.seed;
  j["parallelism"] = s.parallelism;
  j["allow_out_of_range"] = s.allow_out_of_range;
  j["cache_size"] = s.cache_size;
  j["score_space"] = to_string(s.score_space);
}

void from_json(const Json& j, SweepSpec& s)
{
  if (auto it = j.find("mode"); it != j.end()) s.mode = sweep_mode_from_string(it->get<std::string>());
  if (auto it = j.find("methods"); it != j.end()) {
    s.methods.clear();
    for (const auto& m : *it) s.methods.push_back(reduction_method_from_string(m.get<std::string>()));
  }
  read_if(j, "n_components", s.n_components);
  read_if(j, "umap_neighbors", s.umap_neighbors);
  read_if(j, "umap_min_dist", s.umap_min_dist);
  if (auto it = j.find("algorithms"); it != j.end()) {
    s.algorithms.clear();
    for (const auto& a : *it) s.algorithms.push_back(cluster_algorithm_from_string(a.get<std::string>()));
  }
  read_if(j, "k", s.k);
  read_if(j, "hdbscan_eps", s.hdbscan_eps);
  read_if(j, "hdbscan_min_samples", s.hdbscan_min_samples);
  read_if(j, "hdbscan_min_cluster_size", s.hdbscan_min_cluster_size);
  if (auto it = j.find("budget_seconds"); it != j.end() && !it->is_null()) s.budget_seconds = it->get<double>();
  if (auto it = j.find("max_trials"); it != j.end() && !it->is_null()) s.max_trials = it->get<std::size_t>();
  read_if(j, "seed", s.seed);
  read_if(j, "parallelism", s.parallelism);
  read_if(j, "allow_out_of_range", s.allow_out_of_range);
  read_if(j, "cache_size", s.cache_size);
  if (auto it = j.find("score_space"); it != j.end()) s.score_space = score_space_from_string(it->get<std::string>());
}

}  // namespace voices
