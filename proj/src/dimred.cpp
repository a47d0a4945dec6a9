#include "voices/dimred.hpp"

#include "voices/serialize.hpp"

#include <fstream>

namespace voices
{

std::string to_string(ReductionMethod method)
{
  switch (method) {
    case ReductionMethod::none: return "none";
    case ReductionMethod::pca: return "pca";
    case ReductionMethod::umap: return "umap";
  }
  return "none";
}

ReductionMethod reduction_method_from_string(const std::string& name)
{
  if (name == "none") return ReductionMethod::none;
  if (name == "pca") return ReductionMethod::pca;
  if (name == "umap") return ReductionMethod::umap;
  throw ConfigError("unknown reduction method '" + name + "' (expected none, pca or umap)");
}

void check_reduction_config(const ReductionConfig& cfg, Index rows, Index dim)
{
  if (cfg.method == ReductionMethod::none) return;
  if (cfg.n_components < 1) throw ConfigError("reduction.n_components: must be positive");
  if (cfg.n_components >= dim)
    throw ConfigError("reduction.n_components: " + std::to_string(cfg.n_components) +
                      " must be smaller than the input dimension " + std::to_string(dim));
  if (cfg.method == ReductionMethod::pca) {
    if (rows < 2) throw DataError("PCA needs at least 2 rows");
    if (cfg.pca_drop_top < 0) throw ConfigError("reduction.pca_drop_top: must be >= 0");
    if (cfg.pca_drop_top + cfg.n_components > dim)
      throw ConfigError("reduction.pca_drop_top: drop + n_components exceeds the input dimension");
    return;
  }
  if (rows < 3) throw DataError("UMAP needs at least 3 rows, got " + std::to_string(rows));
  if (cfg.umap_neighbors < 2) throw ConfigError("reduction.umap_neighbors: must be >= 2");
  if (cfg.umap_neighbors >= rows)
    throw ConfigError("reduction.umap_neighbors: " + std::to_string(cfg.umap_neighbors) +
                      " must be smaller than the row count " + std::to_string(rows));
  if (!(cfg.umap_min_dist >= 0.0 && cfg.umap_min_dist <= 1.0))
    throw ConfigError("reduction.umap_min_dist: must lie in [0, 1]");
  if (cfg.umap_epochs < 1) throw ConfigError("reduction.umap_epochs: must be positive");
}

ReducedMatrix reduce(const EmbeddingMatrix& emb, const ReductionConfig& cfg)
{
  check_reduction_config(cfg, emb.rows(), emb.dim());
  ReducedMatrix out;
  out.row_index = emb.row_index;
  out.provenance = cfg;
  switch (cfg.method) {
    case ReductionMethod::none:
      out.values = emb.values;
      break;
    case ReductionMethod::pca:
      out.values = pca_fit(emb.values, cfg.n_components, cfg.pca_drop_top).transform(emb.values);
      break;
    case ReductionMethod::umap: {
      UmapConfig ucfg;
      ucfg.n_neighbors = cfg.umap_neighbors;
      ucfg.n_components = cfg.n_components;
      ucfg.min_dist = cfg.umap_min_dist;
      ucfg.n_epochs = cfg.umap_epochs;
      ucfg.seed = cfg.seed;
      out.values = umap_fit(emb.values, ucfg).embedding;
      break;
    }
  }
  if (!out.values.allFinite()) throw DataError("reduction produced non-finite values");
  return out;
}

void save_reduced(const std::filesystem::path& path, const ReducedMatrix& reduced, EmbeddingFormat format)
{
  save_embeddings(path, EmbeddingMatrix{reduced.values, reduced.row_index}, format);
  std::ofstream side(path.string() + ".json");
  if (!side) throw DataError("cannot write " + path.string() + ".json");
  Json j;
  j["provenance"] = reduced.provenance;
  j["rows"] = reduced.rows();
  j["n_components"] = reduced.values.cols();
  side << j.dump(2) << '\n';
}

ReducedMatrix load_reduced(const std::filesystem::path& path, EmbeddingFormat format)
{
  EmbeddingMatrix emb = load_embeddings(path, format);
  ReducedMatrix out{std::move(emb.values), std::move(emb.row_index), {}};
  const std::filesystem::path sidecar = path.string() + ".json";
  if (std::filesystem::exists(sidecar)) {
    std::ifstream in(sidecar);
    try {
      out.provenance = Json::parse(in).at("provenance").get<ReductionConfig>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(sidecar.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace voices
