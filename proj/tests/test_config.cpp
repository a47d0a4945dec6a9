#include "test_util.hpp"

#include "voices/config.hpp"

#include <doctest.h>

#include <string>

using namespace voices;

namespace
{

std::string config_error(const Json& doc)
{
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

TEST_CASE("an empty document yields the defaults")
{
  const auto cfg = parse_config(Json::object());
  CHECK(cfg.reduction.n_components == 2);
  CHECK(cfg.reduction.umap_neighbors == 90);
  CHECK(cfg.reduction.umap_min_dist == 0.9);
  CHECK(cfg.validation.threshold == 0.10);
  CHECK(cfg.sweep.k.front() == 2);
  CHECK(cfg.sweep.k.back() == 19);
  CHECK(cfg.report.representatives == 5);
}

TEST_CASE("section seeds inherit the top-level seed unless set")
{
  const auto cfg = parse_config(Json::parse(R"({"seed": 7, "cluster": {"seed": 3}})"));
  CHECK(cfg.reduction.seed == 7);
  CHECK(cfg.cluster.seed == 3);
  CHECK(cfg.validation.seed == 7);
  CHECK(cfg.sweep.seed == 7);
}

TEST_CASE("errors name the offending path")
{
  CHECK(starts_with(config_error(Json::parse(R"({"cluster": {"k": "four"}})")), "config.cluster.k"));
  CHECK(starts_with(config_error(Json::parse(R"({"cluster": {"kk": 4}})")), "config.cluster.kk"));
  CHECK(config_error(Json::parse(R"({"cluster": {"kk": 4}})")).find("unknown key") != std::string::npos);
  CHECK(starts_with(config_error(Json::parse(R"({"reduction": {"method": "tsne"}})")), "config.reduction.method"));
  CHECK(starts_with(config_error(Json::parse(R"({"validation": {"threshold": 2}})")), "config.validation.threshold"));
  CHECK(starts_with(config_error(Json::parse(R"({"sweep": {"algorithms": ["kmeans", "dbscan"]}})")),
                    "config.sweep.algorithms[1]"));
  CHECK(starts_with(config_error(Json::parse(R"({"sweep": {"k": [1, 30]}})")), "config.sweep.k"));
  CHECK(starts_with(config_error(Json::parse(R"({"sweep": {"budget_seconds": 0}})")), "config.sweep.budget_seconds"));
  CHECK(starts_with(config_error(Json::parse(R"({"report": []})")), "config.report"));
}

TEST_CASE("sweep axes accept lists, scalars and ranges")
{
  const auto cfg = parse_config(Json::parse(
      R"({"sweep": {"k": {"min": 3, "max": 9, "step": 3}, "umap_neighbors": 85, "umap_min_dist": [0.8, 1.0]}})"));
  CHECK(cfg.sweep.k == std::vector<int>{3, 6, 9});
  CHECK(cfg.sweep.umap_neighbors == std::vector<Index>{85});
  CHECK(cfg.sweep.umap_min_dist == std::vector<double>{0.8, 1.0});
  CHECK(config_error(Json::parse(R"({"sweep": {"k": {"min": 3}}})")).find("config.sweep.k") == 0);
}

TEST_CASE("out-of-range sweep values need an explicit override")
{
  CHECK_FALSE(config_error(Json::parse(R"({"sweep": {"k": [25]}})")).empty());
  CHECK(config_error(Json::parse(R"({"sweep": {"k": [25], "allow_out_of_range": true}})")).empty());
}

TEST_CASE("overrides set nested values with JSON or string payloads")
{
  Json doc = Json::object();
  apply_override(doc, "cluster.k=7");
  apply_override(doc, "cluster.algorithm=gmm");
  apply_override(doc, "sweep.k=[4,5]");
  apply_override(doc, "data.strict=false");
  CHECK(doc["cluster"]["k"] == 7);
  CHECK(doc["cluster"]["algorithm"] == "gmm");
  const auto cfg = parse_config(doc);
  CHECK(cfg.cluster.k == 7);
  CHECK(cfg.cluster.algorithm == ClusterAlgorithm::gmm);
  CHECK(cfg.sweep.k == std::vector<int>{4, 5});
  CHECK_FALSE(cfg.data.strict);
  CHECK_THROWS_AS(apply_override(doc, "cluster.k"), ConfigError);
  CHECK_THROWS_AS(apply_override(doc, "cluster.k.x=1"), ConfigError);
}

TEST_CASE("relative data paths resolve against the config directory")
{
  const auto cfg = parse_config(Json::parse(R"({"data": {"embeddings": "e.bin", "annotations": "/abs/a.jsonl"}})"), "/cfg");
  CHECK(cfg.data.embeddings == std::filesystem::path("/cfg/e.bin"));
  CHECK(cfg.data.annotations == std::filesystem::path("/abs/a.jsonl"));
}

TEST_CASE("config files allow comments and round-trip through the resolved form")
{
  testing::TempDir dir;
  testing::write_file(dir.path() / "run.json", R"({
  // sweep settings
  "seed": 5,
  "sweep": {"mode": "grid", "k": [2, 3], "methods": ["none"]},
  "cluster": {"covariance": "diagonal"}
})");
  const auto cfg = parse_config(read_config_file(dir.path() / "run.json"));
  CHECK(cfg.seed == 5);
  CHECK(cfg.sweep.mode == SweepMode::grid);
  CHECK(cfg.cluster.covariance == CovarianceType::diagonal);
  const Json resolved = cfg;
  const auto again = parse_config(resolved);
  CHECK(Json(again) == resolved);
  CHECK_THROWS_AS(read_config_file(dir.path() / "missing.json"), ConfigError);
}

TEST_CASE("the schema lists every section")
{
  const auto schema = Json::parse(config_schema());
  for (const char* key : {"seed", "data", "synth", "reduction", "cluster", "validation", "sweep", "report"})
    CHECK(schema.contains(key));
}
