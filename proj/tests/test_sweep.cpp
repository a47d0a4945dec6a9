#include "test_util.hpp"

#include "voices/serialize.hpp"
#include "voices/sweep.hpp"
#include "voices/synthpop.hpp"

#include <doctest.h>

#include <algorithm>
#include <fstream>

using namespace voices;

namespace
{

/// Planted voices on distinct axes, 20 annotators x 5 items each.
SynthResult planted(int voices, std::uint64_t seed, Index dim = 8)
{
  SynthConfig cfg;
  cfg.dim = dim;
  cfg.items = 5;
  cfg.seed = seed;
  cfg.item_offset_scale = 0.1;
  for (int g = 0; g < voices; ++g) {
    VoiceSpec v;
    v.group_id = g;
    v.size = 20;
    v.centroid = Eigen::VectorXd::Zero(dim);
    v.centroid(g) = 6.0;
    v.spread = 0.4;
    v.attribute_profile["stance"] = {{"s" + std::to_string(g), 1.0}};
    cfg.voices.push_back(v);
  }
  return generate(cfg);
}

SweepSpec kmeans_grid()
{
  SweepSpec spec;
  spec.methods = {ReductionMethod::none};
  spec.mode = SweepMode::grid;
  return spec;
}

TrialResult fake(std::size_t index, double silhouette, double db, int k, bool degenerate = false)
{
  TrialResult t;
  t.index = index;
  t.config.cluster.k = k;
  t.hash = config_hash(t.config);
  t.report.silhouette = silhouette;
  t.report.davies_bouldin = db;
  t.report.n_clusters = k;
  t.degenerate = degenerate;
  return t;
}

std::string results_json(const std::vector<TrialResult>& results)
{
  Json all = Json::array();
  for (auto r : results) {
    r.wall_time = 0.0;
    all.push_back(r);
  }
  return all.dump();
}

}  // namespace

TEST_CASE("a single-config grid yields one selected trial")
{
  const auto fx = planted(2, 1);
  SweepSpec spec = kmeans_grid();
  spec.k = {2};
  const auto results = run_sweep(fx.dataset, spec);
  REQUIRE(results.size() == 1);
  CHECK(&select_best(results) == &results[0]);
  CHECK(results[0].report.n_clusters == 2);
  CHECK_FALSE(results[0].report.ari.has_value());
}

TEST_CASE("a kmeans sweep over k = 2..19 finds four planted voices")
{
  const auto fx = planted(4, 3);
  SweepSpec spec = kmeans_grid();
  SweepOptions options;
  options.ground_truth = &fx.ground_truth;
  const auto results = run_sweep(fx.dataset, spec, options);
  CHECK(results.size() == 18);
  const auto& best = select_best(results);
  CHECK(best.config.cluster.k == 4);
  CHECK(*best.report.ari == 1.0);
  for (std::size_t i = 1; i < results.size(); ++i) CHECK_FALSE(trial_before(results[i], results[i - 1]));
}

TEST_CASE("sweeps are deterministic and independent of parallelism")
{
  const auto fx = planted(3, 5);
  SweepSpec spec = kmeans_grid();
  spec.mode = SweepMode::random;
  spec.max_trials = 6;
  spec.seed = 11;
  const auto a = run_sweep(fx.dataset, spec);
  const auto b = run_sweep(fx.dataset, spec);
  spec.parallelism = 3;
  const auto c = run_sweep(fx.dataset, spec);
  CHECK(results_json(a) == results_json(b));
  CHECK(results_json(a) == results_json(c));
}

TEST_CASE("random mode draws distinct grid points in a seeded order")
{
  SweepSpec spec = kmeans_grid();
  spec.mode = SweepMode::random;
  spec.seed = 4;
  const auto all = trial_sequence(spec, 100);
  CHECK(all.size() == 18);
  std::vector<int> ks;
  for (const auto& t : all) ks.push_back(t.cluster.k);
  std::sort(ks.begin(), ks.end());
  CHECK(std::adjacent_find(ks.begin(), ks.end()) == ks.end());
  CHECK(trial_sequence(spec, 5) == trial_sequence(spec, 5));
  spec.seed = 5;
  const auto other = trial_sequence(spec, 18);
  CHECK_FALSE(other == all);
}

TEST_CASE("grid size counts only the axes each method and algorithm use")
{
  SweepSpec spec;
  spec.methods = {ReductionMethod::none, ReductionMethod::pca, ReductionMethod::umap};
  spec.n_components = {2, 3};
  spec.umap_neighbors = {80, 90};
  spec.algorithms = {ClusterAlgorithm::kmeans, ClusterAlgorithm::hdbscan};
  spec.k = {2, 3, 3};
  spec.hdbscan_min_samples = {5, 10};
  // reductions: 1 + 2 + 2*2 = 7; clusters: 2 (k deduplicated) + 2 = 4
  CHECK(grid_size(spec) == 28);
}

TEST_CASE("select_best examples")
{
  const std::vector<TrialResult> two{fake(0, 0.2, 1.0, 3), fake(1, 0.5, 1.0, 3)};
  CHECK(select_best(two).index == 1);
  const std::vector<TrialResult> tie{fake(0, 0.5, 0.9, 3), fake(1, 0.5, 0.4, 3)};
  CHECK(select_best(tie).index == 1);
  const std::vector<TrialResult> tie_k{fake(0, 0.5, 0.4, 5), fake(1, 0.5, 0.4, 3)};
  CHECK(select_best(tie_k).index == 1);
  const std::vector<TrialResult> with_degenerate{fake(0, 0.99, 0.1, 3, true), fake(1, 0.1, 2.0, 3)};
  CHECK(select_best(with_degenerate).index == 1);
  const std::vector<TrialResult> only_degenerate{fake(0, 0.99, 0.1, 3, true)};
  CHECK_THROWS_AS(select_best(only_degenerate), DegenerateError);
}

TEST_CASE("selection does not depend on input order")
{
  std::vector<TrialResult> trials;
  for (std::size_t i = 0; i < 12; ++i) trials.push_back(fake(i, (i % 4) * 0.1, (i % 3) * 0.5, 2 + static_cast<int>(i % 5), i == 7));
  const auto winner = select_best(trials).index;
  std::reverse(trials.begin(), trials.end());
  CHECK(select_best(trials).index == winner);
  std::rotate(trials.begin(), trials.begin() + 5, trials.end());
  CHECK(select_best(trials).index == winner);
}

TEST_CASE("degenerate trials sort last and never win")
{
  const auto fx = planted(2, 7);
  SweepSpec spec = kmeans_grid();
  spec.algorithms = {ClusterAlgorithm::hdbscan};
  spec.hdbscan_min_samples = {2, 5};
  spec.hdbscan_min_cluster_size = {2, 300};
  spec.allow_out_of_range = true;
  const auto results = run_sweep(fx.dataset, spec);
  CHECK(results.size() == 4);
  bool seen_degenerate = false;
  for (const auto& r : results) {
    if (r.degenerate) seen_degenerate = true;
    else CHECK_FALSE(seen_degenerate);
  }
  CHECK(seen_degenerate);
  CHECK_FALSE(select_best(results).degenerate);
}

TEST_CASE("an exhausted budget with no completed trial is an error")
{
  const auto fx = planted(2, 1);
  SweepSpec spec = kmeans_grid();
  spec.budget_seconds = 1e-12;
  CHECK_THROWS_AS(run_sweep(fx.dataset, spec), DegenerateError);
}

TEST_CASE("no trial starts after the budget expires")
{
  const auto fx = planted(4, 2, 40);
  SweepSpec spec;
  spec.methods = {ReductionMethod::umap};
  spec.umap_neighbors = {20};
  spec.umap_min_dist = {0.8, 0.85, 0.9, 0.95, 1.0};
  spec.n_components = {2, 3};
  spec.allow_out_of_range = true;
  spec.mode = SweepMode::grid;
  spec.k = {4};
  spec.reduction_base.umap_epochs = 100;
  spec.budget_seconds = 0.05;
  const auto results = run_sweep(fx.dataset, spec);
  CHECK(results.size() >= 1);
  CHECK(results.size() < 10);
}

TEST_CASE("the JSONL log resumes a sweep")
{
  testing::TempDir dir;
  const auto log = dir.path() / "sweep.jsonl";
  const auto fx = planted(3, 9);
  SweepSpec spec = kmeans_grid();
  spec.max_trials = 3;
  SweepOptions options;
  options.log_path = log;
  const auto first = run_sweep(fx.dataset, spec, options);
  spec.max_trials = 6;
  const auto second = run_sweep(fx.dataset, spec, options);
  CHECK(second.size() == 6);

  std::ifstream in(log);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const auto r = Json::parse(line).get<TrialResult>();
    CHECK(r.index == static_cast<std::size_t>(lines));
    ++lines;
  }
  CHECK(lines == 6);
  for (const auto& r : first) {
    auto it = std::find_if(second.begin(), second.end(), [&](const TrialResult& s) { return s.index == r.index; });
    REQUIRE(it != second.end());
    CHECK(it->wall_time == r.wall_time);
  }
  spec.seed = 99;
  CHECK_THROWS_AS(run_sweep(fx.dataset, spec, options), ConfigError);
}

TEST_CASE("sweep specs are range-checked")
{
  SweepSpec spec;
  CHECK_NOTHROW(check_sweep_spec(spec, 5000, 64));
  spec.k = {1, 5};
  CHECK_THROWS_AS(check_sweep_spec(spec, 5000, 64), ConfigError);
  spec.allow_out_of_range = true;
  CHECK_NOTHROW(check_sweep_spec(spec, 5000, 64));
  spec = {};
  spec.umap_neighbors = {50};
  CHECK_THROWS_AS(check_sweep_spec(spec, 5000, 64), ConfigError);
  spec = {};
  spec.budget_seconds = 0.0;
  CHECK_THROWS_AS(check_sweep_spec(spec, 5000, 64), ConfigError);
  spec = {};
  spec.k = {};
  CHECK_THROWS_AS(check_sweep_spec(spec, 5000, 64), ConfigError);
}

TEST_CASE("trial results survive JSON")
{
  const auto fx = planted(2, 1);
  SweepSpec spec = kmeans_grid();
  spec.k = {2, 3};
  for (const auto& r : run_sweep(fx.dataset, spec)) {
    const Json j = r;
    CHECK(Json(j.get<TrialResult>()) == j);
  }
}
