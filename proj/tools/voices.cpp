// voices: command-line pipeline for discovering annotator voices.

#include "voices/config.hpp"
#include "voices/log.hpp"
#include "voices/report.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace voices;
namespace fs = std::filesystem;

namespace
{

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDegenerate = 3;

struct Common
{
  std::string config_path;
  std::vector<std::string> overrides;
  bool verbose = false;
};

/// Flag values become "--set" overrides so the resolved config records them.
struct Flags
{
  std::vector<std::string> sets;

  template <typename T>
  void add(const std::string& path, const std::optional<T>& value)
  {
    if (value) sets.push_back(path + "=" + Json(*value).dump());
  }
};

PipelineConfig resolve_config(const Common& common, const Flags& flags)
{
  Json doc = Json::object();
  fs::path base;
  if (!common.config_path.empty()) {
    doc = read_config_file(common.config_path);
    base = fs::path(common.config_path).parent_path();
  }
  for (const auto& s : common.overrides) apply_override(doc, s);
  for (const auto& s : flags.sets) apply_override(doc, s);
  return parse_config(doc, base);
}

Dataset load_dataset(const PipelineConfig& cfg)
{
  const auto& d = cfg.data;
  if (d.embeddings.empty()) throw ConfigError("config.data.embeddings: required");
  if (d.annotations.empty()) throw ConfigError("config.data.annotations: required");
  if (d.metadata.empty()) throw ConfigError("config.data.metadata: required");
  const auto format = d.format.value_or(embedding_format_for(d.embeddings));
  EmbeddingMatrix emb = load_embeddings(d.embeddings, format);
  return join_dataset(std::move(emb), d.annotations, d.metadata, JoinOptions{d.strict, d.label_set});
}

ReducedMatrix load_or_reduce(const std::string& reduced_path, const Dataset& ds, const PipelineConfig& cfg)
{
  if (reduced_path.empty()) return reduce(ds.embeddings, cfg.reduction);
  ReducedMatrix r = load_reduced(reduced_path, embedding_format_for(reduced_path));
  if (r.row_index != ds.embeddings.row_index)
    throw DataError(reduced_path + ": row index does not match the dataset embeddings");
  return r;
}

void write_text(const fs::path& path, const std::string& text)
{
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<std::string> report_attributes(const PipelineConfig& cfg, const Dataset& ds)
{
  return cfg.validation.attributes.empty() ? ds.attribute_names : cfg.validation.attributes;
}

const std::vector<int>* ground_truth_for(const PipelineConfig& cfg, const Dataset& ds, std::vector<int>& storage)
{
  if (!cfg.data.ground_truth) return nullptr;
  storage = read_ground_truth(*cfg.data.ground_truth, ds.embeddings.row_index);
  return &storage;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Discover annotator voices: reduce behavioural embeddings, cluster them, and validate the clusters "
               "against annotator metadata."};
  app.require_subcommand(1);
  Common common;
  app.add_option("-c,--config", common.config_path, "JSON configuration file (see `voices config`)")->check(CLI::ExistingFile);
  app.add_option("--set", common.overrides, "Override a config value, e.g. --set cluster.k=4 (repeatable)");
  app.add_flag("-v,--verbose", common.verbose, "Log progress to stderr");

  Flags flags;

  // config
  auto* config_cmd = app.add_subcommand("config", "Print the resolved configuration (defaults plus overrides)");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic MBIC- or GWSD-like population with planted voices");
  std::optional<std::string> synth_profile, synth_out, synth_format;
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--profile", synth_profile, "Fixture profile: mbic or gwsd");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("-o,--out", synth_out, "Output directory");
  synth->add_option("--format", synth_format, "Embedding format: csv or binary");

  // reduce
  auto* reduce_cmd = app.add_subcommand("reduce", "Reduce the dataset embeddings (none, pca or umap)");
  std::optional<std::string> red_method;
  std::optional<long> red_components;
  std::string reduce_out;
  reduce_cmd->add_option("--method", red_method, "none, pca or umap");
  reduce_cmd->add_option("--n-components", red_components, "Output dimensionality");
  reduce_cmd->add_option("-o,--out", reduce_out, "Reduced matrix path (.bin or .csv); provenance goes to <path>.json")->required();

  // cluster
  auto* cluster_cmd = app.add_subcommand("cluster", "Cluster a reduced matrix (reduces in-process when --reduced is absent)");
  std::string cluster_reduced, cluster_out;
  std::optional<std::string> cl_algorithm;
  std::optional<int> cl_k;
  cluster_cmd->add_option("--reduced", cluster_reduced, "Reduced matrix written by `reduce`");
  cluster_cmd->add_option("--algorithm", cl_algorithm, "kmeans, gmm or hdbscan");
  cluster_cmd->add_option("-k,--k", cl_k, "Number of clusters (kmeans, gmm)");
  cluster_cmd->add_option("-o,--out", cluster_out, "Assignment CSV; model detail goes to <path>.json")->required();

  // validate
  auto* validate_cmd = app.add_subcommand("validate", "Compute internal and external validity metrics for an assignment");
  std::string val_reduced, val_assignment, val_out;
  validate_cmd->add_option("--reduced", val_reduced, "Reduced matrix the assignment was computed on");
  validate_cmd->add_option("--assignment", val_assignment, "Assignment CSV written by `cluster`")->required();
  validate_cmd->add_option("-o,--out", val_out, "Write the ValidationReport as JSON");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Hyperparameter sweep maximising silhouette");
  std::string sweep_out;
  std::optional<std::string> sw_mode;
  std::optional<double> sw_budget;
  std::optional<std::size_t> sw_trials;
  std::optional<int> sw_parallel;
  std::optional<std::uint64_t> sw_seed;
  std::string sweep_log;
  sweep_cmd->add_option("--mode", sw_mode, "random or grid");
  sweep_cmd->add_option("--budget", sw_budget, "Wall-clock budget in seconds");
  sweep_cmd->add_option("--max-trials", sw_trials, "Maximum number of trials");
  sweep_cmd->add_option("-j,--parallelism", sw_parallel, "Concurrent trials");
  sweep_cmd->add_option("--seed", sw_seed, "Sweep seed");
  sweep_cmd->add_option("--log", sweep_log, "JSONL trial log; an existing log is resumed");
  sweep_cmd->add_option("-o,--out", sweep_out, "Output directory (trials.json, best/)")->required();

  // report
  auto* report_cmd = app.add_subcommand("report", "Metrics table, cluster cards with representative examples, voice tags");
  std::string rep_reduced, rep_assignment, rep_out;
  std::optional<std::string> rep_items, rep_svg;
  std::optional<int> rep_n;
  report_cmd->add_option("--reduced", rep_reduced, "Reduced matrix the assignment was computed on");
  report_cmd->add_option("--assignment", rep_assignment, "Assignment CSV")->required();
  report_cmd->add_option("--items", rep_items, "item_id,text sidecar for representative examples");
  report_cmd->add_option("-n,--representatives", rep_n, "Examples per cluster");
  report_cmd->add_option("--svg", rep_svg, "Also write a 2-D scatter of the reduced space");
  report_cmd->add_option("-o,--out", rep_out, "Output directory (report.json, report.txt)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  log::set_level(common.verbose ? log::Level::info : log::Level::warning);

  flags.add("synth.profile", synth_profile);
  flags.add("seed", synth_seed);
  flags.add("synth.out_dir", synth_out);
  flags.add("synth.format", synth_format);
  flags.add("reduction.method", red_method);
  flags.add("reduction.n_components", red_components);
  flags.add("cluster.algorithm", cl_algorithm);
  flags.add("cluster.k", cl_k);
  flags.add("sweep.mode", sw_mode);
  flags.add("sweep.budget_seconds", sw_budget);
  flags.add("sweep.max_trials", sw_trials);
  flags.add("sweep.parallelism", sw_parallel);
  flags.add("sweep.seed", sw_seed);
  flags.add("data.items", rep_items);
  flags.add("report.representatives", rep_n);
  flags.add("report.svg", rep_svg);

  try {
    const PipelineConfig cfg = resolve_config(common, flags);
    const Json resolved = cfg;

    if (*config_cmd) {
      std::cout << resolved.dump(2) << '\n';
      return 0;
    }

    if (*synth) {
      const SynthResult result = make_paper_like_fixture(cfg.synth.profile, cfg.seed, cfg.synth.fixture);
      write_synth_output(cfg.synth.out_dir, result, cfg.synth.format);
      // The written config points at the generated files, relative to itself.
      Json written = resolved;
      written["data"]["embeddings"] = cfg.synth.format == EmbeddingFormat::csv ? "embeddings.csv" : "embeddings.bin";
      written["data"]["annotations"] = "annotations.jsonl";
      written["data"]["metadata"] = "metadata.csv";
      written["data"]["items"] = "items.csv";
      written["data"]["ground_truth"] = "ground_truth.csv";
      write_json(cfg.synth.out_dir / "config.json", written);
      std::cout << "wrote " << result.dataset.rows() << " rows (" << result.dataset.metadata.size()
                << " annotators) to " << cfg.synth.out_dir.string() << '\n';
      return 0;
    }

    const Dataset ds = load_dataset(cfg);
    std::vector<int> truth_storage;
    const std::vector<int>* truth = ground_truth_for(cfg, ds, truth_storage);

    if (*reduce_cmd) {
      const ReducedMatrix r = reduce(ds.embeddings, cfg.reduction);
      save_reduced(reduce_out, r, embedding_format_for(reduce_out));
      std::cout << "wrote " << r.rows() << " x " << r.values.cols() << " to " << reduce_out << '\n';
      return 0;
    }

    if (*cluster_cmd) {
      const ReducedMatrix r = load_or_reduce(cluster_reduced, ds, cfg);
      const ClusterAssignment a = cluster(r, cfg.cluster);
      save_assignment(cluster_out, r.row_index, a, cfg.cluster);
      std::cout << "clusters: " << a.n_clusters << '\n';
      if (a.degenerate) {
        std::cerr << "degenerate result: " << a.degenerate_reason << '\n';
        return kExitDegenerate;
      }
      return 0;
    }

    if (*validate_cmd || *report_cmd) {
      const std::string& reduced_path = *validate_cmd ? val_reduced : rep_reduced;
      const std::string& assignment_path = *validate_cmd ? val_assignment : rep_assignment;
      const ReducedMatrix r = load_or_reduce(reduced_path, ds, cfg);
      const ClusterAssignment a = load_assignment(assignment_path, ds.embeddings.row_index);
      const Points& scored = cfg.score_space == ScoreSpace::original ? ds.embeddings.values : r.values;
      const ValidationReport report = validate(scored, a, ds, cfg.validation, truth);
      const auto attributes = report_attributes(cfg, ds);
      const std::string table = metrics_table({{"assignment", report}}, attributes);

      if (report.degenerate) std::cerr << "degenerate result: " << report.degenerate_reason << '\n';
      if (*validate_cmd) {
        std::cout << table;
        if (!val_out.empty()) write_json(val_out, Json(report));
        return report.degenerate ? kExitDegenerate : 0;
      }

      std::map<std::string, std::string> texts;
      if (cfg.data.items) texts = read_item_text(*cfg.data.items);
      const auto cards = cluster_cards(r.values, a, ds, report, texts, cfg.report.representatives);
      const fs::path out_dir = rep_out;
      Json j{{"config", resolved}, {"report", report}, {"clusters", cards}};
      write_json(out_dir / "report.json", j);
      const std::string text = table + "\n" + format_cards(cards);
      write_text(out_dir / "report.txt", text);
      if (cfg.report.svg) write_text(*cfg.report.svg, scatter_svg(r.values, a.labels));
      std::cout << text;
      return report.degenerate ? kExitDegenerate : 0;
    }

    if (*sweep_cmd) {
      SweepOptions options;
      if (!sweep_log.empty()) options.log_path = sweep_log;
      options.ground_truth = truth;
      const auto trials = run_sweep(ds, cfg.sweep, options);
      const fs::path out_dir = sweep_out;
      Json all = Json::array();
      for (const auto& t : trials) all.push_back(t);
      write_json(out_dir / "trials.json", Json{{"config", resolved}, {"trials", std::move(all)}});

      std::vector<ReportRow> rows;
      for (std::size_t i = 0; i < std::min<std::size_t>(trials.size(), 10); ++i)
        rows.push_back({"trial " + std::to_string(trials[i].index) + " " + to_string(trials[i].config.reduction.method) +
                            "/" + to_string(trials[i].config.cluster.algorithm),
                        trials[i].report});
      std::cout << metrics_table(rows, report_attributes(cfg, ds));

      const TrialResult& best = select_best(trials);
      const ReducedMatrix r = reduce(ds.embeddings, best.config.reduction);
      const ClusterAssignment a = cluster(r, best.config.cluster);
      fs::create_directories(out_dir / "best");
      save_reduced(out_dir / "best" / "reduced.bin", r, EmbeddingFormat::binary);
      save_assignment(out_dir / "best" / "assignment.csv", r.row_index, a, best.config.cluster);
      write_json(out_dir / "best" / "trial.json", Json(best));
      std::cout << "best: trial " << best.index << ", " << best.report.n_clusters << " clusters, silhouette "
                << best.report.silhouette << '\n';
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DegenerateError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDegenerate;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
