#include "voices/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace voices
{

namespace
{

std::string describe(const Json& j)
{
  std::string text = j.dump();
  if (text.size() > 40) text = text.substr(0, 37) + "...";
  return std::string(j.type_name()) + " " + text;
}

/// Typed, path-aware view of one JSON object; finish() rejects keys nobody read.
class Section
{
public:
  Section(const Json* j, std::string path) : j_(j), path_(std::move(path))
  {
    if (j_ && !j_->is_object()) fail(path_, "expected object, got " + describe(*j_));
  }

  const std::string& path() const { return path_; }
  std::string at(const std::string& key) const { return path_ + "." + key; }

  [[noreturn]] static void fail(const std::string& path, const std::string& what)
  {
    throw ConfigError(path + ": " + what);
  }

  const Json* find(const std::string& key)
  {
    seen_.insert(key);
    if (!j_) return nullptr;
    auto it = j_->find(key);
    return it == j_->end() ? nullptr : &*it;
  }

  Section child(const std::string& key) { return Section(find(key), at(key)); }

  template <typename T>
  void read(const std::string& key, T& out)
  {
    if (const Json* v = find(key)) out = convert<T>(*v, at(key));
  }

  template <typename T>
  void read(const std::string& key, std::optional<T>& out)
  {
    if (const Json* v = find(key); v && !v->is_null()) out = convert<T>(*v, at(key));
  }

  /// Reads a string and maps it through `parse`, re-labelling errors with the path.
  template <typename T, typename Parse>
  void read_enum(const std::string& key, T& out, Parse parse)
  {
    if (const Json* v = find(key)) {
      const auto name = convert<std::string>(*v, at(key));
      try {
        out = parse(name);
      } catch (const ConfigError& e) {
        fail(at(key), e.what());
      }
    }
  }

  template <typename T>
  static T convert(const Json& v, const std::string& path)
  {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(path, "expected boolean, got " + describe(v));
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(path, "expected integer, got " + describe(v));
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) return v.get<T>();
        if (v.get<long long>() < 0) fail(path, "expected a non-negative integer, got " + v.dump());
      }
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(path, "expected number, got " + describe(v));
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(path, "expected string, got " + describe(v));
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
      return std::filesystem::path(convert<std::string>(v, path));
    } else {
      using E = typename T::value_type;
      if (!v.is_array()) fail(path, "expected array, got " + describe(v));
      T out;
      for (std::size_t i = 0; i < v.size(); ++i) out.push_back(convert<E>(v[i], path + "[" + std::to_string(i) + "]"));
      return out;
    }
  }

  /// Sweep axis: an explicit list, or {"min", "max", "step"} expanded inclusively.
  template <typename T>
  void read_axis(const std::string& key, std::vector<T>& out)
  {
    const Json* v = find(key);
    if (!v) return;
    const std::string path = at(key);
    if (v->is_array()) {
      out = convert<std::vector<T>>(*v, path);
    } else if (v->is_number()) {
      out = {convert<T>(*v, path)};
    } else if (v->is_object()) {
      Section range(v, path);
      T lo{}, hi{};
      T step = T(1);
      if (!range.find("min") || !range.find("max")) fail(path, "range needs min and max");
      range.read("min", lo);
      range.read("max", hi);
      range.read("step", step);
      range.finish();
      if (!(step > T(0))) fail(path + ".step", "must be > 0");
      if (hi < lo) fail(path, "max is below min");
      out.clear();
      for (std::size_t i = 0;; ++i) {
        const double x = static_cast<double>(lo) + static_cast<double>(i) * static_cast<double>(step);
        if (x > static_cast<double>(hi) + 1e-9) break;
        if constexpr (std::is_floating_point_v<T>)
          out.push_back(static_cast<T>(std::round(x * 1e9) / 1e9));
        else
          out.push_back(static_cast<T>(x));
      }
    } else {
      fail(path, "expected list, number or {min, max, step}, got " + describe(*v));
    }
  }

  void finish() const
  {
    if (!j_) return;
    for (const auto& [key, value] : j_->items())
      if (!seen_.contains(key)) fail(at(key), "unknown key");
  }

private:
  const Json* j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p)
{
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

void read_reduction(Section s, ReductionConfig& r, std::uint64_t seed)
{
  r.seed = seed;
  s.read_enum("method", r.method, reduction_method_from_string);
  s.read("n_components", r.n_components);
  s.read("umap_neighbors", r.umap_neighbors);
  s.read("umap_min_dist", r.umap_min_dist);
  s.read("umap_epochs", r.umap_epochs);
  s.read("pca_drop_top", r.pca_drop_top);
  s.read("seed", r.seed);
  s.finish();
  if (r.n_components < 1) Section::fail(s.at("n_components"), "must be >= 1");
  if (r.umap_neighbors < 2) Section::fail(s.at("umap_neighbors"), "must be >= 2");
  if (!(r.umap_min_dist >= 0.0)) Section::fail(s.at("umap_min_dist"), "must be >= 0");
  if (r.umap_epochs < 1) Section::fail(s.at("umap_epochs"), "must be >= 1");
  if (r.pca_drop_top < 0) Section::fail(s.at("pca_drop_top"), "must be >= 0");
}

void read_cluster(Section s, ClusterConfig& c, std::uint64_t seed)
{
  c.seed = seed;
  s.read_enum("algorithm", c.algorithm, cluster_algorithm_from_string);
  s.read("k", c.k);
  s.read("hdbscan_min_cluster_size", c.hdbscan_min_cluster_size);
  s.read("hdbscan_min_samples", c.hdbscan_min_samples);
  s.read("hdbscan_eps", c.hdbscan_eps);
  s.read("hdbscan_allow_single_cluster", c.hdbscan_allow_single_cluster);
  s.read("max_iter", c.max_iter);
  s.read("tol", c.tol);
  s.read("seed", c.seed);
  s.read("n_init", c.n_init);
  s.read_enum("covariance", c.covariance, covariance_type_from_string);
  s.read("gmm_ridge", c.gmm_ridge);
  s.read("allow_out_of_range", c.allow_out_of_range);
  s.finish();
  try {
    check_cluster_config(c, std::numeric_limits<Index>::max());
  } catch (const ConfigError& e) {
    throw ConfigError("config." + std::string(e.what()));
  }
}

void read_validation(Section s, ValidationOptions& v, ScoreSpace& space, std::uint64_t seed)
{
  v.seed = seed;
  s.read("attributes", v.attributes);
  s.read_enum("averaging", v.averaging, purity_averaging_from_string);
  s.read_enum("rule", v.rule, prototype_rule_from_string);
  s.read("threshold", v.threshold);
  s.read_enum("baseline_weighting", v.baseline_weighting, distribution_weighting_from_string);
  s.read("noise_in_external", v.noise_in_external);
  s.read("apcs", v.compute_apcs);
  s.read("seed", v.seed);
  s.read_enum("score_space", space, score_space_from_string);
  s.finish();
  if (!(v.threshold >= 0.0 && v.threshold <= 1.0)) Section::fail(s.at("threshold"), "must lie in [0, 1]");
}

void read_sweep(Section s, SweepSpec& sw, std::uint64_t seed)
{
  sw.seed = seed;
  s.read_enum("mode", sw.mode, sweep_mode_from_string);
  if (const Json* m = s.find("methods")) {
    const auto names = Section::convert<std::vector<std::string>>(*m, s.at("methods"));
    sw.methods.clear();
    for (std::size_t i = 0; i < names.size(); ++i) {
      try {
        sw.methods.push_back(reduction_method_from_string(names[i]));
      } catch (const ConfigError& e) {
        Section::fail(s.at("methods") + "[" + std::to_string(i) + "]", e.what());
      }
    }
  }
  if (const Json* a = s.find("algorithms")) {
    const auto names = Section::convert<std::vector<std::string>>(*a, s.at("algorithms"));
    sw.algorithms.clear();
    for (std::size_t i = 0; i < names.size(); ++i) {
      try {
        sw.algorithms.push_back(cluster_algorithm_from_string(names[i]));
      } catch (const ConfigError& e) {
        Section::fail(s.at("algorithms") + "[" + std::to_string(i) + "]", e.what());
      }
    }
  }
  s.read_axis("n_components", sw.n_components);
  s.read_axis("umap_neighbors", sw.umap_neighbors);
  s.read_axis("umap_min_dist", sw.umap_min_dist);
  s.read_axis("k", sw.k);
  s.read_axis("hdbscan_eps", sw.hdbscan_eps);
  s.read_axis("hdbscan_min_samples", sw.hdbscan_min_samples);
  s.read_axis("hdbscan_min_cluster_size", sw.hdbscan_min_cluster_size);
  s.read("budget_seconds", sw.budget_seconds);
  s.read("max_trials", sw.max_trials);
  s.read("seed", sw.seed);
  s.read("parallelism", sw.parallelism);
  s.read("allow_out_of_range", sw.allow_out_of_range);
  s.read("cache_size", sw.cache_size);
  s.finish();
  try {
    check_sweep_spec(sw, std::numeric_limits<Index>::max(), std::numeric_limits<Index>::max());
  } catch (const ConfigError& e) {
    throw ConfigError("config." + std::string(e.what()));
  }
}

}  // namespace

Json read_config_file(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return Json::parse(in, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void apply_override(Json& doc, const std::string& assignment)
{
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects path=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(text);
  } catch (const Json::parse_error&) {
    value = text;
  }
  Json* node = &doc;
  if (!node->is_object()) *node = Json::object();
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("--set: empty key in '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    Json& next = (*node)[key];
    if (next.is_null()) next = Json::object();
    if (!next.is_object()) throw ConfigError("--set: config." + path.substr(0, dot) + " is not an object");
    node = &next;
    start = dot + 1;
  }
}

PipelineConfig parse_config(const Json& doc, const std::filesystem::path& base_dir)
{
  PipelineConfig cfg;
  Section root(&doc, "config");
  root.read("seed", cfg.seed);

  {
    Section s = root.child("data");
    auto& d = cfg.data;
    s.read("embeddings", d.embeddings);
    if (const Json* f = s.find("format"); f && !f->is_null()) {
      try {
        d.format = embedding_format_from_string(Section::convert<std::string>(*f, s.at("format")));
      } catch (const ConfigError& e) {
        Section::fail(s.at("format"), e.what());
      }
    }
    s.read("annotations", d.annotations);
    s.read("metadata", d.metadata);
    s.read("items", d.items);
    s.read("ground_truth", d.ground_truth);
    s.read("label_set", d.label_set);
    s.read("strict", d.strict);
    s.finish();
    d.embeddings = resolve(base_dir, d.embeddings);
    d.annotations = resolve(base_dir, d.annotations);
    d.metadata = resolve(base_dir, d.metadata);
    if (d.items) d.items = resolve(base_dir, *d.items);
    if (d.ground_truth) d.ground_truth = resolve(base_dir, *d.ground_truth);
  }
  {
    Section s = root.child("synth");
    auto& syn = cfg.synth;
    s.read_enum("profile", syn.profile, fixture_profile_from_string);
    s.read("items", syn.fixture.items);
    s.read("dim", syn.fixture.dim);
    s.read("separation", syn.fixture.separation);
    s.read("spread", syn.fixture.spread);
    s.read("item_offset_scale", syn.fixture.item_offset_scale);
    s.read("prediction_accuracy", syn.fixture.prediction_accuracy);
    s.read("out_dir", syn.out_dir);
    if (const Json* f = s.find("format")) {
      try {
        syn.format = embedding_format_from_string(Section::convert<std::string>(*f, s.at("format")));
      } catch (const ConfigError& e) {
        Section::fail(s.at("format"), e.what());
      }
    }
    s.finish();
    if (syn.fixture.items < 1) Section::fail(s.at("items"), "must be >= 1");
    if (syn.fixture.dim < 3) Section::fail(s.at("dim"), "must be >= 3");
    syn.out_dir = resolve(base_dir, syn.out_dir);
  }
  read_reduction(root.child("reduction"), cfg.reduction, cfg.seed);
  read_cluster(root.child("cluster"), cfg.cluster, cfg.seed);
  read_validation(root.child("validation"), cfg.validation, cfg.score_space, cfg.seed);
  read_sweep(root.child("sweep"), cfg.sweep, cfg.seed);
  cfg.sweep.reduction_base = cfg.reduction;
  cfg.sweep.cluster_base = cfg.cluster;
  cfg.sweep.validation = cfg.validation;
  cfg.sweep.score_space = cfg.score_space;
  {
    Section s = root.child("report");
    s.read("representatives", cfg.report.representatives);
    s.read("svg", cfg.report.svg);
    s.finish();
    if (cfg.report.representatives < 0) Section::fail(s.at("representatives"), "must be >= 0");
    if (cfg.report.svg) cfg.report.svg = resolve(base_dir, *cfg.report.svg);
  }
  root.finish();
  return cfg;
}

void to_json(Json& j, const PipelineConfig& cfg)
{
  auto opt_path = [](const std::optional<std::filesystem::path>& p) { return p ? Json(p->string()) : Json(nullptr); };
  Json data{{"embeddings", cfg.data.embeddings.string()},
            {"format", cfg.data.format ? Json(cfg.data.format == EmbeddingFormat::csv ? "csv" : "binary") : Json(nullptr)},
            {"annotations", cfg.data.annotations.string()},
            {"metadata", cfg.data.metadata.string()},
            {"items", opt_path(cfg.data.items)},
            {"ground_truth", opt_path(cfg.data.ground_truth)},
            {"label_set", cfg.data.label_set},
            {"strict", cfg.data.strict}};
  Json synth{{"profile", to_string(cfg.synth.profile)},
             {"items", cfg.synth.fixture.items},
             {"dim", cfg.synth.fixture.dim},
             {"separation", cfg.synth.fixture.separation},
             {"spread", cfg.synth.fixture.spread},
             {"item_offset_scale", cfg.synth.fixture.item_offset_scale},
             {"prediction_accuracy",
              cfg.synth.fixture.prediction_accuracy ? Json(*cfg.synth.fixture.prediction_accuracy) : Json(nullptr)},
             {"out_dir", cfg.synth.out_dir.string()},
             {"format", cfg.synth.format == EmbeddingFormat::csv ? "csv" : "binary"}};
  Json validation = cfg.validation;
  validation["score_space"] = to_string(cfg.score_space);
  Json sweep = cfg.sweep;
  sweep.erase("score_space");
  j = Json{{"seed", cfg.seed},
           {"data", std::move(data)},
           {"synth", std::move(synth)},
           {"reduction", cfg.reduction},
           {"cluster", cfg.cluster},
           {"validation", std::move(validation)},
           {"sweep", std::move(sweep)},
           {"report", Json{{"representatives", cfg.report.representatives}, {"svg", opt_path(cfg.report.svg)}}}};
}

std::string config_schema()
{
  Json j = PipelineConfig{};
  return j.dump(2);
}

}  // namespace voices
