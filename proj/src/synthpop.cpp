#include "voices/synthpop.hpp"

#include "voices/csv.hpp"
#include "voices/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

namespace voices
{

namespace
{

std::string numbered(const char* prefix, std::size_t i, int width)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, i);
  return buf;
}

void check_distribution(const ValueDistribution& dist, const std::string& where)
{
  if (dist.empty()) throw ConfigError(where + ": empty distribution");
  double total = 0.0;
  for (const auto& [value, p] : dist) {
    if (!(p >= 0.0)) throw ConfigError(where + ": negative probability for '" + value + "'");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ConfigError(where + ": probabilities sum to " + csv::format_double(total) + ", not 1");
}

std::vector<double> weights_of(const ValueDistribution& dist)
{
  std::vector<double> w;
  w.reserve(dist.size());
  for (const auto& [value, p] : dist) w.push_back(p);
  return w;
}

/// Largest-remainder apportionment of n among the distribution's values.
std::vector<std::string> apportion(const ValueDistribution& dist, std::size_t n)
{
  std::vector<std::size_t> counts(dist.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    double exact = dist[i].second * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += counts[i];
    remainders.emplace_back(exact - static_cast<double>(counts[i]), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[remainders[i % remainders.size()].second];
  std::vector<std::string> values;
  values.reserve(n);
  for (std::size_t i = 0; i < dist.size(); ++i) values.insert(values.end(), counts[i], dist[i].first);
  values.resize(n);
  return values;
}

const std::string& draw_label(const VoiceSpec* voice, int topic,
                              const std::vector<std::string>& label_set, Rng& rng)
{
  if (voice) {
    auto it = voice->label_policy.find(topic);
    if (it != voice->label_policy.end()) {
      auto w = weights_of(it->second);
      return it->second[rng.categorical(w)].first;
    }
  }
  return label_set[rng.below(label_set.size())];
}

}  // namespace

void validate_config(const SynthConfig& cfg)
{
  if (cfg.dim < 2) throw ConfigError("synth.dim: must be >= 2");
  if (cfg.voices.empty()) throw ConfigError("synth.voices: at least one voice is required");
  if (cfg.items == 0) throw ConfigError("synth.items: must be >= 1");
  if (cfg.topics == 0) throw ConfigError("synth.topics: must be >= 1");
  if (cfg.label_set.empty()) throw ConfigError("synth.label_set: must not be empty");
  if (cfg.prediction_accuracy && !(*cfg.prediction_accuracy >= 0.0 && *cfg.prediction_accuracy <= 1.0))
    throw ConfigError("synth.prediction_accuracy: must lie in [0, 1]");
  if (!(cfg.item_offset_scale >= 0.0)) throw ConfigError("synth.item_offset_scale: must be >= 0");
  if (!(cfg.noise_scale >= 0.0)) throw ConfigError("synth.noise_scale: must be >= 0");
  std::set<std::string> labels(cfg.label_set.begin(), cfg.label_set.end());
  std::set<int> ids;
  for (std::size_t v = 0; v < cfg.voices.size(); ++v) {
    const auto& voice = cfg.voices[v];
    const std::string where = "synth.voices[" + std::to_string(v) + "]";
    if (voice.group_id < 0) throw ConfigError(where + ".group_id: must be >= 0");
    if (!ids.insert(voice.group_id).second) throw ConfigError(where + ".group_id: duplicate id");
    if (voice.centroid.size() != cfg.dim)
      throw ConfigError(where + ".centroid: dimension " + std::to_string(voice.centroid.size()) +
                        " does not match dim " + std::to_string(cfg.dim));
    if (!(voice.spread >= 0.0)) throw ConfigError(where + ".spread: must be >= 0");
    for (const auto& [topic, dist] : voice.label_policy) {
      const std::string p = where + ".label_policy[" + std::to_string(topic) + "]";
      check_distribution(dist, p);
      for (const auto& [label, prob] : dist)
        if (!labels.contains(label)) throw ConfigError(p + ": label '" + label + "' not in label_set");
    }
    for (const auto& [attr, dist] : voice.attribute_profile)
      check_distribution(dist, where + ".attribute_profile." + attr);
  }
}

SynthResult generate(const SynthConfig& cfg)
{
  validate_config(cfg);

  std::vector<std::string> attributes = cfg.attribute_names;
  if (attributes.empty()) {
    std::set<std::string> names;
    for (const auto& voice : cfg.voices)
      for (const auto& [attr, dist] : voice.attribute_profile) names.insert(attr);
    attributes.assign(names.begin(), names.end());
  }

  std::size_t annotators = 0;
  for (const auto& voice : cfg.voices) annotators += voice.size;
  const std::size_t total_rows = annotators * cfg.items + cfg.noise_rows;
  const int id_width = std::max<int>(4, static_cast<int>(std::to_string(std::max(annotators, cfg.noise_rows)).size()));
  const int item_width = std::max<int>(3, static_cast<int>(std::to_string(cfg.items).size()));

  std::vector<std::string> item_ids(cfg.items);
  Points item_offsets(static_cast<Index>(cfg.items), cfg.dim);
  SynthResult result;
  for (std::size_t j = 0; j < cfg.items; ++j) {
    item_ids[j] = numbered("i", j, item_width);
    Rng rng(cfg.seed, "item_offset", j);
    for (Index d = 0; d < cfg.dim; ++d) item_offsets(static_cast<Index>(j), d) = cfg.item_offset_scale * rng.normal();
    result.item_text[item_ids[j]] =
        "Synthetic item " + item_ids[j] + " (topic " + std::to_string(j % cfg.topics) + ")";
  }

  EmbeddingMatrix emb;
  emb.values.resize(static_cast<Index>(total_rows), cfg.dim);
  emb.row_index.reserve(total_rows);
  std::vector<AnnotationRecord> annotations;
  annotations.reserve(total_rows);
  std::vector<AnnotatorMetadata> metadata;
  result.ground_truth.reserve(total_rows);

  auto add_row = [&](const std::string& annotator, std::size_t item, const VoiceSpec* voice,
                     const Eigen::VectorXd& center, double sd, int truth) {
    const std::size_t r = emb.row_index.size();
    Rng noise(cfg.seed, "embedding", r);
    auto row = emb.values.row(static_cast<Index>(r));
    for (Index d = 0; d < cfg.dim; ++d) {
      double offset = voice ? item_offsets(static_cast<Index>(item), d) : 0.0;
      row(d) = center(d) + offset + sd * noise.normal();
    }
    emb.row_index.push_back({annotator, item_ids[item]});

    Rng label_rng(cfg.seed, "label", r);
    const int topic = static_cast<int>(item % cfg.topics);
    AnnotationRecord rec{annotator, item_ids[item], draw_label(voice, topic, cfg.label_set, label_rng),
                         std::nullopt};
    if (cfg.prediction_accuracy) {
      Rng pred(cfg.seed, "prediction", r);
      if (pred.uniform() < *cfg.prediction_accuracy || cfg.label_set.size() == 1) {
        rec.predicted_label = rec.gold_label;
      } else {
        std::vector<std::string> others;
        for (const auto& l : cfg.label_set)
          if (l != rec.gold_label) others.push_back(l);
        rec.predicted_label = others[pred.below(others.size())];
      }
    }
    annotations.push_back(std::move(rec));
    result.ground_truth.push_back(truth);
  };

  std::size_t annotator_counter = 0;
  for (std::size_t v = 0; v < cfg.voices.size(); ++v) {
    const auto& voice = cfg.voices[v];
    if (!voice.voice_type.empty()) result.voice_types[voice.group_id] = voice.voice_type;

    std::map<std::string, std::vector<std::string>> quota;
    if (cfg.metadata_mode == MetadataMode::quota) {
      for (std::size_t a = 0; a < attributes.size(); ++a) {
        auto it = voice.attribute_profile.find(attributes[a]);
        if (it == voice.attribute_profile.end()) continue;
        auto values = apportion(it->second, voice.size);
        Rng rng(cfg.seed, "quota", static_cast<std::uint64_t>(voice.group_id) * 1024 + a);
        rng.shuffle(values.begin(), values.end());
        quota[attributes[a]] = std::move(values);
      }
    }

    for (std::size_t m = 0; m < voice.size; ++m, ++annotator_counter) {
      const std::string id = numbered("a", annotator_counter, id_width);
      AnnotatorMetadata meta{id, {}};
      for (std::size_t a = 0; a < attributes.size(); ++a) {
        const auto& name = attributes[a];
        auto it = voice.attribute_profile.find(name);
        if (it == voice.attribute_profile.end()) {
          meta.attributes[name] = kUnknownValue;
        } else if (cfg.metadata_mode == MetadataMode::quota) {
          meta.attributes[name] = quota[name][m];
        } else {
          Rng rng(cfg.seed, "metadata", annotator_counter * 1024 + a);
          auto w = weights_of(it->second);
          meta.attributes[name] = it->second[rng.categorical(w)].first;
        }
      }
      metadata.push_back(std::move(meta));
      for (std::size_t j = 0; j < cfg.items; ++j)
        add_row(id, j, &voice, voice.centroid, voice.spread, voice.group_id);
    }
  }

  if (cfg.noise_rows > 0) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(cfg.dim);
    std::vector<double> sizes;
    for (const auto& voice : cfg.voices) {
      mean += voice.centroid;
      sizes.push_back(static_cast<double>(std::max<std::size_t>(voice.size, 1)));
    }
    mean /= static_cast<double>(cfg.voices.size());
    for (std::size_t n = 0; n < cfg.noise_rows; ++n) {
      const std::string id = numbered("n", n, id_width);
      AnnotatorMetadata meta{id, {}};
      Rng rng(cfg.seed, "noise_metadata", n);
      const auto& donor = cfg.voices[rng.categorical(sizes)];
      for (const auto& name : attributes) {
        auto it = donor.attribute_profile.find(name);
        if (it == donor.attribute_profile.end()) {
          meta.attributes[name] = kUnknownValue;
        } else {
          auto w = weights_of(it->second);
          meta.attributes[name] = it->second[rng.categorical(w)].first;
        }
      }
      metadata.push_back(std::move(meta));
      add_row(id, n % cfg.items, nullptr, mean, cfg.noise_scale, kNoise);
    }
  }

  JoinOptions join;
  join.strict = true;
  join.label_set = cfg.label_set;
  result.dataset = join_dataset(std::move(emb), annotations, metadata, join);
  return result;
}

std::string to_string(FixtureProfile profile) { return profile == FixtureProfile::mbic ? "mbic" : "gwsd"; }

FixtureProfile fixture_profile_from_string(const std::string& name)
{
  if (name == "mbic") return FixtureProfile::mbic;
  if (name == "gwsd") return FixtureProfile::gwsd;
  throw ConfigError("unknown fixture profile '" + name + "' (expected mbic or gwsd)");
}

namespace
{

struct GroupPlan
{
  const char* voice_type;
  std::size_t size;
  std::vector<std::pair<std::string, std::size_t>> political;
  std::vector<std::pair<std::string, std::size_t>> education;
};

ValueDistribution from_counts(const std::vector<std::pair<std::string, std::size_t>>& counts)
{
  std::size_t total = 0;
  for (const auto& [v, c] : counts) total += c;
  ValueDistribution dist;
  double acc = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    double p = i + 1 == counts.size() ? 1.0 - acc
                                      : static_cast<double>(counts[i].second) / static_cast<double>(total);
    acc += p;
    dist.emplace_back(counts[i].first, p);
  }
  return dist;
}

// Annotator counts per planted group. Column totals reproduce the published marginals
// (MBIC political 44.3/26.7/29.1, GWSD political 46/21.2/28.8/4 and 8.4% higher degree)
// to within one annotator out of 200.
std::vector<GroupPlan> plan_for(FixtureProfile profile)
{
  if (profile == FixtureProfile::mbic) {
    return {
        {"majority", 135, {{"left", 85}, {"center", 48}, {"right", 2}},
         {{"high_school", 52}, {"bachelor", 78}, {"higher_degree", 5}}},
        {"minority", 40, {{"right", 30}, {"center", 8}, {"left", 2}},
         {{"high_school", 16}, {"bachelor", 20}, {"higher_degree", 4}}},
        {"inter-minority", 25, {{"right", 21}, {"center", 2}, {"left", 2}},
         {{"higher_degree", 21}, {"bachelor", 2}, {"high_school", 2}}},
    };
  }
  return {
      {"majority", 142, {{"democrat", 88}, {"independent", 47}, {"other", 5}, {"republican", 2}},
       {{"bachelor", 63}, {"some_college", 41}, {"high_school", 36}, {"higher_degree", 2}}},
      {"minority", 40, {{"republican", 25}, {"independent", 10}, {"democrat", 3}, {"other", 2}},
       {{"bachelor", 17}, {"some_college", 13}, {"high_school", 10}}},
      {"inter-minority", 18, {{"republican", 15}, {"democrat", 1}, {"independent", 1}, {"other", 1}},
       {{"higher_degree", 15}, {"high_school", 2}, {"some_college", 1}}},
  };
}

}  // namespace

SynthConfig paper_like_config(FixtureProfile profile, std::uint64_t seed, const FixtureOptions& options)
{
  if (options.dim < 3) throw ConfigError("fixture.dim: must be >= 3");
  SynthConfig cfg;
  cfg.dim = options.dim;
  cfg.items = options.items;
  cfg.seed = seed;
  cfg.item_offset_scale = options.item_offset_scale;
  cfg.prediction_accuracy = options.prediction_accuracy;
  cfg.metadata_mode = MetadataMode::quota;
  if (profile == FixtureProfile::mbic) {
    cfg.topics = 14;
    cfg.label_set = {"biased", "non-biased"};
  } else {
    cfg.topics = 5;
    cfg.label_set = {"agree", "disagree", "neutral"};
  }
  cfg.attribute_names = {"age", "education", "political"};
  const ValueDistribution age{{"18-29", 0.3}, {"30-44", 0.3}, {"45-59", 0.25}, {"60+", 0.15}};

  // Centroids sit on distinct coordinate axes chosen by the seed, so every pair is
  // exactly `separation` apart.
  std::vector<Index> axes(static_cast<std::size_t>(cfg.dim));
  std::iota(axes.begin(), axes.end(), Index{0});
  Rng axis_rng(seed, "fixture_axes");
  axis_rng.shuffle(axes.begin(), axes.end());

  auto plan = plan_for(profile);
  for (std::size_t g = 0; g < plan.size(); ++g) {
    VoiceSpec voice;
    voice.group_id = static_cast<int>(g);
    voice.size = plan[g].size;
    voice.centroid = Eigen::VectorXd::Zero(cfg.dim);
    voice.centroid(axes[g]) = options.separation / std::sqrt(2.0);
    voice.spread = options.spread;
    voice.voice_type = plan[g].voice_type;
    voice.attribute_profile["political"] = from_counts(plan[g].political);
    voice.attribute_profile["education"] = from_counts(plan[g].education);
    voice.attribute_profile["age"] = age;
    for (std::size_t t = 0; t < cfg.topics; ++t) {
      Rng rng(seed, "label_policy", g * 1024 + t);
      std::vector<double> w(cfg.label_set.size());
      double total = 0.0;
      for (auto& x : w) total += (x = rng.uniform(0.2, 1.0));
      ValueDistribution dist;
      double acc = 0.0;
      for (std::size_t l = 0; l < w.size(); ++l) {
        double p = l + 1 == w.size() ? 1.0 - acc : w[l] / total;
        acc += p;
        dist.emplace_back(cfg.label_set[l], p);
      }
      voice.label_policy[static_cast<int>(t)] = std::move(dist);
    }
    cfg.voices.push_back(std::move(voice));
  }
  return cfg;
}

SynthResult make_paper_like_fixture(FixtureProfile profile, std::uint64_t seed,
                                    const FixtureOptions& options)
{
  return generate(paper_like_config(profile, seed, options));
}

void write_synth_output(const std::filesystem::path& dir, const SynthResult& result,
                        EmbeddingFormat format)
{
  std::filesystem::create_directories(dir);
  const auto& ds = result.dataset;
  save_embeddings(dir / (format == EmbeddingFormat::csv ? "embeddings.csv" : "embeddings.bin"),
                  ds.embeddings, format);
  write_annotations(dir / "annotations.jsonl", ds.annotations);

  std::vector<AnnotatorMetadata> meta;
  std::set<std::string> seen;
  for (const auto& key : ds.embeddings.row_index)
    if (seen.insert(key.annotator_id).second) meta.push_back(ds.metadata.at(key.annotator_id));
  write_metadata(dir / "metadata.csv", meta, ds.attribute_names);
  write_item_text(dir / "items.csv", result.item_text);

  std::ofstream gt(dir / "ground_truth.csv");
  if (!gt) throw DataError("cannot write " + (dir / "ground_truth.csv").string());
  gt << "annotator_id,item_id,group_id\n";
  for (std::size_t r = 0; r < ds.embeddings.row_index.size(); ++r) {
    const auto& key = ds.embeddings.row_index[r];
    gt << csv::join({key.annotator_id, key.item_id, std::to_string(result.ground_truth[r])}) << '\n';
  }
}

std::vector<int> read_ground_truth(const std::filesystem::path& path,
                                   const std::vector<RowKey>& row_index)
{
  auto rows = csv::read_file(path);
  std::map<RowKey, int> truth;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (r == 0 && rows[r].size() == 3 && rows[r][0] == "annotator_id") continue;
    if (rows[r].size() != 3) throw DataError(path.string() + ": expected 3 columns at record " + std::to_string(r));
    try {
      truth[{rows[r][0], rows[r][1]}] = std::stoi(rows[r][2]);
    } catch (const std::exception&) {
      throw DataError(path.string() + ": bad group id '" + rows[r][2] + "'");
    }
  }
  std::vector<int> out;
  out.reserve(row_index.size());
  for (const auto& key : row_index) {
    auto it = truth.find(key);
    if (it == truth.end())
      throw DataError(path.string() + ": no ground truth for (" + key.annotator_id + ", " + key.item_id + ")");
    out.push_back(it->second);
  }
  return out;
}

}  // namespace voices
