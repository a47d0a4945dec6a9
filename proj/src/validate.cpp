#include "voices/validate.hpp"

#include "voices/log.hpp"
#include "voices/rng.hpp"

#include <array>
#include <set>
#include <stdexcept>

namespace voices
{

namespace detail
{

int compact_labels(std::span<const int> labels, std::vector<int>& compact)
{
  std::map<int, int> ids;
  for (int label : labels) {
    if (label == kNoise) continue;
    if (label < 0) throw DataError("invalid cluster label " + std::to_string(label));
    ids.emplace(label, 0);
  }
  int next = 0;
  for (auto& [label, id] : ids) id = next++;
  compact.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) compact[i] = labels[i] == kNoise ? kNoise : ids.at(labels[i]);
  return next;
}

}  // namespace detail

std::string to_string(PurityAveraging averaging)
{
  return averaging == PurityAveraging::unweighted ? "unweighted" : "size_weighted";
}

PurityAveraging purity_averaging_from_string(const std::string& name)
{
  if (name == "unweighted") return PurityAveraging::unweighted;
  if (name == "size_weighted") return PurityAveraging::size_weighted;
  throw ConfigError("unknown purity averaging '" + name + "' (expected unweighted or size_weighted)");
}

std::string to_string(PrototypeRule rule)
{
  return rule == PrototypeRule::majority_share ? "majority_share" : "total_variation";
}

PrototypeRule prototype_rule_from_string(const std::string& name)
{
  if (name == "majority_share") return PrototypeRule::majority_share;
  if (name == "total_variation") return PrototypeRule::total_variation;
  throw ConfigError("unknown prototype rule '" + name + "' (expected majority_share or total_variation)");
}

std::string to_string(VoiceType type)
{
  switch (type) {
  case VoiceType::none: return "none";
  case VoiceType::majority: return "majority";
  case VoiceType::minority: return "minority";
  case VoiceType::inter_minority: return "inter-minority";
  }
  throw std::logic_error("unknown voice type");
}

VoiceType voice_type_from_string(const std::string& name)
{
  if (name == "none") return VoiceType::none;
  if (name == "majority") return VoiceType::majority;
  if (name == "minority") return VoiceType::minority;
  if (name == "inter-minority") return VoiceType::inter_minority;
  throw DataError("unknown voice type '" + name + "'");
}

std::vector<ClusterComposition> purity_per_cluster(std::span<const int> labels,
                                                   const std::vector<std::string>& values, bool include_noise)
{
  if (labels.size() != values.size()) throw DataError("purity: label count does not match attribute column");
  std::map<int, std::map<std::string, double>> counts;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kNoise && !include_noise) continue;
    counts[labels[i]][values[i]] += 1.0;
  }

  std::vector<ClusterComposition> out;
  for (const auto& [id, tally] : counts) {
    ClusterComposition c;
    c.cluster_id = id;
    double total = 0.0;
    for (const auto& [value, count] : tally) total += count;
    c.size = static_cast<std::size_t>(total);
    double best = -1.0;
    for (const auto& [value, count] : tally) {
      c.distribution[value] = count / total;
      if (count > best) {
        best = count;
        c.majority_value = value;
      }
    }
    c.purity = best / total;
    out.push_back(std::move(c));
  }
  // Noise (id -1) sorts first in the map; report it last.
  if (!out.empty() && out.front().cluster_id == kNoise) std::rotate(out.begin(), out.begin() + 1, out.end());
  return out;
}

std::vector<ClusterComposition> purity_per_cluster(const ClusterAssignment& assignment, const Dataset& ds,
                                                   const std::string& attribute, bool include_noise)
{
  auto out = purity_per_cluster(assignment.labels, ds.attribute_column(attribute), include_noise);
  std::set<int> present;
  for (const auto& c : out) present.insert(c.cluster_id);
  for (int id = 0; id < assignment.n_clusters; ++id)
    if (!present.contains(id)) log::info("purity: cluster " + std::to_string(id) + " is empty, skipped");
  return out;
}

double average_purity(const std::vector<ClusterComposition>& clusters, PurityAveraging averaging)
{
  if (clusters.empty()) return 0.0;
  double num = 0.0;
  double den = 0.0;
  for (const auto& c : clusters) {
    const double w = averaging == PurityAveraging::unweighted ? 1.0 : static_cast<double>(c.size);
    num += w * c.purity;
    den += w;
  }
  return num / den;
}

namespace
{

constexpr double kBoundaryEps = 1e-9;

double share_of(const Distribution& dist, const std::string& value)
{
  auto it = dist.find(value);
  return it == dist.end() ? 0.0 : it->second;
}

std::string majority_of(const Distribution& dist)
{
  std::string best;
  double share = -1.0;
  for (const auto& [value, s] : dist)
    if (s > share) {
      share = s;
      best = value;
    }
  return best;
}

}  // namespace

double prototypical_flags(std::vector<ClusterComposition>& clusters, const Distribution& baseline,
                          PrototypeRule rule, double threshold)
{
  if (clusters.empty()) return 0.0;
  std::size_t flagged = 0;
  for (auto& c : clusters) {
    for (const auto& [value, share] : c.distribution)
      if (!baseline.contains(value)) throw DataError("baseline has no share for value '" + value + "'");
    if (rule == PrototypeRule::majority_share) {
      c.deviation = c.distribution.at(c.majority_value) - baseline.at(c.majority_value);
      c.prototypical = std::abs(c.deviation) > threshold + kBoundaryEps;
    } else {
      double tv = 0.0;
      for (const auto& [value, base] : baseline) tv += std::abs(share_of(c.distribution, value) - base);
      c.deviation = 0.5 * tv;
      c.prototypical = c.deviation > threshold + kBoundaryEps;
    }
    flagged += c.prototypical ? 1 : 0;
  }
  return static_cast<double>(flagged) / static_cast<double>(clusters.size());
}

VoiceType voice_type(const std::vector<VoiceEvidence>& evidence)
{
  int minority_hits = 0;
  bool majority_hit = false;
  for (const auto& e : evidence) {
    if (!e.prototypical || e.share <= share_of(e.baseline, e.value)) continue;
    if (e.value == majority_of(e.baseline))
      majority_hit = true;
    else
      ++minority_hits;
  }
  if (minority_hits >= 2) return VoiceType::inter_minority;
  if (minority_hits == 1) return VoiceType::minority;
  return majority_hit ? VoiceType::majority : VoiceType::none;
}

ApcsResult apcs(const Points& data, std::uint64_t seed, Index exact_max_rows, std::size_t samples)
{
  const Index n = data.rows();
  if (n < 2) throw DataError("apcs needs at least 2 rows");
  Points unit = data;
  for (Index i = 0; i < n; ++i) {
    const double norm = unit.row(i).norm();
    if (!(norm > 0.0)) throw DataError("apcs: row " + std::to_string(i) + " has zero norm");
    unit.row(i) /= norm;
  }

  ApcsResult result;
  if (n < exact_max_rows) {
    double sum = 0.0;
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) sum += unit.row(i).dot(unit.row(j));
    result.pairs = static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2;
    result.value = sum / static_cast<double>(result.pairs);
    result.exact = true;
    return result;
  }

  Rng rng(seed, "apcs");
  const auto un = static_cast<std::uint64_t>(n);
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto i = static_cast<Index>(rng.below(un));
    auto j = static_cast<Index>(rng.below(un - 1));
    if (j >= i) ++j;
    const double x = unit.row(i).dot(unit.row(j));
    const double delta = x - mean;
    mean += delta / static_cast<double>(s + 1);
    m2 += delta * (x - mean);
  }
  result.value = mean;
  result.standard_error = std::sqrt(m2 / static_cast<double>(samples - 1) / static_cast<double>(samples));
  result.exact = false;
  result.pairs = samples;
  return result;
}

double f1_macro(const std::vector<AnnotationRecord>& records)
{
  if (records.empty()) throw DataError("f1_macro: no records");
  std::size_t missing = 0;
  for (const auto& r : records) missing += r.predicted_label ? 0 : 1;
  if (missing > 0)
    throw DataError("missing predictions: " + std::to_string(missing) + " of " + std::to_string(records.size()) +
                    " records");

  std::map<std::string, std::array<double, 3>> tally;  // tp, fp, fn
  for (const auto& r : records) {
    const auto& pred = *r.predicted_label;
    if (pred == r.gold_label) {
      tally[pred][0] += 1.0;
    } else {
      tally[pred][1] += 1.0;
      tally[r.gold_label][2] += 1.0;
    }
  }
  double sum = 0.0;
  int labels = 0;
  for (const auto& [label, t] : tally) {
    const double den = 2.0 * t[0] + t[1] + t[2];
    if (den == 0.0) continue;
    sum += 2.0 * t[0] / den;
    ++labels;
  }
  return sum / labels;
}

double adjusted_rand(std::span<const int> a, std::span<const int> b)
{
  if (a.size() != b.size()) throw DataError("adjusted_rand: partitions cover different row counts");
  const auto n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };

  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows;
  std::map<int, double> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  double index = 0.0;
  for (const auto& [cell, count] : table) index += pairs(count);
  double sum_a = 0.0;
  for (const auto& [label, count] : rows) sum_a += pairs(count);
  double sum_b = 0.0;
  for (const auto& [label, count] : cols) sum_b += pairs(count);
  const double expected = sum_a * sum_b / pairs(n);
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

ValidationReport validate(const Points& scored, const ClusterAssignment& assignment, const Dataset& ds,
                          const ValidationOptions& options, const std::vector<int>* ground_truth)
{
  if (assignment.labels.size() != static_cast<std::size_t>(ds.rows()))
    throw DataError("assignment has " + std::to_string(assignment.labels.size()) + " rows, dataset has " +
                    std::to_string(ds.rows()));
  if (scored.rows() != ds.rows()) throw DataError("scored matrix rows do not match the dataset");

  ValidationReport report;
  report.n_clusters = assignment.n_clusters;
  report.degenerate = assignment.degenerate;
  report.degenerate_reason = assignment.degenerate_reason;
  std::size_t noise = 0;
  for (int label : assignment.labels) noise += label == kNoise ? 1 : 0;
  report.noise_fraction = static_cast<double>(noise) / static_cast<double>(assignment.labels.size());

  report.silhouette = silhouette(scored, assignment.labels);
  report.davies_bouldin = davies_bouldin(scored, assignment.labels);

  const auto& attributes = options.attributes.empty() ? ds.attribute_names : options.attributes;
  for (const auto& attribute : attributes) {
    if (std::find(ds.attribute_names.begin(), ds.attribute_names.end(), attribute) == ds.attribute_names.end())
      throw DataError("unknown attribute '" + attribute + "'");
    AttributeReport ar;
    ar.baseline = label_distribution(ds, attribute, options.baseline_weighting);
    ar.per_cluster = purity_per_cluster(assignment, ds, attribute, options.noise_in_external);
    ar.average_purity = average_purity(ar.per_cluster, options.averaging);
    ar.prototypical_pct = prototypical_flags(ar.per_cluster, ar.baseline, options.rule, options.threshold);
    report.per_attribute.emplace(attribute, std::move(ar));
  }

  report.voice_types.assign(static_cast<std::size_t>(std::max(assignment.n_clusters, 0)), VoiceType::none);
  for (int id = 0; id < assignment.n_clusters; ++id) {
    std::vector<VoiceEvidence> evidence;
    for (const auto& [attribute, ar] : report.per_attribute)
      for (const auto& c : ar.per_cluster)
        if (c.cluster_id == id)
          evidence.push_back({c.prototypical, c.majority_value, c.distribution.at(c.majority_value), ar.baseline});
    report.voice_types[static_cast<std::size_t>(id)] = voice_type(evidence);
  }
  for (auto& [attribute, ar] : report.per_attribute)
    for (auto& c : ar.per_cluster)
      if (c.cluster_id != kNoise) c.voice_type = report.voice_types[static_cast<std::size_t>(c.cluster_id)];

  if (options.compute_apcs) report.apcs = apcs(ds.embeddings.values, options.seed);
  if (ground_truth) report.ari = adjusted_rand(assignment.labels, *ground_truth);
  const bool predicted = !ds.annotations.empty() &&
                         std::all_of(ds.annotations.begin(), ds.annotations.end(),
                                     [](const AnnotationRecord& r) { return r.predicted_label.has_value(); });
  if (predicted) report.f1 = f1_macro(ds.annotations);
  return report;
}

}  // namespace voices
