#pragma once

#include "voices/corpus.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace voices
{

/// Ordered (value, probability) pairs; the order fixes sampling and apportionment.
using ValueDistribution = std::vector<std::pair<std::string, double>>;

/// One planted group of annotators sharing a behavioural centroid.
struct VoiceSpec
{
  int group_id = 0;
  std::size_t size = 0;
  Eigen::VectorXd centroid;
  double spread = 0.0;
  /// topic -> label distribution. Topics without an entry fall back to a uniform draw.
  std::map<int, ValueDistribution> label_policy;
  std::map<std::string, ValueDistribution> attribute_profile;
  /// Optional tag carried into the ground truth ("majority", "minority", "inter-minority").
  std::string voice_type;
};

enum class MetadataMode
{
  /// Each annotator's attributes are drawn independently from the profile.
  sample,
  /// Largest-remainder apportionment of the group size, then a seeded shuffle.
  quota
};

struct SynthConfig
{
  Index dim = 2;
  std::size_t items = 1;
  std::size_t topics = 1;
  std::vector<VoiceSpec> voices;
  std::size_t noise_rows = 0;
  std::uint64_t seed = 0;
  /// Std-dev of the per-item offset shared by every group.
  double item_offset_scale = 0.0;
  /// Std-dev of noise rows around the mean centroid.
  double noise_scale = 10.0;
  std::vector<std::string> label_set{"0", "1"};
  std::vector<std::string> attribute_names;
  MetadataMode metadata_mode = MetadataMode::sample;
  /// When set, every record carries a predicted label that equals gold with this probability.
  std::optional<double> prediction_accuracy;
};

/// Throws ConfigError on any violated invariant.
void validate_config(const SynthConfig& cfg);

struct SynthResult
{
  Dataset dataset;
  /// Planted group per row, kNoise for noise rows.
  std::vector<int> ground_truth;
  /// Synthetic item_id -> text sidecar.
  std::map<std::string, std::string> item_text;
  /// group_id -> planted voice type tag.
  std::map<int, std::string> voice_types;
};

SynthResult generate(const SynthConfig& cfg);

enum class FixtureProfile
{
  mbic,
  gwsd
};

std::string to_string(FixtureProfile profile);
FixtureProfile fixture_profile_from_string(const std::string& name);

struct FixtureOptions
{
  std::size_t items = 25;
  Index dim = 64;
  /// Distance between any two planted centroids.
  double separation = 8.0;
  double spread = 0.5;
  double item_offset_scale = 0.1;
  /// When set, every annotation also gets a predicted label that is correct with this probability.
  std::optional<double> prediction_accuracy;
};

/**
 * Fixture whose political (and education) marginals match the published dataset
 * descriptions to within one annotator of rounding, with three planted voices:
 * a majority voice, a minority voice and an inter-minority voice.
 */
SynthConfig paper_like_config(FixtureProfile profile, std::uint64_t seed,
                              const FixtureOptions& options = {});
SynthResult make_paper_like_fixture(FixtureProfile profile, std::uint64_t seed,
                                    const FixtureOptions& options = {});

/// Writes embeddings.{csv,bin}, annotations.jsonl, metadata.csv, items.csv and ground_truth.csv.
void write_synth_output(const std::filesystem::path& dir, const SynthResult& result,
                        EmbeddingFormat format);

std::vector<int> read_ground_truth(const std::filesystem::path& path,
                                   const std::vector<RowKey>& row_index);

}  // namespace voices
