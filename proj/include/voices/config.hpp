#pragma once

#include "voices/serialize.hpp"
#include "voices/synthpop.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace voices
{

struct DataSettings
{
  std::filesystem::path embeddings;
  /// Inferred from the extension when unset.
  std::optional<EmbeddingFormat> format;
  std::filesystem::path annotations;
  std::filesystem::path metadata;
  std::optional<std::filesystem::path> items;
  std::optional<std::filesystem::path> ground_truth;
  std::vector<std::string> label_set;
  bool strict = true;
};

struct SynthSettings
{
  FixtureProfile profile = FixtureProfile::mbic;
  FixtureOptions fixture;
  std::filesystem::path out_dir = "synth";
  EmbeddingFormat format = EmbeddingFormat::binary;
};

struct ReportSettings
{
  /// Rows nearest each centroid shown as representative examples.
  int representatives = 5;
  std::optional<std::filesystem::path> svg;
};

/// Fully resolved run configuration; every section has defaults.
struct PipelineConfig
{
  std::uint64_t seed = 0;
  DataSettings data;
  SynthSettings synth;
  ReductionConfig reduction;
  ClusterConfig cluster;
  ValidationOptions validation;
  ScoreSpace score_space = ScoreSpace::reduced;
  SweepSpec sweep;
  ReportSettings report;
};

Json read_config_file(const std::filesystem::path& path);

/// Applies "dotted.path=value"; value is parsed as JSON, falling back to a plain string.
void apply_override(Json& doc, const std::string& assignment);

/**
 * Builds a configuration from a JSON document. Unknown keys, wrong types and invalid
 * values raise ConfigError naming the offending path (e.g. "config.cluster.k").
 * Section seeds default to the top-level seed. Relative data paths resolve against
 * base_dir.
 */
PipelineConfig parse_config(const Json& doc, const std::filesystem::path& base_dir = {});

void to_json(Json& j, const PipelineConfig& cfg);

/// Documented schema with defaults, as printed by `voices config`.
std::string config_schema();

}  // namespace voices
