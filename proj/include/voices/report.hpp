#pragma once

#include "voices/serialize.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace voices
{

struct ReportRow
{
  std::string name;
  ValidationReport report;
};

/// Aligned text table: Model, # Clusters, DB Index, Silhouette, then Purity and Prototypical % per attribute.
std::string metrics_table(const std::vector<ReportRow>& rows, const std::vector<std::string>& attributes);

struct Representative
{
  RowKey key;
  double distance = 0.0;
  std::string gold_label;
  std::optional<std::string> text;
};

struct ClusterCard
{
  int cluster_id = 0;
  std::size_t size = 0;
  VoiceType voice_type = VoiceType::none;
  /// Composition of the cluster under each evaluated attribute.
  std::map<std::string, ClusterComposition> composition;
  std::map<std::string, Distribution> baselines;
  /// Rows closest to the cluster mean in `space`, nearest first; ties by row order.
  std::vector<Representative> examples;
};

std::vector<ClusterCard> cluster_cards(const Points& space, const ClusterAssignment& assignment, const Dataset& ds,
                                       const ValidationReport& report,
                                       const std::map<std::string, std::string>& item_text, int n_examples);

std::string format_cards(const std::vector<ClusterCard>& cards);

void to_json(Json& j, const Representative& r);
void to_json(Json& j, const ClusterCard& c);

/// 2-D scatter of the first two columns, one colour per cluster, noise in grey.
std::string scatter_svg(const Points& space, const std::vector<int>& labels, int width = 640, int height = 480);

}  // namespace voices
