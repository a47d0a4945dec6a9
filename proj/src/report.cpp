#include "voices/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace voices
{

namespace
{

std::string fixed(double x, int digits)
{
  if (std::isnan(x)) return "-";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string percent(double x) { return fixed(100.0 * x, 1) + "%"; }

}  // namespace

std::string metrics_table(const std::vector<ReportRow>& rows, const std::vector<std::string>& attributes)
{
  std::vector<std::string> header{"Model", "# Clusters", "DB Index", "Silhouette"};
  for (const auto& a : attributes) header.push_back("Purity " + a);
  for (const auto& a : attributes) header.push_back("Prototypical % " + a);

  std::vector<std::vector<std::string>> cells{header};
  for (const auto& row : rows) {
    const auto& r = row.report;
    std::vector<std::string> line{row.name, std::to_string(r.n_clusters), fixed(r.davies_bouldin, 3),
                                  fixed(r.silhouette, 3)};
    for (const auto& a : attributes) {
      auto it = r.per_attribute.find(a);
      line.push_back(it == r.per_attribute.end() ? "-" : fixed(it->second.average_purity, 3));
    }
    for (const auto& a : attributes) {
      auto it = r.per_attribute.find(a);
      line.push_back(it == r.per_attribute.end() ? "-" : percent(it->second.prototypical_pct));
    }
    cells.push_back(std::move(line));
  }

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells)
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());

  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& line) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c > 0) out << "  ";
      const std::size_t pad = width[c] - line[c].size();
      if (c == 0)
        out << line[c] << std::string(pad, ' ');
      else
        out << std::string(pad, ' ') << line[c];
    }
    out << '\n';
  };
  emit(cells[0]);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  for (std::size_t i = 1; i < cells.size(); ++i) emit(cells[i]);
  return out.str();
}

std::vector<ClusterCard> cluster_cards(const Points& space, const ClusterAssignment& assignment, const Dataset& ds,
                                       const ValidationReport& report,
                                       const std::map<std::string, std::string>& item_text, int n_examples)
{
  if (space.rows() != ds.rows() || assignment.labels.size() != static_cast<std::size_t>(ds.rows()))
    throw DataError("report: assignment, space and dataset row counts differ");
  const Points means = cluster_means(space, assignment.labels, assignment.n_clusters);

  std::vector<ClusterCard> cards(static_cast<std::size_t>(assignment.n_clusters));
  for (int id = 0; id < assignment.n_clusters; ++id) {
    auto& card = cards[static_cast<std::size_t>(id)];
    card.cluster_id = id;
    if (static_cast<std::size_t>(id) < report.voice_types.size()) card.voice_type = report.voice_types[static_cast<std::size_t>(id)];
    for (const auto& [attribute, ar] : report.per_attribute) {
      card.baselines[attribute] = ar.baseline;
      for (const auto& c : ar.per_cluster)
        if (c.cluster_id == id) card.composition[attribute] = c;
    }
  }

  std::vector<std::vector<std::pair<double, Index>>> members(cards.size());
  for (Index i = 0; i < space.rows(); ++i) {
    const int label = assignment.labels[static_cast<std::size_t>(i)];
    if (label == kNoise) continue;
    members[static_cast<std::size_t>(label)].push_back({(space.row(i) - means.row(label)).norm(), i});
  }
  for (std::size_t c = 0; c < cards.size(); ++c) {
    auto& list = members[c];
    cards[c].size = list.size();
    const std::size_t take = std::min(list.size(), static_cast<std::size_t>(std::max(n_examples, 0)));
    std::partial_sort(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(take), list.end());
    for (std::size_t e = 0; e < take; ++e) {
      const Index row = list[e].second;
      Representative rep;
      rep.key = ds.embeddings.row_index[static_cast<std::size_t>(row)];
      rep.distance = list[e].first;
      rep.gold_label = ds.annotations[static_cast<std::size_t>(row)].gold_label;
      if (auto it = item_text.find(rep.key.item_id); it != item_text.end()) rep.text = it->second;
      cards[c].examples.push_back(std::move(rep));
    }
  }
  std::erase_if(cards, [](const ClusterCard& c) { return c.size == 0; });
  return cards;
}

std::string format_cards(const std::vector<ClusterCard>& cards)
{
  std::ostringstream out;
  for (const auto& card : cards) {
    out << "Cluster " << card.cluster_id << "  [" << to_string(card.voice_type) << "]  size " << card.size << '\n';
    for (const auto& [attribute, comp] : card.composition) {
      const auto& baseline = card.baselines.at(attribute);
      out << "  " << attribute << ":";
      std::vector<std::pair<std::string, double>> shares(comp.distribution.begin(), comp.distribution.end());
      std::stable_sort(shares.begin(), shares.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
      for (const auto& [value, share] : shares) {
        auto b = baseline.find(value);
        out << "  " << value << " " << percent(share) << " (" << percent(b == baseline.end() ? 0.0 : b->second) << ")";
      }
      if (comp.prototypical) out << "  prototypical";
      out << '\n';
    }
    if (!card.examples.empty()) out << "  representative examples:\n";
    for (std::size_t e = 0; e < card.examples.size(); ++e) {
      const auto& rep = card.examples[e];
      out << "    " << e + 1 << ". " << rep.key.annotator_id << " / " << rep.key.item_id << "  label=" << rep.gold_label
          << "  d=" << fixed(rep.distance, 4);
      if (rep.text) out << "  \"" << *rep.text << "\"";
      out << '\n';
    }
    out << '\n';
  }
  return out.str();
}

void to_json(Json& j, const Representative& r)
{
  j = Json{{"annotator_id", r.key.annotator_id},
           {"item_id", r.key.item_id},
           {"distance", r.distance},
           {"gold_label", r.gold_label}};
  j["text"] = r.text ? Json(*r.text) : Json(nullptr);
}

void to_json(Json& j, const ClusterCard& c)
{
  j = Json{{"cluster_id", c.cluster_id},
           {"size", c.size},
           {"voice_type", to_string(c.voice_type)},
           {"composition", c.composition},
           {"examples", c.examples}};
}

std::string scatter_svg(const Points& space, const std::vector<int>& labels, int width, int height)
{
  if (space.cols() < 2) throw DataError("scatter: need at least two columns");
  if (labels.size() != static_cast<std::size_t>(space.rows())) throw DataError("scatter: label count does not match rows");
  static constexpr const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  const double margin = 20.0;
  const double xmin = space.col(0).minCoeff(), xmax = space.col(0).maxCoeff();
  const double ymin = space.col(1).minCoeff(), ymax = space.col(1).maxCoeff();
  const double sx = (width - 2 * margin) / std::max(xmax - xmin, 1e-12);
  const double sy = (height - 2 * margin) / std::max(ymax - ymin, 1e-12);

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (Index i = 0; i < space.rows(); ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    const char* colour = label == kNoise ? "#cccccc" : palette[label % 10];
    const double x = margin + (space(i, 0) - xmin) * sx;
    const double y = height - margin - (space(i, 1) - ymin) * sy;
    out << "<circle cx=\"" << fixed(x, 2) << "\" cy=\"" << fixed(y, 2) << "\" r=\"2\" fill=\"" << colour
        << "\" data-cluster=\"" << label << "\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace voices
