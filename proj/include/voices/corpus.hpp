#pragma once

#include "voices/types.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace voices
{

/// One behavioural embedding per (annotator, item) row.
struct EmbeddingMatrix
{
  Points values;
  std::vector<RowKey> row_index;

  Index rows() const { return values.rows(); }
  Index dim() const { return values.cols(); }
};

struct AnnotationRecord
{
  std::string annotator_id;
  std::string item_id;
  std::string gold_label;
  std::optional<std::string> predicted_label;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

struct AnnotatorMetadata
{
  std::string annotator_id;
  std::map<std::string, std::string> attributes;

  friend bool operator==(const AnnotatorMetadata&, const AnnotatorMetadata&) = default;
};

/// Value used for attributes of annotators that have no metadata record.
inline const std::string kUnknownValue = "unknown";

/**
 * Embeddings joined with their annotations and annotator metadata.
 *
 * annotations[i] describes embeddings.row_index[i]. Vocabularies list every value an
 * attribute takes, sorted, including kUnknownValue when a non-strict join filled gaps.
 */
struct Dataset
{
  EmbeddingMatrix embeddings;
  std::vector<AnnotationRecord> annotations;
  std::map<std::string, AnnotatorMetadata> metadata;
  std::vector<std::string> label_set;
  std::vector<std::string> attribute_names;
  std::map<std::string, std::vector<std::string>> vocabularies;

  Index rows() const { return embeddings.rows(); }
  /// Attribute value for every row, in row order.
  std::vector<std::string> attribute_column(const std::string& attribute) const;
  const std::vector<std::string>& vocabulary(const std::string& attribute) const;
};

enum class EmbeddingFormat
{
  csv,
  binary
};

EmbeddingFormat embedding_format_from_string(const std::string& name);
/// Guess from the extension: ".bin" is binary, anything else CSV.
EmbeddingFormat embedding_format_for(const std::filesystem::path& path);

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, EmbeddingFormat format);
void save_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& emb,
                     EmbeddingFormat format);

/// Throws DataError naming the first non-finite cell or duplicate row key.
void check_embeddings(const EmbeddingMatrix& emb);

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path,
                       const std::vector<AnnotationRecord>& records);

std::vector<AnnotatorMetadata> read_metadata(const std::filesystem::path& path);
/// Columns are annotator_id followed by the given attribute order.
void write_metadata(const std::filesystem::path& path,
                    const std::vector<AnnotatorMetadata>& records,
                    const std::vector<std::string>& attribute_names);

/// Optional item_id -> text sidecar (CSV: item_id,text). Text is passed through verbatim.
std::map<std::string, std::string> read_item_text(const std::filesystem::path& path);
void write_item_text(const std::filesystem::path& path,
                     const std::map<std::string, std::string>& texts);

struct JoinOptions
{
  /// Fail when an annotator has no metadata; otherwise fill with kUnknownValue.
  bool strict = true;
  /// Declared label vocabulary. Inferred from the annotations when empty.
  std::vector<std::string> label_set;
};

Dataset join_dataset(EmbeddingMatrix emb, const std::vector<AnnotationRecord>& annotations,
                     const std::vector<AnnotatorMetadata>& metadata, const JoinOptions& options);

Dataset join_dataset(EmbeddingMatrix emb, const std::filesystem::path& annotations,
                     const std::filesystem::path& metadata, const JoinOptions& options);

enum class DistributionWeighting
{
  per_row,
  per_annotator
};

std::string to_string(DistributionWeighting weighting);
DistributionWeighting distribution_weighting_from_string(const std::string& name);

using Distribution = std::map<std::string, double>;

/// Share of each attribute value, counted per embedding row unless asked otherwise.
Distribution label_distribution(const Dataset& ds, const std::string& attribute,
                                DistributionWeighting weighting = DistributionWeighting::per_row);

}  // namespace voices
