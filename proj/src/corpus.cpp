#include "voices/corpus.hpp"

#include "voices/csv.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace voices
{

namespace
{

constexpr std::array<char, 8> kMagic = {'V', 'O', 'I', 'C', 'E', 'M', 'B', '\0'};
constexpr std::uint32_t kBinaryVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value)
{
  static_assert(std::is_integral_v<T>);
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bytes[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const std::filesystem::path& path)
{
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T)))
    throw DataError(path.string() + ": truncated binary embedding file");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return static_cast<T>(v);
}

void put_string(std::ostream& out, const std::string& s)
{
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, const std::filesystem::path& path)
{
  auto n = get_le<std::uint32_t>(in, path);
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) throw DataError(path.string() + ": truncated row key");
  return s;
}

std::string describe(const RowKey& key)
{
  return "(" + key.annotator_id + ", " + key.item_id + ")";
}

EmbeddingMatrix load_csv(const std::filesystem::path& path)
{
  auto records = csv::read_file(path);
  std::size_t first = 0;
  if (!records.empty() && records[0].size() >= 2 && records[0][0] == "annotator_id" &&
      records[0][1] == "item_id")
    first = 1;
  const std::size_t rows = records.size() - first;
  if (rows == 0) throw DataError(path.string() + ": no embedding rows");
  const std::size_t width = records[first].size();
  if (width < 3) throw DataError(path.string() + ": row 0 has no embedding values");
  const std::size_t dim = width - 2;

  EmbeddingMatrix emb;
  emb.values.resize(static_cast<Index>(rows), static_cast<Index>(dim));
  emb.row_index.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& rec = records[first + r];
    if (rec.size() != width)
      throw DataError(path.string() + ": dimension mismatch at row " + std::to_string(r) +
                      " (expected " + std::to_string(dim) + " values, found " +
                      std::to_string(rec.size() >= 2 ? rec.size() - 2 : 0) + ")");
    emb.row_index.push_back({rec[0], rec[1]});
    for (std::size_t c = 0; c < dim; ++c) {
      double v;
      if (!csv::parse_double(rec[c + 2], v))
        throw DataError(path.string() + ": unparseable value '" + rec[c + 2] + "' at row " +
                        std::to_string(r) + ", col " + std::to_string(c));
      emb.values(static_cast<Index>(r), static_cast<Index>(c)) = v;
    }
  }
  return emb;
}

void save_csv(const std::filesystem::path& path, const EmbeddingMatrix& emb)
{
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "annotator_id,item_id";
  for (Index c = 0; c < emb.dim(); ++c) out << ",v" << c;
  out << '\n';
  for (Index r = 0; r < emb.rows(); ++r) {
    const auto& key = emb.row_index[static_cast<std::size_t>(r)];
    out << csv::escape(key.annotator_id) << ',' << csv::escape(key.item_id);
    for (Index c = 0; c < emb.dim(); ++c) out << ',' << csv::format_double(emb.values(r, c));
    out << '\n';
  }
}

EmbeddingMatrix load_binary(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic)
    throw DataError(path.string() + ": not a binary embedding file (bad magic)");
  auto version = get_le<std::uint32_t>(in, path);
  if (version != kBinaryVersion)
    throw DataError(path.string() + ": unsupported binary version " + std::to_string(version));
  auto rows = get_le<std::uint64_t>(in, path);
  auto dim = get_le<std::uint64_t>(in, path);
  if (dim == 0) throw DataError(path.string() + ": zero embedding dimension");

  EmbeddingMatrix emb;
  emb.row_index.reserve(rows);
  for (std::uint64_t r = 0; r < rows; ++r) {
    auto a = get_string(in, path);
    auto i = get_string(in, path);
    emb.row_index.push_back({std::move(a), std::move(i)});
  }
  emb.values.resize(static_cast<Index>(rows), static_cast<Index>(dim));
  for (Index r = 0; r < emb.values.rows(); ++r)
    for (Index c = 0; c < emb.values.cols(); ++c)
      emb.values(r, c) = std::bit_cast<double>(get_le<std::uint64_t>(in, path));
  if (in.peek() != std::char_traits<char>::eof())
    throw DataError(path.string() + ": trailing bytes after embedding values");
  return emb;
}

void save_binary(const std::filesystem::path& path, const EmbeddingMatrix& emb)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kBinaryVersion);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(emb.rows()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(emb.dim()));
  for (const auto& key : emb.row_index) {
    put_string(out, key.annotator_id);
    put_string(out, key.item_id);
  }
  for (Index r = 0; r < emb.rows(); ++r)
    for (Index c = 0; c < emb.dim(); ++c)
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(emb.values(r, c)));
}

}  // namespace

std::vector<std::string> Dataset::attribute_column(const std::string& attribute) const
{
  if (!vocabularies.contains(attribute)) throw DataError("unknown attribute '" + attribute + "'");
  std::vector<std::string> column;
  column.reserve(embeddings.row_index.size());
  for (const auto& key : embeddings.row_index) {
    auto it = metadata.find(key.annotator_id);
    if (it == metadata.end()) {
      column.push_back(kUnknownValue);
      continue;
    }
    auto value = it->second.attributes.find(attribute);
    column.push_back(value == it->second.attributes.end() ? kUnknownValue : value->second);
  }
  return column;
}

const std::vector<std::string>& Dataset::vocabulary(const std::string& attribute) const
{
  auto it = vocabularies.find(attribute);
  if (it == vocabularies.end()) throw DataError("unknown attribute '" + attribute + "'");
  return it->second;
}

EmbeddingFormat embedding_format_from_string(const std::string& name)
{
  if (name == "csv") return EmbeddingFormat::csv;
  if (name == "binary" || name == "raw-binary" || name == "bin") return EmbeddingFormat::binary;
  throw ConfigError("unknown embedding format '" + name + "' (expected csv or binary)");
}

EmbeddingFormat embedding_format_for(const std::filesystem::path& path)
{
  return path.extension() == ".bin" ? EmbeddingFormat::binary : EmbeddingFormat::csv;
}

void check_embeddings(const EmbeddingMatrix& emb)
{
  if (static_cast<Index>(emb.row_index.size()) != emb.rows())
    throw DataError("row_index has " + std::to_string(emb.row_index.size()) + " keys for " +
                    std::to_string(emb.rows()) + " rows");
  for (Index r = 0; r < emb.rows(); ++r)
    for (Index c = 0; c < emb.dim(); ++c)
      if (!std::isfinite(emb.values(r, c)))
        throw DataError("non-finite embedding value at row " + std::to_string(r) + ", col " +
                        std::to_string(c) + " " + describe(emb.row_index[static_cast<std::size_t>(r)]));
  std::set<RowKey> seen;
  for (const auto& key : emb.row_index)
    if (!seen.insert(key).second) throw DataError("duplicate embedding row key " + describe(key));
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, EmbeddingFormat format)
{
  EmbeddingMatrix emb = format == EmbeddingFormat::csv ? load_csv(path) : load_binary(path);
  check_embeddings(emb);
  return emb;
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& emb,
                     EmbeddingFormat format)
{
  check_embeddings(emb);
  if (format == EmbeddingFormat::csv)
    save_csv(path, emb);
  else
    save_binary(path, emb);
}

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<AnnotationRecord> records;
  std::string line;
  std::size_t lineno = 0;
  auto field = [&](const nlohmann::json& obj, const char* key) -> std::string {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string())
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": missing string field '" +
                      key + "'");
    return it->get<std::string>();
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!obj.is_object())
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected a JSON object");
    AnnotationRecord rec{field(obj, "annotator_id"), field(obj, "item_id"),
                         field(obj, "gold_label"), std::nullopt};
    if (auto it = obj.find("predicted_label"); it != obj.end() && !it->is_null()) {
      if (!it->is_string())
        throw DataError(path.string() + ":" + std::to_string(lineno) +
                        ": predicted_label must be a string");
      rec.predicted_label = it->get<std::string>();
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_annotations(const std::filesystem::path& path,
                       const std::vector<AnnotationRecord>& records)
{
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& rec : records) {
    nlohmann::ordered_json obj;
    obj["annotator_id"] = rec.annotator_id;
    obj["item_id"] = rec.item_id;
    obj["gold_label"] = rec.gold_label;
    if (rec.predicted_label) obj["predicted_label"] = *rec.predicted_label;
    out << obj.dump() << '\n';
  }
}

std::vector<AnnotatorMetadata> read_metadata(const std::filesystem::path& path)
{
  auto rows = csv::read_file(path);
  if (rows.empty()) throw DataError(path.string() + ": empty metadata file");
  const auto& header = rows[0];
  if (header.empty() || header[0] != "annotator_id")
    throw DataError(path.string() + ": first header column must be annotator_id");
  std::vector<AnnotatorMetadata> out;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != header.size())
      throw DataError(path.string() + ": row " + std::to_string(r) + " has " +
                      std::to_string(rows[r].size()) + " columns, header has " +
                      std::to_string(header.size()));
    AnnotatorMetadata meta{rows[r][0], {}};
    if (!seen.insert(meta.annotator_id).second)
      throw DataError(path.string() + ": duplicate metadata for annotator " + meta.annotator_id);
    for (std::size_t c = 1; c < header.size(); ++c) meta.attributes[header[c]] = rows[r][c];
    out.push_back(std::move(meta));
  }
  return out;
}

void write_metadata(const std::filesystem::path& path,
                    const std::vector<AnnotatorMetadata>& records,
                    const std::vector<std::string>& attribute_names)
{
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  std::vector<std::string> header{"annotator_id"};
  header.insert(header.end(), attribute_names.begin(), attribute_names.end());
  out << csv::join(header) << '\n';
  for (const auto& rec : records) {
    std::vector<std::string> row{rec.annotator_id};
    for (const auto& name : attribute_names) {
      auto it = rec.attributes.find(name);
      row.push_back(it == rec.attributes.end() ? kUnknownValue : it->second);
    }
    out << csv::join(row) << '\n';
  }
}

std::map<std::string, std::string> read_item_text(const std::filesystem::path& path)
{
  auto rows = csv::read_file(path);
  std::map<std::string, std::string> texts;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (r == 0 && rows[r].size() == 2 && rows[r][0] == "item_id" && rows[r][1] == "text") continue;
    if (rows[r].size() != 2)
      throw DataError(path.string() + ": expected item_id,text at record " + std::to_string(r));
    texts[rows[r][0]] = rows[r][1];
  }
  return texts;
}

void write_item_text(const std::filesystem::path& path,
                     const std::map<std::string, std::string>& texts)
{
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "item_id,text\n";
  for (const auto& [item, text] : texts) out << csv::join({item, text}) << '\n';
}

Dataset join_dataset(EmbeddingMatrix emb, const std::vector<AnnotationRecord>& annotations,
                     const std::vector<AnnotatorMetadata>& metadata, const JoinOptions& options)
{
  check_embeddings(emb);

  std::map<RowKey, const AnnotationRecord*> by_key;
  for (const auto& rec : annotations) {
    if (!by_key.emplace(RowKey{rec.annotator_id, rec.item_id}, &rec).second)
      throw DataError("duplicate annotation for " + describe({rec.annotator_id, rec.item_id}));
  }

  Dataset ds;
  ds.annotations.reserve(emb.row_index.size());
  for (std::size_t r = 0; r < emb.row_index.size(); ++r) {
    auto it = by_key.find(emb.row_index[r]);
    if (it == by_key.end())
      throw DataError("embedding row " + std::to_string(r) + " " + describe(emb.row_index[r]) +
                      " has no annotation");
    ds.annotations.push_back(*it->second);
  }

  std::set<std::string> labels(options.label_set.begin(), options.label_set.end());
  if (options.label_set.empty()) {
    for (const auto& rec : ds.annotations) {
      labels.insert(rec.gold_label);
      if (rec.predicted_label) labels.insert(*rec.predicted_label);
    }
  } else {
    for (const auto& rec : ds.annotations) {
      if (!labels.contains(rec.gold_label))
        throw DataError("gold_label '" + rec.gold_label + "' for " +
                        describe({rec.annotator_id, rec.item_id}) + " is not in the label set");
      if (rec.predicted_label && !labels.contains(*rec.predicted_label))
        throw DataError("predicted_label '" + *rec.predicted_label + "' for " +
                        describe({rec.annotator_id, rec.item_id}) + " is not in the label set");
    }
  }
  ds.label_set.assign(labels.begin(), labels.end());

  std::set<std::string> attribute_names;
  for (const auto& meta : metadata) {
    if (ds.metadata.contains(meta.annotator_id))
      throw DataError("duplicate metadata for annotator " + meta.annotator_id);
    ds.metadata.emplace(meta.annotator_id, meta);
    for (const auto& [name, value] : meta.attributes) attribute_names.insert(name);
  }

  std::vector<std::string> missing;
  std::set<std::string> seen_annotators;
  for (const auto& key : emb.row_index)
    if (seen_annotators.insert(key.annotator_id).second && !ds.metadata.contains(key.annotator_id))
      missing.push_back(key.annotator_id);
  if (!missing.empty() && options.strict) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw DataError("annotators missing metadata: " + list);
  }
  for (const auto& id : missing) {
    AnnotatorMetadata meta{id, {}};
    for (const auto& name : attribute_names) meta.attributes[name] = kUnknownValue;
    ds.metadata.emplace(id, std::move(meta));
  }

  ds.attribute_names.assign(attribute_names.begin(), attribute_names.end());
  for (const auto& name : ds.attribute_names) {
    std::set<std::string> values;
    for (const auto& [id, meta] : ds.metadata) {
      auto it = meta.attributes.find(name);
      values.insert(it == meta.attributes.end() ? kUnknownValue : it->second);
    }
    ds.vocabularies[name].assign(values.begin(), values.end());
  }
  ds.embeddings = std::move(emb);
  return ds;
}

Dataset join_dataset(EmbeddingMatrix emb, const std::filesystem::path& annotations,
                     const std::filesystem::path& metadata, const JoinOptions& options)
{
  return join_dataset(std::move(emb), read_annotations(annotations), read_metadata(metadata),
                      options);
}

std::string to_string(DistributionWeighting weighting)
{
  return weighting == DistributionWeighting::per_row ? "per_row" : "per_annotator";
}

DistributionWeighting distribution_weighting_from_string(const std::string& name)
{
  if (name == "per_row") return DistributionWeighting::per_row;
  if (name == "per_annotator") return DistributionWeighting::per_annotator;
  throw ConfigError("unknown baseline weighting '" + name + "' (expected per_row or per_annotator)");
}

Distribution label_distribution(const Dataset& ds, const std::string& attribute,
                                DistributionWeighting weighting)
{
  const auto& vocab = ds.vocabulary(attribute);
  std::map<std::string, double> counts;
  for (const auto& v : vocab) counts[v] = 0.0;
  double total = 0.0;
  if (weighting == DistributionWeighting::per_row) {
    for (const auto& value : ds.attribute_column(attribute)) {
      counts[value] += 1.0;
      total += 1.0;
    }
  } else {
    std::set<std::string> annotators;
    for (const auto& key : ds.embeddings.row_index) annotators.insert(key.annotator_id);
    for (const auto& id : annotators) {
      const auto& attrs = ds.metadata.at(id).attributes;
      auto it = attrs.find(attribute);
      counts[it == attrs.end() ? kUnknownValue : it->second] += 1.0;
      total += 1.0;
    }
  }
  if (total == 0.0) throw DataError("label_distribution on an empty dataset");
  Distribution dist;
  for (const auto& [value, count] : counts)
    if (count > 0.0) dist[value] = count / total;
  return dist;
}

}  // namespace voices
