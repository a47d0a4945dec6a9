#include "test_util.hpp"

#include "voices/corpus.hpp"
#include "voices/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace voices;
using testing::TempDir;
using testing::write_file;

namespace
{

EmbeddingMatrix random_matrix(Index rows, Index dim, std::uint64_t seed)
{
  Rng rng(seed);
  EmbeddingMatrix m;
  m.values.resize(rows, dim);
  for (Index i = 0; i < rows; ++i) {
    m.row_index.push_back({"a" + std::to_string(i), "item," + std::to_string(i % 3)});
    for (Index j = 0; j < dim; ++j) m.values(i, j) = rng.normal() * std::pow(10.0, rng.uniform(-8, 8));
  }
  return m;
}

void write_small_inputs(const TempDir& dir, bool with_b_metadata)
{
  write_file(dir / "emb.csv", "a,i1,1.0,0.0\nb,i1,0.0,1.0\n");
  write_file(dir / "ann.jsonl",
             "{\"annotator_id\":\"a\",\"item_id\":\"i1\",\"gold_label\":\"biased\"}\n"
             "{\"annotator_id\":\"b\",\"item_id\":\"i1\",\"gold_label\":\"non-biased\",\"predicted_label\":\"biased\"}\n");
  std::string meta = "annotator_id,political,education\na,left,bachelor\n";
  if (with_b_metadata) meta += "b,right,high school\n";
  write_file(dir / "meta.csv", meta);
}

}  // namespace

TEST_CASE("2x2 CSV parses")
{
  TempDir dir;
  write_file(dir / "emb.csv", "a,i1,1.0,0.0\nb,i1,0.0,1.0\n");
  const auto m = load_embeddings(dir / "emb.csv", EmbeddingFormat::csv);
  CHECK(m.rows() == 2);
  CHECK(m.dim() == 2);
  CHECK(m.values(1, 1) == 1.0);
  CHECK(m.row_index[1] == RowKey{"b", "i1"});
}

TEST_CASE("header row is optional")
{
  TempDir dir;
  write_file(dir / "emb.csv", "annotator_id,item_id,v0,v1\na,i1,1.0,0.0\n");
  CHECK(load_embeddings(dir / "emb.csv", EmbeddingFormat::csv).rows() == 1);
}

TEST_CASE("a NaN cell is rejected with its position")
{
  TempDir dir;
  write_file(dir / "emb.csv", "a,i1,1.0,0.0\nb,i1,0.0,nan\n");
  try {
    load_embeddings(dir / "emb.csv", EmbeddingFormat::csv);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 1") != std::string::npos);
    CHECK(msg.find("col 1") != std::string::npos);
  }
}

TEST_CASE("ragged rows and duplicate keys are rejected")
{
  TempDir dir;
  write_file(dir / "ragged.csv", "a,i1,1.0,0.0\nb,i1,0.0\n");
  CHECK_THROWS_AS(load_embeddings(dir / "ragged.csv", EmbeddingFormat::csv), DataError);
  write_file(dir / "dup.csv", "a,i1,1.0,0.0\na,i1,0.0,1.0\n");
  CHECK_THROWS_AS(load_embeddings(dir / "dup.csv", EmbeddingFormat::csv), DataError);
}

TEST_CASE("save then load is bit-identical in both formats")
{
  TempDir dir;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = random_matrix(17, 6, seed);
    for (auto format : {EmbeddingFormat::csv, EmbeddingFormat::binary}) {
      const auto path = dir / (format == EmbeddingFormat::csv ? "m.csv" : "m.bin");
      save_embeddings(path, m, format);
      const auto back = load_embeddings(path, format);
      REQUIRE(back.rows() == m.rows());
      CHECK(back.row_index == m.row_index);
      for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.dim(); ++j) CHECK(std::bit_cast<std::uint64_t>(back.values(i, j)) == std::bit_cast<std::uint64_t>(m.values(i, j)));
    }
  }
}

TEST_CASE("identical bytes load to identical datasets")
{
  TempDir dir;
  write_small_inputs(dir, true);
  const auto a = join_dataset(load_embeddings(dir / "emb.csv", EmbeddingFormat::csv), dir / "ann.jsonl", dir / "meta.csv", {});
  const auto b = join_dataset(load_embeddings(dir / "emb.csv", EmbeddingFormat::csv), dir / "ann.jsonl", dir / "meta.csv", {});
  CHECK(a.embeddings.values == b.embeddings.values);
  CHECK(a.annotations == b.annotations);
  CHECK(a.vocabularies == b.vocabularies);
}

TEST_CASE("join with full metadata")
{
  TempDir dir;
  write_small_inputs(dir, true);
  const auto ds = join_dataset(load_embeddings(dir / "emb.csv", EmbeddingFormat::csv), dir / "ann.jsonl", dir / "meta.csv", {});
  CHECK(ds.rows() == 2);
  CHECK(ds.annotations[1].predicted_label == std::optional<std::string>("biased"));
  CHECK(ds.attribute_column("political") == std::vector<std::string>{"left", "right"});
  CHECK(ds.label_set == std::vector<std::string>{"biased", "non-biased"});
}

TEST_CASE("strict join lists annotators without metadata")
{
  TempDir dir;
  write_small_inputs(dir, false);
  try {
    join_dataset(load_embeddings(dir / "emb.csv", EmbeddingFormat::csv), dir / "ann.jsonl", dir / "meta.csv", {});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("b") != std::string::npos);
  }
}

TEST_CASE("lenient join fills unknown")
{
  TempDir dir;
  write_small_inputs(dir, false);
  const auto ds = join_dataset(load_embeddings(dir / "emb.csv", EmbeddingFormat::csv), dir / "ann.jsonl", dir / "meta.csv",
                               JoinOptions{.strict = false});
  CHECK(ds.attribute_column("political") == std::vector<std::string>{"left", kUnknownValue});
  CHECK(ds.attribute_column("education")[1] == kUnknownValue);
}

TEST_CASE("a row without an annotation is always an error")
{
  TempDir dir;
  write_small_inputs(dir, true);
  write_file(dir / "ann.jsonl", "{\"annotator_id\":\"a\",\"item_id\":\"i1\",\"gold_label\":\"biased\"}\n");
  CHECK_THROWS_AS(join_dataset(load_embeddings(dir / "emb.csv", EmbeddingFormat::csv), dir / "ann.jsonl",
                               dir / "meta.csv", JoinOptions{.strict = false}),
                  DataError);
}

TEST_CASE("gold labels outside the declared set are rejected")
{
  TempDir dir;
  write_small_inputs(dir, true);
  CHECK_THROWS_AS(join_dataset(load_embeddings(dir / "emb.csv", EmbeddingFormat::csv), dir / "ann.jsonl",
                               dir / "meta.csv", JoinOptions{.strict = true, .label_set = {"biased"}}),
                  DataError);
}

TEST_CASE("join preserves row order")
{
  EmbeddingMatrix emb;
  emb.values.resize(3, 1);
  emb.values << 3, 1, 2;
  emb.row_index = {{"c", "x"}, {"a", "x"}, {"b", "x"}};
  std::vector<AnnotationRecord> anns{{"a", "x", "0", {}}, {"b", "x", "1", {}}, {"c", "x", "0", {}}};
  std::vector<AnnotatorMetadata> meta{{"a", {{"p", "L"}}}, {"b", {{"p", "R"}}}, {"c", {{"p", "C"}}}};
  const auto ds = join_dataset(emb, anns, meta, {});
  CHECK(ds.embeddings.row_index == emb.row_index);
  CHECK(ds.annotations[0].annotator_id == "c");
  CHECK(ds.attribute_column("p") == std::vector<std::string>{"C", "L", "R"});
}

namespace
{

Dataset political_dataset(const std::vector<std::string>& values)
{
  EmbeddingMatrix emb;
  emb.values = Points::Zero(static_cast<Index>(values.size()), 1);
  std::vector<AnnotationRecord> anns;
  std::vector<AnnotatorMetadata> meta;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::string id = "a" + std::to_string(i);
    emb.row_index.push_back({id, "x"});
    anns.push_back({id, "x", "0", {}});
    meta.push_back({id, {{"political", values[i]}}});
  }
  return join_dataset(emb, anns, meta, {});
}

}  // namespace

TEST_CASE("label distribution counts rows")
{
  const auto dist = label_distribution(political_dataset({"L", "L", "R", "C"}), "political");
  CHECK(dist.at("L") == 0.5);
  CHECK(dist.at("R") == 0.25);
  CHECK(dist.at("C") == 0.25);
  const auto same = label_distribution(political_dataset({"v", "v", "v"}), "political");
  CHECK(same.size() == 1);
  CHECK(same.at("v") == 1.0);
}

TEST_CASE("label distribution sums to one and rejects unknown attributes")
{
  Rng rng(9);
  std::vector<std::string> values;
  for (int i = 0; i < 97; ++i) values.push_back(std::string(1, static_cast<char>('a' + rng.below(7))));
  const auto ds = political_dataset(values);
  double total = 0.0;
  for (const auto& [v, p] : label_distribution(ds, "political")) total += p;
  CHECK(std::abs(total - 1.0) < 1e-9);
  CHECK_THROWS_AS(label_distribution(ds, "age"), DataError);
}

TEST_CASE("per-annotator weighting counts each annotator once")
{
  EmbeddingMatrix emb;
  emb.values = Points::Zero(4, 1);
  emb.row_index = {{"a", "1"}, {"a", "2"}, {"a", "3"}, {"b", "1"}};
  std::vector<AnnotationRecord> anns{{"a", "1", "0", {}}, {"a", "2", "0", {}}, {"a", "3", "0", {}}, {"b", "1", "0", {}}};
  std::vector<AnnotatorMetadata> meta{{"a", {{"p", "L"}}}, {"b", {{"p", "R"}}}};
  const auto ds = join_dataset(emb, anns, meta, {});
  CHECK(label_distribution(ds, "p").at("L") == 0.75);
  CHECK(label_distribution(ds, "p", DistributionWeighting::per_annotator).at("L") == 0.5);
}

TEST_CASE("annotations and metadata round-trip through their files")
{
  TempDir dir;
  std::vector<AnnotationRecord> anns{{"a", "i\"1", "x", {}}, {"b", "i2", "y", std::string("x")}};
  write_annotations(dir / "a.jsonl", anns);
  CHECK(read_annotations(dir / "a.jsonl") == anns);
  std::vector<AnnotatorMetadata> meta{{"a", {{"political", "left, centre"}, {"age", "30"}}}};
  write_metadata(dir / "m.csv", meta, {"political", "age"});
  CHECK(read_metadata(dir / "m.csv") == meta);
  std::map<std::string, std::string> texts{{"i1", "He said, \"no\"."}};
  write_item_text(dir / "t.csv", texts);
  CHECK(read_item_text(dir / "t.csv") == texts);
}
