#include "test_util.hpp"

#include "voices/serialize.hpp"

#include <doctest.h>

#include <cstdlib>
#include <set>
#include <sys/wait.h>

namespace fs = std::filesystem;
using voices::Json;

namespace
{

struct Run
{
  int code = -1;
  std::string out;
  std::string err;
};

Run voices_cli(const testing::TempDir& dir, const std::string& args)
{
  const auto out = dir.path() / "stdout.txt", err = dir.path() / "stderr.txt";
  const std::string cmd = std::string("\"") + VOICES_CLI + "\" " + args + " > \"" + out.string() + "\" 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = testing::read_file(out);
  r.err = testing::read_file(err);
  return r;
}

/// A small mbic-like population: 200 annotators x 4 items, 8 dimensions.
std::string synth_args(const fs::path& out) { return "--set synth.items=4 --set synth.dim=8 synth --profile mbic --seed 7 -o \"" + out.string() + "\""; }

}  // namespace

TEST_CASE("synth writes the dataset files and a config pointing at them")
{
  testing::TempDir dir;
  const auto data = dir.path() / "synth";
  const auto r = voices_cli(dir, synth_args(data));
  REQUIRE(r.code == 0);
  for (const char* f : {"embeddings.bin", "annotations.jsonl", "metadata.csv", "items.csv", "ground_truth.csv", "config.json"})
    CHECK(fs::exists(data / f));
  const auto cfg = Json::parse(testing::read_file(data / "config.json"));
  CHECK(cfg["seed"] == 7);
  CHECK(cfg["data"]["ground_truth"] == "ground_truth.csv");
}

TEST_CASE("usage and configuration errors exit with 1")
{
  testing::TempDir dir;
  CHECK(voices_cli(dir, "").code == 1);
  CHECK(voices_cli(dir, "frobnicate").code == 1);
  const auto r = voices_cli(dir, "--set cluster.k=\"many\" config");
  CHECK(r.code == 1);
  CHECK(r.err.find("config.cluster.k") != std::string::npos);
  CHECK(voices_cli(dir, "--help").code == 0);
}

TEST_CASE("missing data files exit with 2")
{
  testing::TempDir dir;
  const auto r = voices_cli(dir, "--set data.embeddings=/nonexistent.bin --set data.annotations=a --set data.metadata=m reduce -o x.bin");
  CHECK(r.code == 2);
}

TEST_CASE("validate with fewer than two clusters exits with 3")
{
  testing::TempDir dir;
  const auto data = dir.path() / "synth";
  REQUIRE(voices_cli(dir, synth_args(data)).code == 0);
  const std::string cfg = "-c \"" + (data / "config.json").string() + "\" ";
  const auto assignment = (dir.path() / "one.csv").string();
  const auto clustered = voices_cli(dir, cfg + "--set cluster.allow_out_of_range=true cluster --algorithm kmeans -k 1 -o \"" + assignment + "\"");
  CHECK(clustered.code == 0);
  const auto r = voices_cli(dir, cfg + "validate --assignment \"" + assignment + "\"");
  CHECK(r.code == 3);
  CHECK(r.err.find("silhouette undefined") != std::string::npos);
}

TEST_CASE("reduce, cluster and validate chain through files")
{
  testing::TempDir dir;
  const auto data = dir.path() / "synth";
  REQUIRE(voices_cli(dir, synth_args(data)).code == 0);
  const std::string cfg = "-c \"" + (data / "config.json").string() + "\" ";
  const auto reduced = (dir.path() / "reduced.bin").string();
  const auto assignment = (dir.path() / "assignment.csv").string();
  const auto report = (dir.path() / "report.json").string();
  REQUIRE(voices_cli(dir, cfg + "reduce --method pca --n-components 2 -o \"" + reduced + "\"").code == 0);
  REQUIRE(voices_cli(dir, cfg + "cluster --reduced \"" + reduced + "\" --algorithm gmm -k 3 -o \"" + assignment + "\"").code == 0);
  const auto r = voices_cli(dir, cfg + "validate --reduced \"" + reduced + "\" --assignment \"" + assignment + "\" -o \"" + report + "\"");
  CHECK(r.code == 0);
  CHECK(r.out.find("Silhouette") != std::string::npos);
  const auto j = Json::parse(testing::read_file(report));
  CHECK(j["n_clusters"] == 3);
  CHECK(j["ari"].get<double>() > 0.9);
}

TEST_CASE("sweep then report on the winning trial recovers the planted voices")
{
  testing::TempDir dir;
  const auto data = dir.path() / "synth";
  REQUIRE(voices_cli(dir, synth_args(data)).code == 0);
  const std::string cfg = "-c \"" + (data / "config.json").string() + "\" ";
  const auto sweep_dir = dir.path() / "sweep";
  const auto sweep = voices_cli(dir, cfg + "--set 'sweep.methods=[\"pca\"]' --set 'sweep.k={\"min\":2,\"max\":6}' sweep --mode grid -o \"" +
                                         sweep_dir.string() + "\" --log \"" + (dir.path() / "log.jsonl").string() + "\"");
  REQUIRE(sweep.code == 0);
  const auto trials = Json::parse(testing::read_file(sweep_dir / "trials.json"));
  CHECK(trials["trials"].size() == 5);
  const auto best = Json::parse(testing::read_file(sweep_dir / "best" / "trial.json"));
  CHECK(best["config"]["cluster"]["k"] == 3);
  CHECK(best["report"]["ari"] == 1.0);

  const auto report_dir = dir.path() / "report";
  const auto r = voices_cli(dir, cfg + "report --reduced \"" + (sweep_dir / "best" / "reduced.bin").string() + "\" --assignment \"" +
                                     (sweep_dir / "best" / "assignment.csv").string() + "\" -n 3 --svg \"" +
                                     (dir.path() / "scatter.svg").string() + "\" -o \"" + report_dir.string() + "\"");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir.path() / "scatter.svg"));
  CHECK(testing::read_file(report_dir / "report.txt").find("prototypical") != std::string::npos);
  const auto j = Json::parse(testing::read_file(report_dir / "report.json"));
  CHECK(j["config"]["seed"] == 7);
  std::set<std::string> types;
  for (const auto& card : j["clusters"]) {
    types.insert(card["voice_type"].get<std::string>());
    CHECK(card["examples"].size() == 3);
    CHECK(card["examples"][0]["text"].is_string());
    CHECK(card["composition"]["political"].contains("prototypical"));
  }
  CHECK(types == std::set<std::string>{"majority", "minority", "inter-minority"});
}
