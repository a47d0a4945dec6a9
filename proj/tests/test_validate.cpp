#include "oracles.hpp"

#include "voices/rng.hpp"
#include "voices/serialize.hpp"
#include "voices/synthpop.hpp"
#include "voices/validate.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

using namespace voices;

namespace
{

Points four_points()
{
  Points p(4, 2);
  p << 0, 0, 0, 1, 4, 0, 4, 1;
  return p;
}

const std::vector<int> kTwoClusters{0, 0, 1, 1};

Points random_points(Index rows, Index dim, std::uint64_t seed)
{
  Rng rng(seed);
  Points p(rows, dim);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < dim; ++j) p(i, j) = rng.normal();
  return p;
}

std::vector<int> random_labels(std::size_t n, int k, std::uint64_t seed)
{
  Rng rng(seed, "labels");
  std::vector<int> out(n);
  for (auto& l : out) l = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
  return out;
}

ClusterComposition composition(const std::map<std::string, int>& counts)
{
  std::vector<int> labels;
  std::vector<std::string> values;
  for (const auto& [v, c] : counts)
    for (int i = 0; i < c; ++i) {
      labels.push_back(0);
      values.push_back(v);
    }
  return purity_per_cluster(labels, values).front();
}

const Distribution kMbicBaseline{{"left", 0.443}, {"right", 0.267}, {"center", 0.291}};

}  // namespace

TEST_CASE("silhouette of the four-point example")
{
  const double b = (4.0 + std::sqrt(17.0)) / 2.0;
  const double expected = (b - 1.0) / b;
  CHECK(std::abs(silhouette(four_points(), kTwoClusters) - expected) < 1e-12);
  CHECK(std::abs(expected - 0.7538) < 1e-4);
  CHECK(std::abs(oracle::silhouette(four_points(), kTwoClusters) - expected) < 1e-12);
}

TEST_CASE("coincident clusters have non-positive silhouette")
{
  Points p(6, 2);
  p << 0, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0, 1;
  CHECK(silhouette(p, std::vector<int>{0, 0, 0, 1, 1, 1}) <= 0.0);
}

TEST_CASE("random labels on random data give silhouette near zero")
{
  double worst = 0.0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const Points p = random_points(400, 3, t);
    worst = std::max(worst, std::abs(silhouette(p, random_labels(400, 3, t))));
  }
  CHECK(worst < 0.1);
}

TEST_CASE("silhouette matches the brute-force definition, including noise and singletons")
{
  for (std::uint64_t t = 0; t < 10; ++t) {
    const Index dim = t % 2 ? 20 : 3;  // exercises both distance paths
    const Points p = random_points(60, dim, t);
    auto labels = random_labels(60, 4, t);
    labels[0] = 7;  // singleton
    labels[1] = kNoise;
    CHECK(std::abs(silhouette(p, labels) - oracle::silhouette(p, labels)) < 1e-9);
  }
}

TEST_CASE("silhouette needs two clusters")
{
  try {
    silhouette(four_points(), std::vector<int>{0, 0, 0, kNoise});
    FAIL("expected DegenerateError");
  } catch (const DegenerateError& e) {
    CHECK(std::string(e.what()).find("silhouette undefined") != std::string::npos);
  }
}

TEST_CASE("davies-bouldin examples")
{
  CHECK(std::abs(davies_bouldin(four_points(), kTwoClusters) - 0.25) < 1e-12);
  Points zero(4, 1);
  zero << 0, 0, 5, 5;
  CHECK(davies_bouldin(zero, kTwoClusters) == 0.0);
  Points same(4, 1);
  same << 1, -1, 1, -1;
  CHECK(std::isinf(davies_bouldin(same, std::vector<int>{0, 0, 1, 1})));
}

TEST_CASE("duplicating every point leaves davies-bouldin unchanged")
{
  const Points p = random_points(50, 3, 5);
  const auto labels = random_labels(50, 3, 5);
  Points twice(100, 3);
  twice << p, p;
  std::vector<int> labels2 = labels;
  labels2.insert(labels2.end(), labels.begin(), labels.end());
  CHECK(std::abs(davies_bouldin(p, labels) - davies_bouldin(twice, labels2)) < 1e-9);
  CHECK(std::abs(davies_bouldin(p, labels) - oracle::davies_bouldin(p, labels)) < 1e-12);
}

TEST_CASE("metrics are invariant to relabelling, translation and scaling")
{
  const Points p = random_points(80, 4, 2);
  const auto labels = random_labels(80, 3, 2);
  std::vector<int> permuted = labels;
  for (auto& l : permuted) l = (l + 1) % 3;
  const double s = silhouette(p, labels), db = davies_bouldin(p, labels);
  CHECK(std::abs(silhouette(p, permuted) - s) < 1e-12);
  CHECK(std::abs(davies_bouldin(p, permuted) - db) < 1e-12);
  CHECK(std::abs(adjusted_rand(labels, permuted) - 1.0) < 1e-12);

  Points moved = p;
  moved.rowwise() += Eigen::RowVectorXd::Constant(4, 123.0);
  CHECK(std::abs(silhouette(moved, labels) - s) < 1e-9);
  CHECK(std::abs(davies_bouldin(moved, labels) - db) < 1e-9);
  const Points scaled = 7.5 * p;
  CHECK(std::abs(silhouette(scaled, labels) - s) < 1e-9);
  CHECK(std::abs(davies_bouldin(scaled, labels) - db) < 1e-9);
}

TEST_CASE("purity of a single cluster")
{
  const auto c = composition({{"L", 3}, {"R", 1}});
  CHECK(c.purity == 0.75);
  CHECK(c.majority_value == "L");
  CHECK(c.distribution == Distribution{{"L", 0.75}, {"R", 0.25}});
}

TEST_CASE("single-valued clusters have purity one and noise is excluded by default")
{
  const std::vector<int> labels{0, 0, 1, 1, kNoise};
  const std::vector<std::string> values{"a", "a", "b", "b", "c"};
  const auto clusters = purity_per_cluster(labels, values);
  CHECK(clusters.size() == 2);
  CHECK(average_purity(clusters) == 1.0);
  const auto with_noise = purity_per_cluster(labels, values, true);
  CHECK(with_noise.size() == 3);
  CHECK(with_noise.back().cluster_id == kNoise);
}

TEST_CASE("size-weighted purity")
{
  const std::vector<int> labels{0, 0, 0, 0, 1, 1};
  const std::vector<std::string> values{"a", "a", "a", "b", "a", "b"};
  const auto clusters = purity_per_cluster(labels, values);
  CHECK(average_purity(clusters) == doctest::Approx((0.75 + 0.5) / 2));
  CHECK(average_purity(clusters, PurityAveraging::size_weighted) == doctest::Approx(4.0 / 6.0));
}

TEST_CASE("average purity is at least one over the vocabulary size")
{
  for (std::uint64_t t = 0; t < 20; ++t) {
    Rng rng(t);
    std::vector<std::string> values(300);
    for (auto& v : values) v = std::string(1, static_cast<char>('a' + rng.below(5)));
    const auto clusters = purity_per_cluster(random_labels(300, 6, t), values);
    CHECK(average_purity(clusters) >= 1.0 / 5.0);
  }
}

TEST_CASE("nineteen clusters averaging 0.51 purity, seven prototypical")
{
  // 19 clusters of 400 rows: 7 lean left at 60%, 12 sit near the baseline at 45.75%.
  std::vector<int> labels;
  std::vector<std::string> values;
  for (int c = 0; c < 19; ++c) {
    const bool strong = c < 7;
    const std::map<std::string, int> counts = strong ? std::map<std::string, int>{{"left", 240}, {"center", 80}, {"right", 80}}
                                                     : std::map<std::string, int>{{"left", 183}, {"center", 109}, {"right", 108}};
    for (const auto& [v, n] : counts)
      for (int i = 0; i < n; ++i) {
        labels.push_back(c);
        values.push_back(v);
      }
  }
  auto clusters = purity_per_cluster(labels, values);
  CHECK(clusters.size() == 19);
  CHECK(std::abs(average_purity(clusters) - 0.51) <= 0.005);
  CHECK(std::abs(prototypical_flags(clusters, kMbicBaseline) - 0.368) < 0.001);
}

TEST_CASE("prototypical flag examples")
{
  std::vector<ClusterComposition> clusters{composition({{"left", 3}, {"right", 1}})};
  CHECK(prototypical_flags(clusters, kMbicBaseline) == 1.0);
  CHECK(clusters[0].prototypical);
  CHECK(clusters[0].deviation == doctest::Approx(0.307));

  std::vector<ClusterComposition> baseline_like{composition({{"left", 443}, {"right", 267}, {"center", 290}})};
  CHECK(prototypical_flags(baseline_like, kMbicBaseline) == 0.0);

  std::vector<ClusterComposition> boundary{composition({{"left", 543}, {"right", 200}, {"center", 257}})};
  prototypical_flags(boundary, kMbicBaseline);
  CHECK_FALSE(boundary[0].prototypical);
  std::vector<ClusterComposition> just_over{composition({{"left", 544}, {"right", 200}, {"center", 256}})};
  prototypical_flags(just_over, kMbicBaseline);
  CHECK(just_over[0].prototypical);
}

TEST_CASE("prototypical flags need baseline coverage")
{
  std::vector<ClusterComposition> clusters{composition({{"purple", 2}})};
  CHECK_THROWS_AS(prototypical_flags(clusters, kMbicBaseline), DataError);
}

TEST_CASE("total-variation rule")
{
  std::vector<ClusterComposition> clusters{composition({{"left", 443}, {"right", 167}, {"center", 390}})};
  prototypical_flags(clusters, kMbicBaseline, PrototypeRule::majority_share);
  CHECK_FALSE(clusters[0].prototypical);
  prototypical_flags(clusters, kMbicBaseline, PrototypeRule::total_variation);
  CHECK(clusters[0].deviation == doctest::Approx(0.0995));
  CHECK_FALSE(clusters[0].prototypical);
  std::vector<ClusterComposition> wider{composition({{"left", 443}, {"right", 157}, {"center", 400}})};
  prototypical_flags(wider, kMbicBaseline, PrototypeRule::total_variation);
  CHECK(wider[0].prototypical);
}

TEST_CASE("voice types")
{
  const Distribution political{{"left", 0.443}, {"right", 0.267}, {"center", 0.291}};
  const Distribution gwsd{{"democrat", 0.46}, {"republican", 0.212}, {"independent", 0.288}, {"other", 0.04}};
  const Distribution education{{"bachelor", 0.5}, {"high school", 0.35}, {"higher degree", 0.15}};

  CHECK(voice_type({{true, "left", 0.7, political}}) == VoiceType::majority);
  CHECK(voice_type({{true, "republican", 0.6, gwsd}, {false, "bachelor", 0.5, education}}) == VoiceType::minority);
  CHECK(voice_type({{true, "republican", 0.8, gwsd}, {true, "higher degree", 0.8, education}}) == VoiceType::inter_minority);
  CHECK(voice_type({{false, "left", 0.45, political}}) == VoiceType::none);
  // Prototypical only because the majority value is under-represented: not a voice.
  CHECK(voice_type({{true, "left", 0.30, political}}) == VoiceType::none);
  CHECK(voice_type({{true, "left", 0.7, political}, {true, "higher degree", 0.6, education}}) == VoiceType::minority);
}

TEST_CASE("apcs examples")
{
  Points same(3, 2);
  same << 1, 2, 1, 2, 1, 2;
  CHECK(std::abs(apcs(same).value - 1.0) < 1e-12);

  Points three(3, 2);
  three << 1, 0, 0, 1, 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
  CHECK(std::abs(apcs(three).value - std::sqrt(2.0) / 3.0) < 1e-12);
  CHECK(std::abs(apcs(three).value - 0.4714) < 1e-4);

  const Points basis = Points::Identity(5, 5);
  CHECK(std::abs(apcs(basis).value) < 1e-12);
}

TEST_CASE("apcs rejects zero rows and samples large inputs")
{
  Points bad(3, 2);
  bad << 1, 0, 0, 0, 1, 1;
  try {
    apcs(bad);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
  const Points p = random_points(2500, 4, 3);
  const auto sampled = apcs(p, 1);
  CHECK_FALSE(sampled.exact);
  CHECK(sampled.pairs >= 200000);
  CHECK(sampled.standard_error > 0.0);
  const auto exact = apcs(p, 1, 3000);
  CHECK(exact.exact);
  CHECK(std::abs(sampled.value - exact.value) < 5 * sampled.standard_error);
}

TEST_CASE("macro F1 examples")
{
  auto records = [](const std::vector<std::string>& gold, const std::vector<std::string>& pred) {
    std::vector<AnnotationRecord> out;
    for (std::size_t i = 0; i < gold.size(); ++i) out.push_back({"a" + std::to_string(i), "x", gold[i], pred[i]});
    return out;
  };
  CHECK(f1_macro(records({"A", "B", "A"}, {"A", "B", "A"})) == 1.0);
  CHECK(f1_macro(records({"A", "A", "B"}, {"B", "B", "A"})) == 0.0);
  CHECK(std::abs(f1_macro(records({"A", "A", "B", "B"}, {"A", "B", "B", "B"})) - (2.0 / 3.0 + 0.8) / 2.0) < 1e-12);

  auto missing = records({"A", "B"}, {"A", "B"});
  missing[1].predicted_label.reset();
  try {
    f1_macro(missing);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("adjusted rand examples")
{
  CHECK(adjusted_rand(std::vector<int>{0, 0, 1, 1, 2}, std::vector<int>{5, 5, 3, 3, 9}) == 1.0);
  CHECK(adjusted_rand(std::vector<int>{0, 0, 0, 0}, std::vector<int>{0, 0, 1, 1}) == 0.0);
  CHECK(adjusted_rand(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 0, 1, 1}) == 1.0);
  const std::vector<int> a{0, 0, 1, 1}, b{0, 1, 0, 1};
  CHECK(adjusted_rand(a, b) < 0.0);
  CHECK(std::abs(adjusted_rand(a, b) - oracle::adjusted_rand_pairs(a, b)) < 1e-12);
  CHECK(std::abs(adjusted_rand(a, b) - (-0.5)) < 1e-12);
}

TEST_CASE("adjusted rand agrees with pair enumeration and averages near zero")
{
  double mean = 0.0;
  for (std::uint64_t t = 0; t < 50; ++t) {
    const auto a = random_labels(120, 4, t);
    const auto b = random_labels(120, 3, t + 1000);
    const double ari = adjusted_rand(a, b);
    CHECK(std::abs(ari - oracle::adjusted_rand_pairs(a, b)) < 1e-9);
    mean += ari / 50.0;
  }
  CHECK(std::abs(mean) < 0.01);
}

TEST_CASE("planted truth scores perfectly with vanishing spread")
{
  FixtureOptions opt;
  opt.spread = 1e-6;
  opt.item_offset_scale = 0.0;
  const auto fx = make_paper_like_fixture(FixtureProfile::mbic, 3, opt);
  ClusterAssignment truth;
  truth.labels = fx.ground_truth;
  truth.n_clusters = 3;
  const auto report = validate(fx.dataset.embeddings.values, truth, fx.dataset, {}, &fx.ground_truth);
  CHECK(report.silhouette > 0.999);
  CHECK(report.davies_bouldin < 1e-5);
  CHECK(*report.ari == 1.0);
  // Cluster purity equals the planted group's dominant share (annotator quotas are exact).
  const auto& political = report.per_attribute.at("political");
  std::vector<double> purities;
  for (const auto& c : political.per_cluster) purities.push_back(c.purity);
  CHECK(purities[0] == doctest::Approx(85.0 / 135.0));
  CHECK(purities[1] == doctest::Approx(30.0 / 40.0));
  CHECK(purities[2] == doctest::Approx(21.0 / 25.0));
  CHECK(report.voice_types == std::vector<VoiceType>{VoiceType::majority, VoiceType::minority, VoiceType::inter_minority});
}

TEST_CASE("validation report bundles everything and survives JSON")
{
  FixtureOptions opt;
  opt.dim = 8;
  opt.items = 4;
  opt.prediction_accuracy = 0.7;
  const auto fx = make_paper_like_fixture(FixtureProfile::gwsd, 2, opt);
  ClusterAssignment a;
  a.labels = fx.ground_truth;
  a.n_clusters = 3;
  a.labels[0] = kNoise;
  ValidationOptions vo;
  vo.compute_apcs = true;
  const auto report = validate(fx.dataset.embeddings.values, a, fx.dataset, vo, &fx.ground_truth);
  CHECK(report.noise_fraction == doctest::Approx(1.0 / fx.dataset.rows()));
  CHECK(report.apcs.has_value());
  CHECK(report.f1.has_value());
  CHECK(report.per_attribute.size() == 3);
  for (const auto& [attr, ar] : report.per_attribute) {
    int flagged = 0;
    for (const auto& c : ar.per_cluster) flagged += c.prototypical;
    CHECK(ar.prototypical_pct == doctest::Approx(flagged / 3.0));
    CHECK(ar.average_purity > 0.0);
    CHECK(ar.average_purity <= 1.0);
  }
  const Json j = report;
  const auto back = j.get<ValidationReport>();
  CHECK(Json(back) == j);
}
