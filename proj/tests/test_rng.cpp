#include "voices/csv.hpp"
#include "voices/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <vector>

using namespace voices;

TEST_CASE("streams are reproducible and independent of consumption order")
{
  Rng a(42, "field", 3);
  Rng b(42, "field", 3);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());

  Rng c(42, "field", 4);
  Rng d(42, "other", 3);
  Rng e(43, "field", 3);
  Rng f(42, "field", 3);
  const auto x = f();
  CHECK(c() != x);
  CHECK(d() != x);
  CHECK(e() != x);
}

TEST_CASE("uniform draws stay in range and have the right mean")
{
  Rng rng(1);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("below is unbiased over a small range")
{
  Rng rng(7);
  std::vector<int> counts(6, 0);
  const int n = 60000;
  for (int i = 0; i < n; ++i) ++counts[rng.below(6)];
  for (int c : counts) CHECK(std::abs(c - n / 6) < 400);
}

TEST_CASE("normal draws have unit variance")
{
  Rng rng(11);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean) < 0.01);
  CHECK(sq / n - mean * mean == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("categorical follows its weights")
{
  Rng rng(5);
  const std::vector<double> w{1.0, 3.0, 0.0, 6.0};
  std::vector<int> counts(4, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[rng.categorical(w)];
  CHECK(counts[2] == 0);
  CHECK(counts[0] / double(n) == doctest::Approx(0.1).epsilon(0.05));
  CHECK(counts[3] / double(n) == doctest::Approx(0.6).epsilon(0.02));
}

TEST_CASE("shuffle is a permutation")
{
  Rng rng(3);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  rng.shuffle(v.begin(), v.end());
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
  CHECK(v != sorted);
}

TEST_CASE("csv quoting round-trips")
{
  const std::vector<std::string> fields{"plain", "with,comma", "with \"quote\"", ""};
  CHECK(csv::split(csv::join(fields)) == fields);
  CHECK(csv::escape("a,b") == "\"a,b\"");
}

TEST_CASE("doubles print in shortest round-trip form")
{
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.125, 0.0}) {
    double back = 0.0;
    REQUIRE(csv::parse_double(csv::format_double(x), back));
    CHECK(back == x);
  }
  double out = 0.0;
  CHECK_FALSE(csv::parse_double("1.5x", out));
}
