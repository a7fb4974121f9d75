#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "spherad/error.hpp"
#include "spherad/rng.hpp"

using namespace spherad;

TEST_CASE("same seed reproduces the same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 200; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform stays in [0,1) with mean near one half") {
  Rng rng(7);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.005);
}

TEST_CASE("uniform_pos stays in (0,1]") {
  Rng rng(11);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform_pos();
    REQUIRE(u > 0.0);
    REQUIRE(u <= 1.0);
  }
}

TEST_CASE("normal has standard moments") {
  Rng rng(13);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("gamma matches shape-parameter moments") {
  Rng rng(17);
  const int n = 200000;
  for (double alpha : {0.5, 1.0, 2.5, 9.0}) {
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = rng.gamma(alpha);
      REQUIRE(x > 0.0);
      sum += x;
      sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean - alpha) < 0.05 * std::max(1.0, alpha));
    CHECK(std::abs(var - alpha) < 0.12 * std::max(1.0, alpha));
  }
  CHECK_THROWS_AS(rng.gamma(0.0), NumericError);
  CHECK_THROWS_AS(rng.gamma(-1.0), NumericError);
}

TEST_CASE("beta lands in (0,1) with mean a/(a+b)") {
  Rng rng(19);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.beta(2.0, 3.0);
    REQUIRE(x > 0.0);
    REQUIRE(x < 1.0);
    sum += x;
  }
  CHECK(std::abs(sum / n - 0.4) < 0.01);
}

TEST_CASE("forked streams are distinct from the parent and each other") {
  Rng parent(23);
  Rng c1 = parent.fork(1);
  Rng c2 = parent.fork(2);
  int same12 = 0, same1p = 0;
  Rng probe(23);
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t a = c1.next_u64();
    const std::uint64_t b = c2.next_u64();
    const std::uint64_t p = probe.next_u64();
    if (a == b) ++same12;
    if (a == p) ++same1p;
  }
  CHECK(same12 == 0);
  CHECK(same1p == 0);
}

TEST_CASE("fork is reproducible and does not consume the parent") {
  Rng parent(29);
  const std::string before = parent.state_string();
  Rng c1 = parent.fork(5);
  CHECK(parent.state_string() == before);
  Rng parent2(29);
  Rng c2 = parent2.fork(5);
  for (int i = 0; i < 32; ++i) CHECK(c1.next_u64() == c2.next_u64());
}

TEST_CASE("mix_seed separates salts") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t salt = 0; salt < 1000; ++salt)
    seen.insert(mix_seed(12345, salt));
  CHECK(seen.size() == 1000);
  CHECK(mix_seed(1, 2) == mix_seed(1, 2));
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
}

TEST_CASE("state round trip resumes the exact stream") {
  Rng rng(31);
  for (int i = 0; i < 17; ++i) rng.normal();
  const std::string snap = rng.state_string();
  std::vector<double> expect;
  for (int i = 0; i < 20; ++i) expect.push_back(rng.normal());
  rng.restore_state(snap);
  for (int i = 0; i < 20; ++i) CHECK(rng.normal() == expect[i]);
  CHECK_THROWS_AS(rng.restore_state("not a state"), DataError);
}
