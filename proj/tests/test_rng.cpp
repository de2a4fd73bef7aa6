#include <cmath>

#include "doctest.h"
#include "driftlab/rng.hpp"

using namespace driftlab;

TEST_CASE("identical seed gives identical stream") {
  Rng a(1234), b(1234);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("child streams are distinct per label") {
  Rng root(9);
  CHECK(root.child("alpha").next_u64() != root.child("beta").next_u64());
  CHECK(root.child(0).next_u64() != root.child(1).next_u64());
  CHECK(root.child("alpha").next_u64() == root.child("alpha").next_u64());
}

TEST_CASE("uniform stays in [0, 1)") {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  double v = rng.uniform(-2.0, 3.0);
  CHECK(v >= -2.0);
  CHECK(v < 3.0);
}

TEST_CASE("gaussian moments are roughly standard") {
  Rng rng(6);
  const int n = 20000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double g = rng.gaussian();
    sum += g;
    sq += g * g;
  }
  CHECK(std::abs(sum / n) < 0.03);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("fnv1a64 known vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("next_below stays in range") {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) CHECK(rng.next_below(13) < 13);
}
