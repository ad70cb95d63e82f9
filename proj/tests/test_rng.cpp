#include "lndsm/rng.hpp"

#include <doctest.h>

#include <cmath>

using lndsm::Rng;

TEST_CASE("same seed gives the same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(a.normal() == b.normal());
}

TEST_CASE("substreams are reproducible and distinct") {
  Rng a = Rng::substream(7, 3), b = Rng::substream(7, 3), c = Rng::substream(7, 4), d = Rng::substream(8, 3);
  const auto x = a.next_u64();
  CHECK(x == b.next_u64());
  CHECK(x != c.next_u64());
  CHECK(x != d.next_u64());
}

TEST_CASE("save and load restore the cached normal deviate") {
  Rng a(5);
  a.normal();  // libstdc++ caches the second Box-Muller value
  const std::string state = a.save();
  Rng b(0);
  b.load(state);
  CHECK(a == b);
  for (int i = 0; i < 5; ++i) CHECK(a.normal() == b.normal());
}

TEST_CASE("uniform and uniform_int ranges") {
  Rng r(9);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    const auto k = r.uniform_int(-1, 1);
    CHECK((k >= -1 && k <= 1));
  }
}

TEST_CASE("normal_matrix moments") {
  Rng r(11);
  const Eigen::MatrixXd m = r.normal_matrix(200000, 1);
  const double mean = m.mean();
  const double var = (m.array() - mean).square().mean();
  CHECK(std::abs(mean) < 4.0 / std::sqrt(200000.0));
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / 200000.0));
}
