// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "csikey/entropy.hpp"
#include "csikey/error.hpp"
#include "oracles.hpp"

using namespace csikey;

TEST_CASE("uniform byte alphabet has eight bits") {
  std::vector<std::uint64_t> s;
  for (int rep = 0; rep < 3; ++rep)
    for (std::uint64_t v = 0; v < 256; ++v) s.push_back(v);
  auto r = min_entropy(s, 8);
  CHECK(r.min_entropy == doctest::Approx(8.0));
  CHECK(r.max_entropy == 8.0);
  CHECK(r.ratio == doctest::Approx(1.0));
}

TEST_CASE("a repeated symbol has none") {
  std::vector<std::uint64_t> s(40, 7);
  auto r = min_entropy(s, 8);
  CHECK(r.min_entropy == 0.0);
  CHECK(r.max_count == 40);
}

TEST_CASE("most frequent at 15 percent") {
  std::vector<std::uint64_t> s(15, 0);
  for (std::uint64_t v = 1; s.size() < 100; ++v) s.push_back(v);
  auto r = min_entropy(s, 8);
  CHECK(r.min_entropy == doctest::Approx(-std::log2(0.15)));
  CHECK(r.min_entropy == doctest::Approx(2.737).epsilon(1e-3));
  CHECK(r.min_entropy == oracle::naive_min_entropy(s));
}

TEST_CASE("estimator errors") {
  CHECK_THROWS_AS(min_entropy(std::vector<std::uint64_t>{}, 8), EntropyError);
  CHECK_THROWS_AS(min_entropy(std::vector<std::uint64_t>{256}, 8), EntropyError);
}

TEST_CASE("worked accounting example") {
  auto a = security_accounting(2400, 1000, 300, 2.7, 8);
  CHECK(a.secure_bits == doctest::Approx(472.5).epsilon(1e-12));
  CHECK(a.sbgr == doctest::Approx(1.575).epsilon(1e-12));
}

TEST_CASE("accounting edges") {
  auto all = security_accounting(2400, 2400, 300, 2.7, 8);
  CHECK(all.secure_bits == 0.0);
  CHECK(all.sbgr == 0.0);
  auto uniform = security_accounting(2400, 0, 300, 8.0, 8);
  CHECK(uniform.sbgr == doctest::Approx(8.0));
  CHECK_THROWS_AS(security_accounting(2400, 2401, 300, 2.7, 8), AccountingError);
  CHECK_THROWS_AS(security_accounting(2400, 0, 0, 2.7, 8), AccountingError);
}
