// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "csikey/cascade.hpp"
#include "csikey/error.hpp"

using namespace csikey;

namespace {

Bitstream random_bits(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Bitstream b(n);
  for (std::size_t i = 0; i < n; ++i) b.set(i, rng() & 1u);
  return b;
}

// Counts every query that reaches Alice.
struct CountingOracle {
  CascadeReference& ref;
  std::size_t queries = 0;
  std::size_t bits = 0;

  ParityOracle fn() {
    return [this](unsigned round, std::span<const BlockRange> ranges) {
      ++queries;
      bits += ranges.size();
      return ref.answer_parities(round, ranges);
    };
  }
};

}  // namespace

TEST_CASE("block schedule") {
  CascadeConfig c;
  auto plan = plan_rounds(c, 2400);
  REQUIRE(plan.size() == 10);
  CHECK(std::vector<std::size_t>(plan.begin(), plan.begin() + 5) == std::vector<std::size_t>{8, 16, 32, 64, 1200});
  for (std::size_t r = 4; r < 10; ++r) CHECK(plan[r] == 1200);

  c.qber_estimate = 0.4999;
  CHECK(plan_rounds(c, 2400).front() == 2);
  c = {};
  for (auto s : plan_rounds(c, 2)) CHECK(s == 2);
  c.first_block_size = 5;
  CHECK(plan_rounds(c, 100).front() == 5);
}

TEST_CASE("permutations agree and round one is the identity") {
  auto id = round_permutation(42, 1, 50);
  for (std::uint32_t i = 0; i < 50; ++i) CHECK(id[i] == i);
  auto p2 = round_permutation(42, 2, 50);
  CHECK(p2 == round_permutation(42, 2, 50));
  CHECK(p2 != round_permutation(43, 2, 50));
  CHECK(p2 != round_permutation(42, 3, 50));
  auto sorted = p2;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == id);
}

TEST_CASE("parity answers and leakage") {
  CascadeReference ref(Bitstream::from_string("101"), 1);
  std::vector<BlockRange> one = {{0, 3}};
  CHECK(ref.answer_parities(1, one) == std::vector<std::uint8_t>{0});
  CHECK(ref.leaked_bits() == 1);
  CHECK(ref.answer_parities(1, {}).empty());
  CHECK(ref.leaked_bits() == 1);
  std::vector<BlockRange> outside = {{2, 4}};
  CHECK_THROWS_AS(ref.answer_parities(1, outside), ProtocolError);

  CascadeReference big(random_bits(2400, 1), 9);
  std::vector<BlockRange> all;
  for (std::uint32_t s = 0; s < 2400; s += 8) all.push_back({s, s + 8});
  CHECK(big.answer_parities(1, all).size() == 300);
  CHECK(big.leaked_bits() == 300);
}

TEST_CASE("binary search in a block of eight costs three queries") {
  for (std::size_t err = 0; err < 8; ++err) {
    auto alice = random_bits(64, 3);
    auto bob = alice;
    bob.flip(err);
    CascadeReference ref(alice, 1);
    CountingOracle counter{ref};
    CascadeConfig c;
    c.first_block_size = 8;
    CascadeSession s(bob, c);
    auto odd = s.start_round(counter.fn());
    REQUIRE(odd == std::vector<std::size_t>{0});
    const auto before = counter.queries;
    CHECK(s.binary_search_error(1, 0, counter.fn()) == err);
    CHECK(counter.queries - before == 3);
    CHECK(s.bits() == alice);
    CHECK(s.leaked_bits() == ref.leaked_bits());
  }
}

TEST_CASE("a mismatched single-bit block flips without a query") {
  auto alice = random_bits(10, 4);
  auto bob = alice;
  bob.flip(6);
  CascadeReference ref(alice, 1);
  CountingOracle counter{ref};
  CascadeConfig c;
  c.first_block_size = 1;
  CascadeSession s(bob, c);
  auto odd = s.start_round(counter.fn());
  REQUIRE(odd == std::vector<std::size_t>{6});
  const auto before = counter.queries;
  CHECK(s.binary_search_error(1, 6, counter.fn()) == 6);
  CHECK(counter.queries == before);
}

TEST_CASE("searching an even block is a protocol error") {
  auto alice = random_bits(16, 5);
  CascadeReference ref(alice, 1);
  CountingOracle counter{ref};
  CascadeConfig c;
  c.first_block_size = 8;
  CascadeSession s(alice, c);
  CHECK(s.start_round(counter.fn()).empty());
  CHECK_THROWS_AS(s.binary_search_error(1, 0, counter.fn()), ProtocolError);
}

TEST_CASE("two errors in one block are caught through a later round") {
  // every placement of a pair inside the first round-1 block
  for (std::size_t a = 0; a < 8; ++a) {
    for (std::size_t b = a + 1; b < 8; ++b) {
      auto alice = random_bits(256, 6);
      auto bob = alice;
      bob.flip(a);
      bob.flip(b);
      CascadeReference ref(alice, 77);
      CountingOracle counter{ref};
      CascadeConfig c;
      c.first_block_size = 8;
      c.permutation_seed = 77;
      CascadeSession s(bob, c);
      CHECK(s.start_round(counter.fn()).empty());  // the pair hides in round one
      auto odd = s.start_round(counter.fn());
      s.correct_all(counter.fn());
      if (odd.empty()) continue;  // both landed together again; a later round would split them
      CHECK(s.bits() == alice);
      std::set<std::size_t> fixed(s.corrected_positions().begin(), s.corrected_positions().end());
      CHECK(fixed == std::set<std::size_t>{a, b});
    }
  }
}

TEST_CASE("a round-two flip reopens the round-one block") {
  auto alice = random_bits(256, 8);
  auto bob = alice;
  bob.flip(2);
  bob.flip(5);
  CascadeReference ref(alice, 5);
  CountingOracle counter{ref};
  CascadeConfig c;
  c.first_block_size = 8;
  c.permutation_seed = 5;
  CascadeSession s(bob, c);
  s.start_round(counter.fn());
  auto odd = s.start_round(counter.fn());
  REQUIRE(!odd.empty());
  const auto pos = s.binary_search_error(2, odd.front(), counter.fn());
  CHECK((pos == 2 || pos == 5));
  CHECK(!s.all_blocks_even());
  auto extra = s.cascade_back(pos, counter.fn());
  REQUIRE(extra.size() == 1);
  CHECK(extra.front() == (pos == 2 ? 5u : 2u));
  CHECK(s.bits() == alice);
}

TEST_CASE("a round-one flip has nothing to cascade into") {
  auto alice = random_bits(64, 9);
  auto bob = alice;
  bob.flip(10);
  CascadeReference ref(alice, 1);
  CountingOracle counter{ref};
  CascadeConfig c;
  c.first_block_size = 8;
  CascadeSession s(bob, c);
  auto odd = s.start_round(counter.fn());
  const auto pos = s.binary_search_error(1, odd.front(), counter.fn());
  const auto before = counter.queries;
  CHECK(s.cascade_back(pos, counter.fn()).empty());
  CHECK(counter.queries == before);
}

TEST_CASE("identical streams stop before any parity") {
  auto alice = random_bits(2400, 10);
  CascadeReference ref(alice, 1);
  CountingOracle counter{ref};
  auto r = reconcile(alice, counter.fn(), ref.hash(), CascadeConfig{});
  CHECK(r.status == CascadeStatus::success);
  CHECK(r.leaked_bits == 0);
  CHECK(r.parity_requests == 0);
  CHECK(counter.queries == 0);
}

TEST_CASE("ten percent mismatch reconciles with exact accounting") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto alice = random_bits(2400, seed);
    const auto original = alice;
    auto bob = alice;
    std::vector<std::size_t> idx(2400);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed * 31);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < 240; ++i) bob.flip(idx[i]);
    CascadeReference ref(alice, seed);
    CountingOracle counter{ref};
    CascadeConfig c;
    c.permutation_seed = seed;
    auto r = reconcile(bob, counter.fn(), ref.hash(), c);
    CHECK(r.status == CascadeStatus::success);
    CHECK(r.bits == alice);
    CHECK(r.leaked_bits == counter.bits);
    CHECK(r.leaked_bits == ref.leaked_bits());
    CHECK(r.parity_requests == counter.queries);
    CHECK(ref.bits() == original);
    CHECK(r.leaked_bits > 700);
    CHECK(r.leaked_bits < 1800);
  }
}

TEST_CASE("a coin-flip stream is allowed to fail") {
  auto alice = random_bits(2400, 12);
  auto bob = random_bits(2400, 13);
  CascadeReference ref(alice, 1);
  CountingOracle counter{ref};
  CascadeConfig c;
  c.rounds = 2;
  c.permutation_seed = 1;
  auto r = reconcile(bob, counter.fn(), ref.hash(), c);
  CHECK(r.status == CascadeStatus::failure);
  CHECK(r.rounds_run == 2);
  CHECK(r.leaked_bits == counter.bits);
}

TEST_CASE("a malformed reply is a protocol error") {
  auto alice = random_bits(64, 14);
  CascadeReference ref(alice, 1);
  ParityOracle short_reply = [&](unsigned round, std::span<const BlockRange> ranges) {
    auto bits = ref.answer_parities(round, ranges);
    bits.pop_back();
    return bits;
  };
  ParityOracle bad_bit = [&](unsigned round, std::span<const BlockRange> ranges) {
    auto bits = ref.answer_parities(round, ranges);
    bits.front() = 2;
    return bits;
  };
  CascadeConfig c;
  c.first_block_size = 8;
  CascadeSession s(alice, c);
  CHECK_THROWS_AS(s.start_round(short_reply), ProtocolError);
  CascadeSession t(alice, c);
  CHECK_THROWS_AS(t.start_round(bad_bit), ProtocolError);
}

TEST_CASE("disagreeing permutation seeds fail instead of looping") {
  auto alice = random_bits(100, 12);
  auto bob = random_bits(100, 13);
  CascadeReference ref(alice, 1);
  CountingOracle counter{ref};
  CascadeConfig c;
  c.permutation_seed = 2;
  CHECK_THROWS_AS(reconcile(bob, counter.fn(), ref.hash(), c), ProtocolError);
}
