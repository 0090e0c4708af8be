// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <bit>
#include <numeric>
#include <random>
#include <vector>

#include "csikey/channel_sim.hpp"
#include "csikey/error.hpp"
#include "csikey/keyextract.hpp"
#include "oracles.hpp"

using namespace csikey;

TEST_CASE("median split") {
  auto levels = compute_levels(std::vector<double>{1, 2, 3, 4}, 1);
  REQUIRE(levels.size() == 1);
  CHECK(levels[0] == doctest::Approx(2.5));
}

TEST_CASE("quartiles of 1..100 match the interpolation oracle") {
  std::vector<double> grid(100);
  std::iota(grid.begin(), grid.end(), 1.0);
  auto levels = compute_levels(grid, 2);
  REQUIRE(levels.size() == 3);
  CHECK(levels[0] == doctest::Approx(25.75));
  CHECK(levels[1] == doctest::Approx(50.5));
  CHECK(levels[2] == doctest::Approx(75.25));
  for (int i = 0; i < 3; ++i) CHECK(levels[i] == doctest::Approx(oracle::interpolated_percentile(grid, (i + 1) / 4.0)));
  CHECK(percentile(grid, 0.0) == 1.0);
  CHECK(percentile(grid, 1.0) == 100.0);
}

TEST_CASE("constant samples give equal thresholds and one symbol") {
  std::vector<double> flat(50, 3.0);
  auto levels = compute_levels(flat, 2);
  for (double l : levels) CHECK(l == 3.0);
  CHECK(bin_index(3.0, levels) == 3);
  CHECK(bin_index(2.9, levels) == 0);
  CHECK_THROWS_AS(compute_levels(std::vector<double>{1.0, 2.0, 3.0}, 2), ExtractionError);
}

TEST_CASE("gray codes") {
  CHECK(gray_encode(0) == 0b00);
  CHECK(gray_encode(1) == 0b01);
  CHECK(gray_encode(2) == 0b11);
  CHECK(gray_encode(3) == 0b10);
  for (unsigned q = 1; q <= 8; ++q) {
    auto table = oracle::gray_table(q);
    for (std::uint32_t b = 0; b < table.size(); ++b) {
      CHECK(gray_encode(b) == table[b]);
      CHECK(gray_decode(table[b]) == b);
    }
  }
}

TEST_CASE("bin boundaries") {
  QuantizerLevels one = {2.5};
  CHECK(bin_index(2.4, one) == 0);
  CHECK(bin_index(2.5, one) == 1);
  QuantizerLevels three = {1.0, 2.0, 3.0};
  CHECK(quantize(0.5, three) == 0);
  CHECK(quantize(2.0, three) == gray_encode(2));
  CHECK(quantize(9.0, three) == gray_encode(3));
}

TEST_CASE("majority vote") {
  CHECK(majority_vote(std::vector<Symbol>{2, 2, 3}, 2) == 2);
  CHECK(majority_vote(std::vector<Symbol>{3, 2, 2}, 3) == 2);
  CHECK(majority_vote(std::vector<Symbol>{1}, 1) == 1);
  CHECK(majority_vote(std::vector<Symbol>{1, 2, 3}, 2) == 2);
  CHECK(majority_vote(std::vector<Symbol>{1, 3, 2, 3, 1}, 2) == 1);
  CHECK_THROWS_AS(majority_vote(std::vector<Symbol>{1, 2}, 1), ExtractionError);
  CHECK_THROWS_AS(majority_vote(std::vector<Symbol>{}, 0), ExtractionError);
}

TEST_CASE("default session yields 2400 raw bits") {
  ChannelModelParams p;
  auto s = simulate_session(p, 300);
  ExtractionParams x;
  auto e = extract(calibrate(s.alice), x);
  CHECK(e.bits.size() == 2400);
  CHECK(e.symbols.symbols.size() == 1200);
  CHECK(symbols_from_bits(e.bits, x.k, x.q).symbols == e.symbols.symbols);
}

TEST_CASE("bit layout is packet-major and msb first") {
  // two sub-carriers, four packets, amplitudes chosen to land in known bins
  std::vector<std::vector<double>> rows = {{1, 4}, {2, 3}, {3, 2}, {4, 1}};
  auto t = calibrate(oracle::trace_from_amplitudes(rows, {1, 20}));
  ExtractionParams x;
  x.n_packets = 4;
  x.k = 2;
  x.q = 2;
  x.m = 0;
  x.main_subcarriers = {1, 20};
  auto e = extract(t, x);
  // bins: column 1 -> 0,1,2,3 ; column 20 -> 3,2,1,0 ; gray 00 01 11 10
  CHECK(e.bits.to_string() == "0010" "0111" "1101" "1000");
  CHECK(e.symbols.composite(0) == 0b0010);
}

TEST_CASE("single constant sub-carrier gives identical symbols") {
  std::vector<std::vector<double>> rows(8, std::vector<double>{5.0});
  ExtractionParams x;
  x.n_packets = 8;
  x.k = 1;
  x.q = 2;
  x.m = 0;
  x.main_subcarriers = {3};
  auto e = extract(calibrate(oracle::trace_from_amplitudes(rows, {3})), x);
  for (auto s : e.symbols.symbols) CHECK(s == e.symbols.symbols.front());
}

TEST_CASE("voting uses the neighbours' own levels") {
  // centre column is noisy; the four neighbours agree on the trend
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::vector<double>> rows;
  for (int n = 0; n < 64; ++n) {
    const double base = n % 4;
    rows.push_back({base, base + 0.01, base + noise(rng) * 5, base - 0.01, base});
  }
  auto t = calibrate(oracle::trace_from_amplitudes(rows, {1, 2, 3, 4, 5}));
  ExtractionParams x;
  x.n_packets = 64;
  x.k = 1;
  x.q = 2;
  x.m = 2;
  x.main_subcarriers = {3};
  auto e = extract(t, x);
  for (int n = 0; n < 64; ++n) CHECK(e.symbols.at(n, 0) == gray_encode(static_cast<std::uint32_t>(n % 4)));
}

TEST_CASE("parameter validation") {
  ExtractionParams x;
  CHECK_NOTHROW(x.validate(ht20_subcarriers()));
  x.main_subcarriers = {-24, -20, 8, 24};
  CHECK_THROWS_AS(x.validate(), ConfigError);
  x = {};
  x.main_subcarriers = {-28, -8, 8, 24};
  CHECK_THROWS_AS(x.validate(ht20_subcarriers()), ConfigError);
  x = {};
  x.q = 0;
  CHECK_THROWS_AS(x.validate(), ConfigError);
  x = {};
  x.main_subcarriers.pop_back();
  CHECK_THROWS_AS(x.validate(), ConfigError);
  CHECK_NOTHROW(ExtractionParams::ht40().validate(ht40_subcarriers()));
}

TEST_CASE("spread layouts keep every window inside the grid") {
  for (std::size_t k : {1u, 2u, 4u, 5u}) {
    for (unsigned m : {0u, 2u, 4u}) {
      auto layout = spread_main_subcarriers(ht20_subcarriers(), k, m);
      ExtractionParams x;
      x.k = k;
      x.m = m;
      x.main_subcarriers = layout;
      CHECK_NOTHROW(x.validate(ht20_subcarriers()));
    }
  }
  CHECK_THROWS_AS(spread_main_subcarriers(ht20_subcarriers(), 20, 4), ConfigError);
}

TEST_CASE("admissible subset count matches enumeration") {
  std::vector<int> c = {1, 2, 3, 5, 8, 9, 12};
  for (int spacing : {1, 2, 3, 4}) {
    for (std::size_t k : {1u, 2u, 3u}) {
      std::uint64_t expect = 0;
      for (std::uint32_t mask = 0; mask < (1u << c.size()); ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) != k) continue;
        std::vector<int> pick;
        for (std::size_t j = 0; j < c.size(); ++j)
          if (mask >> j & 1u) pick.push_back(c[j]);
        bool ok = true;
        for (std::size_t a = 1; a < pick.size(); ++a) ok = ok && pick[a] - pick[a - 1] >= spacing;
        expect += ok;
      }
      CHECK(count_admissible_subsets(c, k, spacing) == expect);
    }
  }
}

TEST_CASE("selection avoids a constant sub-carrier") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(1.0, 2.0);
  std::vector<std::vector<double>> rows;
  for (int n = 0; n < 40; ++n) rows.push_back({1.0, u(rng)});
  auto t = calibrate(oracle::trace_from_amplitudes(rows, {1, 2}));
  SelectionOptions o;
  o.k = 1;
  o.q = 2;
  o.min_spacing = 1;
  auto r = select_subcarriers(t, o);
  CHECK(r.subcarriers == std::vector<int>{2});
  CHECK(r.min_entropy > 1.5);
}

TEST_CASE("selection picks the least correlated pair") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> rows;
  for (int n = 0; n < 400; ++n) {
    const double a = g(rng), b = g(rng);
    rows.push_back({5 + a, 5 + a + 0.05 * g(rng), 5 + a + 0.05 * g(rng), 5 + b, 5 + b + 0.05 * g(rng)});
  }
  auto t = calibrate(oracle::trace_from_amplitudes(rows, {1, 2, 3, 4, 5}));
  SelectionOptions o;
  o.k = 2;
  o.q = 2;
  o.min_spacing = 1;
  auto r = select_subcarriers(t, o);
  auto expect = oracle::brute_force_selection(t, 2, 2, 1);
  CHECK(r.subcarriers == expect.subcarriers);
  CHECK(r.min_entropy == expect.min_entropy);
  REQUIRE(r.subcarriers.size() == 2);
  CHECK(r.subcarriers[0] <= 3);
  CHECK(r.subcarriers[1] >= 4);
}

TEST_CASE("selection refuses work beyond its budget") {
  auto t = calibrate(simulate_session(ChannelModelParams{}, 40).alice);
  SelectionOptions o;
  o.k = 4;
  o.min_spacing = 1;
  o.budget = 10;
  CHECK_THROWS_AS(select_subcarriers(t, o), SelectionError);
  o.k = 4;
  o.min_spacing = 40;
  o.budget = 1'000'000;
  CHECK_THROWS_AS(select_subcarriers(t, o), SelectionError);
}
