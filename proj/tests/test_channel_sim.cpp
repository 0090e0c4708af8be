// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <vector>

#include "csikey/channel_sim.hpp"
#include "csikey/error.hpp"
#include "csikey/trace.hpp"

using namespace csikey;

namespace {

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

double variance(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double s = 0;
  for (double v : x) s += (v - m) * (v - m);
  return s / n;
}

std::vector<double> amplitude_series(const CsiTrace& t, std::size_t sc) {
  std::vector<double> out;
  for (const auto& p : calibrate(t).packets) out.push_back(p.amplitudes[sc]);
  return out;
}

}  // namespace

TEST_CASE("same seed gives identical states and sessions") {
  ChannelModelParams p;
  p.seed = 1;
  auto a = init_channel(p);
  auto b = init_channel(p);
  CHECK(a.tap_gains == b.tap_gains);
  CHECK(a.tap_delays_s == b.tap_delays_s);
  auto s1 = simulate_session(p, 20);
  auto s2 = simulate_session(p, 20);
  CHECK(s1.alice == s2.alice);
  CHECK(s1.eve_b == s2.eve_b);
}

TEST_CASE("tap powers are normalised") {
  auto s = init_channel(ChannelModelParams{});
  CHECK(std::accumulate(s.tap_powers.begin(), s.tap_powers.end(), 0.0) == doctest::Approx(1.0));
}

TEST_CASE("single tap channel is flat") {
  ChannelModelParams p;
  p.num_taps = 1;
  p.tap_delay_spread_s = 0.0;
  auto h = frequency_response(init_channel(p), p);
  for (auto v : h) CHECK(std::abs(v) == doctest::Approx(std::abs(h.front())).epsilon(1e-12));
}

TEST_CASE("zero elapsed time or zero velocity leaves taps unchanged") {
  ChannelModelParams p;
  auto s = init_channel(p);
  CHECK(step_channel(s, 0.0, 3.0).tap_gains == s.tap_gains);
  CHECK(step_channel(s, 5.0, 0.0).tap_gains == s.tap_gains);
}

TEST_CASE("coherence time of a quarter wavelength") {
  CHECK(evolution_correlation(10.4e-3, 3.0, 0.125) == doctest::Approx(std::exp(-10.4e-3 / (0.25 * 0.125 / 3.0))));
  // Tc = 0.25 * 0.125 / 3 = 10.4 ms
  CHECK(evolution_correlation(0.25 * 0.125 / 3.0, 3.0, 0.125) == doctest::Approx(std::exp(-1.0)));
  CHECK(evolution_correlation(0.25 * 0.125 / 3.0, 3.0, 0.125) == doctest::Approx(0.368).epsilon(1e-3));
  CHECK(evolution_correlation(1.0, 0.0, 0.125) == 1.0);
}

TEST_CASE("ideal reciprocity") {
  ChannelModelParams p;
  p.snr_db = std::numeric_limits<double>::infinity();
  p.agc_gain_min = p.agc_gain_max = 1.0;
  p.round_trip_time_s = 0.0;
  auto s = simulate_session(p, 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(s.alice.packets[i].csi == s.bob.packets[i].csi);
}

TEST_CASE("static noiseless channel repeats the same csi") {
  ChannelModelParams p;
  p.shake_velocity_mps = 0.0;
  p.snr_db = std::numeric_limits<double>::infinity();
  p.agc_gain_min = p.agc_gain_max = 1.0;
  auto s = simulate_session(p, 5);
  for (const auto& pk : s.alice.packets) CHECK(pk.csi == s.alice.packets.front().csi);
}

TEST_CASE("session shape") {
  ChannelModelParams p;
  auto s = simulate_session(p, 300);
  CHECK(s.alice.size() == 300);
  CHECK(s.bob.size() == 300);
  CHECK(s.eve_a.size() == 300);
  CHECK(s.eve_b.size() == 300);
  CHECK(s.alice.packets.front().csi.size() == 56);
  CHECK(simulate_session(p, 1).alice.size() == 1);
  CHECK(ChannelModelParams::ht40().num_subcarriers() == 114);
}

TEST_CASE("eve's amplitudes are uncorrelated with alice's") {
  ChannelModelParams p;
  p.seed = 3;
  auto s = simulate_session(p, 300);
  for (std::size_t sc : {5u, 20u, 40u}) {
    const double r = pearson(amplitude_series(s.alice, sc), amplitude_series(s.eve_a, sc));
    CHECK(std::abs(r) < 0.1);
    const double rb = pearson(amplitude_series(s.alice, sc), amplitude_series(s.eve_b, sc));
    CHECK(std::abs(rb) < 0.2);
  }
}

TEST_CASE("eve decorrelation holds across seeds") {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    ChannelModelParams p;
    p.seed = seed;
    auto s = simulate_session(p, 300);
    worst = std::max(worst, std::abs(pearson(amplitude_series(s.alice, 12), amplitude_series(s.eve_a, 12))));
    worst = std::max(worst, std::abs(pearson(amplitude_series(s.bob, 12), amplitude_series(s.eve_b, 12))));
  }
  CHECK(worst < 0.2);
}

TEST_CASE("static amplitudes are concentrated, shaken ones broad") {
  ChannelModelParams p;
  p.seed = 5;
  auto shaken = simulate_session(p, 300);
  p.shake_velocity_mps = 0.0;
  auto still = simulate_session(p, 300);
  const double ratio = variance(amplitude_series(shaken.alice, 10)) / variance(amplitude_series(still.alice, 10));
  CHECK(ratio > 10.0);
}

TEST_CASE("sub-carrier correlation oscillates with separation") {
  ChannelModelParams p;
  p.num_taps = 8;
  p.tap_delay_spread_s = 100e-9;
  p.snr_db = std::numeric_limits<double>::infinity();
  const std::size_t nsc = p.num_subcarriers();
  const std::size_t realizations = 10000;
  std::vector<std::vector<double>> amp(nsc);
  for (std::size_t r = 0; r < realizations; ++r) {
    p.seed = r + 1;
    auto h = frequency_response(init_channel(p), p);
    for (std::size_t j = 0; j < nsc; ++j) amp[j].push_back(std::abs(h[j]));
  }
  std::vector<double> corr(nsc);
  for (std::size_t j = 0; j < nsc; ++j) corr[j] = pearson(amp[0], amp[j]);
  CHECK(corr[0] == doctest::Approx(1.0));
  // decays to a trough inside the band, then climbs back
  const auto trough = static_cast<std::size_t>(std::min_element(corr.begin(), corr.end()) - corr.begin());
  CHECK(corr[trough] < 0.5);
  REQUIRE(trough + 1 < nsc);
  CHECK(*std::max_element(corr.begin() + static_cast<std::ptrdiff_t>(trough), corr.end()) - corr[trough] > 0.02);
}

TEST_CASE("invalid parameters name the invariant") {
  ChannelModelParams p;
  p.num_taps = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  CHECK_THROWS_AS(init_channel(p), ConfigError);
  p = {};
  p.agc_gain_min = 2.0;
  p.agc_gain_max = 1.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("replay source serves recorded cycles") {
  ChannelModelParams p;
  auto s = simulate_session(p, 4);
  ReplayChannelSource src(s);
  CHECK(src.size() == 4);
  auto x = src.next_exchange(2, 0);
  CHECK(x.alice == s.alice.packets[2]);
  CHECK(src.next_exchange(2, 1).bob == s.bob.packets[2]);
}
