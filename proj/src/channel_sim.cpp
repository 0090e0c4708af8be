// SPDX-License-Identifier: Apache-2.0
#include "csikey/channel_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <string>

#include "csikey/error.hpp"
#include "csikey/seed.hpp"

namespace csikey {
namespace {

std::complex<double> complex_gaussian(std::mt19937_64& rng, double power) {
  std::normal_distribution<double> n(0.0, std::sqrt(power / 2.0));
  const double re = n(rng);
  const double im = n(rng);
  return {re, im};
}

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::alice: return "alice";
    case Role::bob: return "bob";
    case Role::eve_from_alice: return "eve_from_alice";
    case Role::eve_from_bob: return "eve_from_bob";
  }
  throw ConfigError("unknown role");
}

Role role_from_string(std::string_view name) {
  for (Role r : {Role::alice, Role::bob, Role::eve_from_alice, Role::eve_from_bob})
    if (to_string(r) == name) return r;
  throw ConfigError("unknown role '" + std::string(name) + "'");
}

std::vector<int> ht20_subcarriers() {
  std::vector<int> v;
  for (int i = -28; i <= 28; ++i)
    if (i != 0) v.push_back(i);
  return v;
}

std::vector<int> ht40_subcarriers() {
  std::vector<int> v;
  for (int i = -58; i <= 58; ++i)
    if (std::abs(i) >= 2) v.push_back(i);
  return v;
}

double ChannelModelParams::coherence_time_s() const noexcept {
  if (shake_velocity_mps <= 0.0) return std::numeric_limits<double>::infinity();
  return 0.25 * wavelength_m() / shake_velocity_mps;
}

ChannelModelParams ChannelModelParams::ht40() {
  ChannelModelParams p;
  p.carrier_frequency_hz = 5.18e9;
  p.bandwidth_hz = 40e6;
  p.subcarrier_indices = ht40_subcarriers();
  return p;
}

void ChannelModelParams::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("channel parameters: " + what); };
  if (!(carrier_frequency_hz > 0.0)) fail("carrier_frequency must be > 0");
  if (!(bandwidth_hz > 0.0)) fail("bandwidth must be > 0");
  if (subcarrier_indices.empty()) fail("num_subcarriers must be > 0");
  if (std::set<int>(subcarrier_indices.begin(), subcarrier_indices.end()).size() != subcarrier_indices.size())
    fail("sub-carrier indices must be unique");
  if (!(subcarrier_spacing_hz > 0.0)) fail("subcarrier_spacing must be > 0");
  if (num_taps < 1) fail("num_taps must be >= 1");
  if (!(tap_delay_spread_s >= 0.0)) fail("tap_delay_spread must be >= 0");
  if (!(shake_velocity_mps >= 0.0) || !std::isfinite(shake_velocity_mps)) fail("shake_velocity must be finite and >= 0");
  if (!(round_trip_time_s >= 0.0)) fail("round_trip_time must be >= 0");
  if (!(packet_interval_s >= round_trip_time_s)) fail("packet_interval must be >= round_trip_time");
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) fail("snr_db must be a number or +inf");
  if (!(agc_gain_min > 0.0) || !(agc_gain_max >= agc_gain_min)) fail("agc_gain_range must satisfy 0 < min <= max");
  if (!(round_trip_time_s < coherence_time_s()))
    fail("round_trip_time (" + std::to_string(round_trip_time_s) + " s) must be below the coherence time 0.25*lambda/velocity (" +
         std::to_string(coherence_time_s()) + " s)");
}

ChannelState init_channel(const ChannelModelParams& params, std::uint64_t stream) {
  params.validate();
  ChannelState s;
  s.rng.seed(mix_seed(params.seed, stream));
  s.wavelength_m = params.wavelength_m();

  const auto taps = static_cast<std::size_t>(params.num_taps);
  const double tau = params.tap_delay_spread_s;
  s.tap_delays_s.resize(taps);
  s.tap_powers.resize(taps);
  double total = 0.0;
  for (std::size_t i = 0; i < taps; ++i) {
    // Exponential power-delay profile sampled over [0, 3 tau].
    s.tap_delays_s[i] = taps == 1 ? 0.0 : 3.0 * tau * static_cast<double>(i) / static_cast<double>(taps - 1);
    s.tap_powers[i] = tau > 0.0 ? std::exp(-s.tap_delays_s[i] / tau) : 1.0;
    total += s.tap_powers[i];
  }
  for (auto& p : s.tap_powers) p /= total;

  s.tap_gains.reserve(taps);
  for (std::size_t i = 0; i < taps; ++i) s.tap_gains.push_back(complex_gaussian(s.rng, s.tap_powers[i]));
  return s;
}

double evolution_correlation(double dt_s, double velocity_mps, double wavelength_m) {
  if (dt_s <= 0.0 || velocity_mps <= 0.0) return 1.0;
  const double tc = 0.25 * wavelength_m / velocity_mps;
  return std::exp(-dt_s / tc);
}

ChannelState step_channel(ChannelState state, double dt_s, double velocity_mps) {
  if (dt_s < 0.0) throw ConfigError("step_channel: dt must be >= 0");
  state.elapsed_time_s += dt_s;
  const double rho = evolution_correlation(dt_s, velocity_mps, state.wavelength_m);
  if (rho == 1.0) return state;
  const double innovation = std::sqrt(1.0 - rho * rho);
  for (std::size_t i = 0; i < state.tap_gains.size(); ++i)
    state.tap_gains[i] = rho * state.tap_gains[i] + innovation * complex_gaussian(state.rng, state.tap_powers[i]);
  return state;
}

std::vector<std::complex<double>> frequency_response(const ChannelState& state, const ChannelModelParams& params) {
  std::vector<std::complex<double>> h;
  h.reserve(params.num_subcarriers());
  for (int idx : params.subcarrier_indices) {
    const double f = idx * params.subcarrier_spacing_hz;
    std::complex<double> acc{};
    for (std::size_t i = 0; i < state.tap_gains.size(); ++i)
      acc += state.tap_gains[i] * std::polar(1.0, -2.0 * std::numbers::pi * f * state.tap_delays_s[i]);
    h.push_back(acc);
  }
  return h;
}

RawObservation observe(const ChannelState& state, const ChannelModelParams& params, std::uint32_t packet_index,
                       Role role, std::uint32_t attempt, double timestamp_us) {
  std::mt19937_64 rng(mix_seed(mix_seed(mix_seed(params.seed, 0x6f6273ull + static_cast<std::uint64_t>(role)), packet_index), attempt));

  RawObservation obs;
  obs.packet_index = packet_index;
  obs.timestamp_us = timestamp_us;
  auto h = frequency_response(state, params);
  const double noise_power = std::isinf(params.snr_db) ? 0.0 : std::pow(10.0, -params.snr_db / 10.0);
  double power = 0.0;
  for (auto& v : h) {
    if (noise_power > 0.0) v += complex_gaussian(rng, noise_power);
    power += std::norm(v);
  }
  // The radio reports RSS before the AGC and CSI after it.
  std::uniform_real_distribution<double> gain_dist(params.agc_gain_min, params.agc_gain_max);
  const double gain = params.agc_gain_min == params.agc_gain_max ? params.agc_gain_min : gain_dist(rng);
  for (auto& v : h) v *= gain;
  obs.rss = power;
  obs.csi = std::move(h);
  return obs;
}

TraceMetadata simulated_metadata(const ChannelModelParams& params, Role role) {
  TraceMetadata meta;
  meta.role = std::string(to_string(role));
  const double mhz = params.carrier_frequency_hz / 1e6;
  if (mhz < 3000.0) {
    meta.band = "2.4GHz";
    meta.channel = static_cast<int>(std::lround((mhz - 2407.0) / 5.0));
  } else {
    meta.band = "5GHz";
    meta.channel = static_cast<int>(std::lround((mhz - 5000.0) / 5.0));
  }
  meta.bandwidth_hz = params.bandwidth_hz;
  meta.subcarriers = params.subcarrier_indices;
  return meta;
}

SimulatedChannelSource::SimulatedChannelSource(ChannelModelParams params)
    : params_(std::move(params)),
      alice_bob_(init_channel(params_, 0)),
      eve_alice_(init_channel(params_, 1)),
      eve_bob_(init_channel(params_, 2)) {}

TraceMetadata SimulatedChannelSource::metadata(Role role) const { return simulated_metadata(params_, role); }

ExchangeObservation SimulatedChannelSource::next_exchange(std::uint32_t n, std::uint32_t attempt) {
  const double v = params_.shake_velocity_mps;
  const double half_rtt = params_.round_trip_time_s / 2.0;
  const double t0 = alice_bob_.elapsed_time_s * 1e6;

  ExchangeObservation x;
  x.alice = observe(alice_bob_, params_, n, Role::alice, attempt, t0);
  x.eve_from_alice = observe(eve_alice_, params_, n, Role::eve_from_alice, attempt, t0);

  // Bob's reply sees the link half a round trip later. Alice and Eve stay put.
  alice_bob_ = step_channel(std::move(alice_bob_), half_rtt, v);
  eve_bob_ = step_channel(std::move(eve_bob_), half_rtt, v);
  const double t1 = alice_bob_.elapsed_time_s * 1e6;
  x.bob = observe(alice_bob_, params_, n, Role::bob, attempt, t1);
  x.eve_from_bob = observe(eve_bob_, params_, n, Role::eve_from_bob, attempt, t1);

  const double rest = params_.packet_interval_s - half_rtt;
  alice_bob_ = step_channel(std::move(alice_bob_), rest, v);
  eve_bob_ = step_channel(std::move(eve_bob_), rest, v);
  eve_alice_ = step_channel(std::move(eve_alice_), params_.packet_interval_s, 0.0);
  return x;
}

SessionTraces simulate_session(const ChannelModelParams& params, std::size_t n_packets) {
  if (n_packets < 1) throw ConfigError("simulate_session: N must be >= 1");
  SimulatedChannelSource source(params);
  SessionTraces t;
  t.alice.meta = source.metadata(Role::alice);
  t.bob.meta = source.metadata(Role::bob);
  t.eve_a.meta = source.metadata(Role::eve_from_alice);
  t.eve_b.meta = source.metadata(Role::eve_from_bob);
  for (std::size_t n = 0; n < n_packets; ++n) {
    auto x = source.next_exchange(static_cast<std::uint32_t>(n), 0);
    t.alice.packets.push_back(std::move(x.alice));
    t.bob.packets.push_back(std::move(x.bob));
    t.eve_a.packets.push_back(std::move(x.eve_from_alice));
    t.eve_b.packets.push_back(std::move(x.eve_from_bob));
  }
  return t;
}

ReplayChannelSource::ReplayChannelSource(SessionTraces traces) : traces_(std::move(traces)) {
  const auto n = traces_.alice.size();
  if (traces_.bob.size() != n || traces_.eve_a.size() != n || traces_.eve_b.size() != n)
    throw ConfigError("replay traces must all hold the same number of packets");
}

std::size_t ReplayChannelSource::size() const noexcept { return traces_.alice.size(); }

ExchangeObservation ReplayChannelSource::next_exchange(std::uint32_t n, std::uint32_t) {
  if (n >= size()) throw ConfigError("replay traces hold only " + std::to_string(size()) + " packets");
  return {traces_.alice.packets[n], traces_.bob.packets[n], traces_.eve_a.packets[n], traces_.eve_b.packets[n]};
}

TraceMetadata ReplayChannelSource::metadata(Role role) const {
  switch (role) {
    case Role::alice: return traces_.alice.meta;
    case Role::bob: return traces_.bob.meta;
    case Role::eve_from_alice: return traces_.eve_a.meta;
    case Role::eve_from_bob: return traces_.eve_b.meta;
  }
  throw ConfigError("unknown role");
}

}  // namespace csikey
