// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "csikey/trace.hpp"

namespace csikey {

/// Who is measuring. Eve's two vantage points see channels independent of the Alice-Bob link.
enum class Role { alice, bob, eve_from_alice, eve_from_bob };

std::string_view to_string(Role role);
Role role_from_string(std::string_view name);

/// Usable sub-carrier indices of an HT20 (56) or HT40 (114) grid.
std::vector<int> ht20_subcarriers();
std::vector<int> ht40_subcarriers();

inline constexpr double kSpeedOfLight = 299'792'458.0;

/// Tapped-delay-line channel with Gauss-Markov tap evolution.
struct ChannelModelParams {
  double carrier_frequency_hz = 2.437e9;  // channel 6
  double bandwidth_hz = 20e6;
  std::vector<int> subcarrier_indices = ht20_subcarriers();
  double subcarrier_spacing_hz = 312.5e3;
  int num_taps = 8;
  double tap_delay_spread_s = 30e-9;
  double shake_velocity_mps = 3.0;
  double packet_interval_s = 0.28;
  double round_trip_time_s = 480e-6;
  /// Per-device measurement SNR against unit mean channel power; +inf disables noise.
  double snr_db = 35.0;
  double agc_gain_min = 0.25;
  double agc_gain_max = 4.0;
  std::uint64_t seed = 1;

  std::size_t num_subcarriers() const noexcept { return subcarrier_indices.size(); }
  double wavelength_m() const noexcept { return kSpeedOfLight / carrier_frequency_hz; }
  /// Time to traverse a quarter wavelength; +inf for a static device.
  double coherence_time_s() const noexcept;

  /// Throws ConfigError naming the violated invariant.
  void validate() const;

  /// 5 GHz / 40 MHz preset (channel 36, 114 sub-carriers).
  static ChannelModelParams ht40();
};

struct ChannelState {
  std::vector<std::complex<double>> tap_gains;
  std::vector<double> tap_delays_s;
  std::vector<double> tap_powers;  // sums to one
  double wavelength_m = 0.0;
  double elapsed_time_s = 0.0;
  std::mt19937_64 rng;
};

/// Draws independent complex Gaussian taps from an exponential power-delay profile.
/// `stream` separates independent links (Eve's) that share the session seed.
ChannelState init_channel(const ChannelModelParams& params, std::uint64_t stream = 0);

/// Gauss-Markov update with rho = exp(-dt / Tc), Tc = 0.25 lambda / velocity.
ChannelState step_channel(ChannelState state, double dt_s, double velocity_mps);

/// rho used by step_channel; 1 for dt == 0 or velocity == 0.
double evolution_correlation(double dt_s, double velocity_mps, double wavelength_m);

/// Noise-free frequency response at each configured sub-carrier.
std::vector<std::complex<double>> frequency_response(const ChannelState& state, const ChannelModelParams& params);

/// One noisy, AGC-scaled CSI measurement. Deterministic in (state, params.seed, packet, role, attempt).
RawObservation observe(const ChannelState& state, const ChannelModelParams& params, std::uint32_t packet_index,
                       Role role, std::uint32_t attempt = 0, double timestamp_us = 0.0);

/// One packet cycle as seen by all four parties.
struct ExchangeObservation {
  RawObservation alice;
  RawObservation bob;
  RawObservation eve_from_alice;
  RawObservation eve_from_bob;
};

/// Abstract producer of per-cycle observations (simulator or recorded traces).
class ChannelSource {
 public:
  virtual ~ChannelSource() = default;
  /// Measure one Alice->Bob->Alice cycle for packet `n`; `attempt` > 0 on retrial.
  virtual ExchangeObservation next_exchange(std::uint32_t n, std::uint32_t attempt) = 0;
  virtual TraceMetadata metadata(Role role) const = 0;
};

/// Drives the three independent channels forward one packet interval per call.
class SimulatedChannelSource final : public ChannelSource {
 public:
  explicit SimulatedChannelSource(ChannelModelParams params);

  ExchangeObservation next_exchange(std::uint32_t n, std::uint32_t attempt) override;
  TraceMetadata metadata(Role role) const override;

  const ChannelModelParams& params() const noexcept { return params_; }

 private:
  ChannelModelParams params_;
  ChannelState alice_bob_;
  ChannelState eve_alice_;
  ChannelState eve_bob_;
};

struct SessionTraces {
  CsiTrace alice;
  CsiTrace bob;
  CsiTrace eve_a;
  CsiTrace eve_b;
};

/// N packet cycles with no loss.
SessionTraces simulate_session(const ChannelModelParams& params, std::size_t n_packets);

TraceMetadata simulated_metadata(const ChannelModelParams& params, Role role);

/// Serves recorded traces packet by packet; a retrial returns the same recorded cycle.
class ReplayChannelSource final : public ChannelSource {
 public:
  explicit ReplayChannelSource(SessionTraces traces);

  ExchangeObservation next_exchange(std::uint32_t n, std::uint32_t attempt) override;
  TraceMetadata metadata(Role role) const override;
  std::size_t size() const noexcept;

 private:
  SessionTraces traces_;
};

}  // namespace csikey
