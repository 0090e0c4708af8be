// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "csikey/bitstream.hpp"
#include "csikey/cascade.hpp"
#include "csikey/channel_sim.hpp"
#include "csikey/entropy.hpp"
#include "csikey/keyextract.hpp"
#include "csikey/link.hpp"
#include "csikey/trace.hpp"

namespace csikey {

/// Loss on the CSI-carrying packet link used by the req-ack exchange.
struct SyncOptions {
  double loss_probability = 0.0;
  /// Experiment variant: an exchange only counts once Eve heard both directions.
  bool require_eve = false;
  double eve_loss_probability = 0.0;
  unsigned retry_limit = 32;
  std::uint64_t seed = 0;
  std::uint32_t session_id = 0;
};

struct SyncResult {
  SessionTraces traces;
  std::size_t transmissions = 0;
  std::size_t retrials = 0;
};

/// Req-ack with retrial: Alice resends packet n until she hears Bob's ack (and, in the
/// experiment variant, Eve heard both); Bob overwrites packet n's CSI on every retrial.
/// Every transmitted PKT_REQ / PKT_ACK is recorded on `tap`. Throws ProtocolError when
/// some packet exceeds the retry limit.
SyncResult run_sync_exchange(ChannelSource& source, std::size_t n_packets, const SyncOptions& options,
                             Transcript* tap = nullptr);

enum class SessionStatus { success, cascade_failure, insufficient_secure_bits, invalid_parameters };
std::string_view to_string(SessionStatus status);

struct TimingModel {
  double cycle_time_s = 0.280;
  double cascade_rtt_s = 0.200;
};

struct TimingBreakdown {
  double collection_s = 0.0;
  double reconciliation_s = 0.0;
  double total_s = 0.0;
  double wall_clock_s = 0.0;
};

struct KeyReport {
  std::string party;
  SessionStatus status = SessionStatus::cascade_failure;
  std::string message;
  unsigned key_bits = 256;
  std::optional<std::vector<std::uint8_t>> key;

  std::size_t n_packets = 0;
  std::size_t k = 0;
  unsigned q = 0;
  unsigned m = 0;
  std::size_t raw_bits = 0;
  std::size_t leaked_bits = 0;
  double min_entropy = 0.0;
  double max_entropy = 0.0;
  double secure_bits = 0.0;
  double sbgr = 0.0;

  std::optional<double> bob_bmr;
  std::optional<double> eve_bmr_vs_alice;
  std::size_t corrected_bits = 0;
  unsigned cascade_rounds = 0;
  std::size_t parity_requests = 0;
  /// The early-termination hash is public but not counted in leaked_bits.
  bool hash_counted_as_leakage = false;
  TimingBreakdown timing;
};

struct AgreementConfig {
  CascadeConfig cascade;
  unsigned key_bits = 256;
  std::uint32_t session_id = 1;
  Transport transport = Transport::in_process;
  TimingModel timing;
};

struct AgreementOutcome {
  KeyReport alice;
  KeyReport bob;
  Transcript transcript;
  /// Extracted streams before reconciliation, and Bob's result.
  Bitstream alice_bits;
  Bitstream bob_raw_bits;
  Bitstream bob_reconciled_bits;
};

/// Both parties calibrate and extract; Alice announces HELLO and her hash; Bob runs Cascade
/// toward her; both discount leakage and min-entropy and hash the reconciled stream into a
/// key when B exceeds the key length. 128-bit keys are the first half of the SHA-256 output.
AgreementOutcome run_agreement(const CsiTrace& alice, const CsiTrace& bob, const ExtractionParams& params,
                               const AgreementConfig& config);

/// The key a party derives from a reconciled stream.
std::vector<std::uint8_t> derive_key(const Bitstream& reconciled, unsigned key_bits);

struct EveResult {
  Bitstream raw_bits;
  /// raw_bits made consistent with every disclosed parity.
  Bitstream bits;
  double raw_bmr = 0.5;
  double bmr = 0.5;
  std::size_t constraints = 0;
  std::size_t constraint_rank = 0;
  /// Positions pinned exactly by the disclosed parities.
  std::size_t determined_bits = 0;
};

/// Passive attack: extract from Eve's own trace, then pick the stream that agrees with her
/// estimate on every free variable and satisfies all parities Alice disclosed.
EveResult eve_attack(const CsiTrace& eve_trace, const Transcript& observed, const ExtractionParams& params,
                     const Bitstream& alice_reference);

/// Same parity step applied to an arbitrary starting stream.
EveResult apply_disclosed_parities(const Bitstream& estimate, const Transcript& observed,
                                   const Bitstream& alice_reference);

/// N * cycle_time + requests * cascade_rtt.
double estimate_time_to_key(std::size_t n_packets, const TimingModel& timing, std::size_t cascade_requests);

}  // namespace csikey
