// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "csikey/bitstream.hpp"
#include "csikey/hash.hpp"
#include "csikey/messages.hpp"

namespace csikey {

struct CascadeConfig {
  unsigned rounds = 10;
  /// Expected bit error fraction; sizes the first round's blocks.
  double qber_estimate = 0.10;
  /// Overrides the 0.73/qber rule when set.
  std::optional<std::size_t> first_block_size;
  std::uint64_t permutation_seed = 0;

  void validate() const;
};

/// Block size per round: ceil(0.73/qber) clamped to [2, n], doubled for rounds 2-4,
/// then ceil(n/2) from round 5 on.
std::vector<std::size_t> plan_rounds(const CascadeConfig& config, std::size_t stream_length);

/// Position map for a round: permuted position -> original index. Round 1 is the identity;
/// later rounds are Fisher-Yates shuffles keyed by (seed, round).
std::vector<std::uint32_t> round_permutation(std::uint64_t seed, unsigned round, std::size_t n);

enum class CascadeStatus { running, success, failure };
std::string_view to_string(CascadeStatus status);

struct ParityRecord {
  unsigned round = 0;
  BlockRange range;
  std::uint8_t parity = 0;
};

/// Shared permutation/partition bookkeeping for one round.
struct RoundLayout {
  unsigned round = 0;
  std::size_t block_size = 0;
  std::vector<std::uint32_t> perm;     // permuted position -> index
  std::vector<std::uint32_t> inverse;  // index -> permuted position

  std::size_t block_count() const noexcept { return (perm.size() + block_size - 1) / block_size; }
  BlockRange block(std::size_t b) const;
  std::size_t block_of(std::size_t index) const { return inverse[index] / block_size; }
};

RoundLayout make_round_layout(std::uint64_t seed, unsigned round, std::size_t n, std::size_t block_size);

/// XOR of `bits` over the permuted positions [range.start, range.end).
std::uint8_t range_parity(const Bitstream& bits, std::span<const std::uint32_t> perm, BlockRange range);

/// Alice's side: holds the reference stream and answers parity queries.
class CascadeReference {
 public:
  CascadeReference(Bitstream bits, std::uint64_t permutation_seed);

  Digest256 hash() const { return hash_bitstream(bits_); }

  /// Parity of each requested range under the round's permutation. Every returned bit
  /// counts as leaked. Throws ProtocolError for ranges outside the stream or round 0.
  std::vector<std::uint8_t> answer_parities(unsigned round, std::span<const BlockRange> ranges);

  const Bitstream& bits() const noexcept { return bits_; }
  std::size_t leaked_bits() const noexcept { return leaked_; }
  const std::vector<ParityRecord>& parity_log() const noexcept { return log_; }

 private:
  const std::vector<std::uint32_t>& perm(unsigned round);

  Bitstream bits_;
  std::uint64_t seed_;
  std::unordered_map<unsigned, std::vector<std::uint32_t>> perms_;
  std::vector<ParityRecord> log_;
  std::size_t leaked_ = 0;
};

/// Sends one PARITY_REQ worth of ranges for a round and returns the reply bits.
using ParityOracle = std::function<std::vector<std::uint8_t>(unsigned round, std::span<const BlockRange> ranges)>;

/// Bob's side: corrects a working copy toward the reference through parity queries.
class CascadeSession {
 public:
  CascadeSession(Bitstream bits, CascadeConfig config);

  const Bitstream& bits() const noexcept { return bits_; }
  const CascadeConfig& config() const noexcept { return config_; }
  const std::vector<std::size_t>& schedule() const noexcept { return schedule_; }
  unsigned rounds_started() const noexcept { return static_cast<unsigned>(rounds_.size()); }
  const RoundLayout& layout(unsigned round) const { return rounds_.at(round - 1).layout; }

  /// Parity bits received so far; each one is a leaked bit.
  std::size_t leaked_bits() const noexcept { return leaked_; }
  std::size_t requests_sent() const noexcept { return requests_; }
  const std::vector<ParityRecord>& parity_log() const noexcept { return log_; }
  /// Positions flipped, in flip order.
  const std::vector<std::size_t>& corrected_positions() const noexcept { return corrected_; }

  /// Starts the next round: one request for every block parity. Returns the odd blocks.
  std::vector<std::size_t> start_round(const ParityOracle& oracle);

  /// Halving search inside an odd block of a started round, one query per level; flips and
  /// returns the erroneous position. Throws ProtocolError if the block is not odd.
  std::size_t binary_search_error(unsigned round, std::size_t block, const ParityOracle& oracle);

  /// After `position` was flipped, searches every started-round block that turned odd,
  /// repeating until none remain. Returns the extra positions corrected.
  std::vector<std::size_t> cascade_back(std::size_t position, const ParityOracle& oracle);

  /// Corrects every odd block across started rounds, advancing all searches in lockstep so
  /// each step costs at most one request per round.
  std::vector<std::size_t> correct_all(const ParityOracle& oracle);

  /// True when every block of every started round has matching parity.
  bool all_blocks_even() const;

 private:
  struct RoundState {
    RoundLayout layout;
    std::vector<std::uint8_t> bob_parity;    // per block, kept current on every flip
    std::vector<std::uint8_t> alice_parity;  // per block, as disclosed
  };
  struct Search {
    unsigned round;
    std::size_t root;
    BlockRange range;
  };

  std::optional<std::uint8_t> known_parity(unsigned round, BlockRange range) const;
  void remember(unsigned round, BlockRange range, std::uint8_t parity);
  std::vector<std::uint8_t> ask(const ParityOracle& oracle, unsigned round, std::span<const BlockRange> ranges);
  std::uint8_t mismatch(unsigned round, BlockRange range) const;
  void flip(std::size_t position);
  std::vector<std::pair<unsigned, std::size_t>> odd_blocks() const;

  Bitstream bits_;
  CascadeConfig config_;
  std::vector<std::size_t> schedule_;
  std::vector<RoundState> rounds_;
  std::vector<std::unordered_map<std::uint64_t, std::uint8_t>> known_;  // per round
  std::vector<ParityRecord> log_;
  std::vector<std::size_t> corrected_;
  std::vector<std::uint8_t> flipped_;
  std::size_t leaked_ = 0;
  std::size_t requests_ = 0;
};

struct ReconcileResult {
  Bitstream bits;
  CascadeStatus status = CascadeStatus::running;
  std::size_t leaked_bits = 0;
  std::size_t parity_requests = 0;
  unsigned rounds_run = 0;
  std::vector<std::size_t> corrected_positions;
  std::vector<ParityRecord> parity_log;
};

/// Full correcting-side protocol: compare hashes before round 1 and after every round,
/// stop on a match, fail after the last round.
ReconcileResult reconcile(Bitstream bits, const ParityOracle& oracle, const Digest256& reference_hash,
                          const CascadeConfig& config);

}  // namespace csikey
