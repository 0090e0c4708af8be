// SPDX-License-Identifier: Apache-2.0
#include "csikey/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "csikey/error.hpp"
#include "csikey/seed.hpp"

namespace csikey {
namespace {

constexpr std::uint64_t range_key(BlockRange r) noexcept { return (std::uint64_t{r.start} << 32) | r.end; }

// Unbiased draw in [0, bound) that does not depend on the standard library's distribution code.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  while (true) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % bound;
  }
}

}  // namespace

void CascadeConfig::validate() const {
  if (rounds < 1) throw ConfigError("cascade: rounds must be >= 1");
  if (!(qber_estimate > 0.0 && qber_estimate < 0.5)) throw ConfigError("cascade: qber_estimate must be in (0, 0.5)");
  if (first_block_size && *first_block_size < 1) throw ConfigError("cascade: first_block_size must be >= 1");
}

std::vector<std::size_t> plan_rounds(const CascadeConfig& config, std::size_t stream_length) {
  config.validate();
  if (stream_length < 2) throw ConfigError("cascade: stream length must be >= 2");
  const std::size_t n = stream_length;
  auto clamp = [n](std::size_t v) { return std::clamp<std::size_t>(v, 2, n); };
  std::vector<std::size_t> sizes;
  sizes.reserve(config.rounds);
  const std::size_t first =
      config.first_block_size ? *config.first_block_size : static_cast<std::size_t>(std::ceil(0.73 / config.qber_estimate));
  for (unsigned r = 1; r <= config.rounds; ++r) {
    if (r == 1)
      sizes.push_back(config.first_block_size ? std::min(first, n) : clamp(first));
    else if (r <= 4)
      sizes.push_back(std::min(sizes.back() * 2, n));
    else
      sizes.push_back(clamp((n + 1) / 2));
  }
  return sizes;
}

std::vector<std::uint32_t> round_permutation(std::uint64_t seed, unsigned round, std::size_t n) {
  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  if (round <= 1 || n < 2) return perm;
  std::mt19937_64 rng(mix_seed(seed, round));
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[bounded(rng, i + 1)]);
  return perm;
}

std::string_view to_string(CascadeStatus status) {
  switch (status) {
    case CascadeStatus::running: return "running";
    case CascadeStatus::success: return "success";
    case CascadeStatus::failure: return "failure";
  }
  return "unknown";
}

BlockRange RoundLayout::block(std::size_t b) const {
  const auto start = b * block_size;
  const auto end = std::min(start + block_size, perm.size());
  return {static_cast<std::uint32_t>(start), static_cast<std::uint32_t>(end)};
}

RoundLayout make_round_layout(std::uint64_t seed, unsigned round, std::size_t n, std::size_t block_size) {
  if (block_size < 1) throw ConfigError("cascade: block size must be >= 1");
  RoundLayout l;
  l.round = round;
  l.block_size = block_size;
  l.perm = round_permutation(seed, round, n);
  l.inverse.resize(n);
  for (std::size_t i = 0; i < n; ++i) l.inverse[l.perm[i]] = static_cast<std::uint32_t>(i);
  return l;
}

std::uint8_t range_parity(const Bitstream& bits, std::span<const std::uint32_t> perm, BlockRange range) {
  std::uint8_t p = 0;
  for (auto i = range.start; i < range.end; ++i) p ^= bits[perm[i]];
  return p;
}

// ---- reference side ----

CascadeReference::CascadeReference(Bitstream bits, std::uint64_t permutation_seed)
    : bits_(std::move(bits)), seed_(permutation_seed) {}

const std::vector<std::uint32_t>& CascadeReference::perm(unsigned round) {
  auto it = perms_.find(round);
  if (it == perms_.end()) it = perms_.emplace(round, round_permutation(seed_, round, bits_.size())).first;
  return it->second;
}

std::vector<std::uint8_t> CascadeReference::answer_parities(unsigned round, std::span<const BlockRange> ranges) {
  if (round == 0) throw ProtocolError("parity request for round 0");
  for (const auto& r : ranges)
    if (r.start >= r.end || r.end > bits_.size())
      throw ProtocolError("parity request for unknown block [" + std::to_string(r.start) + ", " +
                          std::to_string(r.end) + ")");
  const auto& p = perm(round);
  std::vector<std::uint8_t> out;
  out.reserve(ranges.size());
  for (const auto& r : ranges) {
    out.push_back(range_parity(bits_, p, r));
    log_.push_back({round, r, out.back()});
  }
  leaked_ += out.size();
  return out;
}

// ---- correcting side ----

CascadeSession::CascadeSession(Bitstream bits, CascadeConfig config)
    : bits_(std::move(bits)), config_(std::move(config)), schedule_(plan_rounds(config_, bits_.size())),
      flipped_(bits_.size(), 0) {}

std::optional<std::uint8_t> CascadeSession::known_parity(unsigned round, BlockRange range) const {
  const auto& cache = known_.at(round - 1);
  if (auto it = cache.find(range_key(range)); it != cache.end()) return it->second;
  return std::nullopt;
}

void CascadeSession::remember(unsigned round, BlockRange range, std::uint8_t parity) {
  auto [it, inserted] = known_.at(round - 1).emplace(range_key(range), parity);
  if (!inserted && it->second != parity)
    throw ProtocolError("inconsistent parity for round " + std::to_string(round) + " range [" +
                        std::to_string(range.start) + ", " + std::to_string(range.end) + ")");
}

std::vector<std::uint8_t> CascadeSession::ask(const ParityOracle& oracle, unsigned round,
                                              std::span<const BlockRange> ranges) {
  if (ranges.empty()) return {};
  auto reply = oracle(round, ranges);
  ++requests_;
  if (reply.size() != ranges.size())
    throw ProtocolError("parity reply has " + std::to_string(reply.size()) + " bits for " +
                        std::to_string(ranges.size()) + " ranges");
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    if (reply[i] > 1) throw ProtocolError("parity reply bit is not 0 or 1");
    remember(round, ranges[i], reply[i]);
    log_.push_back({round, ranges[i], reply[i]});
  }
  leaked_ += reply.size();
  return reply;
}

std::uint8_t CascadeSession::mismatch(unsigned round, BlockRange range) const {
  const auto alice = known_parity(round, range);
  if (!alice) throw ProtocolError("no reference parity for the range");
  return range_parity(bits_, rounds_.at(round - 1).layout.perm, range) ^ *alice;
}

void CascadeSession::flip(std::size_t position) {
  // A consistent reference only ever leads to true errors, so no position is corrected twice.
  if (flipped_[position])
    throw ProtocolError("reference parities are inconsistent: position " + std::to_string(position) +
                        " would be corrected twice");
  flipped_[position] = 1;
  bits_.flip(position);
  corrected_.push_back(position);
  for (auto& r : rounds_) r.bob_parity[r.layout.block_of(position)] ^= 1;
}

std::vector<std::pair<unsigned, std::size_t>> CascadeSession::odd_blocks() const {
  std::vector<std::pair<unsigned, std::size_t>> out;
  for (std::size_t r = 0; r < rounds_.size(); ++r)
    for (std::size_t b = 0; b < rounds_[r].bob_parity.size(); ++b)
      if (rounds_[r].bob_parity[b] != rounds_[r].alice_parity[b]) out.emplace_back(static_cast<unsigned>(r + 1), b);
  return out;
}

bool CascadeSession::all_blocks_even() const { return odd_blocks().empty(); }

std::vector<std::size_t> CascadeSession::start_round(const ParityOracle& oracle) {
  if (rounds_.size() >= schedule_.size()) throw ProtocolError("all cascade rounds already started");
  const auto round = static_cast<unsigned>(rounds_.size() + 1);
  RoundState st;
  st.layout = make_round_layout(config_.permutation_seed, round, bits_.size(), schedule_[round - 1]);
  const auto blocks = st.layout.block_count();
  std::vector<BlockRange> ranges;
  ranges.reserve(blocks);
  for (std::size_t b = 0; b < blocks; ++b) ranges.push_back(st.layout.block(b));
  st.bob_parity.reserve(blocks);
  for (const auto& r : ranges) st.bob_parity.push_back(range_parity(bits_, st.layout.perm, r));
  rounds_.push_back(std::move(st));
  known_.emplace_back();

  const auto reply = ask(oracle, round, ranges);
  rounds_.back().alice_parity = reply;
  std::vector<std::size_t> odd;
  for (std::size_t b = 0; b < blocks; ++b)
    if (rounds_.back().alice_parity[b] != rounds_.back().bob_parity[b]) odd.push_back(b);
  return odd;
}

std::size_t CascadeSession::binary_search_error(unsigned round, std::size_t block, const ParityOracle& oracle) {
  if (round < 1 || round > rounds_.size()) throw ProtocolError("binary search in a round that has not started");
  const auto& layout = rounds_[round - 1].layout;
  if (block >= layout.block_count()) throw ProtocolError("binary search in an unknown block");
  BlockRange range = layout.block(block);
  if (!mismatch(round, range)) throw ProtocolError("binary search on a block whose parities agree");
  while (range.size() > 1) {
    const auto mid = range.start + range.size() / 2;
    const BlockRange left{range.start, mid};
    const BlockRange right{mid, range.end};
    if (!known_parity(round, left)) ask(oracle, round, std::span(&left, 1));
    const auto parent = *known_parity(round, range);
    if (!known_parity(round, right)) remember(round, right, parent ^ *known_parity(round, left));
    range = mismatch(round, left) ? left : right;
    if (!mismatch(round, range)) throw ProtocolError("reference parities imply no error in a mismatched block");
  }
  const std::size_t position = layout.perm[range.start];
  flip(position);
  return position;
}

std::vector<std::size_t> CascadeSession::cascade_back(std::size_t position, const ParityOracle& oracle) {
  (void)position;
  std::vector<std::size_t> extra;
  for (auto odd = odd_blocks(); !odd.empty(); odd = odd_blocks()) {
    const auto [round, block] = odd.front();
    extra.push_back(binary_search_error(round, block, oracle));
  }
  return extra;
}

std::vector<std::size_t> CascadeSession::correct_all(const ParityOracle& oracle) {
  std::vector<std::size_t> fixed;
  std::vector<Search> active;
  std::set<std::pair<unsigned, std::size_t>> searching;

  auto refill = [&] {
    for (const auto& [round, block] : odd_blocks())
      if (searching.emplace(round, block).second) active.push_back({round, block, rounds_[round - 1].layout.block(block)});
  };

  refill();
  while (!active.empty()) {
    // Advance each search as far as cached parities allow; collect the queries it still needs.
    std::vector<std::vector<BlockRange>> queries(rounds_.size());
    std::vector<Search> waiting;
    std::vector<std::size_t> to_flip;
    for (auto& s : active) {
      bool live = true;
      while (true) {
        if (!mismatch(s.round, s.range)) {
          live = false;
          break;
        }
        if (s.range.size() == 1) {
          to_flip.push_back(rounds_[s.round - 1].layout.perm[s.range.start]);
          live = false;
          break;
        }
        const auto mid = s.range.start + s.range.size() / 2;
        const BlockRange left{s.range.start, mid};
        const BlockRange right{mid, s.range.end};
        const auto left_known = known_parity(s.round, left);
        if (!left_known) {
          queries[s.round - 1].push_back(left);
          break;
        }
        if (!known_parity(s.round, right)) remember(s.round, right, *known_parity(s.round, s.range) ^ *left_known);
        s.range = mismatch(s.round, left) ? left : right;
      }
      if (live)
        waiting.push_back(s);
      else
        searching.erase({s.round, s.root});
    }

    for (std::size_t r = 0; r < queries.size(); ++r) {
      auto& q = queries[r];
      std::sort(q.begin(), q.end(), [](BlockRange a, BlockRange b) { return range_key(a) < range_key(b); });
      q.erase(std::unique(q.begin(), q.end()), q.end());
      ask(oracle, static_cast<unsigned>(r + 1), q);
    }

    std::sort(to_flip.begin(), to_flip.end());
    to_flip.erase(std::unique(to_flip.begin(), to_flip.end()), to_flip.end());
    for (auto pos : to_flip) {
      flip(pos);
      fixed.push_back(pos);
    }

    active = std::move(waiting);
    refill();
  }
  return fixed;
}

ReconcileResult reconcile(Bitstream bits, const ParityOracle& oracle, const Digest256& reference_hash,
                          const CascadeConfig& config) {
  CascadeSession session(std::move(bits), config);
  ReconcileResult result;
  result.status = CascadeStatus::failure;
  if (hash_bitstream(session.bits()) == reference_hash) {
    result.status = CascadeStatus::success;
  } else {
    for (unsigned r = 0; r < session.schedule().size(); ++r) {
      session.start_round(oracle);
      session.correct_all(oracle);
      if (hash_bitstream(session.bits()) == reference_hash) {
        result.status = CascadeStatus::success;
        break;
      }
    }
  }
  result.bits = session.bits();
  result.leaked_bits = session.leaked_bits();
  result.parity_requests = session.requests_sent();
  result.rounds_run = session.rounds_started();
  result.corrected_positions = session.corrected_positions();
  result.parity_log = session.parity_log();
  return result;
}

}  // namespace csikey
