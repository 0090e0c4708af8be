// SPDX-License-Identifier: Apache-2.0
#include <bit>
#include <map>
#include <optional>

#include "csikey/agreement.hpp"
#include "csikey/error.hpp"

namespace csikey {
namespace {

// One GF(2) equation over the stream: XOR of the marked positions equals rhs.
struct Row {
  std::vector<std::uint64_t> words;
  std::uint8_t rhs = 0;

  bool test(std::size_t i) const { return (words[i / 64] >> (i % 64)) & 1u; }
  void set(std::size_t i) { words[i / 64] ^= std::uint64_t{1} << (i % 64); }
  void add(const Row& o) {
    for (std::size_t w = 0; w < words.size(); ++w) words[w] ^= o.words[w];
    rhs ^= o.rhs;
  }
  std::size_t weight() const {
    std::size_t n = 0;
    for (auto w : words) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }
};

std::vector<Row> disclosed_constraints(const Transcript& observed, std::size_t length) {
  std::optional<std::uint64_t> seed;
  std::map<unsigned, std::vector<std::uint32_t>> perms;
  std::optional<ParityRequest> pending;
  std::vector<Row> rows;
  const std::size_t words = (length + 63) / 64;

  for (const auto& m : observed.messages()) {
    if (const auto* h = std::get_if<Hello>(&m.payload)) {
      if (h->stream_length != length) throw ProtocolError("observed HELLO announces a different stream length");
      seed = h->permutation_seed;
    } else if (const auto* req = std::get_if<ParityRequest>(&m.payload)) {
      pending = *req;
    } else if (const auto* resp = std::get_if<ParityResponse>(&m.payload)) {
      if (!pending || !seed) throw ProtocolError("parity response without a matching request");
      if (resp->bits.size() != pending->ranges.size()) throw ProtocolError("parity response size mismatch");
      auto it = perms.find(pending->round);
      if (it == perms.end()) it = perms.emplace(pending->round, round_permutation(*seed, pending->round, length)).first;
      for (std::size_t i = 0; i < pending->ranges.size(); ++i) {
        Row r{std::vector<std::uint64_t>(words, 0), resp->bits[i]};
        for (auto p = pending->ranges[i].start; p < pending->ranges[i].end; ++p) r.set(it->second[p]);
        rows.push_back(std::move(r));
      }
      pending.reset();
    }
  }
  return rows;
}

}  // namespace

EveResult apply_disclosed_parities(const Bitstream& estimate, const Transcript& observed,
                                   const Bitstream& alice_reference) {
  const std::size_t n = estimate.size();
  auto rows = disclosed_constraints(observed, n);

  EveResult r;
  r.raw_bits = estimate;
  r.constraints = rows.size();

  // Reduced row-echelon form.
  std::vector<std::size_t> pivot_col;
  std::size_t rank = 0;
  for (std::size_t col = 0; col < n && rank < rows.size(); ++col) {
    std::size_t sel = rank;
    while (sel < rows.size() && !rows[sel].test(col)) ++sel;
    if (sel == rows.size()) continue;
    std::swap(rows[rank], rows[sel]);
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (i != rank && rows[i].test(col)) rows[i].add(rows[rank]);
    pivot_col.push_back(col);
    ++rank;
  }
  for (std::size_t i = rank; i < rows.size(); ++i)
    if (rows[i].rhs) throw ProtocolError("disclosed parities are inconsistent");
  r.constraint_rank = rank;

  // Free positions keep Eve's own guess; each pivot is solved from its row.
  r.bits = estimate;
  for (std::size_t i = 0; i < rank; ++i) {
    const auto& row = rows[i];
    std::uint8_t v = row.rhs;
    for (std::size_t w = 0; w < row.words.size(); ++w) {
      auto word = row.words[w];
      while (word) {
        const auto bit = static_cast<std::size_t>(std::countr_zero(word));
        const auto col = w * 64 + bit;
        if (col != pivot_col[i]) v ^= estimate[col];
        word &= word - 1;
      }
    }
    r.bits.set(pivot_col[i], v != 0);
    if (row.weight() == 1) ++r.determined_bits;
  }

  if (alice_reference.size() == n && n > 0) {
    r.raw_bmr = mismatch_rate(estimate, alice_reference);
    r.bmr = mismatch_rate(r.bits, alice_reference);
  }
  return r;
}

EveResult eve_attack(const CsiTrace& eve_trace, const Transcript& observed, const ExtractionParams& params,
                     const Bitstream& alice_reference) {
  const auto own = extract(calibrate(eve_trace), params).bits;
  return apply_disclosed_parities(own, observed, alice_reference);
}

}  // namespace csikey
