// SPDX-License-Identifier: Apache-2.0
#include "csikey/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "csikey/error.hpp"

namespace csikey {

EntropyReport min_entropy(std::span<const std::uint64_t> symbols, unsigned alphabet_bits) {
  if (symbols.empty()) throw EntropyError("min-entropy of an empty symbol stream");
  if (alphabet_bits > 64) throw EntropyError("alphabet wider than 64 bits");
  EntropyReport r;
  for (auto s : symbols) {
    if (alphabet_bits < 64 && (s >> alphabet_bits) != 0)
      throw EntropyError("symbol " + std::to_string(s) + " outside a " + std::to_string(alphabet_bits) + "-bit alphabet");
    ++r.histogram[s];
  }
  r.samples = symbols.size();
  for (const auto& [sym, c] : r.histogram) r.max_count = std::max(r.max_count, c);
  r.min_entropy =
      r.max_count == r.samples ? 0.0 : -std::log2(static_cast<double>(r.max_count) / static_cast<double>(r.samples));
  r.max_entropy = static_cast<double>(alphabet_bits);
  r.ratio = alphabet_bits == 0 ? 0.0 : r.min_entropy / r.max_entropy;
  return r;
}

SecurityAccounting security_accounting(std::size_t raw_bits, std::size_t leaked_bits, std::size_t n_packets,
                                       double min_entropy_bits, unsigned bits_per_packet) {
  if (leaked_bits > raw_bits)
    throw AccountingError("leaked bits (" + std::to_string(leaked_bits) + ") exceed raw bits (" +
                          std::to_string(raw_bits) + ")");
  if (n_packets == 0) throw AccountingError("N must be > 0");
  if (bits_per_packet == 0) throw AccountingError("k*q must be > 0");
  if (!(min_entropy_bits >= 0.0) || min_entropy_bits > bits_per_packet)
    throw AccountingError("min-entropy must lie in [0, k*q]");
  SecurityAccounting a;
  a.raw_bits = raw_bits;
  a.leaked_bits = leaked_bits;
  a.n_packets = n_packets;
  a.secure_bits = static_cast<double>(raw_bits - leaked_bits) * min_entropy_bits / bits_per_packet;
  a.sbgr = a.secure_bits / static_cast<double>(n_packets);
  return a;
}

}  // namespace csikey
