// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>

namespace csikey {

struct EntropyReport {
  double min_entropy = 0.0;
  /// log2 of the alphabet size (k*q for composite symbols).
  double max_entropy = 0.0;
  double ratio = 0.0;
  std::size_t samples = 0;
  std::size_t max_count = 0;
  std::map<std::uint64_t, std::size_t> histogram;
};

/// Plug-in estimate H = -log2(max_i p_i) over symbols drawn from a 2^alphabet_bits alphabet.
/// Throws EntropyError on an empty stream or a symbol outside the alphabet.
EntropyReport min_entropy(std::span<const std::uint64_t> symbols, unsigned alphabet_bits);

struct SecurityAccounting {
  std::size_t raw_bits = 0;
  std::size_t leaked_bits = 0;
  std::size_t n_packets = 0;
  /// Secure bits left after leakage and min-entropy discounting.
  double secure_bits = 0.0;
  /// Secure bits per packet.
  double sbgr = 0.0;
};

/// B = (raw - leaked) * H / (k*q), SBGR = B / N.
/// Throws AccountingError when leaked_bits > raw_bits or N == 0.
SecurityAccounting security_accounting(std::size_t raw_bits, std::size_t leaked_bits, std::size_t n_packets,
                                       double min_entropy_bits, unsigned bits_per_packet);

inline SecurityAccounting security_accounting(std::size_t raw_bits, std::size_t leaked_bits, std::size_t n_packets,
                                              const EntropyReport& report, std::size_t k, unsigned q) {
  return security_accounting(raw_bits, leaked_bits, n_packets, report.min_entropy, static_cast<unsigned>(k * q));
}

}  // namespace csikey
