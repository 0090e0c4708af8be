// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "csikey/bitstream.hpp"
#include "csikey/trace.hpp"

namespace csikey {

/// Protocol tuple agreed by both endpoints before extraction.
struct ExtractionParams {
  std::size_t n_packets = 300;
  std::size_t k = 4;
  unsigned q = 2;
  /// Majority margin; each main sub-carrier votes over 2m+1 neighbours.
  unsigned m = 4;
  std::vector<int> main_subcarriers = {-24, -8, 8, 24};

  /// Checks q, k, m, pairwise spacing (2m < d) and, when `available` is non-empty,
  /// that every window member l-m..l+m exists. Throws ConfigError.
  void validate(std::span<const int> available = {}) const;

  /// Defaults for an HT40 trace (k = 8).
  static ExtractionParams ht40();
};

/// Gray-coded symbol in [0, 2^q).
using Symbol = std::uint16_t;

/// Sorted thresholds QL_1..QL_{2^q - 1}.
using QuantizerLevels = std::vector<double>;

inline constexpr std::uint32_t gray_encode(std::uint32_t b) noexcept { return b ^ (b >> 1); }
std::uint32_t gray_decode(std::uint32_t g) noexcept;

/// Linear-interpolation percentile of the samples at fraction p in [0, 1].
double percentile(std::vector<double> samples, double p);

/// Equal-frequency thresholds from one device's own samples.
/// Throws ExtractionError for fewer than 2^q samples or NaN input.
QuantizerLevels compute_levels(std::span<const double> samples, unsigned q);

/// Bin index = number of thresholds <= value (ties go to the higher bin).
std::uint32_t bin_index(double value, const QuantizerLevels& levels) noexcept;

/// gray(bin_index(value)).
Symbol quantize(double value, const QuantizerLevels& levels) noexcept;

/// Plurality vote. Ties including the center symbol keep the center; other ties take the smallest symbol.
/// Throws ExtractionError unless window.size() == 2m+1 for some m (odd, non-empty).
Symbol majority_vote(std::span<const Symbol> window, Symbol center);

/// N x k Gray symbols, row-major (packet, main sub-carrier).
struct SymbolStream {
  std::size_t n_packets = 0;
  std::size_t k = 0;
  unsigned q = 0;
  std::vector<Symbol> symbols;

  Symbol at(std::size_t packet, std::size_t sc) const { return symbols[packet * k + sc]; }
  /// k*q-bit integer formed by concatenating the packet's k symbols, first sub-carrier most significant.
  std::uint64_t composite(std::size_t packet) const;
  std::vector<std::uint64_t> composites() const;
};

struct Extraction {
  SymbolStream symbols;
  Bitstream bits;
};

/// Quantize every window member with its own levels, vote, and emit Gray bits
/// packet-major, sub-carrier-minor, MSB first. |bits| == N*k*q.
Extraction extract(const CalibratedTrace& trace, const ExtractionParams& params);

/// Inverse of the bit layout used by extract().
SymbolStream symbols_from_bits(const Bitstream& bits, std::size_t k, unsigned q);

struct SelectionOptions {
  std::size_t k = 4;
  unsigned q = 2;
  /// Minimum index distance between chosen sub-carriers.
  int min_spacing = 9;
  /// Candidates must keep their whole l-m..l+m window inside the trace.
  unsigned window_margin = 0;
  /// Packets used for scoring; 0 means the whole trace.
  std::size_t n_packets = 0;
  /// Upper bound on admissible subsets scored before giving up.
  std::uint64_t budget = 2'000'000;
};

struct SelectionResult {
  std::vector<int> subcarriers;
  double min_entropy = 0.0;
  std::uint64_t subsets_scored = 0;
};

/// Exhaustive search for the admissible subset with the highest min-entropy of the composite
/// k*q-bit symbol; ties go to the lexicographically smallest index list.
/// Throws SelectionError when no subset qualifies or the budget would be exceeded.
SelectionResult select_subcarriers(const CalibratedTrace& training, const SelectionOptions& options);

/// Number of subsets select_subcarriers would score for these options.
std::uint64_t count_admissible_subsets(std::span<const int> candidates, std::size_t k, int min_spacing);

/// Spread k main sub-carriers over the trace so each window of margin m fits and the minimum
/// pairwise spacing is as large as possible. Throws ConfigError when impossible.
std::vector<int> spread_main_subcarriers(std::span<const int> available, std::size_t k, unsigned m);

}  // namespace csikey
