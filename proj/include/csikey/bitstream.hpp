// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace csikey {

/// Ordered bit sequence, one byte per bit (0 or 1).
class Bitstream {
 public:
  Bitstream() = default;
  explicit Bitstream(std::size_t n) : bits_(n, 0) {}
  explicit Bitstream(std::vector<std::uint8_t> bits);

  std::size_t size() const noexcept { return bits_.size(); }
  bool empty() const noexcept { return bits_.empty(); }

  std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
  void set(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }
  void flip(std::size_t i) { bits_[i] ^= 1; }
  void push_back(bool v) { bits_.push_back(v ? 1 : 0); }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  /// MSB-first packing; the final byte is zero-padded.
  std::vector<std::uint8_t> pack() const;
  static Bitstream unpack(std::span<const std::uint8_t> bytes, std::size_t nbits);

  /// "0101..." rendering, mostly for diagnostics and tests.
  std::string to_string() const;
  static Bitstream from_string(const std::string& s);

  friend bool operator==(const Bitstream&, const Bitstream&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

std::size_t hamming_distance(const Bitstream& a, const Bitstream& b);

/// Fraction of differing bits; both streams must have the same non-zero length.
double mismatch_rate(const Bitstream& a, const Bitstream& b);

}  // namespace csikey
