// SPDX-License-Identifier: Apache-2.0
#include "csikey/bitstream.hpp"

#include <stdexcept>

namespace csikey {

Bitstream::Bitstream(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::vector<std::uint8_t> Bitstream::pack() const {
  std::vector<std::uint8_t> out((bits_.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  return out;
}

Bitstream Bitstream::unpack(std::span<const std::uint8_t> bytes, std::size_t nbits) {
  if (bytes.size() * 8 < nbits) throw std::invalid_argument("unpack: not enough bytes");
  Bitstream out(nbits);
  for (std::size_t i = 0; i < nbits; ++i) out.bits_[i] = (bytes[i / 8] >> (7 - i % 8)) & 1u;
  return out;
}

std::string Bitstream::to_string() const {
  std::string s(bits_.size(), '0');
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i]) s[i] = '1';
  return s;
}

Bitstream Bitstream::from_string(const std::string& s) {
  Bitstream out;
  out.bits_.reserve(s.size());
  for (char c : s) {
    if (c != '0' && c != '1') throw std::invalid_argument("bit string may only contain 0 and 1");
    out.bits_.push_back(c == '1');
  }
  return out;
}

std::size_t hamming_distance(const Bitstream& a, const Bitstream& b) {
  if (a.size() != b.size()) throw std::invalid_argument("hamming_distance: length mismatch");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

double mismatch_rate(const Bitstream& a, const Bitstream& b) {
  if (a.empty()) throw std::invalid_argument("mismatch_rate: empty streams");
  return static_cast<double>(hamming_distance(a, b)) / static_cast<double>(a.size());
}

}  // namespace csikey
