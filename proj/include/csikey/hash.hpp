// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "csikey/bitstream.hpp"

namespace csikey {

using Digest256 = std::array<std::uint8_t, 32>;

Digest256 sha256(std::span<const std::uint8_t> data);

/// SHA-256 over the MSB-first packed form of the stream.
Digest256 hash_bitstream(const Bitstream& bits);

std::string to_hex(std::span<const std::uint8_t> bytes);

}  // namespace csikey
