// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "csikey/hash.hpp"

namespace csikey {

/// Half-open interval [start, end) of positions in a round's permuted order.
struct BlockRange {
  std::uint32_t start = 0;
  std::uint32_t end = 0;

  std::uint32_t size() const noexcept { return end - start; }
  friend bool operator==(const BlockRange&, const BlockRange&) = default;
};

/// Session parameters announced by Alice. The permutation seed fixes every Cascade shuffle.
struct Hello {
  std::uint64_t permutation_seed = 0;
  std::uint32_t stream_length = 0;
  std::uint32_t n_packets = 0;
  std::uint32_t k = 0;
  std::uint32_t q = 0;
  std::uint32_t m = 0;
  friend bool operator==(const Hello&, const Hello&) = default;
};

struct PacketRequest {
  std::uint32_t packet_index = 0;
  friend bool operator==(const PacketRequest&, const PacketRequest&) = default;
};

struct PacketAck {
  std::uint32_t packet_index = 0;
  friend bool operator==(const PacketAck&, const PacketAck&) = default;
};

struct HashAnnounce {
  Digest256 hash{};
  friend bool operator==(const HashAnnounce&, const HashAnnounce&) = default;
};

struct ParityRequest {
  std::uint32_t round = 0;
  std::vector<BlockRange> ranges;
  friend bool operator==(const ParityRequest&, const ParityRequest&) = default;
};

struct ParityResponse {
  /// One 0/1 entry per requested range, in request order.
  std::vector<std::uint8_t> bits;
  friend bool operator==(const ParityResponse&, const ParityResponse&) = default;
};

struct Success {
  friend bool operator==(const Success&, const Success&) = default;
};

struct Failure {
  friend bool operator==(const Failure&, const Failure&) = default;
};

/// Wire type codes; the variant index plus one.
enum class MessageType : std::uint32_t {
  hello = 1,
  pkt_req = 2,
  pkt_ack = 3,
  hash_announce = 4,
  parity_req = 5,
  parity_resp = 6,
  success = 7,
  failure = 8,
};

using MessagePayload =
    std::variant<Hello, PacketRequest, PacketAck, HashAnnounce, ParityRequest, ParityResponse, Success, Failure>;

struct PublicMessage {
  std::uint32_t session_id = 0;
  MessagePayload payload;

  MessageType type() const noexcept { return static_cast<MessageType>(payload.index() + 1); }
  friend bool operator==(const PublicMessage&, const PublicMessage&) = default;
};

std::string_view to_string(MessageType type);

/// Frame layout (all integers u32 little-endian):
///   length | type | session_id | payload
/// where length counts the bytes after itself. Payloads:
///   HELLO          seed_lo seed_hi stream_length n_packets k q m
///   PKT_REQ/ACK    packet_index
///   HASH_ANNOUNCE  byte_count bytes...
///   PARITY_REQ     round count {start end}*count
///   PARITY_RESP    bit_count packed-bytes (MSB first, ceil(bit_count/8))
///   SUCCESS/FAILURE  (empty)
std::vector<std::uint8_t> encode(const PublicMessage& message);

/// Decodes exactly one frame; throws ProtocolError on truncation, trailing bytes or unknown type.
PublicMessage decode(std::span<const std::uint8_t> frame);

/// Parses a concatenation of frames.
std::vector<PublicMessage> decode_all(std::span<const std::uint8_t> frames);

}  // namespace csikey
