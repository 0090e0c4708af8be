// SPDX-License-Identifier: Apache-2.0
#include "csikey/messages.hpp"

#include <string>

#include "csikey/bitstream.hpp"
#include "csikey/error.hpp"

namespace csikey {
namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{in_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const noexcept { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw ProtocolError("truncated frame");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void encode_payload(Writer& w, const Hello& m) {
  w.u32(static_cast<std::uint32_t>(m.permutation_seed));
  w.u32(static_cast<std::uint32_t>(m.permutation_seed >> 32));
  w.u32(m.stream_length);
  w.u32(m.n_packets);
  w.u32(m.k);
  w.u32(m.q);
  w.u32(m.m);
}
void encode_payload(Writer& w, const PacketRequest& m) { w.u32(m.packet_index); }
void encode_payload(Writer& w, const PacketAck& m) { w.u32(m.packet_index); }
void encode_payload(Writer& w, const HashAnnounce& m) {
  w.u32(static_cast<std::uint32_t>(m.hash.size()));
  w.bytes(m.hash);
}
void encode_payload(Writer& w, const ParityRequest& m) {
  w.u32(m.round);
  w.u32(static_cast<std::uint32_t>(m.ranges.size()));
  for (const auto& r : m.ranges) {
    w.u32(r.start);
    w.u32(r.end);
  }
}
void encode_payload(Writer& w, const ParityResponse& m) {
  w.u32(static_cast<std::uint32_t>(m.bits.size()));
  Bitstream b;
  for (auto v : m.bits) b.push_back(v != 0);
  w.bytes(b.pack());
}
void encode_payload(Writer&, const Success&) {}
void encode_payload(Writer&, const Failure&) {}

MessagePayload decode_payload(MessageType type, Reader& r) {
  switch (type) {
    case MessageType::hello: {
      Hello m;
      const std::uint64_t lo = r.u32();
      const std::uint64_t hi = r.u32();
      m.permutation_seed = lo | (hi << 32);
      m.stream_length = r.u32();
      m.n_packets = r.u32();
      m.k = r.u32();
      m.q = r.u32();
      m.m = r.u32();
      return m;
    }
    case MessageType::pkt_req: return PacketRequest{r.u32()};
    case MessageType::pkt_ack: return PacketAck{r.u32()};
    case MessageType::hash_announce: {
      HashAnnounce m;
      if (r.u32() != m.hash.size()) throw ProtocolError("hash announce must carry 32 bytes");
      auto b = r.bytes(m.hash.size());
      std::copy(b.begin(), b.end(), m.hash.begin());
      return m;
    }
    case MessageType::parity_req: {
      ParityRequest m;
      m.round = r.u32();
      const auto count = r.u32();
      for (std::uint32_t i = 0; i < count; ++i) {
        BlockRange br;
        br.start = r.u32();
        br.end = r.u32();
        m.ranges.push_back(br);
      }
      return m;
    }
    case MessageType::parity_resp: {
      ParityResponse m;
      const auto count = r.u32();
      const auto packed = r.bytes((std::size_t{count} + 7) / 8);
      const auto b = Bitstream::unpack(packed, count);
      m.bits.assign(b.bits().begin(), b.bits().end());
      return m;
    }
    case MessageType::success: return Success{};
    case MessageType::failure: return Failure{};
  }
  throw ProtocolError("unknown message type " + std::to_string(static_cast<std::uint32_t>(type)));
}

}  // namespace

std::string_view to_string(MessageType type) {
  switch (type) {
    case MessageType::hello: return "HELLO";
    case MessageType::pkt_req: return "PKT_REQ";
    case MessageType::pkt_ack: return "PKT_ACK";
    case MessageType::hash_announce: return "HASH_ANNOUNCE";
    case MessageType::parity_req: return "PARITY_REQ";
    case MessageType::parity_resp: return "PARITY_RESP";
    case MessageType::success: return "SUCCESS";
    case MessageType::failure: return "FAILURE";
  }
  return "UNKNOWN";
}

std::vector<std::uint8_t> encode(const PublicMessage& message) {
  Writer body;
  body.u32(static_cast<std::uint32_t>(message.type()));
  body.u32(message.session_id);
  std::visit([&](const auto& p) { encode_payload(body, p); }, message.payload);
  auto b = body.take();
  Writer frame;
  frame.u32(static_cast<std::uint32_t>(b.size()));
  frame.bytes(b);
  return frame.take();
}

PublicMessage decode(std::span<const std::uint8_t> frame) {
  Reader outer(frame);
  const auto length = outer.u32();
  Reader r(outer.bytes(length));
  if (!outer.done()) throw ProtocolError("trailing bytes after frame");
  const auto type_code = r.u32();
  if (type_code < 1 || type_code > 8) throw ProtocolError("unknown message type " + std::to_string(type_code));
  PublicMessage m;
  m.session_id = r.u32();
  m.payload = decode_payload(static_cast<MessageType>(type_code), r);
  if (!r.done()) throw ProtocolError("trailing bytes in " + std::string(to_string(m.type())) + " payload");
  return m;
}

std::vector<PublicMessage> decode_all(std::span<const std::uint8_t> frames) {
  std::vector<PublicMessage> out;
  std::size_t pos = 0;
  while (pos < frames.size()) {
    if (frames.size() - pos < 4) throw ProtocolError("truncated frame length");
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= std::uint32_t{frames[pos + i]} << (8 * i);
    if (frames.size() - pos - 4 < len) throw ProtocolError("truncated frame");
    out.push_back(decode(frames.subspan(pos, 4 + std::size_t{len})));
    pos += 4 + std::size_t{len};
  }
  return out;
}

}  // namespace csikey
