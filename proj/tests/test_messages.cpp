// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <thread>
#include <vector>

#include "csikey/error.hpp"
#include "csikey/link.hpp"
#include "csikey/messages.hpp"

using namespace csikey;

namespace {

std::vector<PublicMessage> one_of_each() {
  Digest256 h{};
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = static_cast<std::uint8_t>(i * 7);
  return {
      {9, Hello{0x1122334455667788ull, 2400, 300, 4, 2, 4}},
      {9, PacketRequest{17}},
      {9, PacketAck{17}},
      {9, HashAnnounce{h}},
      {9, ParityRequest{3, {{0, 8}, {8, 16}, {2392, 2400}}}},
      {9, ParityResponse{{1, 0, 1, 1, 0, 0, 0, 0, 1}}},
      {9, Success{}},
      {9, Failure{}},
  };
}

}  // namespace

TEST_CASE("every message type round trips") {
  for (const auto& m : one_of_each()) CHECK(decode(encode(m)) == m);
  std::vector<std::uint8_t> all;
  for (const auto& m : one_of_each()) {
    auto f = encode(m);
    all.insert(all.end(), f.begin(), f.end());
  }
  CHECK(decode_all(all) == one_of_each());
}

TEST_CASE("frame layout is little-endian and length-prefixed") {
  auto f = encode({0x01020304, PacketRequest{0x0a0b0c0d}});
  CHECK(f == std::vector<std::uint8_t>{12, 0, 0, 0, 2, 0, 0, 0, 4, 3, 2, 1, 0x0d, 0x0c, 0x0b, 0x0a});
  auto r = encode({1, ParityResponse{{1, 0, 1, 1, 0, 0, 0, 0, 1}}});
  // length, type, session, bit count, two packed bytes
  REQUIRE(r.size() == 4 + 4 + 4 + 4 + 2);
  CHECK(r[16] == 0b10110000);
  CHECK(r[17] == 0b10000000);
}

TEST_CASE("malformed frames are protocol errors") {
  auto f = encode({1, PacketAck{3}});
  auto truncated = f;
  truncated.pop_back();
  CHECK_THROWS_AS(decode(truncated), ProtocolError);
  auto trailing = f;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode(trailing), ProtocolError);
  auto unknown = f;
  unknown[4] = 99;
  CHECK_THROWS_AS(decode(unknown), ProtocolError);
}

TEST_CASE("transcript counts parity bits from the frames") {
  Transcript t;
  t.record(Direction::bob_to_alice, encode({1, ParityRequest{1, {{0, 4}, {4, 8}}}}));
  t.record(Direction::alice_to_bob, encode({1, ParityResponse{{1, 0}}}));
  t.record(Direction::alice_to_bob, encode({1, ParityResponse{{1, 0, 1}}}));
  CHECK(t.parity_bits_observed() == 5);
  CHECK(t.count(MessageType::parity_resp) == 2);
  CHECK(t.count(MessageType::hello) == 0);

  auto path = std::filesystem::temp_directory_path() / "csikey_transcript_test.bin";
  t.save(path);
  auto back = Transcript::load(path);
  CHECK(back.bytes() == t.bytes());
  CHECK(back.entries().front().direction == Direction::bob_to_alice);
  std::filesystem::remove(path);
}

TEST_CASE("in-process duplex delivers in order and records both directions") {
  Transcript t;
  auto d = make_in_process_duplex(&t);
  d.alice->send({1, PacketRequest{0}});
  d.alice->send({1, PacketRequest{1}});
  d.bob->send({1, PacketAck{0}});
  CHECK(d.bob->receive() == PublicMessage{1, PacketRequest{0}});
  CHECK(d.bob->receive() == PublicMessage{1, PacketRequest{1}});
  CHECK(d.alice->receive() == PublicMessage{1, PacketAck{0}});
  CHECK(t.size() == 3);
  CHECK_THROWS_AS(d.alice->receive(), ProtocolError);
}

TEST_CASE("idle hook pumps the peer") {
  auto d = make_in_process_duplex(nullptr);
  int pumped = 0;
  set_idle_hook(*d.bob, [&] {
    ++pumped;
    d.alice->send({1, Success{}});
  });
  CHECK(d.bob->receive().type() == MessageType::success);
  CHECK(pumped == 1);
}

TEST_CASE("socket duplex carries frames between threads") {
  Transcript t;
  auto d = make_socket_duplex(&t);
  std::thread peer([&] {
    auto m = d.alice->receive();
    d.alice->send({m.session_id, PacketAck{std::get<PacketRequest>(m.payload).packet_index}});
  });
  d.bob->send({4, PacketRequest{8}});
  CHECK(d.bob->receive() == PublicMessage{4, PacketAck{8}});
  peer.join();
  CHECK(t.size() == 2);
}

TEST_CASE("a closed socket peer surfaces as a protocol error") {
  auto d = make_socket_duplex(nullptr);
  d.alice.reset();
  CHECK_THROWS_AS(d.bob->receive(), ProtocolError);
}
