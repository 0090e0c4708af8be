// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "csikey/messages.hpp"

namespace csikey {

enum class Direction : std::uint8_t { alice_to_bob = 0, bob_to_alice = 1 };

struct TranscriptEntry {
  Direction direction = Direction::alice_to_bob;
  std::vector<std::uint8_t> frame;
};

/// Everything sent on the public channel, in send order. This is Eve's view.
class Transcript {
 public:
  Transcript() = default;
  Transcript(const Transcript& other);
  Transcript& operator=(const Transcript& other);

  void record(Direction direction, std::vector<std::uint8_t> frame);

  std::vector<TranscriptEntry> entries() const;
  std::size_t size() const;
  std::vector<PublicMessage> messages() const;
  /// Frames concatenated; byte-comparable across transports.
  std::vector<std::uint8_t> bytes() const;

  /// Parity bits carried by PARITY_RESP frames, counted independently of Cascade.
  std::size_t parity_bits_observed() const;
  std::size_t count(MessageType type) const;

  /// One byte of direction before each frame.
  void save(const std::filesystem::path& path) const;
  static Transcript load(const std::filesystem::path& path);

 private:
  mutable std::mutex mutex_;
  std::vector<TranscriptEntry> entries_;
};

/// One side of the reliable, ordered public channel.
class Endpoint {
 public:
  virtual ~Endpoint() = default;
  virtual void send(const PublicMessage& message) = 0;
  /// Blocks (or pumps the peer) until a message arrives; throws ProtocolError if none can.
  virtual PublicMessage receive() = 0;
};

enum class Transport { in_process, socket };

struct Duplex {
  std::unique_ptr<Endpoint> alice;
  std::unique_ptr<Endpoint> bob;
};

/// Two in-memory queues. `idle_hook` on an endpoint runs when receive() finds its queue empty,
/// which is how a single thread interleaves both parties deterministically.
Duplex make_in_process_duplex(Transcript* tap);
void set_idle_hook(Endpoint& endpoint, std::function<void()> hook);

/// AF_UNIX stream socket pair carrying length-prefixed frames; needs one thread per party.
Duplex make_socket_duplex(Transcript* tap);

}  // namespace csikey
