// SPDX-License-Identifier: Apache-2.0
#include "csikey/link.hpp"

#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <deque>
#include <fstream>
#include <string>

#include "csikey/error.hpp"

namespace csikey {

Transcript::Transcript(const Transcript& other) {
  std::lock_guard lock(other.mutex_);
  entries_ = other.entries_;
}

Transcript& Transcript::operator=(const Transcript& other) {
  if (this != &other) {
    std::scoped_lock lock(mutex_, other.mutex_);
    entries_ = other.entries_;
  }
  return *this;
}

void Transcript::record(Direction direction, std::vector<std::uint8_t> frame) {
  std::lock_guard lock(mutex_);
  entries_.push_back({direction, std::move(frame)});
}

std::vector<TranscriptEntry> Transcript::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::size_t Transcript::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::vector<PublicMessage> Transcript::messages() const {
  std::vector<PublicMessage> out;
  for (const auto& e : entries()) out.push_back(decode(e.frame));
  return out;
}

std::vector<std::uint8_t> Transcript::bytes() const {
  std::vector<std::uint8_t> out;
  for (const auto& e : entries()) out.insert(out.end(), e.frame.begin(), e.frame.end());
  return out;
}

std::size_t Transcript::parity_bits_observed() const {
  std::size_t n = 0;
  for (const auto& m : messages())
    if (const auto* r = std::get_if<ParityResponse>(&m.payload)) n += r->bits.size();
  return n;
}

std::size_t Transcript::count(MessageType type) const {
  std::size_t n = 0;
  for (const auto& m : messages())
    if (m.type() == type) ++n;
  return n;
}

void Transcript::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  for (const auto& e : entries()) {
    out.put(static_cast<char>(e.direction));
    out.write(reinterpret_cast<const char*>(e.frame.data()), static_cast<std::streamsize>(e.frame.size()));
  }
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

Transcript Transcript::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  Transcript t;
  while (true) {
    const int dir = in.get();
    if (dir == std::char_traits<char>::eof()) break;
    if (dir > 1) throw ProtocolError("bad direction byte in transcript");
    std::vector<std::uint8_t> frame(4);
    if (!in.read(reinterpret_cast<char*>(frame.data()), 4)) throw ProtocolError("truncated transcript");
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= std::uint32_t{frame[i]} << (8 * i);
    frame.resize(4 + std::size_t{len});
    if (!in.read(reinterpret_cast<char*>(frame.data() + 4), len)) throw ProtocolError("truncated transcript");
    decode(frame);
    t.record(static_cast<Direction>(dir), std::move(frame));
  }
  return t;
}

namespace {

struct SharedQueues {
  std::deque<std::vector<std::uint8_t>> to_alice;
  std::deque<std::vector<std::uint8_t>> to_bob;
  std::size_t sends = 0;
};

class InProcessEndpoint final : public Endpoint {
 public:
  InProcessEndpoint(std::shared_ptr<SharedQueues> q, Direction out, Transcript* tap)
      : q_(std::move(q)), out_(out), tap_(tap) {}

  void send(const PublicMessage& message) override {
    auto frame = encode(message);
    if (tap_) tap_->record(out_, frame);
    (out_ == Direction::alice_to_bob ? q_->to_bob : q_->to_alice).push_back(std::move(frame));
    ++q_->sends;
  }

  PublicMessage receive() override {
    auto& inbox = out_ == Direction::alice_to_bob ? q_->to_alice : q_->to_bob;
    while (inbox.empty()) {
      if (!hook_) throw ProtocolError("receive on an empty channel with no peer to run");
      const auto before = q_->sends;
      hook_();
      if (inbox.empty() && q_->sends == before) throw ProtocolError("peer made no progress; channel deadlocked");
    }
    auto frame = std::move(inbox.front());
    inbox.pop_front();
    return decode(frame);
  }

  void set_hook(std::function<void()> hook) { hook_ = std::move(hook); }

 private:
  std::shared_ptr<SharedQueues> q_;
  Direction out_;
  Transcript* tap_;
  std::function<void()> hook_;
};

class SocketEndpoint final : public Endpoint {
 public:
  SocketEndpoint(int fd, Direction out, Transcript* tap) : fd_(fd), out_(out), tap_(tap) {}
  ~SocketEndpoint() override {
    if (fd_ >= 0) ::close(fd_);
  }
  SocketEndpoint(const SocketEndpoint&) = delete;
  SocketEndpoint& operator=(const SocketEndpoint&) = delete;

  void send(const PublicMessage& message) override {
    const auto frame = encode(message);
    if (tap_) tap_->record(out_, frame);
    std::size_t done = 0;
    while (done < frame.size()) {
      const auto n = ::send(fd_, frame.data() + done, frame.size() - done, MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw ProtocolError(std::string("socket send failed: ") + std::strerror(errno));
      done += static_cast<std::size_t>(n);
    }
  }

  PublicMessage receive() override {
    std::vector<std::uint8_t> frame(4);
    read_exact(frame.data(), 4);
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= std::uint32_t{frame[i]} << (8 * i);
    if (len > (1u << 26)) throw ProtocolError("frame too large");
    frame.resize(4 + std::size_t{len});
    read_exact(frame.data() + 4, len);
    return decode(frame);
  }

 private:
  void read_exact(std::uint8_t* dst, std::size_t n) {
    std::size_t done = 0;
    while (done < n) {
      const auto r = ::recv(fd_, dst + done, n - done, 0);
      if (r < 0 && errno == EINTR) continue;
      if (r == 0) throw ProtocolError("peer closed the channel");
      if (r < 0) throw ProtocolError(std::string("socket receive failed: ") + std::strerror(errno));
      done += static_cast<std::size_t>(r);
    }
  }

  int fd_;
  Direction out_;
  Transcript* tap_;
};

}  // namespace

Duplex make_in_process_duplex(Transcript* tap) {
  auto q = std::make_shared<SharedQueues>();
  Duplex d;
  d.alice = std::make_unique<InProcessEndpoint>(q, Direction::alice_to_bob, tap);
  d.bob = std::make_unique<InProcessEndpoint>(q, Direction::bob_to_alice, tap);
  return d;
}

void set_idle_hook(Endpoint& endpoint, std::function<void()> hook) {
  auto* ep = dynamic_cast<InProcessEndpoint*>(&endpoint);
  if (!ep) throw ConfigError("idle hooks apply only to in-process endpoints");
  ep->set_hook(std::move(hook));
}

Duplex make_socket_duplex(Transcript* tap) {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0)
    throw ProtocolError(std::string("socketpair failed: ") + std::strerror(errno));
  Duplex d;
  d.alice = std::make_unique<SocketEndpoint>(fds[0], Direction::alice_to_bob, tap);
  d.bob = std::make_unique<SocketEndpoint>(fds[1], Direction::bob_to_alice, tap);
  return d;
}

}  // namespace csikey
