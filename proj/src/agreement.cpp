// SPDX-License-Identifier: Apache-2.0
#include "csikey/agreement.hpp"

#include <chrono>
#include <exception>
#include <random>
#include <string>
#include <thread>

#include "csikey/error.hpp"
#include "csikey/seed.hpp"

namespace csikey {

std::string_view to_string(SessionStatus status) {
  switch (status) {
    case SessionStatus::success: return "success";
    case SessionStatus::cascade_failure: return "cascade_failure";
    case SessionStatus::insufficient_secure_bits: return "insufficient_secure_bits";
    case SessionStatus::invalid_parameters: return "invalid_parameters";
  }
  return "unknown";
}

SyncResult run_sync_exchange(ChannelSource& source, std::size_t n_packets, const SyncOptions& options,
                             Transcript* tap) {
  if (!(options.loss_probability >= 0.0 && options.loss_probability < 1.0) ||
      !(options.eve_loss_probability >= 0.0 && options.eve_loss_probability < 1.0))
    throw ConfigError("loss probabilities must be in [0, 1)");
  std::mt19937_64 rng(mix_seed(options.seed, 0x73796e63ull));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto lost = [&](double p) { return p > 0.0 && u(rng) < p; };
  auto record = [&](Direction d, MessagePayload payload) {
    if (tap) tap->record(d, encode(PublicMessage{options.session_id, std::move(payload)}));
  };

  SyncResult result;
  result.traces.alice.meta = source.metadata(Role::alice);
  result.traces.bob.meta = source.metadata(Role::bob);
  result.traces.eve_a.meta = source.metadata(Role::eve_from_alice);
  result.traces.eve_b.meta = source.metadata(Role::eve_from_bob);

  for (std::size_t i = 0; i < n_packets; ++i) {
    const auto n = static_cast<std::uint32_t>(i);
    std::optional<RawObservation> bob_csi;
    for (std::uint32_t attempt = 0;; ++attempt) {
      if (attempt > options.retry_limit)
        throw ProtocolError("packet " + std::to_string(n) + " exceeded the retry limit of " +
                            std::to_string(options.retry_limit));
      if (attempt > 0) ++result.retrials;
      auto x = source.next_exchange(n, attempt);

      ++result.transmissions;
      record(Direction::alice_to_bob, PacketRequest{n});
      const bool eve_heard_req = !lost(options.eve_loss_probability);
      if (lost(options.loss_probability)) continue;
      bob_csi = std::move(x.bob);  // overwrites any earlier attempt for n

      record(Direction::bob_to_alice, PacketAck{n});
      const bool eve_heard_ack = !lost(options.eve_loss_probability);
      if (lost(options.loss_probability)) continue;
      if (options.require_eve && !(eve_heard_req && eve_heard_ack)) continue;

      result.traces.alice.packets.push_back(std::move(x.alice));
      result.traces.bob.packets.push_back(std::move(*bob_csi));
      result.traces.eve_a.packets.push_back(std::move(x.eve_from_alice));
      result.traces.eve_b.packets.push_back(std::move(x.eve_from_bob));
      break;
    }
  }
  return result;
}

std::vector<std::uint8_t> derive_key(const Bitstream& reconciled, unsigned key_bits) {
  if (key_bits != 128 && key_bits != 256) throw ConfigError("key length must be 128 or 256 bits");
  const auto digest = hash_bitstream(reconciled);
  return {digest.begin(), digest.begin() + key_bits / 8};
}

double estimate_time_to_key(std::size_t n_packets, const TimingModel& timing, std::size_t cascade_requests) {
  return static_cast<double>(n_packets) * timing.cycle_time_s +
         static_cast<double>(cascade_requests) * timing.cascade_rtt_s;
}

namespace {

Hello make_hello(const ExtractionParams& params, std::size_t length, std::uint64_t seed) {
  Hello h;
  h.permutation_seed = seed;
  h.stream_length = static_cast<std::uint32_t>(length);
  h.n_packets = static_cast<std::uint32_t>(params.n_packets);
  h.k = static_cast<std::uint32_t>(params.k);
  h.q = params.q;
  h.m = params.m;
  return h;
}

// Alice only answers; she never alters her stream.
class AliceResponder {
 public:
  AliceResponder(Endpoint& ep, std::uint32_t session, Bitstream bits, std::uint64_t seed)
      : ep_(ep), session_(session), reference_(std::move(bits), seed) {}

  void open(const Hello& hello) {
    ep_.send({session_, hello});
    ep_.send({session_, HashAnnounce{reference_.hash()}});
  }

  void handle(const PublicMessage& m) {
    if (m.session_id != session_) throw ProtocolError("message for another session");
    if (const auto* req = std::get_if<ParityRequest>(&m.payload)) {
      ep_.send({session_, ParityResponse{reference_.answer_parities(req->round, req->ranges)}});
    } else if (std::holds_alternative<Success>(m.payload)) {
      done_ = true;
      success_ = true;
    } else if (std::holds_alternative<Failure>(m.payload)) {
      done_ = true;
    } else {
      throw ProtocolError("Alice got an unexpected " + std::string(to_string(m.type())));
    }
  }

  void run() {
    while (!done_) handle(ep_.receive());
  }

  bool done() const noexcept { return done_; }
  bool success() const noexcept { return success_; }
  const CascadeReference& reference() const noexcept { return reference_; }

 private:
  Endpoint& ep_;
  std::uint32_t session_;
  CascadeReference reference_;
  bool done_ = false;
  bool success_ = false;
};

struct BobOutcome {
  ReconcileResult result;
};

BobOutcome run_bob(Endpoint& ep, std::uint32_t session, const Bitstream& bits, const ExtractionParams& params,
                   CascadeConfig cascade) {
  auto expect = [&](MessageType t) {
    auto m = ep.receive();
    if (m.session_id != session) throw ProtocolError("message for another session");
    if (m.type() != t)
      throw ProtocolError("expected " + std::string(to_string(t)) + ", got " + std::string(to_string(m.type())));
    return m;
  };
  const auto hello = std::get<Hello>(expect(MessageType::hello).payload);
  const auto mine = make_hello(params, bits.size(), hello.permutation_seed);
  if (hello != mine) {
    ep.send({session, Failure{}});
    throw ProtocolError("HELLO parameters differ from Bob's");
  }
  const auto hash = std::get<HashAnnounce>(expect(MessageType::hash_announce).payload).hash;

  cascade.permutation_seed = hello.permutation_seed;
  ParityOracle oracle = [&](unsigned round, std::span<const BlockRange> ranges) {
    ep.send({session, ParityRequest{round, {ranges.begin(), ranges.end()}}});
    auto reply = std::get<ParityResponse>(expect(MessageType::parity_resp).payload);
    return reply.bits;
  };
  BobOutcome out{reconcile(bits, oracle, hash, cascade)};
  if (out.result.status == CascadeStatus::success)
    ep.send({session, Success{}});
  else
    ep.send({session, Failure{}});
  return out;
}

void fill_report(KeyReport& r, const ExtractionParams& params, const AgreementConfig& config, std::size_t raw_bits,
                 std::size_t leaked, const EntropyReport& entropy, bool reconciled, const Bitstream& final_bits) {
  r.key_bits = config.key_bits;
  r.n_packets = params.n_packets;
  r.k = params.k;
  r.q = params.q;
  r.m = params.m;
  r.raw_bits = raw_bits;
  r.leaked_bits = leaked;
  r.min_entropy = entropy.min_entropy;
  r.max_entropy = entropy.max_entropy;
  if (leaked <= raw_bits) {
    const auto acc = security_accounting(raw_bits, leaked, params.n_packets, entropy, params.k, params.q);
    r.secure_bits = acc.secure_bits;
    r.sbgr = acc.sbgr;
  }
  if (!reconciled) {
    r.status = SessionStatus::cascade_failure;
    r.message = "reconciliation failed after all rounds";
  } else if (!(r.secure_bits > static_cast<double>(config.key_bits))) {
    r.status = SessionStatus::insufficient_secure_bits;
    r.message = "insufficient secure bits: B=" + std::to_string(r.secure_bits) + " does not exceed " +
                std::to_string(config.key_bits);
  } else {
    r.status = SessionStatus::success;
    r.key = derive_key(final_bits, config.key_bits);
  }
}

}  // namespace

AgreementOutcome run_agreement(const CsiTrace& alice, const CsiTrace& bob, const ExtractionParams& params,
                               const AgreementConfig& config) {
  if (config.key_bits != 128 && config.key_bits != 256) throw ConfigError("key length must be 128 or 256 bits");
  config.cascade.validate();
  const auto started = std::chrono::steady_clock::now();

  AgreementOutcome out;
  out.alice_bits = extract(calibrate(alice), params).bits;
  out.bob_raw_bits = extract(calibrate(bob), params).bits;
  if (out.alice_bits.size() != out.bob_raw_bits.size()) throw ProtocolError("stream length mismatch");

  auto duplex = config.transport == Transport::socket ? make_socket_duplex(&out.transcript)
                                                      : make_in_process_duplex(&out.transcript);
  AliceResponder alice_side(*duplex.alice, config.session_id, out.alice_bits, config.cascade.permutation_seed);
  const auto hello = make_hello(params, out.alice_bits.size(), config.cascade.permutation_seed);

  BobOutcome bob_side;
  if (config.transport == Transport::socket) {
    std::exception_ptr alice_error;
    std::thread alice_thread([&] {
      try {
        alice_side.open(hello);
        alice_side.run();
      } catch (...) {
        alice_error = std::current_exception();
      }
    });
    try {
      bob_side = run_bob(*duplex.bob, config.session_id, out.bob_raw_bits, params, config.cascade);
    } catch (...) {
      duplex.bob.reset();
      alice_thread.join();
      throw;
    }
    alice_thread.join();
    if (alice_error) std::rethrow_exception(alice_error);
  } else {
    alice_side.open(hello);
    set_idle_hook(*duplex.bob, [&] { alice_side.handle(duplex.alice->receive()); });
    bob_side = run_bob(*duplex.bob, config.session_id, out.bob_raw_bits, params, config.cascade);
    while (!alice_side.done()) alice_side.handle(duplex.alice->receive());
  }
  const auto& result = bob_side.result;
  out.bob_reconciled_bits = result.bits;

  const bool ok = result.status == CascadeStatus::success && alice_side.success();
  // Min-entropy is measured on Alice's reference stream; on success Bob's stream is identical.
  const auto entropy =
      min_entropy(symbols_from_bits(out.alice_bits, params.k, params.q).composites(),
                  static_cast<unsigned>(params.k * params.q));
  const auto bob_entropy =
      ok ? entropy
         : min_entropy(symbols_from_bits(out.bob_reconciled_bits, params.k, params.q).composites(),
                       static_cast<unsigned>(params.k * params.q));

  out.alice.party = "alice";
  out.bob.party = "bob";
  fill_report(out.alice, params, config, out.alice_bits.size(), alice_side.reference().leaked_bits(), entropy, ok,
              out.alice_bits);
  fill_report(out.bob, params, config, out.bob_raw_bits.size(), result.leaked_bits, bob_entropy, ok,
              out.bob_reconciled_bits);

  const double bmr = mismatch_rate(out.alice_bits, out.bob_raw_bits);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  auto finish = [&](KeyReport& report) {
    auto* r = &report;
    r->bob_bmr = bmr;
    r->corrected_bits = result.corrected_positions.size();
    r->cascade_rounds = result.rounds_run;
    r->parity_requests = result.parity_requests;
    r->timing.collection_s = estimate_time_to_key(params.n_packets, config.timing, 0);
    r->timing.reconciliation_s = static_cast<double>(result.parity_requests) * config.timing.cascade_rtt_s;
    r->timing.total_s = r->timing.collection_s + r->timing.reconciliation_s;
    r->timing.wall_clock_s = wall;
  };
  finish(out.alice);
  finish(out.bob);
  return out;
}

}  // namespace csikey
