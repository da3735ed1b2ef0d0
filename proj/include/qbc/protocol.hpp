#pragma once

// Commit/unveil session between Alice and Bob: typed messages, the wire
// codec, transports, the honest state machines and the session driver.
//
// Quantum registers travel out of band through the QuantumWorld (ownership
// transfer); the classical CommitRegister frame that accompanies each one
// carries its index and, when the register is not entangled with anything
// Alice kept, its amplitudes.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "qbc/rng.hpp"
#include "qbc/substrate.hpp"
#include "qbc/tensor.hpp"

namespace qbc {

struct ProtocolParams {
  std::uint32_t s = 8;
  std::uint64_t n_sim = 256;
  std::uint64_t master_seed = 42;

  /// Throws DomainError unless s ≥ 1 and n_sim ≥ 3.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Messages

struct AmplitudeEntry {
  std::uint64_t index = 0;
  double re = 0.0;
  double im = 0.0;

  bool operator==(const AmplitudeEntry&) const = default;
};

struct QuantumPayload {
  std::uint64_t dim = 0;
  std::vector<AmplitudeEntry> entries;

  bool operator==(const QuantumPayload&) const = default;
};

struct CommitRegister {
  std::uint32_t j = 0;
  QuantumPayload reg;

  bool operator==(const CommitRegister&) const = default;
};

struct UnveilOpen {
  std::uint8_t b = 0;
  std::vector<std::uint64_t> indices;

  bool operator==(const UnveilOpen&) const = default;
};

struct Verdict {
  bool accept = false;
  std::optional<std::uint32_t> first_failure;  // 1-based register index

  bool operator==(const Verdict&) const = default;
};

using Message = std::variant<CommitRegister, UnveilOpen, Verdict>;

QuantumPayload to_payload(const StateVector& state);
StateVector from_payload(const QuantumPayload& payload);

// ---------------------------------------------------------------------------
// Codec
//
//   "QBC1" | version 0x01 | tag | payload length (u32 LE) | payload
//
// tag 0x01 CommitRegister: j u32, dim u64, count u32, count × (index u64, re f64, im f64)
// tag 0x02 UnveilOpen:     b u8, s u32, s × index u64
// tag 0x03 Verdict:        accept u8, has_failure u8, failure u32
// All integers and doubles little-endian.

inline constexpr std::size_t kFrameHeaderSize = 10;
inline constexpr std::uint8_t kWireVersion = 0x01;

std::vector<std::uint8_t> encode(const Message& m);
/// Throws DecodeError on any malformed input, including trailing bytes.
Message decode(std::span<const std::uint8_t> frame);
/// Validates a frame header and returns its payload length.
std::uint32_t frame_payload_length(std::span<const std::uint8_t> header);

// ---------------------------------------------------------------------------
// Transports

enum class Endpoint : std::uint8_t { Alice, Bob };

/// Ordered, reliable, bidirectional delivery of messages between the two
/// endpoints. Every message crosses the transport as an encoded frame.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(Endpoint from, const Message& m) = 0;
  /// Next message addressed to `at`; throws ProtocolError if none is queued.
  virtual Message receive(Endpoint at) = 0;
  virtual bool pending(Endpoint at) const = 0;
};

class InProcessTransport final : public Transport {
 public:
  void send(Endpoint from, const Message& m) override;
  Message receive(Endpoint at) override;
  bool pending(Endpoint at) const override;

 private:
  std::deque<std::vector<std::uint8_t>> to_alice_;
  std::deque<std::vector<std::uint8_t>> to_bob_;
};

/// Frames over a connected pair of Unix stream sockets.
class SocketTransport final : public Transport {
 public:
  SocketTransport();
  ~SocketTransport() override;
  SocketTransport(const SocketTransport&) = delete;
  SocketTransport& operator=(const SocketTransport&) = delete;

  void send(Endpoint from, const Message& m) override;
  Message receive(Endpoint at) override;
  bool pending(Endpoint at) const override;

 private:
  int fd(Endpoint e) const { return e == Endpoint::Alice ? fds_[0] : fds_[1]; }
  int fds_[2] = {-1, -1};
};

// ---------------------------------------------------------------------------
// Protocol steps

struct CommitBatch {
  std::vector<CommitRegister> messages;
  std::vector<RegisterHandle> registers;  // one per message, owned by Bob
};

struct HonestCommitment {
  CommitBatch batch;
  std::uint8_t b = 0;
  std::vector<std::uint64_t> indices;
};

/// Draws i_j uniformly from [1, n_sim−1], prepares (|0⟩ + (−1)^b|i_j⟩)/√2 and
/// hands each register to Bob.
HonestCommitment alice_commit(const ProtocolParams& params, std::uint8_t b, QuantumWorld& world, CounterRng& rng);

struct StoredRegister {
  std::uint32_t j = 0;
  RegisterHandle reg;
};

/// Checks j = 1..s exactly once each and that Bob holds every register.
std::vector<StoredRegister> bob_store(std::span<const CommitRegister> messages,
                                      std::span<const RegisterHandle> registers, std::uint32_t s,
                                      const QuantumWorld& world);

/// Throws ProtocolError if indices.size() ≠ s or any index is 0.
UnveilOpen alice_unveil(std::uint8_t b, std::vector<std::uint64_t> indices, std::uint32_t s);

struct RegisterCheck {
  std::uint32_t j = 0;
  std::uint64_t announced = 0;
  bool measured = false;
  bool passed = false;

  bool operator==(const RegisterCheck&) const = default;
};

struct VerifyResult {
  Verdict verdict;
  std::vector<RegisterCheck> checks;
};

/// Measures every stored register with {P_j, I − P_j}, P_j the projector onto
/// the announced state. An announced index outside [1, n_sim−1] rejects at
/// once without measuring. Wrong length or b > 1 throws ProtocolError.
VerifyResult bob_verify(const UnveilOpen& open, std::span<const StoredRegister> stored, QuantumWorld& world,
                        std::uint64_t n_sim);

// ---------------------------------------------------------------------------
// Strategies and the session driver

struct SessionContext {
  const ProtocolParams& params;
  QuantumWorld& world;
  CounterRng& rng;
  std::uint64_t session_index;
};

class AliceStrategy {
 public:
  virtual ~AliceStrategy() = default;
  /// Registers in the batch must already belong to Bob.
  virtual CommitBatch commit(SessionContext& ctx) = 0;
  virtual UnveilOpen unveil(SessionContext& ctx) = 0;
};

class BobStrategy {
 public:
  virtual ~BobStrategy() = default;
  virtual void on_commit(SessionContext& ctx, const CommitRegister& m, RegisterHandle reg) = 0;
  virtual VerifyResult on_unveil(SessionContext& ctx, const UnveilOpen& open) = 0;
};

class HonestAlice final : public AliceStrategy {
 public:
  explicit HonestAlice(std::uint8_t b) : b_(b) {}
  CommitBatch commit(SessionContext& ctx) override;
  UnveilOpen unveil(SessionContext& ctx) override;
  const std::vector<std::uint64_t>& indices() const { return indices_; }

 private:
  std::uint8_t b_;
  std::vector<std::uint64_t> indices_;
};

class HonestBob final : public BobStrategy {
 public:
  void on_commit(SessionContext& ctx, const CommitRegister& m, RegisterHandle reg) override;
  VerifyResult on_unveil(SessionContext& ctx, const UnveilOpen& open) override;
  const std::vector<StoredRegister>& stored() const { return stored_; }

 private:
  std::vector<CommitRegister> messages_;
  std::vector<RegisterHandle> registers_;
  std::vector<StoredRegister> stored_;
};

/// Bob's side of the message order: commits j = 1..s, then one unveil.
class BobEndpoint {
 public:
  BobEndpoint(BobStrategy& strategy, std::uint32_t s) : strategy_(strategy), s_(s) {}

  void on_commit(SessionContext& ctx, const CommitRegister& m, RegisterHandle reg);
  VerifyResult on_unveil(SessionContext& ctx, const UnveilOpen& open);

 private:
  BobStrategy& strategy_;
  std::uint32_t s_;
  std::uint32_t next_j_ = 1;
  bool done_ = false;
};

struct Transcript {
  std::vector<Message> messages;
  Verdict verdict;
  std::vector<RegisterCheck> checks;
  std::uint64_t master_seed = 0;
  std::uint64_t session_index = 0;

  bool operator==(const Transcript&) const = default;
};

/// One session. Every random draw comes from streams derived from
/// (params.master_seed, session_index), so a session replays exactly.
Transcript run_session(const ProtocolParams& params, AliceStrategy& alice, BobStrategy& bob, Transport& transport,
                       std::uint64_t session_index);

struct SessionPair {
  std::unique_ptr<AliceStrategy> alice;
  std::unique_ptr<BobStrategy> bob;
};

using SessionFactory = std::function<SessionPair(std::uint64_t session_index)>;

/// Sessions first..first+count−1 over in-process transports, spread over
/// `threads` workers. The result is independent of `threads`.
std::vector<Transcript> run_sessions(const ProtocolParams& params, const SessionFactory& factory,
                                     std::uint64_t first, std::uint64_t count, unsigned threads = 1);

}  // namespace qbc
