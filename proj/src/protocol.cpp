#include "qbc/protocol.hpp"

#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <string>
#include <thread>

#include "qbc/error.hpp"
#include "qbc/states.hpp"

namespace qbc {

void ProtocolParams::validate() const {
  if (s < 1) throw DomainError("s must be at least 1");
  if (n_sim < 3) throw DomainError("n_sim must be at least 3");
}

QuantumPayload to_payload(const StateVector& state) {
  QuantumPayload p;
  p.dim = state.dim();
  state.for_each_nonzero([&](std::size_t k, Amplitude v) { p.entries.push_back({k, v.real(), v.imag()}); });
  return p;
}

StateVector from_payload(const QuantumPayload& payload) {
  std::vector<SparseEntry> e;
  e.reserve(payload.entries.size());
  for (const auto& x : payload.entries) {
    if (x.index >= payload.dim) throw DecodeError("amplitude index outside the register dimension");
    e.push_back({x.index, Amplitude(x.re, x.im)});
  }
  return StateVector::sparse(payload.dim, std::move(e));
}

// ---------------------------------------------------------------------------
// Codec

namespace {

constexpr std::uint8_t kMagic[4] = {'Q', 'B', 'C', '1'};
constexpr std::uint8_t kTagCommit = 0x01;
constexpr std::uint8_t kTagUnveil = 0x02;
constexpr std::uint8_t kTagVerdict = 0x03;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return need(1)[0]; }
  std::uint32_t u32() {
    const auto b = need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b[k]) << (8 * k);
    return v;
  }
  std::uint64_t u64() {
    const auto b = need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  bool flag() {
    const auto v = u8();
    if (v > 1) throw DecodeError("boolean byte must be 0 or 1");
    return v == 1;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> need(std::size_t n) {
    if (remaining() < n) throw DecodeError("frame truncated");
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> payload_of(const CommitRegister& m) {
  Writer w;
  w.u32(m.j);
  w.u64(m.reg.dim);
  w.u32(static_cast<std::uint32_t>(m.reg.entries.size()));
  for (const auto& e : m.reg.entries) {
    w.u64(e.index);
    w.f64(e.re);
    w.f64(e.im);
  }
  return w.take();
}

std::vector<std::uint8_t> payload_of(const UnveilOpen& m) {
  Writer w;
  w.u8(m.b);
  w.u32(static_cast<std::uint32_t>(m.indices.size()));
  for (auto i : m.indices) w.u64(i);
  return w.take();
}

std::vector<std::uint8_t> payload_of(const Verdict& m) {
  Writer w;
  w.u8(m.accept ? 1 : 0);
  w.u8(m.first_failure ? 1 : 0);
  w.u32(m.first_failure.value_or(0));
  return w.take();
}

std::uint8_t tag_of(const Message& m) {
  return std::visit(
      [](const auto& x) -> std::uint8_t {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, CommitRegister>) return kTagCommit;
        else if constexpr (std::is_same_v<T, UnveilOpen>) return kTagUnveil;
        else return kTagVerdict;
      },
      m);
}

CommitRegister read_commit(Reader& r) {
  CommitRegister m;
  m.j = r.u32();
  m.reg.dim = r.u64();
  const std::uint32_t count = r.u32();
  // Each entry is 24 bytes; refuse counts the frame cannot hold before allocating.
  if (static_cast<std::uint64_t>(count) * 24 != r.remaining()) throw DecodeError("amplitude count does not match length");
  m.reg.entries.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    AmplitudeEntry e{r.u64(), r.f64(), r.f64()};
    if (!std::isfinite(e.re) || !std::isfinite(e.im)) throw DecodeError("non-finite amplitude");
    if (e.index >= m.reg.dim) throw DecodeError("amplitude index outside the register dimension");
    m.reg.entries.push_back(e);
  }
  return m;
}

UnveilOpen read_unveil(Reader& r) {
  UnveilOpen m;
  m.b = r.u8();
  if (m.b > 1) throw DecodeError("announced bit must be 0 or 1");
  const std::uint32_t s = r.u32();
  if (static_cast<std::uint64_t>(s) * 8 != r.remaining()) throw DecodeError("index count does not match length");
  m.indices.reserve(s);
  for (std::uint32_t k = 0; k < s; ++k) m.indices.push_back(r.u64());
  return m;
}

Verdict read_verdict(Reader& r) {
  Verdict m;
  m.accept = r.flag();
  const bool has = r.flag();
  const std::uint32_t f = r.u32();
  if (has) m.first_failure = f;
  else if (f != 0) throw DecodeError("failure index present without its flag");
  return m;
}

}  // namespace

std::vector<std::uint8_t> encode(const Message& m) {
  const auto payload = std::visit([](const auto& x) { return payload_of(x); }, m);
  if (payload.size() > 0xFFFFFFFFu) throw DomainError("message too large for one frame");
  Writer w;
  for (auto c : kMagic) w.u8(c);
  w.u8(kWireVersion);
  w.u8(tag_of(m));
  w.u32(static_cast<std::uint32_t>(payload.size()));
  auto out = w.take();
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

std::uint32_t frame_payload_length(std::span<const std::uint8_t> header) {
  if (header.size() < kFrameHeaderSize) throw DecodeError("frame truncated");
  if (std::memcmp(header.data(), kMagic, 4) != 0) throw DecodeError("bad magic");
  if (header[4] != kWireVersion) throw DecodeError("unsupported wire version " + std::to_string(header[4]));
  if (header[5] < kTagCommit || header[5] > kTagVerdict) throw DecodeError("unknown message tag " + std::to_string(header[5]));
  Reader r(header.subspan(6, 4));
  return r.u32();
}

Message decode(std::span<const std::uint8_t> frame) {
  const std::uint32_t len = frame_payload_length(frame);
  if (frame.size() != kFrameHeaderSize + len) throw DecodeError("frame length does not match header");
  Reader r(frame.subspan(kFrameHeaderSize));
  Message m;
  switch (frame[5]) {
    case kTagCommit:
      m = read_commit(r);
      break;
    case kTagUnveil:
      m = read_unveil(r);
      break;
    default:
      m = read_verdict(r);
      break;
  }
  if (r.remaining() != 0) throw DecodeError("trailing bytes after payload");
  return m;
}

// ---------------------------------------------------------------------------
// Transports

void InProcessTransport::send(Endpoint from, const Message& m) {
  (from == Endpoint::Alice ? to_bob_ : to_alice_).push_back(encode(m));
}

Message InProcessTransport::receive(Endpoint at) {
  auto& q = at == Endpoint::Alice ? to_alice_ : to_bob_;
  if (q.empty()) throw ProtocolError("no message waiting");
  const auto frame = std::move(q.front());
  q.pop_front();
  return decode(frame);
}

bool InProcessTransport::pending(Endpoint at) const {
  return !(at == Endpoint::Alice ? to_alice_ : to_bob_).empty();
}

namespace {

void write_all(int fd, const std::uint8_t* p, std::size_t n) {
  while (n > 0) {
    const ssize_t k = ::send(fd, p, n, MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("socket write failed: ") + std::strerror(errno));
    }
    p += k;
    n -= static_cast<std::size_t>(k);
  }
}

void read_all(int fd, std::uint8_t* p, std::size_t n) {
  while (n > 0) {
    const ssize_t k = ::recv(fd, p, n, 0);
    if (k < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("socket read failed: ") + std::strerror(errno));
    }
    if (k == 0) throw ProtocolError("peer closed the connection");
    p += k;
    n -= static_cast<std::size_t>(k);
  }
}

}  // namespace

SocketTransport::SocketTransport() {
  if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds_) != 0)
    throw ProtocolError(std::string("socketpair failed: ") + std::strerror(errno));
}

SocketTransport::~SocketTransport() {
  for (int f : fds_)
    if (f >= 0) ::close(f);
}

void SocketTransport::send(Endpoint from, const Message& m) {
  const auto frame = encode(m);
  write_all(fd(from), frame.data(), frame.size());
}

Message SocketTransport::receive(Endpoint at) {
  if (!pending(at)) throw ProtocolError("no message waiting");
  std::vector<std::uint8_t> frame(kFrameHeaderSize);
  read_all(fd(at), frame.data(), kFrameHeaderSize);
  const std::uint32_t len = frame_payload_length(frame);
  frame.resize(kFrameHeaderSize + len);
  read_all(fd(at), frame.data() + kFrameHeaderSize, len);
  return decode(frame);
}

bool SocketTransport::pending(Endpoint at) const {
  pollfd p{fd(at), POLLIN, 0};
  const int r = ::poll(&p, 1, 0);
  return r > 0 && (p.revents & POLLIN);
}

// ---------------------------------------------------------------------------
// Protocol steps

HonestCommitment alice_commit(const ProtocolParams& params, std::uint8_t b, QuantumWorld& world, CounterRng& rng) {
  params.validate();
  if (b > 1) throw DomainError("committed bit must be 0 or 1");
  HonestCommitment out;
  out.b = b;
  for (std::uint32_t j = 1; j <= params.s; ++j) {
    const std::uint64_t i = 1 + rng.uniform_index(params.n_sim - 1);
    auto state = states::committed_state(params.n_sim, b, i);
    auto payload = to_payload(state);
    const auto reg = world.create_register(Party::Alice, std::move(state));
    world.transfer(reg, Party::Bob, Party::Alice);
    out.batch.messages.push_back({j, std::move(payload)});
    out.batch.registers.push_back(reg);
    out.indices.push_back(i);
  }
  return out;
}

std::vector<StoredRegister> bob_store(std::span<const CommitRegister> messages,
                                      std::span<const RegisterHandle> registers, std::uint32_t s,
                                      const QuantumWorld& world) {
  if (messages.size() != registers.size()) throw ProtocolError("commit messages and registers do not pair up");
  std::vector<bool> seen(s + 1, false);
  std::vector<StoredRegister> out(s);
  for (std::size_t k = 0; k < messages.size(); ++k) {
    const auto j = messages[k].j;
    if (j < 1 || j > s) throw ProtocolError("commit index j=" + std::to_string(j) + " out of range");
    if (seen[j]) throw ProtocolError("duplicate commit j=" + std::to_string(j));
    if (world.owner(registers[k]) != Party::Bob)
      throw OwnershipError("register for commit j=" + std::to_string(j) + " was not handed to Bob");
    seen[j] = true;
    out[j - 1] = {j, registers[k]};
  }
  for (std::uint32_t j = 1; j <= s; ++j)
    if (!seen[j]) throw ProtocolError("missing commit j=" + std::to_string(j));
  return out;
}

UnveilOpen alice_unveil(std::uint8_t b, std::vector<std::uint64_t> indices, std::uint32_t s) {
  if (indices.size() != s) throw ProtocolError("unveil must announce exactly s indices");
  for (auto i : indices)
    if (i == 0) throw ProtocolError("announced index 0 is not a valid state index");
  return {b, std::move(indices)};
}

VerifyResult bob_verify(const UnveilOpen& open, std::span<const StoredRegister> stored, QuantumWorld& world,
                        std::uint64_t n_sim) {
  if (open.b > 1) throw ProtocolError("announced bit must be 0 or 1");
  if (open.indices.size() != stored.size()) throw ProtocolError("announced index count differs from s");
  VerifyResult out;
  for (std::size_t k = 0; k < stored.size(); ++k) {
    out.checks.push_back({stored[k].j, open.indices[k], false, false});
    const auto i = open.indices[k];
    if (i < 1 || i >= n_sim || i >= stored[k].reg.dim) {
      out.verdict = {false, stored[k].j};
      return out;
    }
  }
  for (std::size_t k = 0; k < stored.size(); ++k) {
    const auto target = states::committed_state(stored[k].reg.dim, open.b, open.indices[k]);
    const auto r = world.measure(stored[k].reg, ProjectiveMeasurement::binary(target), Party::Bob);
    out.checks[k].measured = true;
    out.checks[k].passed = r.index == 0;
    if (!out.checks[k].passed && !out.verdict.first_failure) out.verdict.first_failure = stored[k].j;
  }
  out.verdict.accept = !out.verdict.first_failure.has_value();
  return out;
}

// ---------------------------------------------------------------------------
// Strategies and driver

CommitBatch HonestAlice::commit(SessionContext& ctx) {
  auto c = alice_commit(ctx.params, b_, ctx.world, ctx.rng);
  indices_ = std::move(c.indices);
  return std::move(c.batch);
}

UnveilOpen HonestAlice::unveil(SessionContext& ctx) { return alice_unveil(b_, indices_, ctx.params.s); }

void HonestBob::on_commit(SessionContext&, const CommitRegister& m, RegisterHandle reg) {
  messages_.push_back(m);
  registers_.push_back(reg);
}

VerifyResult HonestBob::on_unveil(SessionContext& ctx, const UnveilOpen& open) {
  stored_ = bob_store(messages_, registers_, ctx.params.s, ctx.world);
  return bob_verify(open, stored_, ctx.world, ctx.params.n_sim);
}

void BobEndpoint::on_commit(SessionContext& ctx, const CommitRegister& m, RegisterHandle reg) {
  if (done_) throw ProtocolError("commit after unveil");
  if (m.j < next_j_) throw ProtocolError("duplicate commit j=" + std::to_string(m.j));
  if (m.j != next_j_) throw ProtocolError("commit j=" + std::to_string(m.j) + " arrived before j=" + std::to_string(next_j_));
  if (m.j > s_) throw ProtocolError("more than s commits");
  if (m.reg.dim != reg.dim) throw ProtocolError("commit header dimension differs from the register");
  strategy_.on_commit(ctx, m, reg);
  ++next_j_;
}

VerifyResult BobEndpoint::on_unveil(SessionContext& ctx, const UnveilOpen& open) {
  if (done_) throw ProtocolError("second unveil");
  if (next_j_ != s_ + 1)
    throw ProtocolError("unveil after " + std::to_string(next_j_ - 1) + " of " + std::to_string(s_) + " commits");
  done_ = true;
  return strategy_.on_unveil(ctx, open);
}

Transcript run_session(const ProtocolParams& params, AliceStrategy& alice, BobStrategy& bob, Transport& transport,
                       std::uint64_t session_index) {
  params.validate();
  QuantumWorld world(session_stream(params.master_seed, session_index, StreamRole::World));
  CounterRng alice_rng = session_stream(params.master_seed, session_index, StreamRole::Alice);
  CounterRng bob_rng = session_stream(params.master_seed, session_index, StreamRole::Bob);
  SessionContext actx{params, world, alice_rng, session_index};
  SessionContext bctx{params, world, bob_rng, session_index};
  BobEndpoint endpoint(bob, params.s);

  Transcript t;
  t.master_seed = params.master_seed;
  t.session_index = session_index;

  auto deliver = [&](Endpoint from, const Message& m) {
    transport.send(from, m);
    t.messages.push_back(m);
    return transport.receive(from == Endpoint::Alice ? Endpoint::Bob : Endpoint::Alice);
  };

  auto batch = alice.commit(actx);
  if (batch.messages.size() != batch.registers.size()) throw ProtocolError("commit messages and registers do not pair up");
  for (std::size_t k = 0; k < batch.messages.size(); ++k) {
    // The quantum channel: the register is already Bob's, it travels with its frame.
    if (world.owner(batch.registers[k]) != Party::Bob) throw OwnershipError("committed register still held by Alice");
    const auto m = deliver(Endpoint::Alice, batch.messages[k]);
    const auto* c = std::get_if<CommitRegister>(&m);
    if (!c) throw ProtocolError("expected a commit message");
    endpoint.on_commit(bctx, *c, batch.registers[k]);
  }

  const auto m = deliver(Endpoint::Alice, alice.unveil(actx));
  const auto* open = std::get_if<UnveilOpen>(&m);
  if (!open) throw ProtocolError("expected an unveil message");
  auto result = endpoint.on_unveil(bctx, *open);

  const auto back = deliver(Endpoint::Bob, result.verdict);
  t.verdict = std::get<Verdict>(back);
  t.checks = std::move(result.checks);
  return t;
}

std::vector<Transcript> run_sessions(const ProtocolParams& params, const SessionFactory& factory,
                                     std::uint64_t first, std::uint64_t count, unsigned threads) {
  std::vector<Transcript> out(count);
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (std::uint64_t k; !failed && (k = next++) < count;) {
      try {
        auto pair = factory(first + k);
        InProcessTransport transport;
        out[k] = run_session(params, *pair.alice, *pair.bob, transport, first + k);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  threads = std::max(1u, threads);
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < threads; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace qbc
