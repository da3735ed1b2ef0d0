#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "qbc/error.hpp"
#include "qbc/protocol.hpp"
#include "qbc/states.hpp"

using namespace qbc;

namespace {

using Bytes = std::vector<std::uint8_t>;

QuantumWorld fresh(std::uint64_t seed = 1) { return QuantumWorld(CounterRng(seed, 0)); }

Message random_message(CounterRng& r) {
  switch (r.uniform_index(3)) {
    case 0: {
      CommitRegister m;
      m.j = static_cast<std::uint32_t>(r());
      m.reg.dim = 1 + r.uniform_index(1u << 20);
      const auto count = r.uniform_index(6);
      for (std::uint64_t k = 0; k < count; ++k)
        m.reg.entries.push_back({r.uniform_index(m.reg.dim), r.normal(), r.normal()});
      return m;
    }
    case 1: {
      UnveilOpen m;
      m.b = static_cast<std::uint8_t>(r.uniform_index(2));
      const auto s = r.uniform_index(9);
      for (std::uint64_t k = 0; k < s; ++k) m.indices.push_back(r());
      return m;
    }
    default: {
      Verdict v;
      v.accept = r.uniform_index(2) == 1;
      if (r.uniform_index(2) == 1) v.first_failure = static_cast<std::uint32_t>(r());
      return v;
    }
  }
}

void put_u32(Bytes& b, std::size_t at, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) b[at + k] = static_cast<std::uint8_t>(v >> (8 * k));
}

// Honest commit of `b`, then an unveil of (b2, indices) checked by Bob.
VerifyResult commit_then_open(std::uint64_t seed, std::uint8_t b, std::uint8_t b2, bool shift_index,
                              std::uint32_t s = 4, std::uint64_t n_sim = 16) {
  const ProtocolParams params{s, n_sim, seed};
  auto world = fresh(seed);
  CounterRng rng(seed, 1);
  const auto hc = alice_commit(params, b, world, rng);
  const auto stored = bob_store(hc.batch.messages, hc.batch.registers, s, world);
  auto idx = hc.indices;
  if (shift_index)
    for (auto& i : idx) i = i % (n_sim - 1) + 1;
  return bob_verify(alice_unveil(b2, idx, s), stored, world, n_sim);
}

struct ScriptedAlice final : AliceStrategy {
  std::vector<std::uint32_t> order;
  CommitBatch commit(SessionContext& ctx) override {
    auto hc = alice_commit(ctx.params, 0, ctx.world, ctx.rng);
    indices = hc.indices;
    CommitBatch out;
    for (auto j : order) {
      out.messages.push_back(hc.batch.messages[j - 1]);
      out.registers.push_back(hc.batch.registers[j - 1]);
    }
    return out;
  }
  UnveilOpen unveil(SessionContext&) override { return alice_unveil(0, indices, static_cast<std::uint32_t>(indices.size())); }
  std::vector<std::uint64_t> indices;
};

}  // namespace

TEST_SUITE("protocol") {
  TEST_CASE("params validation") {
    CHECK_NOTHROW(ProtocolParams{}.validate());
    CHECK_THROWS_AS((ProtocolParams{0, 256, 1}.validate()), DomainError);
    CHECK_THROWS_AS((ProtocolParams{4, 2, 1}.validate()), DomainError);
  }

  TEST_CASE("payload round trip") {
    const auto v = states::committed_state(256, 1, 77);
    const auto p = to_payload(v);
    CHECK(p.dim == 256);
    CHECK(p.entries.size() == 2);
    CHECK(approx_equal(from_payload(p), v, 0.0));
    CHECK_THROWS_AS(from_payload(QuantumPayload{4, {{4, 1.0, 0.0}}}), DecodeError);
  }

  TEST_CASE("verdict frame layout") {
    const Bytes expect{'Q', 'B', 'C', '1', 0x01, 0x03, 6, 0, 0, 0, 0x00, 0x01, 0x05, 0x00, 0x00, 0x00};
    CHECK(encode(Verdict{false, 5}) == expect);
    const Bytes unveil{'Q', 'B', 'C', '1', 0x01, 0x02, 13, 0, 0, 0, 0x01, 1, 0, 0, 0, 0x2a, 0, 0, 0, 0, 0, 0, 0};
    CHECK(encode(UnveilOpen{1, {42}}) == unveil);
    CHECK(frame_payload_length(unveil) == 13);
  }

  TEST_CASE("codec round trip on random messages") {
    CounterRng r(2024, 0);
    for (int k = 0; k < 10000; ++k) {
      const auto m = random_message(r);
      const auto bytes = encode(m);
      REQUIRE(bytes.size() == kFrameHeaderSize + frame_payload_length(bytes));
      REQUIRE(decode(bytes) == m);
    }
  }

  TEST_CASE("codec edge cases") {
    CommitRegister big{std::numeric_limits<std::uint32_t>::max(), {std::numeric_limits<std::uint64_t>::max(), {}}};
    big.reg.entries.push_back({std::numeric_limits<std::uint64_t>::max() - 1, -0.0, 1e-308});
    CHECK(decode(encode(big)) == Message{big});
    const UnveilOpen empty{0, {}};
    CHECK(decode(encode(empty)) == Message{empty});
    const Verdict ok{true, std::nullopt};
    CHECK(decode(encode(ok)) == Message{ok});
  }

  TEST_CASE("decode rejects malformed frames") {
    const auto good = encode(UnveilOpen{1, {3, 4, 5}});
    for (std::size_t cut = 0; cut < good.size(); ++cut) {
      const Bytes part(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut));
      CHECK_THROWS_AS(decode(part), DecodeError);
    }
    auto trailing = good;
    trailing.push_back(0);
    CHECK_THROWS_AS(decode(trailing), DecodeError);
    auto magic = good;
    magic[0] = 'X';
    CHECK_THROWS_AS(decode(magic), DecodeError);
    auto version = good;
    version[4] = 0x02;
    CHECK_THROWS_AS(decode(version), DecodeError);
    auto tag = good;
    tag[5] = 0x09;
    CHECK_THROWS_AS(decode(tag), DecodeError);
    auto bad_b = good;
    bad_b[kFrameHeaderSize] = 2;
    CHECK_THROWS_AS(decode(bad_b), DecodeError);
    // Count field claims more indices than the payload holds.
    auto count = good;
    put_u32(count, kFrameHeaderSize + 1, 4);
    CHECK_THROWS_AS(decode(count), DecodeError);

    auto verdict = encode(Verdict{true, std::nullopt});
    verdict[kFrameHeaderSize] = 7;
    CHECK_THROWS_AS(decode(verdict), DecodeError);
    auto stray = encode(Verdict{true, std::nullopt});
    stray[kFrameHeaderSize + 2] = 1;
    CHECK_THROWS_AS(decode(stray), DecodeError);

    CommitRegister c{1, {4, {{1, 0.5, 0.5}}}};
    auto out_of_range = encode(c);
    out_of_range[kFrameHeaderSize + 16] = 9;  // entry index
    CHECK_THROWS_AS(decode(out_of_range), DecodeError);
    auto nan = encode(c);
    const double q = std::numeric_limits<double>::quiet_NaN();
    std::memcpy(&nan[kFrameHeaderSize + 24], &q, 8);
    CHECK_THROWS_AS(decode(nan), DecodeError);
    CHECK_THROWS_AS(frame_payload_length(Bytes{'Q', 'B'}), DecodeError);
  }

  TEST_CASE("honest commit produces valid registers") {
    const ProtocolParams params{8, 64, 3};
    auto world = fresh();
    CounterRng rng(3, 1);
    const auto hc = alice_commit(params, 1, world, rng);
    REQUIRE(hc.batch.messages.size() == 8);
    for (std::size_t k = 0; k < 8; ++k) {
      CHECK(hc.batch.messages[k].j == k + 1);
      CHECK(world.owner(hc.batch.registers[k]) == Party::Bob);
      CHECK(hc.indices[k] >= 1);
      CHECK(hc.indices[k] < 64);
      CHECK(approx_equal(from_payload(hc.batch.messages[k].reg), states::committed_state(64, 1, hc.indices[k])));
    }
  }

  TEST_CASE("honest sessions always accept") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const auto r = commit_then_open(seed, static_cast<std::uint8_t>(seed & 1), static_cast<std::uint8_t>(seed & 1),
                                      false);
      REQUIRE(r.verdict.accept);
      CHECK(!r.verdict.first_failure);
      for (const auto& c : r.checks) CHECK((c.measured && c.passed));
    }
  }

  TEST_CASE("flipped bit with the same index always fails") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto r = commit_then_open(seed, 0, 1, false);
      CHECK(!r.verdict.accept);
      CHECK(r.verdict.first_failure == 1u);
      for (const auto& c : r.checks) CHECK(!c.passed);
    }
  }

  TEST_CASE("flipped bit with a different index passes each register with probability 1/4") {
    const int trials = 20000;
    int passed = 0;
    for (int t = 0; t < trials; ++t) {
      const auto r = commit_then_open(static_cast<std::uint64_t>(t), 1, 0, true, 1);
      passed += r.verdict.accept ? 1 : 0;
    }
    const double f = static_cast<double>(passed) / trials;
    CHECK(std::abs(f - 0.25) < 5 * std::sqrt(0.25 * 0.75 / trials));
  }

  TEST_CASE("bob_store validates j and ownership") {
    const ProtocolParams params{3, 16, 1};
    auto world = fresh();
    CounterRng rng(1, 1);
    auto hc = alice_commit(params, 0, world, rng);
    CHECK(bob_store(hc.batch.messages, hc.batch.registers, 3, world).size() == 3);
    auto dup = hc.batch;
    dup.messages[2].j = 2;
    CHECK_THROWS_AS(bob_store(dup.messages, dup.registers, 3, world), ProtocolError);
    auto missing = hc.batch;
    missing.messages.pop_back();
    missing.registers.pop_back();
    CHECK_THROWS_AS(bob_store(missing.messages, missing.registers, 3, world), ProtocolError);
    auto range = hc.batch;
    range.messages[0].j = 4;
    CHECK_THROWS_AS(bob_store(range.messages, range.registers, 3, world), ProtocolError);
    world.transfer(hc.batch.registers[1], Party::Alice, Party::Bob);
    CHECK_THROWS_AS(bob_store(hc.batch.messages, hc.batch.registers, 3, world), OwnershipError);
  }

  TEST_CASE("unveil validation") {
    CHECK_THROWS_AS(alice_unveil(0, {1, 2}, 3), ProtocolError);
    CHECK_THROWS_AS(alice_unveil(0, {1, 0, 2}, 3), ProtocolError);
    const ProtocolParams params{2, 16, 1};
    auto world = fresh();
    CounterRng rng(1, 1);
    auto hc = alice_commit(params, 0, world, rng);
    const auto stored = bob_store(hc.batch.messages, hc.batch.registers, 2, world);
    CHECK_THROWS_AS(bob_verify(UnveilOpen{2, hc.indices}, stored, world, 16), ProtocolError);
    CHECK_THROWS_AS(bob_verify(UnveilOpen{0, {1}}, stored, world, 16), ProtocolError);
    const auto r = bob_verify(UnveilOpen{0, {hc.indices[0], 16}}, stored, world, 16);
    CHECK(!r.verdict.accept);
    CHECK(r.verdict.first_failure == 2u);
    CHECK(r.checks.back().measured == false);
  }

  TEST_CASE("session driver") {
    const ProtocolParams params{4, 32, 11};
    HonestAlice alice(1);
    HonestBob bob;
    InProcessTransport t;
    const auto tr = run_session(params, alice, bob, t, 0);
    CHECK(tr.verdict.accept);
    REQUIRE(tr.messages.size() == 6);
    CHECK(std::holds_alternative<CommitRegister>(tr.messages[0]));
    CHECK(std::holds_alternative<UnveilOpen>(tr.messages[4]));
    CHECK(std::get<Verdict>(tr.messages[5]) == tr.verdict);
    CHECK(std::get<UnveilOpen>(tr.messages[4]).indices == alice.indices());
    CHECK(!t.pending(Endpoint::Alice));
    CHECK(!t.pending(Endpoint::Bob));
    CHECK_THROWS_AS(t.receive(Endpoint::Bob), ProtocolError);
  }

  TEST_CASE("sessions replay exactly") {
    const ProtocolParams params{3, 32, 5};
    auto once = [&](std::uint64_t idx) {
      HonestAlice a(0);
      HonestBob b;
      InProcessTransport t;
      return run_session(params, a, b, t, idx);
    };
    CHECK(once(7) == once(7));
    CHECK(!(once(7) == once(8)));
  }

  TEST_CASE("socket transport carries the same session") {
    const ProtocolParams params{5, 64, 9};
    HonestAlice a1(1), a2(1);
    HonestBob b1, b2;
    InProcessTransport in;
    SocketTransport sock;
    CHECK(run_session(params, a1, b1, in, 3) == run_session(params, a2, b2, sock, 3));
    CHECK(!sock.pending(Endpoint::Bob));
    sock.send(Endpoint::Alice, Verdict{true, std::nullopt});
    CHECK(sock.pending(Endpoint::Bob));
    CHECK(sock.receive(Endpoint::Bob) == Message{Verdict{true, std::nullopt}});
    CHECK_THROWS_AS(sock.receive(Endpoint::Alice), ProtocolError);
  }

  TEST_CASE("message order is enforced") {
    const ProtocolParams params{3, 16, 2};
    auto run_order = [&](std::vector<std::uint32_t> order) {
      ScriptedAlice a;
      a.order = std::move(order);
      HonestBob b;
      InProcessTransport t;
      return run_session(params, a, b, t, 0);
    };
    CHECK(run_order({1, 2, 3}).verdict.accept);
    CHECK_THROWS_AS(run_order({1, 1, 2}), ProtocolError);
    CHECK_THROWS_AS(run_order({1, 3, 2}), ProtocolError);
    CHECK_THROWS_AS(run_order({1, 2}), ProtocolError);
    CHECK_THROWS_AS(run_order({1, 2, 3, 3}), ProtocolError);

    const ProtocolParams two{2, 16, 2};
    auto world = fresh();
    CounterRng rng(1, 1);
    HonestBob hb;
    BobEndpoint bob(hb, 2);
    SessionContext ctx{two, world, rng, 0};
    const auto hc = alice_commit(two, 0, world, rng);
    CHECK_THROWS_AS(bob.on_unveil(ctx, UnveilOpen{0, hc.indices}), ProtocolError);
    auto wrong_dim = hc.batch.messages[0];
    wrong_dim.reg.dim = 8;
    CHECK_THROWS_AS(bob.on_commit(ctx, wrong_dim, hc.batch.registers[0]), ProtocolError);
    bob.on_commit(ctx, hc.batch.messages[0], hc.batch.registers[0]);
    bob.on_commit(ctx, hc.batch.messages[1], hc.batch.registers[1]);
    CHECK(bob.on_unveil(ctx, UnveilOpen{0, hc.indices}).verdict.accept);
    CHECK_THROWS_AS(bob.on_unveil(ctx, UnveilOpen{0, hc.indices}), ProtocolError);
    CHECK_THROWS_AS(bob.on_commit(ctx, hc.batch.messages[0], hc.batch.registers[0]), ProtocolError);
  }

  TEST_CASE("run_sessions does not depend on the thread count") {
    const ProtocolParams params{2, 16, 77};
    const SessionFactory f = [](std::uint64_t idx) {
      return SessionPair{std::make_unique<HonestAlice>(static_cast<std::uint8_t>(idx & 1)),
                         std::make_unique<HonestBob>()};
    };
    const auto one = run_sessions(params, f, 10, 40, 1);
    const auto four = run_sessions(params, f, 10, 40, 4);
    CHECK(one == four);
    CHECK(one.front().session_index == 10);
    for (const auto& t : one) CHECK(t.verdict.accept);
  }

  TEST_CASE("committed indices are uniform") {
    const std::uint64_t n_sim = 9;
    const int s = 8, sessions = 4000;
    std::vector<int> counts(n_sim, 0);
    for (int k = 0; k < sessions; ++k) {
      auto world = fresh();
      auto rng = session_stream(31, static_cast<std::uint64_t>(k), StreamRole::Alice);
      const auto hc = alice_commit(ProtocolParams{s, n_sim, 31}, 0, world, rng);
      for (auto i : hc.indices) ++counts[i];
    }
    CHECK(counts[0] == 0);
    const double e = static_cast<double>(s) * sessions / (n_sim - 1);
    double chi2 = 0.0;
    for (std::size_t i = 1; i < n_sim; ++i) chi2 += (counts[i] - e) * (counts[i] - e) / e;
    // 7 degrees of freedom.
    CHECK(chi2 < 42.0);
  }
}
