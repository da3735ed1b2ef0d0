#include "qbc/adversary.hpp"

#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <string>
#include <thread>

#include "qbc/analysis.hpp"
#include "qbc/error.hpp"
#include "qbc/states.hpp"

namespace qbc {

namespace {

void check_delta(const DeviceModel& d) {
  if (!(d.delta > 0.0) || d.delta > 1.0) throw DomainError("device delta must lie in (0, 1]");
}

struct Tally {
  std::uint64_t accepted = 0;
  std::uint64_t hits = 0;
};

using AliceFactory = std::function<std::unique_ptr<AliceStrategy>(std::uint64_t)>;
using HitCounter = std::function<std::uint64_t(const AliceStrategy&)>;

// Sessions 0..trials−1 against an honest Bob. Integer sums, so the totals do
// not depend on how sessions are spread over threads.
Tally run_trials(const ProtocolParams& params, std::uint64_t trials, unsigned threads, const AliceFactory& make,
                 const HitCounter& hits) {
  Tally total;
  std::mutex mu;
  std::atomic<std::uint64_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr failure;
  auto work = [&] {
    Tally local;
    for (std::uint64_t k; !failed && (k = next++) < trials;) {
      try {
        auto alice = make(k);
        HonestBob bob;
        InProcessTransport transport;
        const auto t = run_session(params, *alice, bob, transport, k);
        local.accepted += t.verdict.accept ? 1 : 0;
        if (hits) local.hits += hits(*alice);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
    std::lock_guard lock(mu);
    total.accepted += local.accepted;
    total.hits += local.hits;
  };
  threads = std::max(1u, threads);
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < threads; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return total;
}

AttackReport make_report(const ProtocolParams& params, std::uint64_t trials, const Tally& t, double bound) {
  AttackReport r;
  r.trials = trials;
  r.acceptances = t.accepted;
  r.acceptance_rate = trials ? static_cast<double>(t.accepted) / static_cast<double>(trials) : 0.0;
  r.registers = trials * params.s;
  r.n_minus_hits = t.hits;
  r.bound = bound;
  r.ci_half_width = wilson_interval(t.accepted, trials).half_width;
  r.seed = params.master_seed;
  return r;
}

std::uint64_t flipped_index(std::uint64_t i, std::uint64_t n_sim) { return i % (n_sim - 1) + 1; }

}  // namespace

bool device_check(const DeviceModel& device, std::uint64_t n_a) {
  check_delta(device);
  return 4.0 / (static_cast<double>(n_a) + 2.0) >= device.delta;
}

std::uint64_t n_a_max(const DeviceModel& device) {
  check_delta(device);
  auto n = static_cast<std::uint64_t>(std::floor(4.0 / device.delta - 2.0));
  while (n > 0 && !device_check(device, n)) --n;
  while (device_check(device, n + 1)) ++n;
  return n;
}

Ensemble minus_family_ensemble(std::uint64_t n_a) {
  states::check_dimension(n_a);
  const double n = static_cast<double>(n_a);
  Ensemble e;
  const double w_i = (1.0 - 4.0 / (n * n)) / (n - 1.0);
  const double w_n = 2.0 / n;
  const double total = w_i * (n - 1.0) + w_n;
  for (std::uint64_t i = 1; i < n_a; ++i) {
    e.states.push_back(states::alpha_tilde_minus(n_a, i));
    e.weights.push_back(w_i / total);
  }
  e.states.push_back(states::alpha_tilde_n_minus(n_a));
  e.weights.push_back(w_n / total);
  return e;
}

std::uint64_t best_minus_announcement(const StateVector& omega, std::uint64_t n_a, std::uint64_t n_sim,
                                      const Operator& element) {
  if (omega.dim() != n_a * n_sim || element.dim() != n_a) throw DimensionError("steering state and element do not fit");
  const std::uint64_t last = std::min(n_a, n_sim - 1);
  std::vector<double> value(last + 1, 0.0);
  for (std::uint64_t i = 1; i <= last; ++i) {
    const auto phi = states::phi_minus(n_sim, i);
    Eigen::VectorXcd w = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(n_a));
    omega.for_each_nonzero([&](std::size_t idx, Amplitude v) {
      w(static_cast<Eigen::Index>(idx / n_sim)) += v * std::conj(phi[idx % n_sim]);
    });
    value[i] = (w.adjoint() * element.matrix() * w)(0, 0).real();
  }
  double best = value[1];
  for (std::uint64_t i = 2; i <= last; ++i) best = std::max(best, value[i]);
  for (std::uint64_t i = 1; i <= last; ++i)
    if (value[i] >= best - 1e-12) return i;
  return 1;
}

std::shared_ptr<const SteeringKit> SteeringKit::build(std::uint64_t n_a, std::uint64_t n_sim) {
  states::check_dimension(n_a);
  if (n_a > n_sim) throw DomainError("n_a may not exceed n_sim");
  const auto ens = minus_family_ensemble(n_a);
  auto kit = std::make_shared<SteeringKit>(SteeringKit{
      n_a, n_sim, states::omega(n_a, n_sim), pgm_from_ensemble(ens.states, ens.weights), {}, {}, {}, {}, {}});
  for (std::size_t k = 0; k < kit->pgm.size(); ++k)
    kit->pgm_announce.push_back(k + 1 < n_a ? k + 1
                                            : best_minus_announcement(kit->omega, n_a, n_sim, kit->pgm.elements()[k]));
  for (std::uint64_t k = 0; k < n_a; ++k)
    kit->basis_announce.push_back(
        best_minus_announcement(kit->omega, n_a, n_sim, Operator::projector(StateVector::basis(n_a, k))));
  kit->alpha_basis = ProjectiveMeasurement::computational(n_a);
  kit->leak_test = ProjectiveMeasurement::binary(states::phi_n_minus(n_a, n_sim));
  for (std::uint64_t i = 1; i < n_a; ++i)
    kit->oracle_targets.push_back(Effect::span_projector(n_a, {states::alpha_tilde_minus(n_a, i)}));
  return kit;
}

// ---------------------------------------------------------------------------
// Strategies

CommitBatch NaiveAlice::commit(SessionContext& ctx) {
  auto c = alice_commit(ctx.params, config_.committed_b, ctx.world, ctx.rng);
  indices_ = std::move(c.indices);
  return std::move(c.batch);
}

UnveilOpen NaiveAlice::unveil(SessionContext& ctx) {
  auto announced = indices_;
  if (config_.index_rule == IndexRule::DifferentIndex)
    for (auto& i : announced) i = flipped_index(i, ctx.params.n_sim);
  return alice_unveil(static_cast<std::uint8_t>(1 - config_.committed_b), std::move(announced), ctx.params.s);
}

SteeringAlice::SteeringAlice(std::shared_ptr<const SteeringKit> kit, std::uint8_t target_b,
                             SteeringMeasurement measurement, bool snap_to_basis)
    : kit_(std::move(kit)), target_b_(target_b), measurement_(measurement), snap_(snap_to_basis) {
  if (target_b_ > 1) throw DomainError("target bit must be 0 or 1");
}

CommitBatch SteeringAlice::commit(SessionContext& ctx) {
  if (ctx.params.n_sim != kit_->n_sim) throw DomainError("steering kit built for a different n_sim");
  CommitBatch batch;
  const SubsystemShape shape{{kit_->n_a, kit_->n_sim}};
  const Party owners[2] = {Party::Alice, Party::Alice};
  for (std::uint32_t j = 1; j <= ctx.params.s; ++j) {
    const auto regs = ctx.world.create_joint(owners, kit_->omega, shape);
    ctx.world.transfer(regs[1], Party::Bob, Party::Alice);
    alpha_.push_back(regs[0]);
    beta_.push_back(regs[1]);
    // β is entangled with α, so the frame carries no amplitudes.
    batch.messages.push_back({j, QuantumPayload{kit_->n_sim, {}}});
    batch.registers.push_back(regs[1]);
  }
  return batch;
}

UnveilOpen SteeringAlice::unveil(SessionContext& ctx) {
  CounterRng diag = session_stream(ctx.params.master_seed, ctx.session_index, StreamRole::Diagnostic);
  std::vector<std::uint64_t> announced;
  for (std::size_t j = 0; j < alpha_.size(); ++j) {
    // Diagnostic only: an exact Born draw for β landing on φ_{n_A−}, no state update.
    const auto p = ctx.world.probabilities_unchecked({&beta_[j], 1}, kit_->leak_test.effects());
    if (diag.uniform() < p[0]) ++hits_;

    if (target_b_ == 0) {
      announced.push_back(ctx.world.measure(alpha_[j], kit_->alpha_basis, Party::Alice).index);
    } else if (snap_) {
      const auto k = ctx.world.measure(alpha_[j], kit_->alpha_basis, Party::Alice).index;
      announced.push_back(kit_->basis_announce[k]);
    } else if (measurement_ == SteeringMeasurement::Pgm) {
      const auto k = ctx.world.measure(alpha_[j], kit_->pgm, Party::Alice).index;
      announced.push_back(kit_->pgm_announce[k]);
    } else {
      const auto i = 1 + ctx.rng.uniform_index(kit_->n_a - 1);
      ctx.world.postselect({&alpha_[j], 1}, {&kit_->oracle_targets[i - 1], 1}, 0);
      announced.push_back(i);
    }
  }
  return alice_unveil(target_b_, std::move(announced), ctx.params.s);
}

// ---------------------------------------------------------------------------
// Attacks

AttackReport naive_attack(const ProtocolParams& params, const NaiveRedeclare& strategy, std::uint64_t trials,
                          unsigned threads) {
  params.validate();
  if (strategy.committed_b > 1) throw DomainError("committed bit must be 0 or 1");
  const auto t = run_trials(
      params, trials, threads, [&](std::uint64_t) { return std::make_unique<NaiveAlice>(strategy); }, {});
  return make_report(params, trials, t, std::pow(0.25, params.s));
}

namespace {

AttackReport run_steering(const ProtocolParams& params, const EntangledSteering& strategy, std::uint64_t trials,
                          unsigned threads, bool snap, double bound) {
  const auto kit = SteeringKit::build(strategy.n_a, params.n_sim);
  const auto t = run_trials(
      params, trials, threads,
      [&](std::uint64_t) {
        return std::make_unique<SteeringAlice>(kit, strategy.target_b, strategy.measurement, snap);
      },
      [](const AliceStrategy& a) { return static_cast<const SteeringAlice&>(a).n_minus_hits(); });
  return make_report(params, trials, t, bound);
}

}  // namespace

AttackReport steering_attack(const ProtocolParams& params, const EntangledSteering& strategy, std::uint64_t trials,
                             unsigned threads) {
  params.validate();
  if (strategy.n_a < 3 || strategy.n_a > params.n_sim) throw DomainError("n_a must lie in [3, n_sim]");
  if (strategy.target_b > 1) throw DomainError("target bit must be 0 or 1");
  if (strategy.device && !device_check(*strategy.device, strategy.n_a))
    throw DeviceLimitError("device with delta " + std::to_string(strategy.device->delta) + " cannot resolve n_a = " +
                           std::to_string(strategy.n_a) + " (n_a_max = " +
                           std::to_string(n_a_max(*strategy.device)) + ")");
  const double bound = strategy.target_b == 0 ? 1.0 : cheat_bound(strategy.n_a, params.s);
  return run_steering(params, strategy, trials, threads, false, bound);
}

AttackReport snapped_attack(const ProtocolParams& params, const EntangledSteering& strategy, std::uint64_t trials,
                            unsigned threads) {
  if (!strategy.device) throw DomainError("the snapped attack needs a device model");
  if (strategy.measurement != SteeringMeasurement::Pgm) throw DomainError("the snapped attack uses the PGM");
  if (device_check(*strategy.device, strategy.n_a)) return steering_attack(params, strategy, trials, threads);
  params.validate();
  if (strategy.n_a < 3 || strategy.n_a > params.n_sim) throw DomainError("n_a must lie in [3, n_sim]");
  if (strategy.target_b > 1) throw DomainError("target bit must be 0 or 1");
  const double bound = strategy.target_b == 0 ? 1.0 : std::pow(0.25, params.s);
  return run_steering(params, strategy, trials, threads, true, bound);
}

ProjectiveMeasurement helstrom_measurement(std::uint64_t n) {
  const auto diff = states::rho_plus(n).op() - states::rho_minus(n).op();
  const auto eig = hermitian_eig(diff);
  std::vector<StateVector> positive;
  for (std::size_t k = 0; k < eig.values.size(); ++k)
    if (eig.values[k] > kTolEig) positive.push_back(eig.vectors[k]);
  return ProjectiveMeasurement::subspace(n, std::move(positive));
}

HelstromReport helstrom_attack(std::uint64_t n, std::uint64_t trials, std::uint64_t seed, unsigned threads) {
  if (n < 2) throw DomainError("helstrom attack needs n >= 2");
  const auto m = helstrom_measurement(n);
  std::atomic<std::uint64_t> next{0};
  std::atomic<std::uint64_t> correct{0};
  std::atomic<bool> failed{false};
  std::exception_ptr failure;
  auto work = [&] {
    std::uint64_t local = 0;
    for (std::uint64_t k; !failed && (k = next++) < trials;) {
      try {
        QuantumWorld world(session_stream(seed, k, StreamRole::World));
        CounterRng rng = session_stream(seed, k, StreamRole::Trial);
        const auto b = static_cast<int>(rng.uniform_index(2));
        const auto i = 1 + rng.uniform_index(n - 1);
        const auto reg = world.create_register(Party::Alice, states::committed_state(n, b, i));
        world.transfer(reg, Party::Bob, Party::Alice);
        const int guess = world.measure(reg, m, Party::Bob).index == 0 ? 0 : 1;
        local += guess == b ? 1 : 0;
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
    correct += local;
  };
  threads = std::max(1u, threads);
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < threads; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  HelstromReport r;
  r.trials = trials;
  r.correct = correct;
  r.success_rate = trials ? static_cast<double>(r.correct) / static_cast<double>(trials) : 0.0;
  r.expected = 0.5 + 0.5 / std::sqrt(static_cast<double>(n - 1));
  r.ci_half_width = wilson_interval(r.correct, trials).half_width;
  r.seed = seed;
  return r;
}

double multi_copy_distinguisher(std::uint32_t s, std::uint64_t n) {
  if (s < 1) throw DomainError("multi-copy distinguisher needs s >= 1");
  if (n < 2) throw DomainError("multi-copy distinguisher needs n >= 2");
  std::uint64_t dim = 1;
  for (std::uint32_t k = 0; k < s; ++k) {
    dim *= n;
    if (dim > 4096) throw DimensionError("n^s exceeds the dense limit of 4096");
  }
  DensityMatrix plus = states::rho_plus(n);
  DensityMatrix minus = states::rho_minus(n);
  const DensityMatrix plus1 = plus, minus1 = minus;
  for (std::uint32_t k = 1; k < s; ++k) {
    plus = tensor_product(plus, plus1);
    minus = tensor_product(minus, minus1);
  }
  return trace_distance(plus, minus);
}

}  // namespace qbc
