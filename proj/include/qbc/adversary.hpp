#pragma once

// Dishonest strategies. Alice: re-declaring the bit after an honest commit,
// and the steering attack that commits one half of |Ω⟩ per register and
// decides the bit at unveil time. Bob: the Helstrom measurement against the
// committed registers, and the exact multi-copy trace distance.

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "qbc/protocol.hpp"
#include "qbc/substrate.hpp"

namespace qbc {

/// Measurement precision of Alice's device: the smallest squared-overlap gap
/// 1 − |⟨α_{i+}|ᾱ_{i−}⟩|² = 4/(n_A + 2) it can still resolve.
struct DeviceModel {
  double delta = 0.0;
};

/// True iff 4/(n_a + 2) ≥ delta. Throws DomainError unless 0 < delta ≤ 1.
bool device_check(const DeviceModel& device, std::uint64_t n_a);
/// Largest n with 4/(n + 2) ≥ delta, i.e. ⌊4/delta − 2⌋ evaluated exactly.
std::uint64_t n_a_max(const DeviceModel& device);

enum class IndexRule : std::uint8_t {
  SameIndex,       // re-announce i_j with the flipped bit
  DifferentIndex,  // announce i_j + 1 (wrapping inside [1, n_sim−1])
};

struct NaiveRedeclare {
  std::uint8_t committed_b = 0;  // the bit committed; the flip is announced
  IndexRule index_rule = IndexRule::DifferentIndex;
};

enum class SteeringMeasurement : std::uint8_t {
  Pgm,          // square-root measurement for the minus-family ensemble
  ExactOracle,  // test-only: α projected onto a chosen ᾱ_{i−} by fiat
};

struct EntangledSteering {
  std::uint64_t n_a = 8;
  std::uint8_t target_b = 1;
  SteeringMeasurement measurement = SteeringMeasurement::Pgm;
  std::optional<DeviceModel> device;
};

struct AttackReport {
  std::uint64_t trials = 0;
  std::uint64_t acceptances = 0;
  double acceptance_rate = 0.0;
  std::uint64_t registers = 0;
  std::uint64_t n_minus_hits = 0;  // registers whose β landed on φ_{n_A−} in the diagnostic draw
  double bound = 1.0;
  double ci_half_width = 0.0;      // Wilson, 5σ
  std::uint64_t seed = 0;
};

/// Everything about the steering attack that does not depend on the session:
/// the PGM on α and the index Alice announces for each outcome.
struct SteeringKit {
  std::uint64_t n_a = 0;
  std::uint64_t n_sim = 0;
  StateVector omega;                          // α ⊗ β, dims n_a × n_sim
  Povm pgm;                                   // on α
  std::vector<std::uint64_t> pgm_announce;    // per PGM outcome
  std::vector<std::uint64_t> basis_announce;  // per computational outcome, for an announced b = 1
  ProjectiveMeasurement alpha_basis;          // computational basis of α
  ProjectiveMeasurement leak_test;            // {φ_{n_A−}, complement} on β
  std::vector<Effect> oracle_targets;         // |ᾱ_{i−}⟩⟨ᾱ_{i−}| for i = 1..n_a−1

  static std::shared_ptr<const SteeringKit> build(std::uint64_t n_a, std::uint64_t n_sim);
};

/// Minus-family ensemble on α: states ᾱ_{1−}..ᾱ_{(n−1)−}, ᾱ_{n−} with weights
/// proportional to (1 − 4/n²)/(n − 1) and 2/n, normalized to sum to 1.
struct Ensemble {
  std::vector<StateVector> states;
  std::vector<double> weights;
};
Ensemble minus_family_ensemble(std::uint64_t n_a);

/// Index in {1, ..., min(n_a, n_sim − 1)} maximizing the joint probability of
/// `element` on α and a passed b = 1 check on β, evaluated on |Ω⟩. Indices at
/// or above n_a all behave alike, so n_a stands for them. Ties go to the
/// smallest index.
std::uint64_t best_minus_announcement(const StateVector& omega, std::uint64_t n_a, std::uint64_t n_sim,
                                      const Operator& element);

class NaiveAlice final : public AliceStrategy {
 public:
  explicit NaiveAlice(NaiveRedeclare config) : config_(config) {}
  CommitBatch commit(SessionContext& ctx) override;
  UnveilOpen unveil(SessionContext& ctx) override;

 private:
  NaiveRedeclare config_;
  std::vector<std::uint64_t> indices_;
};

class SteeringAlice final : public AliceStrategy {
 public:
  /// `snap_to_basis`: measure b = 1 in the honest basis instead of the PGM.
  SteeringAlice(std::shared_ptr<const SteeringKit> kit, std::uint8_t target_b, SteeringMeasurement measurement,
                bool snap_to_basis = false);
  CommitBatch commit(SessionContext& ctx) override;
  UnveilOpen unveil(SessionContext& ctx) override;

  std::uint64_t n_minus_hits() const { return hits_; }

 private:
  std::shared_ptr<const SteeringKit> kit_;
  std::uint8_t target_b_;
  SteeringMeasurement measurement_;
  bool snap_;
  std::vector<RegisterHandle> alpha_;
  std::vector<RegisterHandle> beta_;
  std::uint64_t hits_ = 0;
};

/// Honest commit of committed_b, flipped bit announced. Bound (1/4)^s.
AttackReport naive_attack(const ProtocolParams& params, const NaiveRedeclare& strategy, std::uint64_t trials,
                          unsigned threads = 1);

/// Throws DeviceLimitError if a device is given and cannot resolve n_a, and
/// DomainError unless 3 ≤ n_a ≤ n_sim.
AttackReport steering_attack(const ProtocolParams& params, const EntangledSteering& strategy, std::uint64_t trials,
                             unsigned threads = 1);

/// The steering attack on a device that may be too coarse: when the device
/// cannot resolve n_a, the b = 1 measurement falls back to the honest basis.
/// Requires strategy.device and the PGM measurement.
AttackReport snapped_attack(const ProtocolParams& params, const EntangledSteering& strategy, std::uint64_t trials,
                            unsigned threads = 1);

/// Bob's two-outcome measurement separating the positive and non-positive
/// eigenspaces of ρ_+(n) − ρ_−(n); outcome 0 guesses b = 0. n ≥ 2.
ProjectiveMeasurement helstrom_measurement(std::uint64_t n);

struct HelstromReport {
  std::uint64_t trials = 0;
  std::uint64_t correct = 0;
  double success_rate = 0.0;
  double expected = 0.0;  // 1/2 + D/2
  double ci_half_width = 0.0;
  std::uint64_t seed = 0;
};

/// Per trial: a fresh register committed honestly to a uniformly random b in
/// dimension n, handed to Bob, measured with helstrom_measurement(n).
HelstromReport helstrom_attack(std::uint64_t n, std::uint64_t trials, std::uint64_t seed, unsigned threads = 1);

/// D(ρ_+^{⊗s}, ρ_−^{⊗s}) by dense eigendecomposition. Requires n^s ≤ 4096.
double multi_copy_distinguisher(std::uint32_t s, std::uint64_t n);

}  // namespace qbc
