#pragma once

// The simulated quantum world. Registers live in entanglement groups; each
// group carries one pure joint state. Every action on a register names the
// acting party and is checked against the register's current owner.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "qbc/rng.hpp"
#include "qbc/tensor.hpp"

namespace qbc {

enum class Party : std::uint8_t { Alice, Bob, Referee };

std::string_view to_string(Party p);

using RegisterId = std::uint64_t;

struct RegisterHandle {
  RegisterId id = 0;
  std::size_t dim = 0;

  bool operator==(const RegisterHandle&) const = default;
};

/// One element E of a measurement, paired with the Kraus operator used for
/// the post-measurement update.
///
/// Projector-type elements are stored as a list of orthonormal vectors (so a
/// rank-one projector in a huge register costs two amplitudes); general POVM
/// elements are dense and update through their PSD square root.
class Effect {
 public:
  static Effect span_projector(std::size_t dim, std::vector<StateVector> orthonormal);
  static Effect complement_projector(std::size_t dim, std::vector<StateVector> orthonormal);
  static Effect dense(Operator element);

  std::size_t dim() const { return dim_; }
  /// ⟨c|E|c⟩ for an unnormalized column c.
  double weight(const StateVector& column) const;
  /// K c
  StateVector kraus(const StateVector& column) const;
  Operator to_operator() const;
  bool is_dense() const { return kind_ == Kind::Dense; }
  /// Valid only when is_dense().
  const Operator& element() const { return element_; }
  /// √E; valid only when is_dense().
  const Operator& kraus_operator() const { return kraus_; }

 private:
  enum class Kind { Span, Complement, Dense };

  Kind kind_ = Kind::Span;
  std::size_t dim_ = 0;
  std::vector<StateVector> vectors_;
  Operator element_;
  Operator kraus_;
};

class ProjectiveMeasurement {
 public:
  /// One rank-one projector per vector; a completing projector is appended
  /// when the vectors do not span the space.
  static ProjectiveMeasurement onto_vectors(std::size_t dim, std::vector<StateVector> orthonormal);
  static ProjectiveMeasurement computational(std::size_t dim);
  /// {|v⟩⟨v|, I − |v⟩⟨v|}; outcome 0 is the projection onto v.
  static ProjectiveMeasurement binary(const StateVector& v);
  /// {P, I − P} with P the projector onto span(orthonormal).
  static ProjectiveMeasurement subspace(std::size_t dim, std::vector<StateVector> orthonormal);
  /// Dense projectors; validated idempotent, mutually orthogonal and complete.
  static ProjectiveMeasurement from_projectors(std::vector<Operator> projectors);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return effects_.size(); }
  std::span<const Effect> effects() const { return effects_; }

 private:
  std::size_t dim_ = 0;
  std::vector<Effect> effects_;
};

class Povm {
 public:
  /// Validates that each element is PSD and that the elements sum to identity.
  explicit Povm(std::vector<Operator> elements);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return effects_.size(); }
  std::span<const Effect> effects() const { return effects_; }
  const std::vector<Operator>& elements() const { return elements_; }

 private:
  std::size_t dim_ = 0;
  std::vector<Operator> elements_;
  std::vector<Effect> effects_;
};

/// Square-root ("pretty good") measurement for a weighted ensemble. A
/// completing element I − ΣE_k is appended when the ensemble does not span.
Povm pgm_from_ensemble(std::span<const StateVector> states, std::span<const double> weights,
                       double cutoff = 1e-12);

struct Outcome {
  std::size_t index = 0;
  double probability = 0.0;
  StateVector post_state;  // joint state of the measured group afterwards
};

class QuantumWorld {
 public:
  explicit QuantumWorld(CounterRng rng);

  RegisterHandle create_register(Party owner, StateVector state);
  /// One register per factor of `shape`, all in one entanglement group.
  std::vector<RegisterHandle> create_joint(std::span<const Party> owners, StateVector state,
                                           const SubsystemShape& shape);

  void transfer(RegisterHandle reg, Party to, Party caller);
  Party owner(RegisterHandle reg) const;

  /// Born-rule sampling with the world's random stream.
  Outcome measure(std::span<const RegisterHandle> targets, const ProjectiveMeasurement& m, Party caller);
  Outcome measure(std::span<const RegisterHandle> targets, const Povm& m, Party caller);
  Outcome measure(RegisterHandle target, const ProjectiveMeasurement& m, Party caller);
  Outcome measure(RegisterHandle target, const Povm& m, Party caller);

  std::vector<double> born_probabilities(std::span<const RegisterHandle> targets, const ProjectiveMeasurement& m,
                                         Party caller) const;
  std::vector<double> born_probabilities(std::span<const RegisterHandle> targets, const Povm& m,
                                         Party caller) const;

  void apply_unitary(std::span<const RegisterHandle> targets, const Operator& u, Party caller);

  std::size_t register_count() const { return registers_.size(); }
  /// Registers sharing an entanglement group with `reg`, in factor order (including `reg`).
  std::vector<RegisterHandle> group_members(RegisterHandle reg) const;
  /// Joint state of the group containing `reg`; no ownership check.
  const StateVector& group_state(RegisterHandle reg) const;

  /// Applies outcome `k` of `effects` without sampling and without an
  /// ownership check; returns its probability. For oracles and branch analysis.
  double postselect(std::span<const RegisterHandle> targets, std::span<const Effect> effects, std::size_t k);
  /// Exact outcome distribution with no ownership check.
  std::vector<double> probabilities_unchecked(std::span<const RegisterHandle> targets,
                                              std::span<const Effect> effects) const;

 private:
  struct RegisterRecord {
    std::size_t dim;
    Party owner;
    std::size_t group;
  };
  struct Group {
    std::vector<RegisterId> factors;
    StateVector state;
  };

  const RegisterRecord& record(RegisterHandle reg) const;
  void check_owner(std::span<const RegisterHandle> targets, Party caller) const;
  std::size_t merge_groups(std::span<const RegisterHandle> targets);
  std::size_t group_for(std::span<const RegisterHandle> targets) const;
  Outcome measure_effects(std::span<const RegisterHandle> targets, std::span<const Effect> effects, Party caller);

  CounterRng rng_;
  std::vector<RegisterRecord> registers_;
  std::vector<Group> groups_;
};

/// Haar-random unitary (QR of a complex Gaussian matrix with phase fix).
Operator haar_unitary(std::size_t dim, CounterRng& rng);

namespace oracle {

struct Collapse {
  double probability = 0.0;
  StateVector post_state;             // normalized state of the rest of the group
  std::vector<RegisterHandle> rest;   // factor order of post_state
};

/// Projects `reg` onto `target` by fiat (not a physical measurement by any
/// party) and reports the conditional state of the rest of its group.
Collapse conditional_collapse_oracle(const QuantumWorld& world, RegisterHandle reg, const StateVector& target);

/// Reduced density matrix of a single register.
DensityMatrix reduced_state(const QuantumWorld& world, RegisterHandle reg);

}  // namespace oracle

}  // namespace qbc
