#pragma once

// The two evenly distributed state families |φ_{i±}⟩ = (|0⟩ ± |i⟩)/√2, the
// bipartite steering state |Ω⟩, its minus-family decomposition, and the
// closed-form scalars that go with them.
//
// The steering partner α is an n-dimensional system whose basis vector |k⟩
// plays the role of |α_{k+}⟩; index 0 of α is never populated by |Ω⟩.
// Joint states are ordered α ⊗ β.

#include <cstddef>

#include "qbc/tensor.hpp"

namespace qbc::states {

/// n ≥ 3 and 1 ≤ i ≤ n−1; throws DomainError otherwise.
void check_family(std::size_t n, std::size_t i);
/// n ≥ 3; throws DomainError otherwise.
void check_dimension(std::size_t n);

/// (|0⟩ + |i⟩)/√2 in dimension `dim` (sparse, two nonzeros). Requires 1 ≤ i < dim.
StateVector phi_plus(std::size_t dim, std::size_t i);
/// (|0⟩ − |i⟩)/√2 in dimension `dim`.
StateVector phi_minus(std::size_t dim, std::size_t i);
/// (|0⟩ + (−1)^b |i⟩)/√2, the committed register state.
StateVector committed_state(std::size_t dim, int b, std::size_t i);

/// (|0⟩ + Σ_{i=1}^{n−1}|i⟩)/√n, embedded in a space of dimension `dim` ≥ n.
StateVector phi_n_minus(std::size_t n, std::size_t dim);
inline StateVector phi_n_minus(std::size_t n) { return phi_n_minus(n, n); }

/// |α_{i+}⟩, the computational basis vector |i⟩ of α.
StateVector alpha_plus(std::size_t n, std::size_t i);

/// (1/√(n−1)) Σ_{i=1}^{n−1} |α_{i+}⟩|φ_{i+}⟩ with α of dimension n and β of
/// dimension `beta_dim` ≥ n. Sparse with 2(n−1) nonzeros.
StateVector omega(std::size_t n, std::size_t beta_dim);
inline StateVector omega(std::size_t n) { return omega(n, n); }

/// (1/√(1−4/n²))·[((2−n)/n)|α_{i+}⟩ + (2/n)Σ_{i'≠i}|α_{i'+}⟩]
StateVector alpha_tilde_minus(std::size_t n, std::size_t i);
/// (1/√(n−1)) Σ_{i=1}^{n−1} |α_{i+}⟩
StateVector alpha_tilde_n_minus(std::size_t n);

/// √(n(n−1)(n+2)/(n²+2))
double c_prime(std::size_t n);

/// The β state left behind when α is projected onto |ᾱ_{i−}⟩, normalized.
///
/// This is the direction of the printed expression built with c′; that
/// expression itself is not unit length (see phi_tilde_minus_cprime).
StateVector phi_tilde_minus(std::size_t n, std::size_t i);

/// The literal c′-scaled expression
///   c′[ √(1−4/n²)/√(n−1)·(|φ_{i−}⟩ − 4Σ_{i'≠i}|φ_{i'−}⟩/(n²−4))
///       + √(2/n)√(n−2)/(√(n−1)√(n+2))·|φ_{n−}⟩ ].
/// Its norm is √((1−(2n+2)/(n²+2))/(1−2/n)) < 1; ⟨φ_{i−}| applied to it gives
/// √(1−(2n+2)/(n²+2)) exactly.
StateVector phi_tilde_minus_cprime(std::size_t n, std::size_t i);

/// (1/(n−1)) Σ_i |φ_{i+}⟩⟨φ_{i+}|; n ≥ 2.
DensityMatrix rho_plus(std::size_t n);
/// (1/(n−1)) Σ_i |φ_{i−}⟩⟨φ_{i−}|; n ≥ 2.
DensityMatrix rho_minus(std::size_t n);

struct ClosedForms {
  double trace_distance;           // 1/√(n−1)
  double overlap_phi;              // √(1 − (2n+2)/(n²+2)), against the c′-scaled state
  double overlap_phi_normalized;   // √(1 − 2/n), against the normalized collapse state
  double overlap_alpha_sq;         // 1 − 4/(n+2)
  double collapse_weight_n_minus;  // 2/n
};

ClosedForms closed_forms(std::size_t n);

/// (1/√(n−1)) Σ_i √(1−4/n²)|ᾱ_{i−}⟩|φ_{i−}⟩ + √(2/n)|ᾱ_{n−}⟩|φ_{n−}⟩, which
/// should reproduce omega(n).
StateVector omega_reconstruction_minus(std::size_t n);

}  // namespace qbc::states
