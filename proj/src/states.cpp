#include "qbc/states.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "qbc/error.hpp"

namespace qbc::states {
namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

void check_embedded_index(std::size_t dim, std::size_t i) {
  if (dim < 2) throw DomainError("register dimension must be at least 2");
  if (i < 1 || i >= dim)
    throw DomainError("state index " + std::to_string(i) + " outside [1, " + std::to_string(dim - 1) + "]");
}

}  // namespace

void check_dimension(std::size_t n) {
  if (n < 3) throw DomainError("n must be at least 3 (got " + std::to_string(n) + ")");
}

void check_family(std::size_t n, std::size_t i) {
  check_dimension(n);
  if (i < 1 || i > n - 1)
    throw DomainError("index i=" + std::to_string(i) + " outside [1, " + std::to_string(n - 1) + "]");
}

StateVector phi_plus(std::size_t dim, std::size_t i) {
  check_embedded_index(dim, i);
  return StateVector::sparse(dim, {{0, kInvSqrt2}, {i, kInvSqrt2}});
}

StateVector phi_minus(std::size_t dim, std::size_t i) {
  check_embedded_index(dim, i);
  return StateVector::sparse(dim, {{0, kInvSqrt2}, {i, -kInvSqrt2}});
}

StateVector committed_state(std::size_t dim, int b, std::size_t i) {
  if (b != 0 && b != 1) throw DomainError("bit must be 0 or 1");
  return b == 0 ? phi_plus(dim, i) : phi_minus(dim, i);
}

StateVector phi_n_minus(std::size_t n, std::size_t dim) {
  check_dimension(n);
  if (dim < n) throw DimensionError("embedding dimension smaller than n");
  const double a = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<SparseEntry> e;
  e.reserve(n);
  for (std::size_t k = 0; k < n; ++k) e.push_back({k, a});
  return StateVector::sparse(dim, std::move(e));
}

StateVector alpha_plus(std::size_t n, std::size_t i) {
  check_family(n, i);
  return StateVector::basis(n, i);
}

StateVector omega(std::size_t n, std::size_t beta_dim) {
  check_dimension(n);
  if (beta_dim < n) throw DimensionError("beta dimension smaller than n");
  const double a = 1.0 / std::sqrt(static_cast<double>(n - 1));
  std::vector<SparseEntry> e;
  e.reserve(2 * (n - 1));
  for (std::size_t i = 1; i < n; ++i) {
    // |i⟩_α ⊗ (|0⟩ + |i⟩)/√2
    e.push_back({i * beta_dim, a * kInvSqrt2});
    e.push_back({i * beta_dim + i, a * kInvSqrt2});
  }
  return StateVector::sparse(n * beta_dim, std::move(e));
}

StateVector alpha_tilde_minus(std::size_t n, std::size_t i) {
  check_family(n, i);
  const double nd = static_cast<double>(n);
  const double norm = 1.0 / std::sqrt(1.0 - 4.0 / (nd * nd));
  std::vector<Amplitude> amps(n);
  for (std::size_t k = 1; k < n; ++k) amps[k] = norm * (k == i ? (2.0 - nd) / nd : 2.0 / nd);
  return StateVector::dense(std::move(amps));
}

StateVector alpha_tilde_n_minus(std::size_t n) {
  check_dimension(n);
  const double a = 1.0 / std::sqrt(static_cast<double>(n - 1));
  std::vector<Amplitude> amps(n);
  for (std::size_t k = 1; k < n; ++k) amps[k] = a;
  return StateVector::dense(std::move(amps));
}

double c_prime(std::size_t n) {
  check_dimension(n);
  const double nd = static_cast<double>(n);
  return std::sqrt(nd * (nd - 1.0) * (nd + 2.0) / (nd * nd + 2.0));
}

StateVector phi_tilde_minus_cprime(std::size_t n, std::size_t i) {
  check_family(n, i);
  const double nd = static_cast<double>(n);
  const double lead = std::sqrt(1.0 - 4.0 / (nd * nd)) / std::sqrt(nd - 1.0);
  const double cross = 4.0 / (nd * nd - 4.0);
  const double tail = std::sqrt(2.0 / nd) * std::sqrt(nd - 2.0) / (std::sqrt(nd - 1.0) * std::sqrt(nd + 2.0));
  StateVector acc = phi_minus(n, i);
  for (std::size_t k = 1; k < n; ++k)
    if (k != i) acc = axpy(acc, -cross, phi_minus(n, k));
  acc = axpy(acc.scaled(lead), tail, phi_n_minus(n));
  return acc.scaled(c_prime(n)).to_dense();
}

StateVector phi_tilde_minus(std::size_t n, std::size_t i) { return phi_tilde_minus_cprime(n, i).normalized(); }

namespace {

DensityMatrix uniform_family(std::size_t n, int sign) {
  if (n < 2) throw DomainError("n must be at least 2 for the mixed families");
  std::vector<StateVector> states;
  states.reserve(n - 1);
  for (std::size_t i = 1; i < n; ++i) states.push_back(sign > 0 ? phi_plus(n, i) : phi_minus(n, i));
  const std::vector<double> weights(n - 1, 1.0 / static_cast<double>(n - 1));
  return DensityMatrix::mixture(states, weights);
}

}  // namespace

DensityMatrix rho_plus(std::size_t n) { return uniform_family(n, +1); }
DensityMatrix rho_minus(std::size_t n) { return uniform_family(n, -1); }

ClosedForms closed_forms(std::size_t n) {
  check_dimension(n);
  const double nd = static_cast<double>(n);
  return {
      .trace_distance = 1.0 / std::sqrt(nd - 1.0),
      .overlap_phi = std::sqrt(1.0 - (2.0 * nd + 2.0) / (nd * nd + 2.0)),
      .overlap_phi_normalized = std::sqrt(1.0 - 2.0 / nd),
      .overlap_alpha_sq = 1.0 - 4.0 / (nd + 2.0),
      .collapse_weight_n_minus = 2.0 / nd,
  };
}

StateVector omega_reconstruction_minus(std::size_t n) {
  check_dimension(n);
  const double nd = static_cast<double>(n);
  const double w = std::sqrt(1.0 - 4.0 / (nd * nd)) / std::sqrt(nd - 1.0);
  StateVector acc = tensor_product(alpha_tilde_n_minus(n), phi_n_minus(n)).scaled(std::sqrt(2.0 / nd));
  for (std::size_t i = 1; i < n; ++i) acc = axpy(acc, w, tensor_product(alpha_tilde_minus(n, i), phi_minus(n, i)));
  return acc;
}

}  // namespace qbc::states
