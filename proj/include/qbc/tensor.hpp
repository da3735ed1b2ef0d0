#pragma once

// Exact finite-dimensional complex linear algebra: state vectors (dense or
// sparse), operators, density matrices, tensor products, partial traces,
// Hermitian eigendecomposition and the trace distance.
//
// Index convention for composite spaces is row-major over the factor list:
// for a ⊗ b the amplitude a[i]·b[j] sits at joint index i·dim(b) + j.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace qbc {

using Amplitude = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

inline constexpr double kTolNorm = 1e-10;
inline constexpr double kTolEq = 1e-10;
inline constexpr double kTolEig = 1e-9;

struct SparseEntry {
  std::size_t index = 0;
  Amplitude value;

  bool operator==(const SparseEntry&) const = default;
};

/// Complex amplitude vector over a finite-dimensional space.
///
/// Sparse storage keeps a sorted list of (index, amplitude) pairs with no
/// duplicate indices and no exact zeros; dense storage keeps every amplitude.
/// Both representations of the same vector compare equal under approx_equal.
class StateVector {
 public:
  StateVector() = default;

  static StateVector dense(std::vector<Amplitude> amplitudes);
  /// Sorts, merges duplicate indices and drops exact zeros.
  static StateVector sparse(std::size_t dim, std::vector<SparseEntry> entries);
  static StateVector basis(std::size_t dim, std::size_t k);
  static StateVector zero(std::size_t dim);
  static StateVector from_eigen(const Eigen::VectorXcd& v);

  std::size_t dim() const { return dim_; }
  bool is_sparse() const { return sparse_; }
  std::size_t nonzero_count() const;

  Amplitude operator[](std::size_t k) const;

  /// Valid only when is_sparse().
  const std::vector<SparseEntry>& entries() const { return entries_; }
  /// Valid only when !is_sparse().
  const std::vector<Amplitude>& amplitudes() const { return dense_; }

  std::vector<SparseEntry> nonzeros() const;
  StateVector to_dense() const;
  StateVector to_sparse() const;
  Eigen::VectorXcd to_eigen() const;

  double norm_squared() const;
  double norm() const;
  /// Throws DomainError on the zero vector.
  StateVector normalized() const;
  StateVector scaled(Amplitude c) const;
  double max_abs_imag() const;

  template <class F>
  void for_each_nonzero(F&& f) const {
    if (sparse_) {
      for (const auto& e : entries_) f(e.index, e.value);
    } else {
      for (std::size_t k = 0; k < dim_; ++k)
        if (dense_[k] != Amplitude{}) f(k, dense_[k]);
    }
  }

 private:
  std::size_t dim_ = 0;
  bool sparse_ = true;
  std::vector<Amplitude> dense_;
  std::vector<SparseEntry> entries_;
};

/// ⟨a|b⟩, conjugate-linear in the first argument.
Amplitude inner_product(const StateVector& a, const StateVector& b);
StateVector tensor_product(const StateVector& a, const StateVector& b);
/// a + c·b
StateVector axpy(const StateVector& a, Amplitude c, const StateVector& b);
StateVector operator+(const StateVector& a, const StateVector& b);
StateVector operator-(const StateVector& a, const StateVector& b);

double max_abs_diff(const StateVector& a, const StateVector& b);
bool approx_equal(const StateVector& a, const StateVector& b, double tol = kTolEq);
/// Aligns the global phase of `a` to `b` and returns the largest entrywise deviation.
double phase_aligned_diff(const StateVector& a, const StateVector& b);
bool equal_up_to_phase(const StateVector& a, const StateVector& b, double tol = kTolEq);

/// Dense square operator. The hermitian flag is established at construction.
class Operator {
 public:
  Operator() = default;
  explicit Operator(Matrix m);

  static Operator identity(std::size_t dim);
  static Operator zero(std::size_t dim);
  static Operator diagonal(std::span<const double> values);
  /// |a⟩⟨b|
  static Operator outer(const StateVector& a, const StateVector& b);
  static Operator projector(const StateVector& v);

  std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
  const Matrix& matrix() const { return m_; }
  Amplitude operator()(std::size_t r, std::size_t c) const { return m_(r, c); }
  bool hermitian() const { return hermitian_; }
  bool is_hermitian(double tol = kTolEq) const;

  Operator adjoint() const;
  Amplitude trace() const;
  StateVector apply(const StateVector& v) const;
  /// ⟨v|A|v⟩
  Amplitude expectation(const StateVector& v) const;
  double max_abs_diff(const Operator& other) const;

  friend Operator operator+(const Operator& a, const Operator& b);
  friend Operator operator-(const Operator& a, const Operator& b);
  friend Operator operator*(const Operator& a, const Operator& b);
  friend Operator operator*(Amplitude c, const Operator& a);

 private:
  Matrix m_;
  bool hermitian_ = false;
};

Operator tensor_product(const Operator& a, const Operator& b);

struct SubsystemShape {
  std::vector<std::size_t> factors;

  std::size_t total_dim() const;
  /// Throws DimensionError unless every factor is positive and the product equals `dim`.
  void check(std::size_t dim) const;
};

/// Hermitian, positive semidefinite, unit-trace operator.
class DensityMatrix {
 public:
  static DensityMatrix from_pure(const StateVector& psi);
  static DensityMatrix mixture(std::span<const StateVector> states, std::span<const double> weights);
  /// Validates hermiticity, unit trace and positivity.
  static DensityMatrix from_operator(Operator op);

  const Operator& op() const { return op_; }
  std::size_t dim() const { return op_.dim(); }

  friend DensityMatrix tensor_product(const DensityMatrix& a, const DensityMatrix& b);
  friend DensityMatrix partial_trace(const DensityMatrix& rho, const SubsystemShape& shape,
                                     std::size_t keep);
  friend DensityMatrix reduced_density(const StateVector& psi, const SubsystemShape& shape,
                                       std::size_t keep);

 private:
  explicit DensityMatrix(Operator op) : op_(std::move(op)) {}
  Operator op_;
};

DensityMatrix tensor_product(const DensityMatrix& a, const DensityMatrix& b);
/// Reduced state on factor `keep`.
DensityMatrix partial_trace(const DensityMatrix& rho, const SubsystemShape& shape, std::size_t keep);
/// Tr over every factor except `keep` of |psi⟩⟨psi|, without forming the joint operator.
DensityMatrix reduced_density(const StateVector& psi, const SubsystemShape& shape, std::size_t keep);

struct EigenDecomposition {
  std::vector<double> values;  // ascending
  std::vector<StateVector> vectors;
};

EigenDecomposition hermitian_eig(const Operator& op);
std::vector<double> hermitian_eigenvalues(const Operator& op);

/// ½·Σ|λ_k(ρ − σ)|
double trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma);

Operator operator_sqrt(const Operator& op);
/// Pseudo-inverse square root; eigenvalues at or below `cutoff` map to zero.
Operator operator_sqrt_inv(const Operator& op, double cutoff = 1e-12);

}  // namespace qbc
