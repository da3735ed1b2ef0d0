#include "qbc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "qbc/error.hpp"

namespace qbc {
namespace {

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a) + " vs " +
                         std::to_string(b) + ")");
}

bool finite(Amplitude a) { return std::isfinite(a.real()) && std::isfinite(a.imag()); }

}  // namespace

// ---------------------------------------------------------------------------
// StateVector

StateVector StateVector::dense(std::vector<Amplitude> amplitudes) {
  if (amplitudes.empty()) throw DimensionError("state vector must have positive dimension");
  for (const auto& a : amplitudes)
    if (!finite(a)) throw DomainError("non-finite amplitude");
  StateVector v;
  v.dim_ = amplitudes.size();
  v.sparse_ = false;
  v.dense_ = std::move(amplitudes);
  return v;
}

StateVector StateVector::sparse(std::size_t dim, std::vector<SparseEntry> entries) {
  if (dim == 0) throw DimensionError("state vector must have positive dimension");
  std::sort(entries.begin(), entries.end(),
            [](const SparseEntry& a, const SparseEntry& b) { return a.index < b.index; });
  std::vector<SparseEntry> merged;
  merged.reserve(entries.size());
  for (const auto& e : entries) {
    if (e.index >= dim) throw DimensionError("sparse entry index out of range");
    if (!finite(e.value)) throw DomainError("non-finite amplitude");
    if (!merged.empty() && merged.back().index == e.index)
      merged.back().value += e.value;
    else
      merged.push_back(e);
  }
  std::erase_if(merged, [](const SparseEntry& e) { return e.value == Amplitude{}; });
  StateVector v;
  v.dim_ = dim;
  v.sparse_ = true;
  v.entries_ = std::move(merged);
  return v;
}

StateVector StateVector::basis(std::size_t dim, std::size_t k) {
  if (k >= dim) throw DimensionError("basis index out of range");
  return sparse(dim, {{k, 1.0}});
}

StateVector StateVector::zero(std::size_t dim) { return sparse(dim, {}); }

StateVector StateVector::from_eigen(const Eigen::VectorXcd& v) {
  return dense(std::vector<Amplitude>(v.data(), v.data() + v.size()));
}

std::size_t StateVector::nonzero_count() const {
  if (sparse_) return entries_.size();
  return static_cast<std::size_t>(
      std::count_if(dense_.begin(), dense_.end(), [](Amplitude a) { return a != Amplitude{}; }));
}

Amplitude StateVector::operator[](std::size_t k) const {
  if (k >= dim_) throw DimensionError("amplitude index out of range");
  if (!sparse_) return dense_[k];
  auto it = std::lower_bound(entries_.begin(), entries_.end(), k,
                             [](const SparseEntry& e, std::size_t idx) { return e.index < idx; });
  return (it != entries_.end() && it->index == k) ? it->value : Amplitude{};
}

std::vector<SparseEntry> StateVector::nonzeros() const {
  if (sparse_) return entries_;
  std::vector<SparseEntry> out;
  for_each_nonzero([&](std::size_t k, Amplitude a) { out.push_back({k, a}); });
  return out;
}

StateVector StateVector::to_dense() const {
  if (!sparse_) return *this;
  std::vector<Amplitude> amps(dim_);
  for (const auto& e : entries_) amps[e.index] = e.value;
  return dense(std::move(amps));
}

StateVector StateVector::to_sparse() const {
  if (sparse_) return *this;
  return sparse(dim_, nonzeros());
}

Eigen::VectorXcd StateVector::to_eigen() const {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dim_));
  for_each_nonzero([&](std::size_t k, Amplitude a) { v(static_cast<Eigen::Index>(k)) = a; });
  return v;
}

double StateVector::norm_squared() const {
  double acc = 0.0;
  for_each_nonzero([&](std::size_t, Amplitude a) { acc += std::norm(a); });
  return acc;
}

double StateVector::norm() const { return std::sqrt(norm_squared()); }

StateVector StateVector::normalized() const {
  const double n = norm();
  if (n == 0.0) throw DomainError("cannot normalize the zero vector");
  return scaled(1.0 / n);
}

StateVector StateVector::scaled(Amplitude c) const {
  StateVector out = *this;
  if (sparse_) {
    for (auto& e : out.entries_) e.value *= c;
    if (c == Amplitude{}) out.entries_.clear();
  } else {
    for (auto& a : out.dense_) a *= c;
  }
  return out;
}

double StateVector::max_abs_imag() const {
  double m = 0.0;
  for_each_nonzero([&](std::size_t, Amplitude a) { m = std::max(m, std::abs(a.imag())); });
  return m;
}

Amplitude inner_product(const StateVector& a, const StateVector& b) {
  require_same_dim(a.dim(), b.dim(), "inner_product");
  Amplitude acc{};
  if (a.is_sparse() && b.is_sparse()) {
    const auto& ea = a.entries();
    const auto& eb = b.entries();
    std::size_t i = 0, j = 0;
    while (i < ea.size() && j < eb.size()) {
      if (ea[i].index < eb[j].index) {
        ++i;
      } else if (eb[j].index < ea[i].index) {
        ++j;
      } else {
        acc += std::conj(ea[i].value) * eb[j].value;
        ++i;
        ++j;
      }
    }
  } else if (a.is_sparse()) {
    for (const auto& e : a.entries()) acc += std::conj(e.value) * b.amplitudes()[e.index];
  } else if (b.is_sparse()) {
    for (const auto& e : b.entries()) acc += std::conj(a.amplitudes()[e.index]) * e.value;
  } else {
    for (std::size_t k = 0; k < a.dim(); ++k) acc += std::conj(a.amplitudes()[k]) * b.amplitudes()[k];
  }
  return acc;
}

StateVector tensor_product(const StateVector& a, const StateVector& b) {
  const std::size_t db = b.dim();
  if (a.is_sparse() && b.is_sparse()) {
    std::vector<SparseEntry> out;
    out.reserve(a.entries().size() * b.entries().size());
    for (const auto& x : a.entries())
      for (const auto& y : b.entries()) out.push_back({x.index * db + y.index, x.value * y.value});
    return StateVector::sparse(a.dim() * db, std::move(out));
  }
  std::vector<Amplitude> out(a.dim() * db);
  a.for_each_nonzero([&](std::size_t i, Amplitude x) {
    b.for_each_nonzero([&](std::size_t j, Amplitude y) { out[i * db + j] = x * y; });
  });
  return StateVector::dense(std::move(out));
}

StateVector axpy(const StateVector& a, Amplitude c, const StateVector& b) {
  require_same_dim(a.dim(), b.dim(), "axpy");
  if (a.is_sparse() && b.is_sparse()) {
    std::vector<SparseEntry> out = a.entries();
    out.reserve(out.size() + b.entries().size());
    for (const auto& e : b.entries()) out.push_back({e.index, c * e.value});
    return StateVector::sparse(a.dim(), std::move(out));
  }
  std::vector<Amplitude> out = a.to_dense().amplitudes();
  b.for_each_nonzero([&](std::size_t k, Amplitude v) { out[k] += c * v; });
  return StateVector::dense(std::move(out));
}

StateVector operator+(const StateVector& a, const StateVector& b) { return axpy(a, 1.0, b); }
StateVector operator-(const StateVector& a, const StateVector& b) { return axpy(a, -1.0, b); }

double max_abs_diff(const StateVector& a, const StateVector& b) {
  const StateVector d = a - b;
  double m = 0.0;
  d.for_each_nonzero([&](std::size_t, Amplitude v) { m = std::max(m, std::abs(v)); });
  return m;
}

bool approx_equal(const StateVector& a, const StateVector& b, double tol) {
  return a.dim() == b.dim() && max_abs_diff(a, b) <= tol;
}

double phase_aligned_diff(const StateVector& a, const StateVector& b) {
  require_same_dim(a.dim(), b.dim(), "phase_aligned_diff");
  const Amplitude overlap = inner_product(a, b);
  const Amplitude phase = std::abs(overlap) > 0.0 ? overlap / std::abs(overlap) : Amplitude{1.0};
  return max_abs_diff(a.scaled(phase), b);
}

bool equal_up_to_phase(const StateVector& a, const StateVector& b, double tol) {
  return a.dim() == b.dim() && phase_aligned_diff(a, b) <= tol;
}

// ---------------------------------------------------------------------------
// Operator

Operator::Operator(Matrix m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols() || m_.rows() == 0) throw DimensionError("operator must be square and non-empty");
  if (!m_.allFinite()) throw DomainError("non-finite operator entry");
  hermitian_ = is_hermitian(kTolEq);
}

Operator Operator::identity(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return Operator(Matrix::Identity(d, d));
}

Operator Operator::zero(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return Operator(Matrix::Zero(d, d));
}

Operator Operator::diagonal(std::span<const double> values) {
  const auto d = static_cast<Eigen::Index>(values.size());
  Matrix m = Matrix::Zero(d, d);
  for (Eigen::Index k = 0; k < d; ++k) m(k, k) = values[static_cast<std::size_t>(k)];
  return Operator(std::move(m));
}

Operator Operator::outer(const StateVector& a, const StateVector& b) {
  require_same_dim(a.dim(), b.dim(), "outer");
  const auto d = static_cast<Eigen::Index>(a.dim());
  Matrix m = Matrix::Zero(d, d);
  a.for_each_nonzero([&](std::size_t i, Amplitude x) {
    b.for_each_nonzero([&](std::size_t j, Amplitude y) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x * std::conj(y);
    });
  });
  return Operator(std::move(m));
}

Operator Operator::projector(const StateVector& v) { return outer(v, v); }

bool Operator::is_hermitian(double tol) const {
  const Eigen::Index d = m_.rows();
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = r; c < d; ++c)
      if (std::abs(m_(r, c) - std::conj(m_(c, r))) > tol) return false;
  return true;
}

Operator Operator::adjoint() const { return Operator(m_.adjoint()); }

Amplitude Operator::trace() const { return m_.trace(); }

StateVector Operator::apply(const StateVector& v) const {
  require_same_dim(dim(), v.dim(), "Operator::apply");
  return StateVector::from_eigen(m_ * v.to_eigen());
}

Amplitude Operator::expectation(const StateVector& v) const {
  require_same_dim(dim(), v.dim(), "Operator::expectation");
  const Eigen::VectorXcd x = v.to_eigen();
  return x.dot(m_ * x);
}

double Operator::max_abs_diff(const Operator& other) const {
  require_same_dim(dim(), other.dim(), "Operator::max_abs_diff");
  return (m_ - other.m_).cwiseAbs().maxCoeff();
}

Operator operator+(const Operator& a, const Operator& b) {
  require_same_dim(a.dim(), b.dim(), "operator+");
  return Operator(a.m_ + b.m_);
}

Operator operator-(const Operator& a, const Operator& b) {
  require_same_dim(a.dim(), b.dim(), "operator-");
  return Operator(a.m_ - b.m_);
}

Operator operator*(const Operator& a, const Operator& b) {
  require_same_dim(a.dim(), b.dim(), "operator*");
  return Operator(a.m_ * b.m_);
}

Operator operator*(Amplitude c, const Operator& a) { return Operator(c * a.m_); }

Operator tensor_product(const Operator& a, const Operator& b) {
  const Eigen::Index da = a.matrix().rows(), db = b.matrix().rows();
  Matrix m(da * db, da * db);
  for (Eigen::Index i = 0; i < da; ++i)
    for (Eigen::Index j = 0; j < da; ++j) m.block(i * db, j * db, db, db) = a.matrix()(i, j) * b.matrix();
  return Operator(std::move(m));
}

// ---------------------------------------------------------------------------
// SubsystemShape / DensityMatrix

std::size_t SubsystemShape::total_dim() const {
  return std::accumulate(factors.begin(), factors.end(), std::size_t{1}, std::multiplies<>());
}

void SubsystemShape::check(std::size_t dim) const {
  if (factors.empty()) throw DimensionError("subsystem shape has no factors");
  for (auto f : factors)
    if (f == 0) throw DimensionError("subsystem factor of dimension zero");
  if (total_dim() != dim)
    throw DimensionError("subsystem shape product " + std::to_string(total_dim()) +
                         " does not match dimension " + std::to_string(dim));
}

DensityMatrix DensityMatrix::from_pure(const StateVector& psi) {
  if (std::abs(psi.norm() - 1.0) > kTolNorm) throw DomainError("pure state must be normalized");
  return DensityMatrix(Operator::projector(psi));
}

DensityMatrix DensityMatrix::mixture(std::span<const StateVector> states, std::span<const double> weights) {
  if (states.empty() || states.size() != weights.size())
    throw DimensionError("mixture needs one weight per state");
  const std::size_t d = states.front().dim();
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  double total = 0.0;
  for (std::size_t k = 0; k < states.size(); ++k) {
    require_same_dim(d, states[k].dim(), "mixture");
    if (weights[k] < 0.0) throw DomainError("mixture weights must be nonnegative");
    if (std::abs(states[k].norm() - 1.0) > kTolNorm) throw DomainError("mixture states must be normalized");
    total += weights[k];
    const Eigen::VectorXcd v = states[k].to_eigen();
    m.noalias() += weights[k] * v * v.adjoint();
  }
  if (std::abs(total - 1.0) > kTolNorm) throw DomainError("mixture weights must sum to 1");
  return DensityMatrix(Operator(std::move(m)));
}

DensityMatrix DensityMatrix::from_operator(Operator op) {
  if (!op.hermitian()) throw DomainError("density matrix must be Hermitian");
  if (std::abs(op.trace() - Amplitude{1.0}) > kTolNorm) throw DomainError("density matrix must have unit trace");
  const auto eig = hermitian_eigenvalues(op);
  if (eig.front() < -kTolEq) throw DomainError("density matrix must be positive semidefinite");
  return DensityMatrix(std::move(op));
}

DensityMatrix tensor_product(const DensityMatrix& a, const DensityMatrix& b) {
  return DensityMatrix(tensor_product(a.op(), b.op()));
}

DensityMatrix partial_trace(const DensityMatrix& rho, const SubsystemShape& shape, std::size_t keep) {
  shape.check(rho.dim());
  if (keep >= shape.factors.size()) throw DimensionError("kept factor index out of range");
  // View the joint space as (left, kept, right).
  std::size_t left = 1, right = 1;
  for (std::size_t f = 0; f < keep; ++f) left *= shape.factors[f];
  for (std::size_t f = keep + 1; f < shape.factors.size(); ++f) right *= shape.factors[f];
  const std::size_t dk = shape.factors[keep];
  const auto& m = rho.op().matrix();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(dk), static_cast<Eigen::Index>(dk));
  for (std::size_t l = 0; l < left; ++l)
    for (std::size_t r = 0; r < right; ++r)
      for (std::size_t a = 0; a < dk; ++a)
        for (std::size_t b = 0; b < dk; ++b) {
          const auto row = static_cast<Eigen::Index>((l * dk + a) * right + r);
          const auto col = static_cast<Eigen::Index>((l * dk + b) * right + r);
          out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += m(row, col);
        }
  return DensityMatrix(Operator(std::move(out)));
}

DensityMatrix reduced_density(const StateVector& psi, const SubsystemShape& shape, std::size_t keep) {
  shape.check(psi.dim());
  if (keep >= shape.factors.size()) throw DimensionError("kept factor index out of range");
  if (std::abs(psi.norm() - 1.0) > kTolNorm) throw DomainError("state must be normalized");
  std::size_t right = 1;
  for (std::size_t f = keep + 1; f < shape.factors.size(); ++f) right *= shape.factors[f];
  const std::size_t dk = shape.factors[keep];
  // Group amplitudes by the traced-out multi-index (left, right); each group is
  // a column over the kept factor and contributes |col⟩⟨col|.
  struct Item {
    std::size_t rest, kept;
    Amplitude value;
  };
  std::vector<Item> items;
  psi.for_each_nonzero([&](std::size_t idx, Amplitude v) {
    const std::size_t r = idx % right;
    const std::size_t k = (idx / right) % dk;
    const std::size_t l = idx / (right * dk);
    items.push_back({l * right + r, k, v});
  });
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.rest < b.rest; });
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(dk), static_cast<Eigen::Index>(dk));
  for (std::size_t begin = 0; begin < items.size();) {
    std::size_t end = begin;
    while (end < items.size() && items[end].rest == items[begin].rest) ++end;
    for (std::size_t x = begin; x < end; ++x)
      for (std::size_t y = begin; y < end; ++y)
        out(static_cast<Eigen::Index>(items[x].kept), static_cast<Eigen::Index>(items[y].kept)) +=
            items[x].value * std::conj(items[y].value);
    begin = end;
  }
  return DensityMatrix(Operator(std::move(out)));
}

// ---------------------------------------------------------------------------
// Spectral functions

namespace {

void require_hermitian(const Operator& op, const char* what) {
  if (!op.hermitian()) throw DomainError(std::string(what) + ": operator is not Hermitian");
}

Operator spectral_map(const Operator& op, double (*f)(double, double), double param) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(op.matrix());
  if (solver.info() != Eigen::Success) throw DomainError("eigendecomposition failed");
  const Eigen::VectorXd& vals = solver.eigenvalues();
  if (vals.size() > 0 && vals.minCoeff() < -kTolEig)
    throw DomainError("operator has a negative eigenvalue beyond tolerance");
  Eigen::VectorXd mapped(vals.size());
  for (Eigen::Index k = 0; k < vals.size(); ++k) mapped(k) = f(vals(k), param);
  const Matrix& v = solver.eigenvectors();
  return Operator(v * mapped.asDiagonal() * v.adjoint());
}

}  // namespace

EigenDecomposition hermitian_eig(const Operator& op) {
  require_hermitian(op, "hermitian_eig");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(op.matrix());
  if (solver.info() != Eigen::Success) throw DomainError("eigendecomposition failed");
  EigenDecomposition out;
  const auto n = solver.eigenvalues().size();
  out.values.reserve(static_cast<std::size_t>(n));
  out.vectors.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values.push_back(solver.eigenvalues()(k));
    out.vectors.push_back(StateVector::from_eigen(solver.eigenvectors().col(k)));
  }
  return out;
}

std::vector<double> hermitian_eigenvalues(const Operator& op) {
  require_hermitian(op, "hermitian_eigenvalues");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(op.matrix(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw DomainError("eigendecomposition failed");
  const auto& v = solver.eigenvalues();
  return {v.data(), v.data() + v.size()};
}

double trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma) {
  require_same_dim(rho.dim(), sigma.dim(), "trace_distance");
  double acc = 0.0;
  for (double l : hermitian_eigenvalues(rho.op() - sigma.op())) acc += std::abs(l);
  return 0.5 * acc;
}

Operator operator_sqrt(const Operator& op) {
  require_hermitian(op, "operator_sqrt");
  return spectral_map(op, [](double l, double) { return l > 0.0 ? std::sqrt(l) : 0.0; }, 0.0);
}

Operator operator_sqrt_inv(const Operator& op, double cutoff) {
  require_hermitian(op, "operator_sqrt_inv");
  return spectral_map(op, [](double l, double c) { return l > c ? 1.0 / std::sqrt(l) : 0.0; }, cutoff);
}

}  // namespace qbc
