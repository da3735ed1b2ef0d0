#include "qbc/substrate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qbc/error.hpp"

namespace qbc {

std::string_view to_string(Party p) {
  switch (p) {
    case Party::Alice:
      return "Alice";
    case Party::Bob:
      return "Bob";
    case Party::Referee:
      return "Referee";
  }
  return "?";
}

namespace {

// Amplitudes this small are rounding residue of exact cancellations.
constexpr double kPruneSq = 1e-34;

void check_orthonormal(std::span<const StateVector> vs, std::size_t dim) {
  for (std::size_t a = 0; a < vs.size(); ++a) {
    if (vs[a].dim() != dim) throw DimensionError("measurement vector dimension mismatch");
    for (std::size_t b = a; b < vs.size(); ++b) {
      const Amplitude g = inner_product(vs[a], vs[b]);
      const Amplitude expect = a == b ? Amplitude{1.0} : Amplitude{};
      if (std::abs(g - expect) > kTolEq) throw MeasurementError("measurement vectors are not orthonormal");
    }
  }
}

void check_psd(const Operator& e) {
  if (!e.hermitian()) throw MeasurementError("measurement element is not Hermitian");
  const auto ev = hermitian_eigenvalues(e);
  if (ev.front() < -kTolEq) throw MeasurementError("measurement element is not positive semidefinite");
}

void check_complete(std::span<const Operator> elements) {
  if (elements.empty()) throw MeasurementError("empty measurement");
  const std::size_t d = elements.front().dim();
  Operator sum = Operator::zero(d);
  for (const auto& e : elements) {
    if (e.dim() != d) throw DimensionError("measurement elements differ in dimension");
    sum = sum + e;
  }
  if (sum.max_abs_diff(Operator::identity(d)) > kTolEq)
    throw MeasurementError("measurement elements do not sum to the identity");
}

// Position bookkeeping for a subset of factors ("targets") inside a group.
class Layout {
 public:
  Layout(std::span<const std::size_t> dims, std::vector<std::size_t> target_pos) : dims_(dims.begin(), dims.end()) {
    strides_.assign(dims_.size(), 1);
    for (std::size_t f = dims_.size(); f-- > 1;) strides_[f - 1] = strides_[f] * dims_[f];
    std::vector<bool> is_target(dims_.size(), false);
    for (auto p : target_pos) is_target[p] = true;
    target_ = std::move(target_pos);
    for (std::size_t f = 0; f < dims_.size(); ++f)
      if (!is_target[f]) rest_.push_back(f);
    target_dim_ = 1;
    for (auto p : target_) target_dim_ *= dims_[p];
    rest_dim_ = 1;
    for (auto p : rest_) rest_dim_ *= dims_[p];
  }

  std::size_t target_dim() const { return target_dim_; }
  std::size_t rest_dim() const { return rest_dim_; }
  const std::vector<std::size_t>& rest_positions() const { return rest_; }

  std::pair<std::size_t, std::size_t> split(std::size_t idx) const {
    std::size_t t = 0, r = 0;
    for (auto p : target_) t = t * dims_[p] + (idx / strides_[p]) % dims_[p];
    for (auto p : rest_) r = r * dims_[p] + (idx / strides_[p]) % dims_[p];
    return {t, r};
  }

  std::size_t join(std::size_t t, std::size_t r) const {
    std::size_t idx = 0;
    for (std::size_t k = target_.size(); k-- > 0;) {
      const auto p = target_[k];
      idx += (t % dims_[p]) * strides_[p];
      t /= dims_[p];
    }
    for (std::size_t k = rest_.size(); k-- > 0;) {
      const auto p = rest_[k];
      idx += (r % dims_[p]) * strides_[p];
      r /= dims_[p];
    }
    return idx;
  }

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> strides_;
  std::vector<std::size_t> target_;
  std::vector<std::size_t> rest_;
  std::size_t target_dim_ = 1;
  std::size_t rest_dim_ = 1;
};

struct Column {
  std::size_t rest;
  StateVector amps;  // over the target space
};

// Splits a joint state into columns over the target space, one per populated
// rest index.
std::vector<Column> columns_of(const StateVector& state, const Layout& layout) {
  struct Item {
    std::size_t r, t;
    Amplitude v;
  };
  std::vector<Item> items;
  items.reserve(state.nonzero_count());
  state.for_each_nonzero([&](std::size_t idx, Amplitude v) {
    const auto [t, r] = layout.split(idx);
    items.push_back({r, t, v});
  });
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.r != b.r ? a.r < b.r : a.t < b.t; });
  std::vector<Column> cols;
  for (std::size_t begin = 0; begin < items.size();) {
    std::size_t end = begin;
    std::vector<SparseEntry> e;
    while (end < items.size() && items[end].r == items[begin].r) {
      e.push_back({items[end].t, items[end].v});
      ++end;
    }
    cols.push_back({items[begin].r, StateVector::sparse(layout.target_dim(), std::move(e))});
    begin = end;
  }
  return cols;
}

// Columns side by side as a dense target_dim × columns matrix.
Matrix column_matrix(const std::vector<Column>& cols, std::size_t target_dim) {
  Matrix c = Matrix::Zero(static_cast<Eigen::Index>(target_dim), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k)
    cols[k].amps.for_each_nonzero(
        [&](std::size_t t, Amplitude v) { c(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) = v; });
  return c;
}

// Re tr(A B) for Hermitian B, as a real dot product of the entry arrays.
double trace_product(const Matrix& a, const Matrix& b_hermitian) {
  const auto n = 2 * a.size();
  const Eigen::Map<const Eigen::VectorXd> x(reinterpret_cast<const double*>(a.data()), n);
  const Eigen::Map<const Eigen::VectorXd> y(reinterpret_cast<const double*>(b_hermitian.data()), n);
  return x.dot(y);
}

bool any_dense(std::span<const Effect> effects) {
  return std::any_of(effects.begin(), effects.end(), [](const Effect& e) { return e.is_dense(); });
}

std::vector<double> outcome_probabilities(const std::vector<Column>& cols, std::span<const Effect> effects,
                                          const Matrix* block) {
  std::vector<double> p(effects.size(), 0.0);
  // With dense elements, tr(E ρ) against the reduced state replaces per-column work.
  Matrix rho;
  if (block) rho = (*block) * block->adjoint();
  for (std::size_t k = 0; k < effects.size(); ++k) {
    if (effects[k].is_dense() && block) {
      p[k] = trace_product(effects[k].element().matrix(), rho);
    } else {
      for (const auto& c : cols) p[k] += effects[k].weight(c.amps);
    }
    p[k] = std::clamp(p[k], 0.0, 1.0);
  }
  return p;
}

StateVector apply_outcome(const std::vector<Column>& cols, const Effect& effect, const Layout& layout,
                          std::size_t joint_dim, double probability, const Matrix* block) {
  const double scale = 1.0 / std::sqrt(probability);
  std::vector<SparseEntry> out;
  if (effect.is_dense() && block) {
    const Matrix kc = effect.kraus_operator().matrix() * (*block);
    for (Eigen::Index k = 0; k < kc.cols(); ++k)
      for (Eigen::Index t = 0; t < kc.rows(); ++t) {
        const Amplitude v = kc(t, k);
        if (std::norm(v) > kPruneSq)
          out.push_back({layout.join(static_cast<std::size_t>(t), cols[static_cast<std::size_t>(k)].rest), v * scale});
      }
    return StateVector::sparse(joint_dim, std::move(out));
  }
  for (const auto& c : cols) {
    effect.kraus(c.amps).for_each_nonzero([&](std::size_t t, Amplitude v) {
      if (std::norm(v) > kPruneSq) out.push_back({layout.join(t, c.rest), v * scale});
    });
  }
  return StateVector::sparse(joint_dim, std::move(out));
}

}  // namespace

// ---------------------------------------------------------------------------
// Effect / measurements

Effect Effect::span_projector(std::size_t dim, std::vector<StateVector> orthonormal) {
  check_orthonormal(orthonormal, dim);
  Effect e;
  e.kind_ = Kind::Span;
  e.dim_ = dim;
  e.vectors_ = std::move(orthonormal);
  return e;
}

Effect Effect::complement_projector(std::size_t dim, std::vector<StateVector> orthonormal) {
  check_orthonormal(orthonormal, dim);
  Effect e;
  e.kind_ = Kind::Complement;
  e.dim_ = dim;
  e.vectors_ = std::move(orthonormal);
  return e;
}

Effect Effect::dense(Operator element) {
  check_psd(element);
  Effect e;
  e.kind_ = Kind::Dense;
  e.dim_ = element.dim();
  e.kraus_ = operator_sqrt(element);
  e.element_ = std::move(element);
  return e;
}

double Effect::weight(const StateVector& column) const {
  if (column.dim() != dim_) throw DimensionError("effect applied to a column of the wrong dimension");
  switch (kind_) {
    case Kind::Span: {
      double w = 0.0;
      for (const auto& v : vectors_) w += std::norm(inner_product(v, column));
      return w;
    }
    case Kind::Complement: {
      double w = column.norm_squared();
      for (const auto& v : vectors_) w -= std::norm(inner_product(v, column));
      return std::max(w, 0.0);
    }
    case Kind::Dense:
      return element_.expectation(column).real();
  }
  return 0.0;
}

StateVector Effect::kraus(const StateVector& column) const {
  if (column.dim() != dim_) throw DimensionError("effect applied to a column of the wrong dimension");
  switch (kind_) {
    case Kind::Span: {
      StateVector acc = StateVector::zero(dim_);
      for (const auto& v : vectors_) acc = axpy(acc, inner_product(v, column), v);
      return acc;
    }
    case Kind::Complement: {
      StateVector acc = column;
      for (const auto& v : vectors_) acc = axpy(acc, -inner_product(v, column), v);
      return acc;
    }
    case Kind::Dense:
      return kraus_.apply(column);
  }
  return column;
}

Operator Effect::to_operator() const {
  switch (kind_) {
    case Kind::Span: {
      Operator acc = Operator::zero(dim_);
      for (const auto& v : vectors_) acc = acc + Operator::projector(v);
      return acc;
    }
    case Kind::Complement: {
      Operator acc = Operator::identity(dim_);
      for (const auto& v : vectors_) acc = acc - Operator::projector(v);
      return acc;
    }
    case Kind::Dense:
      return element_;
  }
  return element_;
}

ProjectiveMeasurement ProjectiveMeasurement::onto_vectors(std::size_t dim, std::vector<StateVector> orthonormal) {
  if (orthonormal.empty()) throw MeasurementError("projective measurement needs at least one vector");
  if (orthonormal.size() > dim) throw MeasurementError("more orthonormal vectors than dimensions");
  check_orthonormal(orthonormal, dim);
  ProjectiveMeasurement m;
  m.dim_ = dim;
  m.effects_.reserve(orthonormal.size() + 1);
  for (const auto& v : orthonormal) m.effects_.push_back(Effect::span_projector(dim, {v}));
  if (orthonormal.size() < dim) m.effects_.push_back(Effect::complement_projector(dim, std::move(orthonormal)));
  return m;
}

ProjectiveMeasurement ProjectiveMeasurement::computational(std::size_t dim) {
  ProjectiveMeasurement m;
  m.dim_ = dim;
  m.effects_.reserve(dim);
  for (std::size_t k = 0; k < dim; ++k) m.effects_.push_back(Effect::span_projector(dim, {StateVector::basis(dim, k)}));
  return m;
}

ProjectiveMeasurement ProjectiveMeasurement::binary(const StateVector& v) { return subspace(v.dim(), {v}); }

ProjectiveMeasurement ProjectiveMeasurement::subspace(std::size_t dim, std::vector<StateVector> orthonormal) {
  ProjectiveMeasurement m;
  m.dim_ = dim;
  m.effects_.push_back(Effect::span_projector(dim, orthonormal));
  m.effects_.push_back(Effect::complement_projector(dim, std::move(orthonormal)));
  return m;
}

ProjectiveMeasurement ProjectiveMeasurement::from_projectors(std::vector<Operator> projectors) {
  check_complete(projectors);
  for (std::size_t a = 0; a < projectors.size(); ++a) {
    if (!projectors[a].hermitian()) throw MeasurementError("projector is not Hermitian");
    if ((projectors[a] * projectors[a]).max_abs_diff(projectors[a]) > kTolEq)
      throw MeasurementError("projector is not idempotent");
    for (std::size_t b = a + 1; b < projectors.size(); ++b)
      if ((projectors[a] * projectors[b]).max_abs_diff(Operator::zero(projectors[a].dim())) > kTolEq)
        throw MeasurementError("projectors are not mutually orthogonal");
  }
  ProjectiveMeasurement m;
  m.dim_ = projectors.front().dim();
  for (auto& p : projectors) m.effects_.push_back(Effect::dense(std::move(p)));
  return m;
}

Povm::Povm(std::vector<Operator> elements) {
  check_complete(elements);
  dim_ = elements.front().dim();
  effects_.reserve(elements.size());
  for (const auto& e : elements) effects_.push_back(Effect::dense(e));
  elements_ = std::move(elements);
}

Povm pgm_from_ensemble(std::span<const StateVector> states, std::span<const double> weights, double cutoff) {
  if (states.empty() || states.size() != weights.size())
    throw DimensionError("ensemble needs one weight per state");
  const std::size_t d = states.front().dim();
  double total = 0.0;
  for (std::size_t k = 0; k < states.size(); ++k) {
    if (states[k].dim() != d) throw DimensionError("ensemble states differ in dimension");
    if (weights[k] < 0.0) throw DomainError("ensemble weights must be nonnegative");
    if (std::abs(states[k].norm() - 1.0) > kTolNorm) throw DomainError("ensemble states must be normalized");
    total += weights[k];
  }
  if (total == 0.0) throw MeasurementError("degenerate ensemble: all weights are zero");
  if (std::abs(total - 1.0) > kTolNorm) throw DomainError("ensemble weights must sum to 1");

  Matrix s = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < states.size(); ++k) {
    const Eigen::VectorXcd v = states[k].to_eigen();
    s.noalias() += weights[k] * v * v.adjoint();
  }
  const Matrix r = operator_sqrt_inv(Operator(s), cutoff).matrix();

  std::vector<Operator> elements;
  elements.reserve(states.size() + 1);
  Matrix sum = Matrix::Zero(s.rows(), s.cols());
  for (std::size_t k = 0; k < states.size(); ++k) {
    const Eigen::VectorXcd u = r * states[k].to_eigen();
    Matrix e = weights[k] * u * u.adjoint();
    e = 0.5 * (e + e.adjoint()).eval();
    sum += e;
    elements.emplace_back(std::move(e));
  }
  // Completing element on the orthogonal complement of the ensemble support.
  Matrix rest = Matrix::Identity(s.rows(), s.cols()) - sum;
  rest = 0.5 * (rest + rest.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(rest);
  if (solver.eigenvalues().maxCoeff() > kTolEq) {
    Eigen::VectorXd vals = solver.eigenvalues().cwiseMax(0.0);
    elements.emplace_back(Matrix(solver.eigenvectors() * vals.asDiagonal() * solver.eigenvectors().adjoint()));
  }
  return Povm(std::move(elements));
}

// ---------------------------------------------------------------------------
// QuantumWorld

QuantumWorld::QuantumWorld(CounterRng rng) : rng_(rng) {}

RegisterHandle QuantumWorld::create_register(Party owner, StateVector state) {
  if (std::abs(state.norm() - 1.0) > kTolNorm) throw DomainError("register state must be normalized");
  const RegisterId id = registers_.size();
  registers_.push_back({state.dim(), owner, groups_.size()});
  const RegisterHandle h{id, state.dim()};
  groups_.push_back({{id}, std::move(state)});
  return h;
}

std::vector<RegisterHandle> QuantumWorld::create_joint(std::span<const Party> owners, StateVector state,
                                                       const SubsystemShape& shape) {
  shape.check(state.dim());
  if (owners.size() != shape.factors.size()) throw DimensionError("one owner per factor is required");
  if (std::abs(state.norm() - 1.0) > kTolNorm) throw DomainError("joint state must be normalized");
  const std::size_t g = groups_.size();
  std::vector<RegisterHandle> handles;
  std::vector<RegisterId> ids;
  for (std::size_t f = 0; f < shape.factors.size(); ++f) {
    const RegisterId id = registers_.size();
    registers_.push_back({shape.factors[f], owners[f], g});
    handles.push_back({id, shape.factors[f]});
    ids.push_back(id);
  }
  groups_.push_back({std::move(ids), std::move(state)});
  return handles;
}

const QuantumWorld::RegisterRecord& QuantumWorld::record(RegisterHandle reg) const {
  if (reg.id >= registers_.size() || registers_[reg.id].dim != reg.dim)
    throw DomainError("unknown register handle " + std::to_string(reg.id));
  return registers_[reg.id];
}

void QuantumWorld::transfer(RegisterHandle reg, Party to, Party caller) {
  const auto& r = record(reg);
  if (r.owner != caller)
    throw OwnershipError(std::string(to_string(caller)) + " cannot transfer register " + std::to_string(reg.id) +
                         " owned by " + std::string(to_string(r.owner)));
  registers_[reg.id].owner = to;
}

Party QuantumWorld::owner(RegisterHandle reg) const { return record(reg).owner; }

void QuantumWorld::check_owner(std::span<const RegisterHandle> targets, Party caller) const {
  if (targets.empty()) throw DimensionError("no target registers");
  for (std::size_t a = 0; a < targets.size(); ++a) {
    const auto& r = record(targets[a]);
    if (r.owner != caller)
      throw OwnershipError(std::string(to_string(caller)) + " cannot act on register " +
                           std::to_string(targets[a].id) + " owned by " + std::string(to_string(r.owner)));
    for (std::size_t b = a + 1; b < targets.size(); ++b)
      if (targets[a].id == targets[b].id) throw DimensionError("duplicate target register");
  }
}

std::size_t QuantumWorld::group_for(std::span<const RegisterHandle> targets) const {
  const std::size_t g = record(targets.front()).group;
  for (const auto& t : targets)
    if (record(t).group != g) return static_cast<std::size_t>(-1);
  return g;
}

std::size_t QuantumWorld::merge_groups(std::span<const RegisterHandle> targets) {
  const std::size_t single = group_for(targets);
  if (single != static_cast<std::size_t>(-1)) return single;
  std::vector<std::size_t> gs;
  for (const auto& t : targets) {
    const std::size_t g = record(t).group;
    if (std::find(gs.begin(), gs.end(), g) == gs.end()) gs.push_back(g);
  }
  Group merged{groups_[gs.front()].factors, groups_[gs.front()].state};
  for (std::size_t k = 1; k < gs.size(); ++k) {
    auto& src = groups_[gs[k]];
    merged.state = tensor_product(merged.state, src.state);
    merged.factors.insert(merged.factors.end(), src.factors.begin(), src.factors.end());
  }
  const std::size_t ng = groups_.size();
  for (auto id : merged.factors) registers_[id].group = ng;
  for (auto g : gs) groups_[g] = Group{};
  groups_.push_back(std::move(merged));
  return ng;
}

namespace {

Layout layout_for(std::span<const RegisterId> factors, std::span<const std::size_t> dims,
                  std::span<const RegisterHandle> targets) {
  std::vector<std::size_t> pos;
  for (const auto& t : targets)
    pos.push_back(static_cast<std::size_t>(std::find(factors.begin(), factors.end(), t.id) - factors.begin()));
  return Layout(dims, std::move(pos));
}

std::size_t target_dim(std::span<const RegisterHandle> targets) {
  std::size_t d = 1;
  for (const auto& t : targets) d *= t.dim;
  return d;
}

}  // namespace

std::vector<double> QuantumWorld::probabilities_unchecked(std::span<const RegisterHandle> targets,
                                                          std::span<const Effect> effects) const {
  if (effects.empty()) throw MeasurementError("empty measurement");
  if (effects.front().dim() != target_dim(targets))
    throw DimensionError("measurement dimension does not match the target registers");
  std::vector<RegisterId> factors;
  StateVector state;
  const std::size_t g = group_for(targets);
  if (g != static_cast<std::size_t>(-1)) {
    factors = groups_[g].factors;
    state = groups_[g].state;
  } else {
    QuantumWorld scratch = *this;
    const std::size_t mg = scratch.merge_groups(targets);
    factors = scratch.groups_[mg].factors;
    state = scratch.groups_[mg].state;
  }
  std::vector<std::size_t> dims;
  for (auto id : factors) dims.push_back(registers_[id].dim);
  const Layout layout = layout_for(factors, dims, targets);
  const auto cols = columns_of(state, layout);
  if (any_dense(effects) && cols.size() > 1) {
    const Matrix block = column_matrix(cols, layout.target_dim());
    return outcome_probabilities(cols, effects, &block);
  }
  return outcome_probabilities(cols, effects, nullptr);
}

std::vector<double> QuantumWorld::born_probabilities(std::span<const RegisterHandle> targets,
                                                     const ProjectiveMeasurement& m, Party caller) const {
  check_owner(targets, caller);
  return probabilities_unchecked(targets, m.effects());
}

std::vector<double> QuantumWorld::born_probabilities(std::span<const RegisterHandle> targets, const Povm& m,
                                                     Party caller) const {
  check_owner(targets, caller);
  return probabilities_unchecked(targets, m.effects());
}

double QuantumWorld::postselect(std::span<const RegisterHandle> targets, std::span<const Effect> effects,
                                std::size_t k) {
  if (k >= effects.size()) throw DomainError("outcome index out of range");
  if (effects.front().dim() != target_dim(targets))
    throw DimensionError("measurement dimension does not match the target registers");
  const std::size_t g = merge_groups(targets);
  auto& group = groups_[g];
  std::vector<std::size_t> dims;
  for (auto id : group.factors) dims.push_back(registers_[id].dim);
  const Layout layout = layout_for(group.factors, dims, targets);
  const auto cols = columns_of(group.state, layout);
  double p = 0.0;
  for (const auto& c : cols) p += effects[k].weight(c.amps);
  if (p <= 0.0) throw DomainError("postselected outcome has zero probability");
  group.state = apply_outcome(cols, effects[k], layout, group.state.dim(), p, nullptr);
  return p;
}

Outcome QuantumWorld::measure_effects(std::span<const RegisterHandle> targets, std::span<const Effect> effects,
                                      Party caller) {
  check_owner(targets, caller);
  if (effects.front().dim() != target_dim(targets))
    throw DimensionError("measurement dimension does not match the target registers");
  const std::size_t g = merge_groups(targets);
  auto& group = groups_[g];
  std::vector<std::size_t> dims;
  for (auto id : group.factors) dims.push_back(registers_[id].dim);
  const Layout layout = layout_for(group.factors, dims, targets);
  const auto cols = columns_of(group.state, layout);
  Matrix block;
  if (any_dense(effects) && cols.size() > 1) block = column_matrix(cols, layout.target_dim());
  const Matrix* bp = block.size() > 0 ? &block : nullptr;
  const auto p = outcome_probabilities(cols, effects, bp);

  const double u = rng_.uniform();
  double total = 0.0;
  for (double x : p) total += x;
  std::size_t k = 0;
  double acc = 0.0;
  std::size_t last_nonzero = 0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p[j] > 0.0) last_nonzero = j;
  }
  k = last_nonzero;
  for (std::size_t j = 0; j < p.size(); ++j) {
    acc += p[j] / total;
    if (u < acc && p[j] > 0.0) {
      k = j;
      break;
    }
  }
  group.state = apply_outcome(cols, effects[k], layout, group.state.dim(), p[k], bp);
  return {k, p[k], group.state};
}

Outcome QuantumWorld::measure(std::span<const RegisterHandle> targets, const ProjectiveMeasurement& m, Party caller) {
  return measure_effects(targets, m.effects(), caller);
}

Outcome QuantumWorld::measure(std::span<const RegisterHandle> targets, const Povm& m, Party caller) {
  return measure_effects(targets, m.effects(), caller);
}

Outcome QuantumWorld::measure(RegisterHandle target, const ProjectiveMeasurement& m, Party caller) {
  return measure_effects({&target, 1}, m.effects(), caller);
}

Outcome QuantumWorld::measure(RegisterHandle target, const Povm& m, Party caller) {
  return measure_effects({&target, 1}, m.effects(), caller);
}

void QuantumWorld::apply_unitary(std::span<const RegisterHandle> targets, const Operator& u, Party caller) {
  check_owner(targets, caller);
  if (u.dim() != target_dim(targets)) throw DimensionError("unitary dimension does not match the target registers");
  if ((u.adjoint() * u).max_abs_diff(Operator::identity(u.dim())) > kTolEq)
    throw DomainError("operator is not unitary");
  const std::size_t g = merge_groups(targets);
  auto& group = groups_[g];
  std::vector<std::size_t> dims;
  for (auto id : group.factors) dims.push_back(registers_[id].dim);
  const Layout layout = layout_for(group.factors, dims, targets);
  std::vector<SparseEntry> out;
  for (const auto& c : columns_of(group.state, layout)) {
    u.apply(c.amps).for_each_nonzero([&](std::size_t t, Amplitude v) {
      if (std::norm(v) > kPruneSq) out.push_back({layout.join(t, c.rest), v});
    });
  }
  group.state = StateVector::sparse(group.state.dim(), std::move(out));
}

std::vector<RegisterHandle> QuantumWorld::group_members(RegisterHandle reg) const {
  const auto& g = groups_[record(reg).group];
  std::vector<RegisterHandle> out;
  for (auto id : g.factors) out.push_back({id, registers_[id].dim});
  return out;
}

const StateVector& QuantumWorld::group_state(RegisterHandle reg) const { return groups_[record(reg).group].state; }

Operator haar_unitary(std::size_t dim, CounterRng& rng) {
  const auto d = static_cast<Eigen::Index>(dim);
  Matrix z(d, d);
  const double s = 1.0 / std::sqrt(2.0);
  for (Eigen::Index c = 0; c < d; ++c)
    for (Eigen::Index r = 0; r < d; ++r) z(r, c) = Amplitude(s * rng.normal(), s * rng.normal());
  Eigen::HouseholderQR<Matrix> qr(z);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index k = 0; k < d; ++k) {
    const Amplitude diag = r(k, k);
    q.col(k) *= diag / std::abs(diag);
  }
  return Operator(std::move(q));
}

namespace oracle {

Collapse conditional_collapse_oracle(const QuantumWorld& world, RegisterHandle reg, const StateVector& target) {
  if (target.dim() != reg.dim) throw DimensionError("collapse target dimension does not match the register");
  const auto members = world.group_members(reg);
  std::vector<RegisterId> factors;
  std::vector<std::size_t> dims;
  for (const auto& m : members) {
    factors.push_back(m.id);
    dims.push_back(m.dim);
  }
  const Layout layout = layout_for(factors, dims, {&reg, 1});
  const StateVector unit_target = target.normalized();
  std::vector<SparseEntry> rest;
  for (const auto& c : columns_of(world.group_state(reg), layout)) {
    const Amplitude a = inner_product(unit_target, c.amps);
    if (a != Amplitude{}) rest.push_back({c.rest, a});
  }
  Collapse out;
  const StateVector conditional = StateVector::sparse(layout.rest_dim(), std::move(rest));
  out.probability = conditional.norm_squared();
  out.post_state = out.probability > 0.0 ? conditional.normalized() : conditional;
  for (auto p : layout.rest_positions()) out.rest.push_back(members[p]);
  return out;
}

DensityMatrix reduced_state(const QuantumWorld& world, RegisterHandle reg) {
  const auto members = world.group_members(reg);
  SubsystemShape shape;
  std::size_t keep = 0;
  for (std::size_t k = 0; k < members.size(); ++k) {
    shape.factors.push_back(members[k].dim);
    if (members[k].id == reg.id) keep = k;
  }
  return reduced_density(world.group_state(reg), shape, keep);
}

}  // namespace oracle

}  // namespace qbc
