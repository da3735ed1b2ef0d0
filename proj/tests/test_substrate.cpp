#include <doctest.h>

#include <cmath>
#include <vector>

#include "qbc/adversary.hpp"
#include "qbc/error.hpp"
#include "qbc/states.hpp"
#include "qbc/substrate.hpp"

using namespace qbc;

namespace {

QuantumWorld fresh(std::uint64_t seed = 1) { return QuantumWorld(CounterRng(seed, 0)); }

std::vector<RegisterHandle> make_omega(QuantumWorld& w, std::size_t n, Party a = Party::Alice, Party b = Party::Alice) {
  const Party owners[2] = {a, b};
  return w.create_joint(owners, states::omega(n), SubsystemShape{{n, n}});
}

std::vector<double> bob_marginal(const QuantumWorld& w, RegisterHandle beta, const ProjectiveMeasurement& m) {
  return w.probabilities_unchecked({&beta, 1}, m.effects());
}

}  // namespace

TEST_SUITE("substrate") {
  TEST_CASE("create_register") {
    auto w = fresh();
    const auto r1 = w.create_register(Party::Alice, states::phi_plus(8, 3));
    const auto r2 = w.create_register(Party::Alice, states::phi_plus(8, 3));
    CHECK(r1.dim == 8);
    CHECK(r1.id != r2.id);
    CHECK(w.owner(r1) == Party::Alice);
    CHECK_THROWS_AS(w.create_register(Party::Alice, StateVector::zero(4)), DomainError);
    CHECK_THROWS_AS(w.create_register(Party::Alice, StateVector::dense({1.0, 1.0})), DomainError);
  }

  TEST_CASE("create_joint") {
    auto w = fresh();
    const auto h = make_omega(w, 8);
    REQUIRE(h.size() == 2);
    CHECK(w.group_members(h[0]) == h);
    CHECK(w.group_state(h[1]).norm() == doctest::Approx(1.0));
    CHECK(oracle::reduced_state(w, h[1]).op().max_abs_diff(states::rho_plus(8).op()) < kTolEq);
    const Party owners[2] = {Party::Alice, Party::Bob};
    CHECK_THROWS_AS(w.create_joint(owners, states::omega(3), SubsystemShape{{3, 4}}), DimensionError);
    const Party one[1] = {Party::Alice};
    CHECK_THROWS_AS(w.create_joint(one, states::omega(3), SubsystemShape{{3, 3}}), DimensionError);
  }

  TEST_CASE("transfer") {
    auto w = fresh();
    const auto h = make_omega(w, 4);
    w.transfer(h[1], Party::Bob, Party::Alice);
    CHECK(w.owner(h[1]) == Party::Bob);
    CHECK(w.group_members(h[1]).size() == 2);
    CHECK_THROWS_AS(w.transfer(h[0], Party::Bob, Party::Bob), OwnershipError);
    w.transfer(h[1], Party::Referee, Party::Bob);
    CHECK(w.owner(h[1]) == Party::Referee);
    CHECK_THROWS_AS(w.owner(RegisterHandle{99, 4}), DomainError);
  }

  TEST_CASE("ownership is enforced on every action") {
    auto w = fresh();
    const auto h = make_omega(w, 4);
    w.transfer(h[1], Party::Bob, Party::Alice);
    const auto m = ProjectiveMeasurement::computational(4);
    CHECK_THROWS_AS(w.measure(h[0], m, Party::Bob), OwnershipError);
    CHECK_THROWS_AS(w.measure(h[1], m, Party::Alice), OwnershipError);
    CHECK_THROWS_AS(w.born_probabilities({&h[0], 1}, m, Party::Bob), OwnershipError);
    CHECK_THROWS_AS(w.apply_unitary({&h[1], 1}, Operator::identity(4), Party::Alice), OwnershipError);
    CHECK_NOTHROW(w.measure(h[1], m, Party::Bob));
  }

  TEST_CASE("Born weight of phi_{n-} on beta is 2/n") {
    for (std::size_t n : {3u, 5u, 8u, 16u}) {
      auto w = fresh();
      const auto h = make_omega(w, n);
      const auto m = ProjectiveMeasurement::binary(states::phi_n_minus(n));
      const auto p = w.born_probabilities({&h[1], 1}, m, Party::Alice);
      CHECK(std::abs(p[0] - 2.0 / static_cast<double>(n)) < 1e-10);
    }
    auto w = fresh();
    const auto h = make_omega(w, 8);
    CHECK(w.born_probabilities({&h[1], 1}, ProjectiveMeasurement::binary(states::phi_n_minus(8)), Party::Alice)[0] ==
          doctest::Approx(0.25).epsilon(1e-12));
  }

  TEST_CASE("measuring alpha in the computational basis collapses beta to phi_plus") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto w = fresh(seed);
      const std::size_t n = 6;
      const auto h = make_omega(w, n);
      const auto out = w.measure(h[0], ProjectiveMeasurement::computational(n), Party::Alice);
      REQUIRE(out.index >= 1);
      REQUIRE(out.index < n);
      CHECK(out.probability == doctest::Approx(1.0 / (n - 1)));
      const auto beta = oracle::reduced_state(w, h[1]);
      CHECK(beta.op().max_abs_diff(Operator::projector(states::phi_plus(n, out.index))) < 1e-10);
    }
  }

  TEST_CASE("repeated projective measurement repeats its outcome") {
    auto w = fresh(3);
    const auto r = w.create_register(Party::Bob, states::phi_n_minus(5));
    const auto m = ProjectiveMeasurement::computational(5);
    const auto first = w.measure(r, m, Party::Bob);
    for (int k = 0; k < 5; ++k) {
      const auto again = w.measure(r, m, Party::Bob);
      CHECK(again.index == first.index);
      CHECK(again.probability == doctest::Approx(1.0));
    }
  }

  TEST_CASE("born probabilities") {
    auto w = fresh();
    const auto r = w.create_register(Party::Alice, states::phi_n_minus(4));
    const auto p = w.born_probabilities({&r, 1}, ProjectiveMeasurement::computational(4), Party::Alice);
    for (double x : p) CHECK(x == doctest::Approx(0.25));
    CounterRng rng(8, 0);
    const auto h = make_omega(w, 5);
    const auto u = haar_unitary(25, rng);
    std::vector<StateVector> basis;
    for (std::size_t k = 0; k < 25; ++k) basis.push_back(u.apply(StateVector::basis(25, k)));
    const auto joint = w.born_probabilities(h, ProjectiveMeasurement::onto_vectors(25, basis), Party::Alice);
    double sum = 0.0;
    for (double x : joint) {
      CHECK(x >= 0.0);
      sum += x;
    }
    CHECK(std::abs(sum - 1.0) < 1e-10);
  }

  TEST_CASE("measurement construction validates its input") {
    CHECK_THROWS_AS(ProjectiveMeasurement::onto_vectors(3, {StateVector::basis(3, 0), states::phi_plus(3, 1)}),
                    MeasurementError);
    CHECK_THROWS_AS(ProjectiveMeasurement::onto_vectors(3, {StateVector::basis(4, 0)}), DimensionError);
    const auto half = Operator::diagonal(std::vector<double>{0.5, 0.5});
    CHECK_THROWS_AS(Povm({half}), MeasurementError);
    const auto neg = Operator::diagonal(std::vector<double>{1.5, 0.5});
    const auto rest = Operator::diagonal(std::vector<double>{-0.5, 0.5});
    CHECK_THROWS_AS(Povm({neg, rest}), MeasurementError);
    CHECK_NOTHROW(Povm({half, half}));
    CHECK_THROWS_AS(ProjectiveMeasurement::from_projectors({half, half}), MeasurementError);
    const auto p0 = Operator::projector(StateVector::basis(2, 0));
    const auto p1 = Operator::projector(StateVector::basis(2, 1));
    CHECK(ProjectiveMeasurement::from_projectors({p0, p1}).size() == 2);
    CHECK(ProjectiveMeasurement::onto_vectors(4, {StateVector::basis(4, 2)}).size() == 2);
  }

  TEST_CASE("measurement dimension must match the targets") {
    auto w = fresh();
    const auto r = w.create_register(Party::Alice, StateVector::basis(3, 0));
    CHECK_THROWS_AS(w.measure(r, ProjectiveMeasurement::computational(4), Party::Alice), DimensionError);
    CHECK_THROWS_AS(w.apply_unitary({&r, 1}, Operator::identity(2), Party::Alice), DimensionError);
    Matrix nu(3, 3);
    nu << 1, 1, 0, 0, 1, 0, 0, 0, 1;
    CHECK_THROWS_AS(w.apply_unitary({&r, 1}, Operator(nu), Party::Alice), DomainError);
  }

  TEST_CASE("PGM of an orthonormal ensemble is the projective measurement") {
    std::vector<StateVector> s{StateVector::basis(3, 0), StateVector::basis(3, 1), StateVector::basis(3, 2)};
    const std::vector<double> wts{1.0 / 3, 1.0 / 3, 1.0 / 3};
    const auto m = pgm_from_ensemble(s, wts);
    REQUIRE(m.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) CHECK(m.elements()[k].max_abs_diff(Operator::projector(s[k])) < 1e-12);
  }

  TEST_CASE("PGM of the minus-family ensemble is complete and positive") {
    for (std::size_t n : {3u, 8u, 16u}) {
      const auto e = minus_family_ensemble(n);
      const auto m = pgm_from_ensemble(e.states, e.weights);
      Operator sum = Operator::zero(n);
      for (const auto& el : m.elements()) {
        sum = sum + el;
        CHECK(hermitian_eigenvalues(el).front() > -1e-10);
      }
      CHECK(sum.max_abs_diff(Operator::identity(n)) < 1e-10);
    }
  }

  TEST_CASE("PGM of a single state is projector plus complement") {
    const auto v = states::phi_plus(4, 2);
    const std::vector<StateVector> s{v};
    const std::vector<double> wts{1.0};
    const auto m = pgm_from_ensemble(s, wts);
    REQUIRE(m.size() == 2);
    CHECK(m.elements()[0].max_abs_diff(Operator::projector(v)) < 1e-12);
    CHECK(m.elements()[1].max_abs_diff(Operator::identity(4) - Operator::projector(v)) < 1e-12);
  }

  TEST_CASE("PGM rejects bad weights") {
    const std::vector<StateVector> s{StateVector::basis(2, 0), StateVector::basis(2, 1)};
    CHECK_THROWS_AS(pgm_from_ensemble(s, std::vector<double>{0.0, 0.0}), MeasurementError);
    CHECK_THROWS_AS(pgm_from_ensemble(s, std::vector<double>{-0.5, 1.5}), DomainError);
    CHECK_THROWS_AS(pgm_from_ensemble(s, std::vector<double>{0.5, 0.6}), DomainError);
    CHECK_THROWS_AS(pgm_from_ensemble(s, std::vector<double>{1.0}), DimensionError);
  }

  TEST_CASE("POVM post-measurement state uses the square root of the element") {
    auto w = fresh(2);
    const auto r = w.create_register(Party::Alice, states::phi_n_minus(3));
    const auto e0 = Operator::diagonal(std::vector<double>{1.0, 0.25, 0.0});
    const auto e1 = Operator::diagonal(std::vector<double>{0.0, 0.75, 1.0});
    const auto out = w.measure(r, Povm({e0, e1}), Party::Alice);
    const double p0 = (1.0 + 0.25) / 3.0;
    if (out.index == 0) {
      CHECK(out.probability == doctest::Approx(p0));
      const auto expect = StateVector::dense({1.0, 0.5, 0.0}).normalized();
      CHECK(equal_up_to_phase(out.post_state, expect));
    } else {
      CHECK(out.probability == doctest::Approx(1.0 - p0));
      const auto expect = StateVector::dense({0.0, std::sqrt(0.75), 1.0}).normalized();
      CHECK(equal_up_to_phase(out.post_state, expect));
    }
    CHECK(out.post_state.norm() == doctest::Approx(1.0));
  }

  TEST_CASE("conditional collapse oracle") {
    for (std::size_t n : {3u, 5u, 8u, 16u}) {
      auto w = fresh();
      const auto h = make_omega(w, n);
      for (std::size_t i = 1; i < n; ++i) {
        const auto c = oracle::conditional_collapse_oracle(w, h[0], states::alpha_tilde_minus(n, i));
        REQUIRE(c.rest.size() == 1);
        CHECK(c.rest[0] == h[1]);
        CHECK(equal_up_to_phase(c.post_state, states::phi_tilde_minus(n, i)));
        const auto p = oracle::conditional_collapse_oracle(w, h[0], states::alpha_plus(n, i));
        CHECK(equal_up_to_phase(p.post_state, states::phi_plus(n, i)));
        CHECK(p.probability == doctest::Approx(1.0 / (n - 1)));
      }
    }
    auto w = fresh();
    const auto r = w.create_register(Party::Alice, states::phi_plus(4, 1));
    CHECK(oracle::conditional_collapse_oracle(w, r, states::phi_plus(4, 1)).probability == doctest::Approx(1.0));
    CHECK_THROWS_AS(oracle::conditional_collapse_oracle(w, r, states::phi_plus(5, 1)), DimensionError);
  }

  TEST_CASE("measuring registers from two groups merges them") {
    auto w = fresh(4);
    const auto a = w.create_register(Party::Alice, states::phi_plus(3, 1));
    const auto b = w.create_register(Party::Alice, StateVector::basis(2, 1));
    const std::vector<RegisterHandle> both{a, b};
    const auto p = w.born_probabilities(both, ProjectiveMeasurement::computational(6), Party::Alice);
    CHECK(p[1] == doctest::Approx(0.5));
    CHECK(p[3] == doctest::Approx(0.5));
    const auto out = w.measure(both, ProjectiveMeasurement::computational(6), Party::Alice);
    CHECK((out.index == 1 || out.index == 3));
    CHECK(w.group_members(a).size() == 2);
  }

  TEST_CASE("sampled frequencies match exact probabilities") {
    const std::size_t n = 5;
    const auto e = minus_family_ensemble(n);
    const auto pgm = pgm_from_ensemble(e.states, e.weights);
    std::vector<double> exact;
    {
      auto w = fresh();
      const auto h = make_omega(w, n);
      exact = w.born_probabilities({&h[0], 1}, pgm, Party::Alice);
    }
    const int trials = 100000;
    std::vector<int> counts(exact.size(), 0);
    for (int t = 0; t < trials; ++t) {
      QuantumWorld w(session_stream(77, static_cast<std::uint64_t>(t), StreamRole::World));
      const auto h = make_omega(w, n);
      ++counts[w.measure(h[0], pgm, Party::Alice).index];
    }
    for (std::size_t k = 0; k < exact.size(); ++k) {
      const double f = static_cast<double>(counts[k]) / trials;
      const double sigma = std::sqrt(exact[k] * (1 - exact[k]) / trials);
      CHECK(std::abs(f - exact[k]) <= 5 * sigma + 1e-12);
    }
  }

  TEST_CASE("no-signaling over random Alice actions") {
    const std::size_t n = 8;
    CounterRng rng(99, 0);
    const auto bob_m = ProjectiveMeasurement::onto_vectors(n, [&] {
      const auto u = haar_unitary(n, rng);
      std::vector<StateVector> v;
      for (std::size_t k = 0; k < n; ++k) v.push_back(u.apply(StateVector::basis(n, k)));
      return v;
    }());
    auto base = fresh();
    const auto h = make_omega(base, n, Party::Alice, Party::Bob);
    const auto before = bob_marginal(base, h[1], bob_m);
    for (int action = 0; action < 100; ++action) {
      const auto u = haar_unitary(n, rng);
      std::vector<double> after(n, 0.0);
      if (action % 2 == 0) {
        auto w = base;
        w.apply_unitary({&h[0], 1}, u, Party::Alice);
        after = bob_marginal(w, h[1], bob_m);
      } else {
        // Measurement in a random basis, averaged over Alice's outcomes.
        std::vector<StateVector> basis;
        for (std::size_t k = 0; k < n; ++k) basis.push_back(u.apply(StateVector::basis(n, k)));
        const auto am = ProjectiveMeasurement::onto_vectors(n, basis);
        const auto pa = base.born_probabilities({&h[0], 1}, am, Party::Alice);
        for (std::size_t k = 0; k < n; ++k) {
          if (pa[k] < 1e-15) continue;
          auto w = base;
          w.postselect({&h[0], 1}, am.effects(), k);
          const auto cond = bob_marginal(w, h[1], bob_m);
          for (std::size_t x = 0; x < n; ++x) after[x] += pa[k] * cond[x];
        }
      }
      double diff = 0.0;
      for (std::size_t x = 0; x < n; ++x) diff = std::max(diff, std::abs(after[x] - before[x]));
      CHECK(diff <= 1e-10);
    }
  }

  TEST_CASE("same seed, same outcomes") {
    auto run = [](std::uint64_t seed) {
      auto w = fresh(seed);
      std::vector<std::size_t> out;
      for (int k = 0; k < 50; ++k) {
        const auto h = make_omega(w, 6);
        out.push_back(w.measure(h[0], ProjectiveMeasurement::computational(6), Party::Alice).index);
      }
      return out;
    };
    CHECK(run(5) == run(5));
    CHECK(run(5) != run(6));
  }

  TEST_CASE("haar_unitary is unitary") {
    CounterRng rng(1, 1);
    for (std::size_t d : {1u, 2u, 7u, 32u}) {
      const auto u = haar_unitary(d, rng);
      CHECK((u.adjoint() * u).max_abs_diff(Operator::identity(d)) < 1e-12);
    }
  }
}
