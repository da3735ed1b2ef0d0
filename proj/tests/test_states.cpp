#include <doctest.h>

#include <cmath>
#include <vector>

#include "qbc/error.hpp"
#include "qbc/states.hpp"

using namespace qbc;
using namespace qbc::states;

namespace {

const std::vector<std::size_t> kLadder{3, 4, 5, 8, 16, 32, 64};

double nd(std::size_t n) { return static_cast<double>(n); }

// Overlap of two committed states computed from the amplitude formula alone:
// only the |0⟩ and |i⟩ components can meet.
double mismatch_oracle(int b, std::size_t i, int b2, std::size_t i2) {
  const double s1 = b ? -1.0 : 1.0;
  const double s2 = b2 ? -1.0 : 1.0;
  const double ov = 0.5 * (1.0 + (i == i2 ? s1 * s2 : 0.0));
  return ov * ov;
}

}  // namespace

TEST_SUITE("states") {
  TEST_CASE("phi_plus and phi_minus amplitudes") {
    const auto p = phi_plus(3, 1);
    const double r = 1 / std::sqrt(2.0);
    CHECK(std::abs(p[0] - r) < 1e-15);
    CHECK(std::abs(p[1] - r) < 1e-15);
    CHECK(p[2] == Amplitude{});
    CHECK(p.nonzero_count() == 2);
    const auto m = phi_minus(9, 4);
    CHECK(std::abs(m[4] + r) < 1e-15);
    CHECK(m.norm() == doctest::Approx(1.0));
    CHECK_THROWS_AS(phi_plus(3, 3), DomainError);
    CHECK_THROWS_AS(phi_minus(3, 0), DomainError);
  }

  TEST_CASE("committed state signs") {
    const auto c = committed_state(10, 1, 7);
    CHECK(c[0].real() > 0);
    CHECK(c[7].real() < 0);
    CHECK(c.nonzero_count() == 2);
    CHECK_THROWS_AS(committed_state(10, 2, 7), DomainError);
  }

  TEST_CASE("phi_n_minus") {
    const auto v = phi_n_minus(4);
    for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(v[k] - 0.5) < 1e-15);
    for (auto n : kLadder) {
      CHECK(phi_n_minus(n).norm() == doctest::Approx(1.0));
      for (std::size_t i = 1; i < n; ++i) CHECK(std::abs(inner_product(phi_n_minus(n), phi_minus(n, i))) < 1e-15);
    }
    const auto embedded = phi_n_minus(4, 10);
    CHECK(embedded.dim() == 10);
    CHECK(embedded[5] == Amplitude{});
    CHECK_THROWS_AS(phi_n_minus(2), DomainError);
    CHECK_THROWS_AS(phi_n_minus(5, 4), DimensionError);
  }

  TEST_CASE("omega structure") {
    for (auto n : kLadder) {
      const auto w = omega(n);
      CHECK(w.dim() == n * n);
      CHECK(w.nonzero_count() == 2 * (n - 1));
      CHECK(w.norm() == doctest::Approx(1.0).epsilon(1e-14));
      // No weight on α index 0.
      for (std::size_t b = 0; b < n; ++b) CHECK(w[b] == Amplitude{});
    }
    CHECK_THROWS_AS(omega(2), DomainError);
  }

  TEST_CASE("omega traces to rho_plus") {
    for (std::size_t n : {3u, 8u, 17u}) {
      const auto r = reduced_density(omega(n), SubsystemShape{{n, n}}, 1);
      CHECK(r.op().max_abs_diff(rho_plus(n).op()) < kTolEq);
    }
  }

  TEST_CASE("alpha_tilde_minus") {
    for (auto n : kLadder) {
      for (std::size_t i : {std::size_t{1}, n / 2, n - 1}) {
        const auto a = alpha_tilde_minus(n, i);
        CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(a[0] == Amplitude{});
        const double ov = std::norm(inner_product(alpha_plus(n, i), a));
        CHECK(std::abs(ov - (1.0 - 4.0 / (nd(n) + 2.0))) < 1e-10);
      }
    }
    CHECK(std::norm(inner_product(alpha_plus(6, 2), alpha_tilde_minus(6, 2))) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK_THROWS_AS(alpha_tilde_minus(2, 1), DomainError);
  }

  TEST_CASE("alpha_tilde family is not orthogonal") {
    // n = 3 by hand: ᾱ_1− = (−1, 2)/√5, ᾱ_2− = (2, −1)/√5 on |1⟩,|2⟩; overlap −4/5.
    CHECK(inner_product(alpha_tilde_minus(3, 1), alpha_tilde_minus(3, 2)).real() ==
          doctest::Approx(-0.8).epsilon(1e-14));
    CHECK(std::abs(inner_product(alpha_tilde_minus(5, 1), alpha_tilde_minus(5, 3))) > 0.1);
  }

  TEST_CASE("alpha_tilde_n_minus is uniform on the populated basis") {
    const auto a = alpha_tilde_n_minus(5);
    CHECK(a[0] == Amplitude{});
    for (std::size_t k = 1; k < 5; ++k) CHECK(std::abs(a[k] - 0.5) < 1e-15);
  }

  TEST_CASE("c_prime") {
    CHECK(c_prime(3) == doctest::Approx(std::sqrt(30.0 / 11.0)).epsilon(1e-14));
    CHECK(c_prime(10) == doctest::Approx(std::sqrt(10.0 * 9 * 12 / 102)).epsilon(1e-14));
  }

  TEST_CASE("phi_tilde_minus is the normalized collapse state") {
    for (auto n : kLadder) {
      for (std::size_t i = 1; i < n; ++i) {
        const auto t = phi_tilde_minus(n, i);
        CHECK(std::abs(t.norm() - 1.0) < kTolNorm);
        CHECK(std::abs(inner_product(phi_plus(n, i), t)) <= 1e-12);
        CHECK(std::abs(inner_product(phi_minus(n, i), t).real() - std::sqrt(1.0 - 2.0 / nd(n))) < 1e-10);
      }
    }
    CHECK(inner_product(phi_minus(3, 1), phi_tilde_minus(3, 1)).real() ==
          doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-12));
  }

  TEST_CASE("literal c-prime expression") {
    CHECK(inner_product(phi_minus(3, 1), phi_tilde_minus_cprime(3, 1)).real() ==
          doctest::Approx(0.522233).epsilon(1e-6));
    CHECK(inner_product(phi_minus(3, 1), phi_tilde_minus_cprime(3, 1)).real() ==
          doctest::Approx(std::sqrt(3.0 / 11.0)).epsilon(1e-13));
    for (auto n : kLadder) {
      const auto lit = phi_tilde_minus_cprime(n, 1);
      const double expect = std::sqrt((1.0 - (2.0 * nd(n) + 2.0) / (nd(n) * nd(n) + 2.0)) / (1.0 - 2.0 / nd(n)));
      CHECK(std::abs(lit.norm() - expect) < 1e-12);
      // Same direction as the normalized state.
      CHECK(equal_up_to_phase(lit.normalized(), phi_tilde_minus(n, 1)));
      CHECK(std::abs(inner_product(phi_plus(n, 1), lit)) <= 1e-12);
    }
  }

  TEST_CASE("rho_plus and rho_minus") {
    for (std::size_t n : {2u, 3u, 9u}) {
      CHECK(std::abs(rho_plus(n).op().trace() - 1.0) < kTolNorm);
      CHECK(std::abs(rho_minus(n).op().trace() - 1.0) < kTolNorm);
    }
    CHECK(trace_distance(rho_plus(17), rho_minus(17)) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK_THROWS_AS(rho_plus(1), DomainError);
  }

  TEST_CASE("closed forms") {
    const auto c3 = closed_forms(3);
    CHECK(c3.overlap_alpha_sq == doctest::Approx(0.2));
    CHECK(c3.overlap_phi == doctest::Approx(std::sqrt(3.0 / 11.0)));
    CHECK(c3.overlap_phi_normalized == doctest::Approx(std::sqrt(1.0 / 3.0)));
    CHECK(closed_forms(100).collapse_weight_n_minus == doctest::Approx(0.02));
    CHECK(closed_forms(5).trace_distance == doctest::Approx(0.5));
    double prev = 2.0;
    for (std::size_t n = 3; n < 200; ++n) {
      const double d = closed_forms(n).trace_distance;
      CHECK(d < prev);
      prev = d;
    }
    CHECK_THROWS_AS(closed_forms(2), DomainError);
  }

  TEST_CASE("closed forms agree with the numerics over the ladder") {
    for (auto n : kLadder) {
      const auto c = closed_forms(n);
      CHECK(std::abs(trace_distance(rho_plus(n), rho_minus(n)) - c.trace_distance) < 1e-10);
      for (std::size_t i = 1; i < n; ++i) {
        CHECK(std::abs(inner_product(phi_minus(n, i), phi_tilde_minus_cprime(n, i)).real() - c.overlap_phi) < 1e-10);
        CHECK(std::abs(std::norm(inner_product(alpha_plus(n, i), alpha_tilde_minus(n, i))) - c.overlap_alpha_sq) <
              1e-10);
      }
      // Born weight of φ_{n−} on β.
      double w = 0.0;
      const auto om = omega(n);
      const auto pn = phi_n_minus(n);
      for (std::size_t a = 0; a < n; ++a) {
        Amplitude acc{};
        for (std::size_t b = 0; b < n; ++b) acc += std::conj(pn[b]) * om[a * n + b];
        w += std::norm(acc);
      }
      CHECK(std::abs(w - c.collapse_weight_n_minus) < 1e-12);
    }
  }

  TEST_CASE("decomposition identity") {
    for (std::size_t n = 3; n <= 64; ++n) {
      const auto diff = max_abs_diff(omega_reconstruction_minus(n), omega(n));
      CHECK(diff <= 1e-10);
      if (n == 8) CHECK(diff <= 1e-12);
    }
    CHECK(omega_reconstruction_minus(7).norm() == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("mismatch rule") {
    for (std::size_t n : {3u, 6u, 11u}) {
      for (int b = 0; b < 2; ++b)
        for (int b2 = 0; b2 < 2; ++b2)
          for (std::size_t i = 1; i < n; ++i)
            for (std::size_t i2 = 1; i2 < n; ++i2) {
              const double got = std::norm(inner_product(committed_state(n, b2, i2), committed_state(n, b, i)));
              CHECK(std::abs(got - mismatch_oracle(b, i, b2, i2)) < 1e-14);
            }
    }
    // Flipped bit: (1 − δ_{ii'})/4.
    CHECK(std::norm(inner_product(committed_state(5, 1, 2), committed_state(5, 0, 2))) < 1e-30);
    CHECK(std::norm(inner_product(committed_state(5, 1, 3), committed_state(5, 0, 2))) == doctest::Approx(0.25));
  }
}
