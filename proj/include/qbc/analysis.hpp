#pragma once

// Security arithmetic (cheating bound, parameter planning), the concealing
// curve, binomial confidence intervals and grid sweeps of the attacks.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qbc/adversary.hpp"

namespace qbc {

/// (1 − 2/n_a)^s; n_a ≥ 3.
double cheat_bound(std::uint64_t n_a, std::uint64_t s);

/// Smallest s with cheat_bound(n_a_max, s) ≤ p_a_max; 0 < p_a_max < 1, n_a_max ≥ 3.
std::uint64_t required_s(double p_a_max, std::uint64_t n_a_max);

struct SecurityPlan {
  double p_a_max = 0.0;
  std::uint64_t n_a_max = 0;
  std::uint64_t s_required = 0;
  std::optional<double> delta;
};

SecurityPlan plan_security(double p_a_max, std::uint64_t n_a_max);
/// n_a_max from the device first; throws DomainError if it comes out below 3.
SecurityPlan plan_security(double p_a_max, const DeviceModel& device);

struct ConcealingPoint {
  std::uint64_t n = 0;
  double trace_distance = 0.0;     // 1/√(n−1)
  double helstrom_success = 0.0;   // 1/2 + D/2
  std::optional<double> brute_force;  // eigenvalue route, for n ≤ brute_force_max
};

std::vector<ConcealingPoint> concealing_curve(std::span<const std::uint64_t> ladder,
                                              std::uint64_t brute_force_max = 64);

struct Interval {
  double lower = 0.0;
  double upper = 1.0;
  double half_width = 0.5;
};

/// Wilson score interval for `successes` out of `trials` at z standard deviations.
Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z = 5.0);
/// √(p(1 − p)/trials)
double binomial_sigma(double p, std::uint64_t trials);

enum class SweepStrategy : std::uint8_t { Steering, Snapped, Naive };

struct SweepConfig {
  std::vector<std::uint64_t> n_a{4, 8, 16};
  std::vector<std::uint32_t> s{1, 2, 4, 8};
  std::uint64_t trials = 10000;
  std::uint64_t n_sim = 256;
  std::uint64_t seed = 42;
  SweepStrategy strategy = SweepStrategy::Steering;
  std::uint8_t target_b = 1;
  std::optional<double> delta;  // required by Snapped
  /// Cap on total simulated registers (trials × s summed over cells); cells
  /// past the cap are skipped and marked.
  std::uint64_t register_budget = 50'000'000;
  unsigned threads = 1;
};

struct SweepRow {
  std::uint64_t n_a = 0;
  std::uint32_t s = 0;
  double bound = 0.0;
  double empirical_rate = 0.0;
  std::uint64_t trials = 0;
  double ci_half_width = 0.0;
  std::uint64_t seed = 0;
  std::string status = "ok";  // "ok" or "skipped: register budget exceeded"
};

struct SweepTable {
  SweepConfig config;
  std::vector<SweepRow> rows;
};

inline constexpr const char* kSweepFormatVersion = "qbc-sweep/1";
inline constexpr const char* kSweepCsvHeader = "n_a,s,bound,empirical_rate,trials,ci_half_width,seed";

/// Cells in n_a-major order; cell k runs with seed config.seed + k.
SweepTable sweep(const SweepConfig& config);

std::string to_string(SweepStrategy s);
/// Rows with status "ok" only.
std::string to_csv(const SweepTable& table);
/// {"meta": {...}, "rows": [...]}; skipped rows included with their status.
std::string to_json(const SweepTable& table);

}  // namespace qbc
