#include "qbc/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "qbc/error.hpp"
#include "qbc/states.hpp"

namespace qbc {

double cheat_bound(std::uint64_t n_a, std::uint64_t s) {
  if (n_a < 3) throw DomainError("cheat_bound needs n_a >= 3");
  return std::pow(1.0 - 2.0 / static_cast<double>(n_a), static_cast<double>(s));
}

std::uint64_t required_s(double p_a_max, std::uint64_t n_a_max) {
  if (!(p_a_max > 0.0 && p_a_max < 1.0)) throw DomainError("p_a_max must lie in (0, 1)");
  if (n_a_max < 3) throw DomainError("n_a_max must be at least 3");
  const double ratio = std::log(p_a_max) / std::log(1.0 - 2.0 / static_cast<double>(n_a_max));
  auto s = static_cast<std::uint64_t>(std::ceil(ratio));
  // The ratio may land a hair off an integer; settle against the bound itself.
  while (s > 0 && cheat_bound(n_a_max, s - 1) <= p_a_max) --s;
  while (cheat_bound(n_a_max, s) > p_a_max) ++s;
  return s;
}

SecurityPlan plan_security(double p_a_max, std::uint64_t n_a_max_value) {
  return {p_a_max, n_a_max_value, required_s(p_a_max, n_a_max_value), std::nullopt};
}

SecurityPlan plan_security(double p_a_max, const DeviceModel& device) {
  const auto n = n_a_max(device);
  if (n < 3) throw DomainError("device delta " + std::to_string(device.delta) + " leaves n_a_max = " +
                               std::to_string(n) + " below 3");
  auto plan = plan_security(p_a_max, n);
  plan.delta = device.delta;
  return plan;
}

std::vector<ConcealingPoint> concealing_curve(std::span<const std::uint64_t> ladder, std::uint64_t brute_force_max) {
  std::vector<ConcealingPoint> out;
  for (auto n : ladder) {
    if (n < 2) throw DomainError("concealing curve needs n >= 2");
    ConcealingPoint p;
    p.n = n;
    p.trace_distance = 1.0 / std::sqrt(static_cast<double>(n - 1));
    p.helstrom_success = 0.5 + 0.5 * p.trace_distance;
    if (n <= brute_force_max) p.brute_force = trace_distance(states::rho_plus(n), states::rho_minus(n));
    out.push_back(p);
  }
  return out;
}

Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z) {
  if (successes > trials) throw DomainError("more successes than trials");
  if (trials == 0) return {};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half), half};
}

double binomial_sigma(double p, std::uint64_t trials) {
  if (trials == 0) throw DomainError("binomial_sigma needs at least one trial");
  return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

std::string to_string(SweepStrategy s) {
  switch (s) {
    case SweepStrategy::Steering:
      return "steering";
    case SweepStrategy::Snapped:
      return "snapped";
    case SweepStrategy::Naive:
      return "naive";
  }
  return "?";
}

SweepTable sweep(const SweepConfig& config) {
  if (config.strategy == SweepStrategy::Snapped && !config.delta)
    throw DomainError("the snapped sweep needs a device delta");
  SweepTable table{config, {}};
  std::uint64_t used = 0;
  std::uint64_t cell = 0;
  for (auto n_a : config.n_a) {
    for (auto s : config.s) {
      SweepRow row;
      row.n_a = n_a;
      row.s = s;
      row.seed = config.seed + cell++;
      row.trials = config.trials;
      const ProtocolParams params{s, config.n_sim, row.seed};
      const std::uint64_t cost = config.trials * s;
      if (used + cost > config.register_budget) {
        row.bound = config.strategy == SweepStrategy::Naive ? std::pow(0.25, s) : cheat_bound(n_a, s);
        row.trials = 0;
        row.status = "skipped: register budget exceeded";
        table.rows.push_back(row);
        continue;
      }
      used += cost;
      AttackReport r;
      EntangledSteering st{n_a, config.target_b, SteeringMeasurement::Pgm, std::nullopt};
      switch (config.strategy) {
        case SweepStrategy::Steering:
          r = steering_attack(params, st, config.trials, config.threads);
          break;
        case SweepStrategy::Snapped:
          st.device = DeviceModel{*config.delta};
          r = snapped_attack(params, st, config.trials, config.threads);
          break;
        case SweepStrategy::Naive:
          r = naive_attack(params, NaiveRedeclare{}, config.trials, config.threads);
          break;
      }
      row.bound = r.bound;
      row.empirical_rate = r.acceptance_rate;
      row.ci_half_width = r.ci_half_width;
      table.rows.push_back(row);
    }
  }
  return table;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

std::string to_csv(const SweepTable& table) {
  std::ostringstream out;
  out << kSweepCsvHeader << '\n';
  for (const auto& r : table.rows) {
    if (r.status != "ok") continue;
    out << r.n_a << ',' << r.s << ',' << num(r.bound) << ',' << num(r.empirical_rate) << ',' << r.trials << ','
        << num(r.ci_half_width) << ',' << r.seed << '\n';
  }
  return out.str();
}

std::string to_json(const SweepTable& table) {
  using nlohmann::ordered_json;
  const auto& c = table.config;
  ordered_json meta;
  meta["format"] = kSweepFormatVersion;
  meta["strategy"] = to_string(c.strategy);
  meta["n_sim"] = c.n_sim;
  meta["target_b"] = c.target_b;
  meta["master_seed"] = c.seed;
  meta["trials_per_cell"] = c.trials;
  meta["register_budget"] = c.register_budget;
  meta["delta"] = c.delta ? ordered_json(*c.delta) : ordered_json(nullptr);
  meta["confidence"] = "wilson, z = 5";
  meta["columns"] = {"n_a", "s", "bound", "empirical_rate", "trials", "ci_half_width", "seed", "status"};
  ordered_json rows = ordered_json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"n_a", r.n_a},
                    {"s", r.s},
                    {"bound", r.bound},
                    {"empirical_rate", r.empirical_rate},
                    {"trials", r.trials},
                    {"ci_half_width", r.ci_half_width},
                    {"seed", r.seed},
                    {"status", r.status}});
  }
  ordered_json doc;
  doc["meta"] = std::move(meta);
  doc["rows"] = std::move(rows);
  return doc.dump(2) + "\n";
}

}  // namespace qbc
