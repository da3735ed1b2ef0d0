#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "qbc/adversary.hpp"
#include "qbc/analysis.hpp"
#include "qbc/error.hpp"
#include "qbc/protocol.hpp"
#include "qbc/states.hpp"
#include "qbc/substrate.hpp"

using namespace qbc;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolation = 1;
constexpr int kExitConfig = 2;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::uint64_t seed = 42;
  std::string out;
  std::string format = "csv";
  std::uint64_t trials = 10000;
  unsigned threads = 1;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path + " for writing");
  f << text;
  if (!f.flush()) throw ConfigError("failed writing " + path);
}

void add_common(CLI::App* app, Common& c, bool with_trials) {
  app->add_option("--seed", c.seed, "Master seed")->capture_default_str();
  app->add_option("--out", c.out, "Output path (default: stdout)");
  app->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  if (with_trials) app->add_option("--trials", c.trials, "Number of trials")->capture_default_str();
  app->add_option("--threads", c.threads, "Worker threads (results do not depend on it)")->capture_default_str();
}

// ---------------------------------------------------------------------------
// verify

struct VerifyConfig {
  std::uint64_t n_max = 64;
  double tol = kTolEq;
};

struct IdentityGroup {
  std::string name;
  double max_error = 0.0;
};

std::vector<IdentityGroup> identity_suite(const std::vector<std::size_t>& ladder) {
  std::vector<IdentityGroup> g{{"trace_distance_law", 0},   {"decomposition_identity", 0}, {"phi_tilde_overlap", 0},
                               {"alpha_overlap", 0},        {"phi_orthogonality", 0},      {"steering_collapse", 0},
                               {"n_minus_born_weight", 0},  {"omega_marginal", 0}};
  auto upd = [&](std::size_t k, double e) { g[k].max_error = std::max(g[k].max_error, e); };
  for (auto n : ladder) {
    const double dn = static_cast<double>(n);
    const auto cf = states::closed_forms(n);
    upd(0, std::abs(trace_distance(states::rho_plus(n), states::rho_minus(n)) - 1.0 / std::sqrt(dn - 1.0)));
    upd(1, max_abs_diff(states::omega_reconstruction_minus(n), states::omega(n)));

    QuantumWorld w(CounterRng(0, 0));
    const Party owners[2] = {Party::Alice, Party::Bob};
    const auto h = w.create_joint(owners, states::omega(n), SubsystemShape{{n, n}});
    for (std::size_t i = 1; i < n; ++i) {
      const auto lit = states::phi_tilde_minus_cprime(n, i);
      upd(2, std::abs(inner_product(states::phi_minus(n, i), lit).real() - cf.overlap_phi));
      upd(3, std::abs(std::norm(inner_product(states::alpha_plus(n, i), states::alpha_tilde_minus(n, i))) -
                      cf.overlap_alpha_sq));
      upd(4, std::abs(inner_product(states::phi_plus(n, i), states::phi_tilde_minus(n, i))));
      upd(4, std::abs(inner_product(states::phi_plus(n, i), lit)));
      upd(5, phase_aligned_diff(oracle::conditional_collapse_oracle(w, h[0], states::alpha_plus(n, i)).post_state,
                                states::phi_plus(n, i)));
      upd(5, phase_aligned_diff(oracle::conditional_collapse_oracle(w, h[0], states::alpha_tilde_minus(n, i)).post_state,
                                states::phi_tilde_minus(n, i)));
    }
    const auto leak = ProjectiveMeasurement::binary(states::phi_n_minus(n));
    upd(6, std::abs(w.probabilities_unchecked({&h[1], 1}, leak.effects())[0] - cf.collapse_weight_n_minus));
    upd(7, oracle::reduced_state(w, h[1]).op().max_abs_diff(states::rho_plus(n).op()));
  }
  return g;
}

int cmd_verify(const VerifyConfig& cfg, const Common& c) {
  if (cfg.n_max < 3) throw ConfigError("--n-max must be at least 3");
  if (!(cfg.tol > 0.0)) throw ConfigError("--tol must be positive");
  std::vector<std::size_t> ladder;
  for (std::size_t n : {3, 4, 5, 8, 16, 32, 64})
    if (n <= cfg.n_max) ladder.push_back(n);
  const auto groups = identity_suite(ladder);

  bool ok = true;
  std::string ladder_text;
  for (auto n : ladder) ladder_text += (ladder_text.empty() ? "" : ",") + std::to_string(n);
  std::printf("ladder: %s  tolerance: %g\n", ladder_text.c_str(), cfg.tol);
  for (const auto& g : groups) {
    const bool pass = g.max_error <= cfg.tol;
    ok = ok && pass;
    std::printf("%-24s max_error %.3e  %s\n", g.name.c_str(), g.max_error, pass ? "ok" : "FAIL");
  }
  std::printf("%zu identity groups, %s\n", groups.size(), ok ? "all within tolerance" : "violations found");

  if (!c.out.empty()) {
    std::string text;
    if (c.format == "json") {
      ordered_json doc;
      doc["ladder"] = ladder;
      doc["tolerance"] = cfg.tol;
      doc["groups"] = ordered_json::array();
      for (const auto& g : groups)
        doc["groups"].push_back({{"name", g.name}, {"max_error", g.max_error}, {"pass", g.max_error <= cfg.tol}});
      text = doc.dump(2) + "\n";
    } else {
      text = "group,max_error,pass\n";
      for (const auto& g : groups) text += g.name + "," + num(g.max_error) + "," + (g.max_error <= cfg.tol ? "1" : "0") + "\n";
    }
    emit(text, c.out);
  }
  return ok ? kExitOk : kExitViolation;
}

// ---------------------------------------------------------------------------
// run

struct RunConfig {
  std::uint32_t s = 8;
  std::uint64_t n_sim = 256;
  int bit = -1;  // -1: alternate by session index
};

int cmd_run(const RunConfig& cfg, const Common& c) {
  const ProtocolParams params{cfg.s, cfg.n_sim, c.seed};
  params.validate();
  if (cfg.bit < -1 || cfg.bit > 1) throw ConfigError("--bit must be 0 or 1");
  const int bit = cfg.bit;
  const SessionFactory honest = [bit](std::uint64_t idx) {
    const auto b = static_cast<std::uint8_t>(bit < 0 ? (idx & 1) : bit);
    return SessionPair{std::make_unique<HonestAlice>(b), std::make_unique<HonestBob>()};
  };
  const auto ts = run_sessions(params, honest, 0, c.trials, c.threads);
  std::uint64_t accepted = 0;
  for (const auto& t : ts) accepted += t.verdict.accept ? 1 : 0;
  std::printf("honest sessions: s=%u n_sim=%llu seed=%llu\naccepted %llu/%llu\n", cfg.s,
              static_cast<unsigned long long>(cfg.n_sim), static_cast<unsigned long long>(c.seed),
              static_cast<unsigned long long>(accepted), static_cast<unsigned long long>(c.trials));

  if (!c.out.empty()) {
    auto summary = [](const Transcript& t) {
      const auto& open = std::get<UnveilOpen>(t.messages[t.messages.size() - 2]);
      return std::make_pair(open.b, open.indices);
    };
    std::string text;
    if (c.format == "json") {
      ordered_json rows = ordered_json::array();
      for (const auto& t : ts) {
        const auto [b, idx] = summary(t);
        rows.push_back({{"session", t.session_index},
                        {"b", b},
                        {"indices", idx},
                        {"accept", t.verdict.accept},
                        {"first_failure", t.verdict.first_failure ? ordered_json(*t.verdict.first_failure) : ordered_json(nullptr)}});
      }
      ordered_json doc;
      doc["meta"] = {{"s", cfg.s}, {"n_sim", cfg.n_sim}, {"master_seed", c.seed}, {"sessions", c.trials}};
      doc["sessions"] = std::move(rows);
      text = doc.dump(2) + "\n";
    } else {
      std::ostringstream o;
      o << "session,b,accept,first_failure,indices\n";
      for (const auto& t : ts) {
        const auto [b, idx] = summary(t);
        o << t.session_index << ',' << int(b) << ',' << (t.verdict.accept ? 1 : 0) << ','
          << (t.verdict.first_failure ? std::to_string(*t.verdict.first_failure) : "") << ',';
        for (std::size_t k = 0; k < idx.size(); ++k) o << (k ? " " : "") << idx[k];
        o << '\n';
      }
      text = o.str();
    }
    emit(text, c.out);
  }
  return accepted == c.trials ? kExitOk : kExitViolation;
}

// ---------------------------------------------------------------------------
// attack

struct AttackConfig {
  std::string strategy = "steering";
  std::uint64_t n_a = 8;
  std::uint32_t s = 8;
  std::uint64_t n_sim = 256;
  int target_b = 1;
  std::optional<double> delta;
  std::string index_rule = "different";
  bool oracle = false;
};

int cmd_attack(const AttackConfig& cfg, const Common& c) {
  if (cfg.target_b < 0 || cfg.target_b > 1) throw ConfigError("--target-b must be 0 or 1");
  ordered_json doc;
  doc["format"] = "qbc-attack/1";
  doc["strategy"] = cfg.strategy;
  bool within = true;

  if (cfg.strategy == "helstrom") {
    const auto r = helstrom_attack(cfg.n_sim, c.trials, c.seed, c.threads);
    within = r.success_rate <= r.expected + r.ci_half_width;
    doc["n_sim"] = cfg.n_sim;
    doc["trials"] = r.trials;
    doc["correct"] = r.correct;
    doc["success_rate"] = r.success_rate;
    doc["expected"] = r.expected;
    doc["ci_half_width"] = r.ci_half_width;
    doc["seed"] = r.seed;
  } else {
    const ProtocolParams params{cfg.s, cfg.n_sim, c.seed};
    AttackReport r;
    const auto device = cfg.delta ? std::optional<DeviceModel>(DeviceModel{*cfg.delta}) : std::nullopt;
    const EntangledSteering st{cfg.n_a, static_cast<std::uint8_t>(cfg.target_b),
                               cfg.oracle ? SteeringMeasurement::ExactOracle : SteeringMeasurement::Pgm, device};
    if (cfg.strategy == "naive") {
      const NaiveRedeclare nv{static_cast<std::uint8_t>(1 - cfg.target_b),
                              cfg.index_rule == "same" ? IndexRule::SameIndex : IndexRule::DifferentIndex};
      r = naive_attack(params, nv, c.trials, c.threads);
    } else if (cfg.strategy == "steering") {
      r = steering_attack(params, st, c.trials, c.threads);
    } else {
      if (!device) throw ConfigError("--strategy snapped needs --delta");
      r = snapped_attack(params, st, c.trials, c.threads);
    }
    within = r.acceptance_rate <= r.bound + r.ci_half_width;
    doc["n_a"] = cfg.strategy == "naive" ? ordered_json(nullptr) : ordered_json(cfg.n_a);
    doc["s"] = cfg.s;
    doc["n_sim"] = cfg.n_sim;
    doc["target_b"] = cfg.target_b;
    doc["delta"] = cfg.delta ? ordered_json(*cfg.delta) : ordered_json(nullptr);
    doc["trials"] = r.trials;
    doc["acceptances"] = r.acceptances;
    doc["acceptance_rate"] = r.acceptance_rate;
    doc["bound"] = r.bound;
    doc["ci_half_width"] = r.ci_half_width;
    doc["registers"] = r.registers;
    doc["n_minus_hits"] = r.n_minus_hits;
    doc["seed"] = r.seed;
  }
  doc["within_bound"] = within;

  std::string text;
  if (c.format == "json") {
    text = doc.dump(2) + "\n";
  } else {
    std::string head, row;
    bool first = true;
    for (auto it = doc.begin(); it != doc.end(); ++it, first = false) {
      std::string v;
      if (it->is_string())
        v = it->get<std::string>();
      else if (it->is_number_float())
        v = num(it->get<double>());
      else if (!it->is_null())
        v = it->dump();
      head += (first ? "" : ",") + it.key();
      row += (first ? "" : ",") + v;
    }
    text = head + "\n" + row + "\n";
  }
  emit(text, c.out);
  return within ? kExitOk : kExitViolation;
}

// ---------------------------------------------------------------------------
// plan

struct PlanConfig {
  std::optional<double> p_max;
  std::optional<std::uint64_t> n_a_max;
  std::optional<double> delta;
};

int cmd_plan(const PlanConfig& cfg, const Common& c) {
  const double p = cfg.p_max.value_or(1e-9);
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("--p-max must lie in (0, 1)");
  if (cfg.n_a_max.has_value() == cfg.delta.has_value()) throw ConfigError("give exactly one of --n-a-max and --delta");
  const auto plan = cfg.delta ? plan_security(p, DeviceModel{*cfg.delta}) : plan_security(p, *cfg.n_a_max);

  std::ostringstream o;
  if (c.format == "json") {
    ordered_json doc;
    doc["n_a_max"] = plan.n_a_max;
    doc["delta"] = plan.delta ? ordered_json(*plan.delta) : ordered_json(nullptr);
    doc["p_a_max"] = plan.p_a_max;
    doc["s_required"] = plan.s_required;
    doc["bound_at_s"] = cheat_bound(plan.n_a_max, plan.s_required);
    o << doc.dump(2) << "\n";
  } else {
    o << "n_a_max=" << plan.n_a_max << "\n";
    if (plan.delta) o << "delta=" << num(*plan.delta) << "\n";
    o << "p_a_max=" << num(plan.p_a_max) << "\n";
    o << "s=" << plan.s_required << "\n";
    o << "bound_at_s=" << num(cheat_bound(plan.n_a_max, plan.s_required)) << "\n";
  }
  emit(o.str(), c.out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

int cmd_sweep(SweepConfig cfg, const std::string& strategy, const Common& c) {
  cfg.seed = c.seed;
  cfg.trials = c.trials;
  cfg.threads = c.threads;
  cfg.strategy = strategy == "naive" ? SweepStrategy::Naive
                 : strategy == "snapped" ? SweepStrategy::Snapped
                                         : SweepStrategy::Steering;
  if (cfg.target_b > 1) throw ConfigError("--target-b must be 0 or 1");
  // Fail on an unwritable path before spending time on the grid.
  if (!c.out.empty() && !std::ofstream(c.out, std::ios::app)) throw ConfigError("cannot open " + c.out + " for writing");
  const auto table = sweep(cfg);
  emit(c.format == "json" ? to_json(table) : to_csv(table), c.out);
  for (const auto& r : table.rows)
    if (r.status == "ok" && r.empirical_rate > r.bound + r.ci_half_width) return kExitViolation;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum bit-commitment simulator"};
  app.require_subcommand(1);

  Common common;

  VerifyConfig vcfg;
  auto* verify = app.add_subcommand("verify", "Check the closed-form identities over the n-ladder");
  add_common(verify, common, false);
  verify->add_option("--n-max", vcfg.n_max, "Largest ladder entry")->capture_default_str();
  verify->add_option("--tol", vcfg.tol, "Tolerance on every identity group")->capture_default_str();

  RunConfig rcfg;
  auto* run = app.add_subcommand("run", "Run honest sessions");
  add_common(run, common, true);
  run->add_option("--s", rcfg.s, "Registers per commitment")->capture_default_str();
  run->add_option("--n-sim", rcfg.n_sim, "Register dimension")->capture_default_str();
  run->add_option("--bit", rcfg.bit, "Committed bit (default: alternate per session)");

  AttackConfig acfg;
  auto* attack = app.add_subcommand("attack", "Run a cheating strategy against an honest party");
  add_common(attack, common, true);
  attack->add_option("--strategy", acfg.strategy)
      ->check(CLI::IsMember({"naive", "steering", "snapped", "helstrom"}))
      ->capture_default_str();
  attack->add_option("--n-a", acfg.n_a, "Steering dimension")->capture_default_str();
  attack->add_option("--s", acfg.s, "Registers per commitment")->capture_default_str();
  attack->add_option("--n-sim", acfg.n_sim, "Register dimension")->capture_default_str();
  attack->add_option("--target-b", acfg.target_b, "Bit to unveil")->capture_default_str();
  attack->add_option("--delta", acfg.delta, "Device resolution");
  attack->add_option("--index-rule", acfg.index_rule, "Naive re-declaration index rule")
      ->check(CLI::IsMember({"same", "different"}))
      ->capture_default_str();
  attack->add_flag("--exact-oracle", acfg.oracle, "Steer by fiat postselection instead of the PGM");

  PlanConfig pcfg;
  auto* plan = app.add_subcommand("plan", "Registers needed for a target cheating probability");
  add_common(plan, common, false);
  plan->add_option("--p-max", pcfg.p_max, "Target bound on Alice's success (default 1e-9)");
  plan->add_option("--n-a-max", pcfg.n_a_max, "Largest steering dimension Alice can use");
  plan->add_option("--delta", pcfg.delta, "Device resolution; n_a_max is derived from it");

  SweepConfig scfg;
  std::string sweep_strategy = "steering";
  int sweep_target = 1;
  auto* sw = app.add_subcommand("sweep", "Grid of attack runs over n_a and s");
  add_common(sw, common, true);
  sw->add_option("--n-a", scfg.n_a, "Steering dimensions")->delimiter(',')->capture_default_str();
  sw->add_option("--s", scfg.s, "Register counts")->delimiter(',')->capture_default_str();
  sw->add_option("--n-sim", scfg.n_sim, "Register dimension")->capture_default_str();
  sw->add_option("--strategy", sweep_strategy)->check(CLI::IsMember({"steering", "snapped", "naive"}))->capture_default_str();
  sw->add_option("--target-b", sweep_target, "Bit to unveil")->capture_default_str();
  sw->add_option("--delta", scfg.delta, "Device resolution (snapped)");
  sw->add_option("--register-budget", scfg.register_budget, "Cap on simulated registers")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*verify) return cmd_verify(vcfg, common);
    if (*run) return cmd_run(rcfg, common);
    if (*attack) return cmd_attack(acfg, common);
    if (*plan) return cmd_plan(pcfg, common);
    if (sweep_target < 0 || sweep_target > 1) throw ConfigError("--target-b must be 0 or 1");
    scfg.target_b = static_cast<std::uint8_t>(sweep_target);
    return cmd_sweep(scfg, sweep_strategy, common);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DeviceLimitError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitViolation;
  }
}
