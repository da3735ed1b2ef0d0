#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qbc/adversary.hpp"
#include "qbc/analysis.hpp"
#include "qbc/error.hpp"
#include "qbc/protocol.hpp"
#include "qbc/states.hpp"

namespace py = pybind11;
using namespace qbc;

namespace {

py::dict report_dict(const AttackReport& r) {
  py::dict d;
  d["trials"] = r.trials;
  d["acceptances"] = r.acceptances;
  d["acceptance_rate"] = r.acceptance_rate;
  d["registers"] = r.registers;
  d["n_minus_hits"] = r.n_minus_hits;
  d["bound"] = r.bound;
  d["ci_half_width"] = r.ci_half_width;
  d["seed"] = r.seed;
  return d;
}

std::optional<DeviceModel> device_from(std::optional<double> delta) {
  if (!delta) return std::nullopt;
  return DeviceModel{*delta};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Quantum bit-commitment simulator core";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<MeasurementError>(m, "MeasurementError", base.ptr());
  py::register_exception<OwnershipError>(m, "OwnershipError", base.ptr());
  py::register_exception<ProtocolError>(m, "ProtocolError", base.ptr());
  py::register_exception<DecodeError>(m, "DecodeError", PyExc_ValueError);
  py::register_exception<DeviceLimitError>(m, "DeviceLimitError", PyExc_ValueError);

  // States and closed forms
  m.def("committed_state", [](std::size_t dim, int b, std::size_t i) { return states::committed_state(dim, b, i).to_eigen(); },
        py::arg("dim"), py::arg("b"), py::arg("i"));
  m.def("omega", [](std::size_t n) { return states::omega(n).to_eigen(); }, py::arg("n"));
  m.def("phi_tilde_minus", [](std::size_t n, std::size_t i) { return states::phi_tilde_minus(n, i).to_eigen(); },
        py::arg("n"), py::arg("i"));
  m.def("rho_plus", [](std::size_t n) { return Eigen::MatrixXcd(states::rho_plus(n).op().matrix()); }, py::arg("n"));
  m.def("rho_minus", [](std::size_t n) { return Eigen::MatrixXcd(states::rho_minus(n).op().matrix()); }, py::arg("n"));
  m.def("trace_distance_plus_minus",
        [](std::size_t n) { return trace_distance(states::rho_plus(n), states::rho_minus(n)); }, py::arg("n"));
  m.def(
      "closed_forms",
      [](std::size_t n) {
        const auto c = states::closed_forms(n);
        py::dict d;
        d["trace_distance"] = c.trace_distance;
        d["overlap_phi"] = c.overlap_phi;
        d["overlap_phi_normalized"] = c.overlap_phi_normalized;
        d["overlap_alpha_sq"] = c.overlap_alpha_sq;
        d["collapse_weight_n_minus"] = c.collapse_weight_n_minus;
        return d;
      },
      py::arg("n"));

  // Planning
  m.def("cheat_bound", &cheat_bound, py::arg("n_a"), py::arg("s"));
  m.def("required_s", &required_s, py::arg("p_a_max"), py::arg("n_a_max"));
  m.def("n_a_max", [](double delta) { return n_a_max(DeviceModel{delta}); }, py::arg("delta"));
  m.def(
      "plan_security",
      [](double p, std::optional<std::uint64_t> n, std::optional<double> delta) {
        if (n.has_value() == delta.has_value()) throw DomainError("give exactly one of n_a_max and delta");
        const auto plan = delta ? plan_security(p, DeviceModel{*delta}) : plan_security(p, *n);
        py::dict d;
        d["p_a_max"] = plan.p_a_max;
        d["n_a_max"] = plan.n_a_max;
        d["s_required"] = plan.s_required;
        d["delta"] = plan.delta;
        return d;
      },
      py::arg("p_a_max"), py::arg("n_a_max") = py::none(), py::arg("delta") = py::none());
  m.def(
      "wilson_interval",
      [](std::uint64_t x, std::uint64_t n, double z) {
        const auto w = wilson_interval(x, n, z);
        return py::make_tuple(w.lower, w.upper);
      },
      py::arg("successes"), py::arg("trials"), py::arg("z") = 5.0);

  // Protocol and attacks; the GIL is released while simulating.
  m.def(
      "run_honest",
      [](std::uint32_t s, std::uint64_t n_sim, std::uint64_t sessions, std::uint64_t seed, unsigned threads) {
        const ProtocolParams params{s, n_sim, seed};
        params.validate();
        py::gil_scoped_release release;
        const SessionFactory f = [](std::uint64_t idx) {
          return SessionPair{std::make_unique<HonestAlice>(static_cast<std::uint8_t>(idx & 1)),
                             std::make_unique<HonestBob>()};
        };
        std::uint64_t accepted = 0;
        for (const auto& t : run_sessions(params, f, 0, sessions, threads)) accepted += t.verdict.accept ? 1 : 0;
        return accepted;
      },
      py::arg("s") = 8, py::arg("n_sim") = 256, py::arg("sessions") = 1000, py::arg("seed") = 42,
      py::arg("threads") = 1);
  m.def(
      "naive_attack",
      [](std::uint32_t s, std::uint64_t n_sim, std::uint64_t trials, std::uint64_t seed, bool same_index) {
        AttackReport r;
        {
          py::gil_scoped_release release;
          r = naive_attack(ProtocolParams{s, n_sim, seed},
                           NaiveRedeclare{0, same_index ? IndexRule::SameIndex : IndexRule::DifferentIndex}, trials);
        }
        return report_dict(r);
      },
      py::arg("s") = 1, py::arg("n_sim") = 256, py::arg("trials") = 10000, py::arg("seed") = 42,
      py::arg("same_index") = false);
  m.def(
      "steering_attack",
      [](std::uint64_t n_a, std::uint32_t s, int target_b, std::uint64_t n_sim, std::uint64_t trials, std::uint64_t seed,
         std::optional<double> delta, bool snapped, unsigned threads) {
        if (target_b < 0 || target_b > 1) throw DomainError("target_b must be 0 or 1");
        const EntangledSteering st{n_a, static_cast<std::uint8_t>(target_b), SteeringMeasurement::Pgm, device_from(delta)};
        AttackReport r;
        {
          py::gil_scoped_release release;
          const ProtocolParams p{s, n_sim, seed};
          r = snapped ? snapped_attack(p, st, trials, threads) : steering_attack(p, st, trials, threads);
        }
        return report_dict(r);
      },
      py::arg("n_a") = 8, py::arg("s") = 8, py::arg("target_b") = 1, py::arg("n_sim") = 256, py::arg("trials") = 10000,
      py::arg("seed") = 42, py::arg("delta") = py::none(), py::arg("snapped") = false, py::arg("threads") = 1);
  m.def(
      "helstrom_attack",
      [](std::uint64_t n, std::uint64_t trials, std::uint64_t seed) {
        HelstromReport r;
        {
          py::gil_scoped_release release;
          r = helstrom_attack(n, trials, seed);
        }
        py::dict d;
        d["trials"] = r.trials;
        d["correct"] = r.correct;
        d["success_rate"] = r.success_rate;
        d["expected"] = r.expected;
        d["ci_half_width"] = r.ci_half_width;
        return d;
      },
      py::arg("n"), py::arg("trials") = 10000, py::arg("seed") = 42);
  m.def("multi_copy_distinguisher", &multi_copy_distinguisher, py::arg("s"), py::arg("n"));

  m.def(
      "sweep",
      [](std::vector<std::uint64_t> n_a, std::vector<std::uint32_t> s, std::uint64_t trials, std::uint64_t n_sim,
         std::uint64_t seed, const std::string& strategy, std::optional<double> delta, const std::string& format) {
        SweepConfig c;
        c.n_a = std::move(n_a);
        c.s = std::move(s);
        c.trials = trials;
        c.n_sim = n_sim;
        c.seed = seed;
        c.delta = delta;
        if (strategy == "steering") c.strategy = SweepStrategy::Steering;
        else if (strategy == "snapped") c.strategy = SweepStrategy::Snapped;
        else if (strategy == "naive") c.strategy = SweepStrategy::Naive;
        else throw DomainError("unknown sweep strategy " + strategy);
        if (format != "csv" && format != "json") throw DomainError("format must be csv or json");
        SweepTable t;
        {
          py::gil_scoped_release release;
          t = sweep(c);
        }
        return format == "json" ? to_json(t) : to_csv(t);
      },
      py::arg("n_a") = std::vector<std::uint64_t>{4, 8, 16}, py::arg("s") = std::vector<std::uint32_t>{1, 2, 4, 8},
      py::arg("trials") = 10000, py::arg("n_sim") = 256, py::arg("seed") = 42, py::arg("strategy") = "steering",
      py::arg("delta") = py::none(), py::arg("format") = "csv");

  // Wire codec for UnveilOpen frames.
  m.def(
      "encode_unveil",
      [](int b, std::vector<std::uint64_t> indices) {
        if (b < 0 || b > 1) throw DomainError("b must be 0 or 1");
        const auto bytes = encode(UnveilOpen{static_cast<std::uint8_t>(b), std::move(indices)});
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
      },
      py::arg("b"), py::arg("indices"));
  m.def(
      "decode_unveil",
      [](const py::bytes& frame) {
        const std::string raw = frame;
        const std::vector<std::uint8_t> bytes(raw.begin(), raw.end());
        const auto msg = decode(bytes);
        const auto* u = std::get_if<UnveilOpen>(&msg);
        if (!u) throw DecodeError("frame is not an unveil message");
        return py::make_tuple(static_cast<int>(u->b), u->indices);
      },
      py::arg("frame"));
}
