#include "rtirl/experiment.hpp"
#include "rtirl/qp.hpp"
#include "rtirl/sensitivity.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace rtirl;

namespace {

ThetaVector theta_from_array(const Eigen::VectorXd& p) {
  if (p.size() != ThetaVector::kSize) throw DimensionMismatch("theta must have 31 entries");
  return ThetaVector::unpack(p);
}

py::dict qp_dict(const QpSolution& s) {
  py::dict d;
  d["z"] = s.z;
  d["lam_eq"] = s.lam_eq;
  d["mu_in"] = s.mu_in;
  d["active_set"] = s.active_set;
  d["objective"] = s.objective;
  d["iterations"] = s.iterations;
  return d;
}

py::dict check_dict(const CheckResult& r) {
  py::dict d;
  d["suite"] = r.suite;
  d["passed"] = r.passed;
  d["max_error"] = r.max_error;
  d["threshold"] = r.threshold;
  d["samples"] = r.samples;
  d["detail"] = r.detail;
  return d;
}

template <typename Cmd>
py::tuple run_command(Cmd cmd, const std::string& config_path, std::optional<std::uint64_t> seed,
                      std::optional<std::string> out, const std::vector<std::string>& thetas, const std::string& only) {
  const ExperimentConfig c = config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(config_path);
  CommandOverrides ov;
  ov.seed = seed;
  ov.out_dir = std::move(out);
  ov.thetas = thetas;
  ov.only = only;
  std::ostringstream log;
  int code;
  {
    py::gil_scoped_release release;
    code = cmd(c, ov, log);
  }
  return py::make_tuple(code, log.str());
}

}  // namespace

PYBIND11_MODULE(_rtirl, m) {
  m.doc() = "Q-learning with real-time-iteration NMPC on the evaporator benchmark";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<QpError>(m, "QpError", PyExc_RuntimeError);
  py::register_exception<SqpIterationLimit>(m, "SqpIterationLimit", PyExc_RuntimeError);
  py::register_exception<StrictComplementarityViolated>(m, "StrictComplementarityViolated", PyExc_RuntimeError);
  py::register_exception<NonFiniteError>(m, "NonFiniteError", PyExc_FloatingPointError);

  m.attr("THETA_SIZE") = ThetaVector::kSize;

  py::class_<OcpSpec>(m, "OcpSpec")
      .def(py::init<>())
      .def_static(
          "from_config", [](const std::string& path) { return ExperimentConfig::load(path).ocp; }, py::arg("path"))
      .def_readwrite("N", &OcpSpec::N)
      .def_readwrite("gamma", &OcpSpec::gamma)
      .def_readwrite("x_s", &OcpSpec::x_s)
      .def_readwrite("u_s", &OcpSpec::u_s)
      .def_readwrite("u_lb", &OcpSpec::u_lb)
      .def_readwrite("u_ub", &OcpSpec::u_ub)
      .def_readwrite("Ts", &OcpSpec::Ts)
      .def_readwrite("substeps", &OcpSpec::substeps);

  m.def("theta_names", [] { return ThetaVector::names(); });
  m.def(
      "naive_theta", [](const OcpSpec& spec) { return Eigen::VectorXd(naive_theta(spec).pack()); },
      py::arg("spec") = OcpSpec{});
  m.def(
      "project_theta", [](const Eigen::VectorXd& p) { return Eigen::VectorXd(project_theta(theta_from_array(p)).pack()); },
      py::arg("theta"));
  m.def(
      "validate_theta", [](const Eigen::VectorXd& p) { theta_from_array(p).validate(); }, py::arg("theta"));
  m.def(
      "load_theta", [](const std::string& path) { return Eigen::VectorXd(load_theta(path).pack()); }, py::arg("path"));
  m.def(
      "save_theta", [](const Eigen::VectorXd& p, const std::string& path) { save_theta(theta_from_array(p), path); },
      py::arg("theta"), py::arg("path"));
  m.def("steady_state_cost", &steady_state_cost, py::arg("spec") = OcpSpec{});

  m.def(
      "solve_qp",
      [](const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Eigen::MatrixXd& Aeq, const Eigen::VectorXd& beq,
         const Eigen::MatrixXd& Ain, const Eigen::VectorXd& bin) {
        QpProblem p;
        p.H = H;
        p.g = g;
        p.Aeq = Aeq.size() ? Aeq : Eigen::MatrixXd(0, g.size());
        p.beq = beq;
        p.Ain = Ain.size() ? Ain : Eigen::MatrixXd(0, g.size());
        p.bin = bin;
        return qp_dict(solve_qp(p));
      },
      py::arg("H"), py::arg("g"), py::arg("Aeq"), py::arg("beq"), py::arg("Ain"), py::arg("bin"),
      "min 1/2 z'Hz + g'z s.t. Aeq z + beq = 0, Ain z + bin >= 0");

  m.def(
      "plant_step",
      [](const Vec2& x, const Vec2& u, const OcpSpec& spec) {
        return integrate_step(spec.plant, x, u, spec.plant.nominal(), spec.Ts, spec.substeps);
      },
      py::arg("x"), py::arg("u"), py::arg("spec") = OcpSpec{}, "One nominal sampling period of the plant");
  m.def(
      "plant_rhs", [](const Vec2& x, const Vec2& u, const OcpSpec& spec) {
        return ode_rhs(spec.plant, x, u, spec.plant.nominal());
      },
      py::arg("x"), py::arg("u"), py::arg("spec") = OcpSpec{});
  m.def(
      "economic_cost", [](const Vec2& x, const Vec2& u, const OcpSpec& spec) {
        return economic_cost(spec.plant, x, u, spec.plant.nominal());
      },
      py::arg("x"), py::arg("u"), py::arg("spec") = OcpSpec{});

  m.def(
      "value",
      [](const Eigen::VectorXd& p, const Vec2& s, const OcpSpec& spec) {
        const ThetaVector th = theta_from_array(p);
        const PrimalDual lin = shift(sqp_solve_full(th, spec, s, std::nullopt).y);
        const RtiContext ctx = prepare(th, spec, lin, RtiMode::V);
        const RtiOutput out = feedback(ctx, s);
        py::dict d;
        d["value"] = out.value;
        d["action"] = out.u0;
        d["degenerate"] = qp_is_degenerate(ctx, out);
        if (!qp_is_degenerate(ctx, out)) {
          d["grad_theta"] = Eigen::VectorXd(grad_v_theta(ctx, out));
          d["grad_policy"] = Eigen::MatrixXd(grad_policy_theta(ctx, out));
        }
        return d;
      },
      py::arg("theta"), py::arg("s"), py::arg("spec") = OcpSpec{},
      "V(s), the greedy action and their theta sensitivities at an RTI step from the shifted SQP solution");
  m.def(
      "q_value",
      [](const Eigen::VectorXd& p, const Vec2& s, const Vec2& a, const OcpSpec& spec) {
        const ThetaVector th = theta_from_array(p);
        const PrimalDual lin = shift(sqp_solve_full(th, spec, s, std::nullopt).y);
        const RtiContext ctx = prepare(th, spec, lin, RtiMode::Q);
        const RtiOutput out = feedback(ctx, s, a);
        py::dict d;
        d["value"] = out.value;
        d["degenerate"] = qp_is_degenerate(ctx, out);
        if (!qp_is_degenerate(ctx, out)) {
          d["grad_theta"] = Eigen::VectorXd(grad_q_theta(ctx, out));
          d["grad_action"] = grad_q_action(out);
        }
        return d;
      },
      py::arg("theta"), py::arg("s"), py::arg("a"), py::arg("spec") = OcpSpec{});
  m.def(
      "sqp_solve",
      [](const Eigen::VectorXd& p, const Vec2& s, const std::optional<Vec2>& a, const OcpSpec& spec) {
        const SqpResult r = sqp_solve_full(theta_from_array(p), spec, s, a);
        py::dict d;
        d["z"] = r.y.z.vec();
        d["iterations"] = r.iterations;
        d["residual_history"] = r.residual_history;
        return d;
      },
      py::arg("theta"), py::arg("s"), py::arg("a") = std::nullopt, py::arg("spec") = OcpSpec{});
  m.def(
      "td_error",
      [](const Eigen::VectorXd& p, const Vec2& s, const Vec2& a, double cost, const Vec2& s_next, const OcpSpec& spec) {
        const PrimalDual g = PrimalDual::cold_start(spec);
        return td_error(theta_from_array(p), spec, TdSample{s, a, cost, s_next, 0}, TdGuesses{g, g});
      },
      py::arg("theta"), py::arg("s"), py::arg("a"), py::arg("cost"), py::arg("s_next"), py::arg("spec") = OcpSpec{});

  m.def(
      "run_checks",
      [](const std::string& only, std::uint64_t seed) {
        py::list out;
        for (const CheckResult& r : run_checks(OcpSpec{}, only, seed)) out.append(check_dict(r));
        return out;
      },
      py::arg("only") = "", py::arg("seed") = 0);

  m.def(
      "train",
      [](const std::string& config, std::optional<std::uint64_t> seed, std::optional<std::string> out,
         std::optional<std::string> theta) {
        std::vector<std::string> th;
        if (theta) th.push_back(*theta);
        return run_command(cmd_train, config, seed, std::move(out), th, "");
      },
      py::arg("config") = "", py::arg("seed") = std::nullopt, py::arg("out") = std::nullopt,
      py::arg("theta") = std::nullopt, "Runs the train command; returns (exit_code, log)");
  m.def(
      "evaluate",
      [](const std::string& config, std::optional<std::uint64_t> seed, std::optional<std::string> out,
         std::optional<std::string> theta) {
        std::vector<std::string> th;
        if (theta) th.push_back(*theta);
        return run_command(cmd_evaluate, config, seed, std::move(out), th, "");
      },
      py::arg("config") = "", py::arg("seed") = std::nullopt, py::arg("out") = std::nullopt,
      py::arg("theta") = std::nullopt, "Runs the evaluate command; returns (exit_code, log)");
  m.def(
      "compare",
      [](const std::string& config, std::optional<std::uint64_t> seed, std::optional<std::string> out,
         const std::vector<std::string>& thetas) {
        return run_command(cmd_compare, config, seed, std::move(out), thetas, "");
      },
      py::arg("config") = "", py::arg("seed") = std::nullopt, py::arg("out") = std::nullopt,
      py::arg("thetas") = std::vector<std::string>{}, "Runs the compare command; returns (exit_code, log)");
}
