#include <optional>
#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pacverify/analyzer.hpp"
#include "pacverify/cli.hpp"
#include "pacverify/error.hpp"
#include "pacverify/model_runtime.hpp"
#include "pacverify/report.hpp"
#include "pacverify/sampler.hpp"
#include "pacverify/scenario_solver.hpp"

namespace py = pybind11;
using namespace pacverify;

namespace {

template <typename T>
T take(py::dict& d, const char* key, T fallback) {
  if (!d.contains(key)) return fallback;
  T v = d[key].cast<T>();
  PyDict_DelItemString(d.ptr(), key);
  return v;
}

std::string verify_json(const std::string& model_path, const std::vector<double>& center, double radius, py::dict opts) {
  PipelineConfig cfg;
  LearnerConfig& l = cfg.learner;
  l.epsilon = take(opts, "eps", l.epsilon);
  l.eta = take(opts, "eta", l.eta);
  l.k1 = take(opts, "k1", l.k1);
  l.k2 = take(opts, "k2", l.k2);
  l.kappa = take(opts, "kappa", l.kappa);
  l.master_seed = take<std::uint64_t>(opts, "seed", 0);
  l.threads = take(opts, "threads", l.threads);
  if (take(opts, "untargeted", false)) l.mode = ScoreMode::untargeted;
  if (opts.contains("label") && !opts["label"].is_none()) cfg.label = opts["label"].cast<int>();
  if (opts.contains("label")) PyDict_DelItemString(opts.ptr(), "label");
  std::optional<Box> clip;
  if (opts.contains("clip") && !opts["clip"].is_none()) {
    const auto c = opts["clip"].cast<std::pair<double, double>>();
    clip = uniform_box(static_cast<int>(center.size()), c.first, c.second);
  }
  if (opts.contains("clip")) PyDict_DelItemString(opts.ptr(), "clip");
  const bool coefficients = take(opts, "coefficients", false);
  if (!opts.empty()) {
    throw py::type_error("unknown option '" + py::str(opts.begin()->first).cast<std::string>() + "'");
  }
  ModelOracle oracle(load_model(model_path));
  const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(center.data(), static_cast<Eigen::Index>(center.size()));
  std::optional<PipelineResult> result;
  {
    py::gil_scoped_release release;
    result.emplace(verify_region(oracle, NormBallRegion(x, radius, clip), cfg));
  }
  return canonical_json(robustness_json(*result, coefficients));
}

}  // namespace

PYBIND11_MODULE(_pacverify, m) {
  m.doc() = "PAC-model robustness verification core";

  // Base first: the most recently registered translator is tried first.
  const py::exception<Error>& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<OracleError>(m, "OracleError", base.ptr());
  py::register_exception<ModelFormatError>(m, "ModelFormatError", base.ptr());
  py::register_exception<SolverError>(m, "SolverError", base.ptr());

  py::class_<ClassifierModel, std::shared_ptr<ClassifierModel>>(m, "Model")
      .def_static("load", [](const std::string& path) { return std::make_shared<ClassifierModel>(load_model(path)); })
      .def_static("parse", [](const std::string& text) { return std::make_shared<ClassifierModel>(parse_model(text)); })
      .def_property_readonly("input_dim", &ClassifierModel::input_dim)
      .def_property_readonly("output_dim", &ClassifierModel::output_dim)
      .def("forward", [](const ClassifierModel& model, const Eigen::MatrixXd& points) {
        return model.evaluate_batch(points);
      }, py::arg("points"))
      .def("classify", [](const ClassifierModel& model, const std::vector<double>& x) {
        const Eigen::VectorXd y = model.evaluate(x);
        return argmax_label(std::span<const double>(y.data(), y.size()));
      });

  m.def("required_samples_full", &required_samples_full, py::arg("epsilon"), py::arg("eta"), py::arg("m"),
        py::arg("n"));
  m.def("required_samples_margin", &required_samples_margin, py::arg("epsilon"), py::arg("eta"));
  m.def("max_key_features", &max_key_features, py::arg("k2"), py::arg("epsilon"), py::arg("eta"));
  m.def("achieved_epsilon", &achieved_epsilon, py::arg("samples"), py::arg("eta"), py::arg("vars"));
  m.def("baseline_sample_count", &baseline_sample_count, py::arg("epsilon"), py::arg("eta"));

  m.def("maximize_affine_on_ball", [](const Eigen::VectorXd& c, const Eigen::VectorXd& center, double radius) {
    const BallExtreme e = maximize_affine_on_ball(c, NormBallRegion(center, radius));
    return py::make_tuple(e.point, e.value);
  }, py::arg("coefficients"), py::arg("center"), py::arg("radius"));

  // Full fit with an intercept column prepended; returns (coefficients, margin).
  m.def("solve_chebyshev_lp", [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lo, double hi) {
    ChebyshevFitProblem p;
    p.design.resize(x.rows(), x.cols() + 1);
    p.design.col(0).setOnes();
    p.design.rightCols(x.cols()) = x;
    p.targets = y;
    for (Eigen::Index j = 0; j <= x.cols(); ++j) p.free_idx.push_back(static_cast<std::size_t>(j));
    p.bounds = {lo, hi};
    const FitResult r = solve_chebyshev_lp(p);
    if (r.status != FitStatus::optimal) throw SolverError("scenario LP did not reach an optimum");
    return py::make_tuple(r.coefficients, r.margin);
  }, py::arg("x"), py::arg("y"), py::arg("lower") = -100.0, py::arg("upper") = 100.0);

  m.def("_verify_json", &verify_json);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code = 0;
    {
      py::gil_scoped_release release;
      code = run_cli(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"));
}
