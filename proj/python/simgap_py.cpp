// Python bindings for the simgap library.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "simgap/config.hpp"
#include "simgap/error.hpp"
#include "simgap/gap.hpp"
#include "simgap/lp.hpp"
#include "simgap/pipeline.hpp"
#include "simgap/sampling.hpp"

namespace py = pybind11;
using namespace simgap;

namespace {

py::dict lp_dict(const LpResult& r) {
  py::dict d;
  d["status"] = to_string(r.status);
  d["value"] = r.value;
  d["x"] = r.x;
  d["iterations"] = r.iterations;
  return d;
}

InequalityLp make_lp(Eigen::MatrixXd g, Eigen::VectorXd h, Eigen::VectorXd c) {
  return InequalityLp{std::move(g), std::move(h), std::move(c)};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Simulation-gap quantification and gap-aware controller synthesis";
  m.attr("__version__") = SIMGAP_VERSION;

  static py::exception<Error> error(m, "Error");
  static py::exception<ConfigError> config_error(m, "ConfigError", error.ptr());
  static py::exception<DomainError> domain_error(m, "DomainError", error.ptr());
  static py::exception<OracleError> oracle_error(m, "OracleError", error.ptr());
  static py::exception<ResourceError> resource_error(m, "ResourceError", error.ptr());
  static py::exception<SolverError> solver_error(m, "SolverError", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const DomainError& e) {
      py::set_error(domain_error, e.what());
    } catch (const OracleError& e) {
      py::set_error(oracle_error, e.what());
    } catch (const ResourceError& e) {
      py::set_error(resource_error, e.what());
    } catch (const SolverError& e) {
      py::set_error(solver_error, e.what());
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  py::class_<StateBox>(m, "StateBox")
      .def(py::init<Vec, Vec>(), py::arg("lower"), py::arg("upper"))
      .def_property_readonly("lower", py::overload_cast<>(&StateBox::lower, py::const_))
      .def_property_readonly("upper", py::overload_cast<>(&StateBox::upper, py::const_))
      .def_property_readonly("dim", &StateBox::dim)
      .def("contains", [](const StateBox& b, const Vec& x) { return b.contains(x); });

  py::class_<InputGrid>(m, "InputGrid")
      .def(py::init<std::vector<Vec>>(), py::arg("points"))
      .def_static("lattice", [](const Vec& lo, const Vec& hi, const Vec& step) { return InputGrid::lattice(lo, hi, step); })
      .def("__len__", &InputGrid::size)
      .def("__getitem__", [](const InputGrid& g, std::size_t i) {
        if (i >= g.size()) throw py::index_error();
        return g[i];
      })
      .def_property_readonly("points", &InputGrid::points);

  py::class_<NominalModel>(m, "NominalModel")
      .def_static("pendulum", &NominalModel::pendulum, py::arg("tau") = 0.005, py::arg("mass") = 1.0,
                  py::arg("gravity") = 9.81, py::arg("length") = 1.0)
      .def_static("unicycle", &NominalModel::unicycle, py::arg("tau") = 0.01)
      .def_static("affine", &NominalModel::affine, py::arg("a"), py::arg("b"), py::arg("tau") = 1.0)
      .def_property_readonly("n", &NominalModel::n)
      .def_property_readonly("m", &NominalModel::m)
      .def_property_readonly("tau", &NominalModel::tau)
      .def("step", [](const NominalModel& f, const Vec& x, const Vec& u) { return f.step(x, u); })
      .def("__repr__", &NominalModel::descriptor);

  py::class_<SurrogateOracle>(m, "SurrogateOracle")
      .def(py::init([](const NominalModel& model, const std::string& kind, const StateBox& domain) {
             SurrogateSpec spec;
             spec.kind = parse_surrogate_kind(kind);
             return SurrogateOracle(model, spec, domain);
           }),
           py::arg("model"), py::arg("kind"), py::arg("domain"))
      .def("query", [](SurrogateOracle& o, const Vec& x, const Vec& u) { return o.query(x, u); })
      .def_property_readonly("id", &SurrogateOracle::id);

  py::class_<Cover>(m, "Cover")
      .def("__len__", &Cover::size)
      .def_property_readonly("epsilon", &Cover::epsilon)
      .def_property_readonly("counts", &Cover::counts)
      .def_property_readonly("half_width", &Cover::half_width)
      .def("center", &Cover::center);
  m.def("make_cover", [](const StateBox& box, double eps) { return make_cover(box, eps); }, py::arg("box"),
        py::arg("epsilon"));

  m.def("solve_lp", [](Eigen::MatrixXd g, Eigen::VectorXd h, Eigen::VectorXd c) {
    return lp_dict(solve_inequality_lp(make_lp(std::move(g), std::move(h), std::move(c))));
  }, py::arg("g"), py::arg("h"), py::arg("c"), "min c^T x subject to G x <= h (dual simplex)");
  m.def("lp_oracle", [](Eigen::MatrixXd g, Eigen::VectorXd h, Eigen::VectorXd c) {
    return lp_dict(lp_oracle(make_lp(std::move(g), std::move(h), std::move(c))));
  }, py::arg("g"), py::arg("h"), py::arg("c"), "Reference solver by vertex enumeration");

  py::class_<GapModel>(m, "GapModel")
      .def_property_readonly("n", &GapModel::n)
      .def_property_readonly("epsilon", &GapModel::epsilon)
      .def("eval", [](const GapModel& g, const Vec& x, const Vec& u) { return g.eval(x, u); })
      .def("sup", [](const GapModel& g) { return sup_gamma(g, g.domain()).value; });

  py::class_<PipelineConfig>(m, "Config")
      .def_readwrite("name", &PipelineConfig::name)
      .def_readwrite("epsilon", &PipelineConfig::epsilon)
      .def_readwrite("out_dir", &PipelineConfig::out_dir)
      .def_readwrite("jobs", &PipelineConfig::jobs)
      .def_readwrite("hold", &PipelineConfig::hold)
      .def_readwrite("sweep", &PipelineConfig::sweep)
      .def("hash", &PipelineConfig::hash)
      .def("effective", [](const PipelineConfig& c) { return c.to_json().dump(); },
           "Effective configuration as a JSON string");
  m.def("load_config", &load_config, py::arg("path"));
  m.def("parse_config", [](const std::string& text) { return parse_config(Json::parse(text)); }, py::arg("json"));

  py::class_<Pipeline>(m, "Pipeline")
      .def(py::init<PipelineConfig>(), py::arg("config"))
      .def_property_readonly("dir", &Pipeline::dir)
      .def("run", [](Pipeline& p, std::optional<std::string> from) {
             std::optional<Stage> s;
             if (from) s = parse_stage(*from);
             py::gil_scoped_release release;
             p.run(s);
           }, py::arg("from_stage") = py::none())
      .def("run_stage", [](Pipeline& p, const std::string& stage) {
             const Stage s = parse_stage(stage);
             py::gil_scoped_release release;
             p.run_stage(s);
           })
      .def("completed", [](const Pipeline& p, const std::string& stage) { return p.completed(parse_stage(stage)); })
      .def("load_gap", &Pipeline::load_gap)
      .def("winning", [](const Pipeline& p, bool with_gap) { return p.load_controller(with_gap).winning; },
           py::arg("with_gap") = true);

  m.def("stages", [] {
    std::vector<std::string> out;
    for (Stage s : all_stages()) out.push_back(to_string(s));
    return out;
  });
}
