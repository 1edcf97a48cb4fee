#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hgcav/correlation.hpp"
#include "hgcav/errors.hpp"
#include "hgcav/geometry.hpp"
#include "hgcav/inference.hpp"
#include "hgcav/modes.hpp"
#include "hgcav/scenario.hpp"
#include "hgcav/serialization.hpp"
#include "hgcav/transit.hpp"
#include "hgcav/transmission.hpp"
#include "hgcav/units.hpp"

namespace py = pybind11;
using namespace hgcav;

namespace {

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_python(const py::object& o) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Atom transits through Hermite-Gauss cavity modes";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<StabilityError>(m, "StabilityError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<ScheduleError>(m, "ScheduleError", base.ptr());
    py::register_exception<UndefinedDecompositionError>(m, "UndefinedDecompositionError", base.ptr());
    py::register_exception<NoTransitError>(m, "NoTransitError", base.ptr());
    py::register_exception<ZeroCouplingError>(m, "ZeroCouplingError", base.ptr());
    py::register_exception<InfeasibleMeasurementError>(m, "InfeasibleMeasurementError", base.ptr());
    py::register_exception<UndefinedCorrelationError>(m, "UndefinedCorrelationError", base.ptr());
    py::register_exception<InsufficientStructureError>(m, "InsufficientStructureError", base.ptr());

    py::class_<CavityParams>(m, "CavityParams")
        .def(py::init<>())
        .def_readwrite("length", &CavityParams::length)
        .def_readwrite("r1", &CavityParams::r1)
        .def_readwrite("r2", &CavityParams::r2)
        .def_readwrite("wavelength", &CavityParams::wavelength)
        .def_readwrite("kappa", &CavityParams::kappa)
        .def_readwrite("gamma", &CavityParams::gamma)
        .def_readwrite("g0", &CavityParams::g0);

    py::class_<DerivedParams>(m, "DerivedParams")
        .def_readonly("fsr", &DerivedParams::fsr)
        .def_readonly("waist", &DerivedParams::waist)
        .def_readonly("linewidth", &DerivedParams::linewidth)
        .def_readonly("finesse", &DerivedParams::finesse);

    py::class_<ModeSpec>(m, "ModeSpec")
        .def(py::init<int, int, double, double>(), py::arg("m"), py::arg("n"), py::arg("waist"), py::arg("angle") = 0.0)
        .def_readwrite("m", &ModeSpec::m)
        .def_readwrite("n", &ModeSpec::n)
        .def_readwrite("waist", &ModeSpec::waist)
        .def_readwrite("angle", &ModeSpec::angle);

    py::class_<Detuning>(m, "Detuning")
        .def(py::init<double, double>(), py::arg("delta_a") = 0.0, py::arg("delta_c") = 0.0)
        .def_readwrite("delta_a", &Detuning::delta_a)
        .def_readwrite("delta_c", &Detuning::delta_c);

    py::class_<Trajectory>(m, "Trajectory")
        .def(py::init([](double x0, double t0, double v) { return Trajectory{x0, t0, v, std::nullopt}; }),
             py::arg("x0"), py::arg("t0"), py::arg("v"))
        .def_readwrite("x0", &Trajectory::x0)
        .def_readwrite("t0", &Trajectory::t0)
        .def_readwrite("v", &Trajectory::v);

    py::class_<ProbeSchedule>(m, "ProbeSchedule")
        .def("to_dict", [](const ProbeSchedule& s) { return to_python(io::schedule_to_json(s)); });

    py::class_<TransitRecord>(m, "TransitRecord")
        .def("counts", &TransitRecord::counts)
        .def_readonly("rate", &TransitRecord::rate)
        .def_readonly("seed", &TransitRecord::seed)
        .def("to_dict", [](const TransitRecord& r) { return to_python(io::record_to_json(r)); })
        .def_static("from_dict", [](const py::object& o) { return io::record_from_json(from_python(o)); });

    py::class_<CorrelationEstimate>(m, "CorrelationEstimate")
        .def_readonly("bin_width", &CorrelationEstimate::bin_width)
        .def_readonly("tau", &CorrelationEstimate::tau)
        .def_readonly("g2", &CorrelationEstimate::g2)
        .def_readonly("error", &CorrelationEstimate::error)
        .def_readonly("raw", &CorrelationEstimate::raw)
        .def_readonly("transits", &CorrelationEstimate::transits);

    m.def("mhz_to_rad_s", &mhz_to_rad_s, py::arg("mhz"));
    m.def("derive", &derive, py::arg("params"));
    m.def("with_splitting", &with_splitting, py::arg("params"), py::arg("splitting"), py::arg("axis_angle") = 0.0);
    m.def("first_order_splitting", &first_order_splitting, py::arg("params"));
    m.def("mode_frequency", &mode_frequency, py::arg("params"), py::arg("m"), py::arg("n"), py::arg("q"));

    m.def("hermite_function", &hermite_function, py::arg("m"), py::arg("u"));
    m.def("mode_amplitude", &mode_amplitude, py::arg("mode"), py::arg("x"), py::arg("y"));
    m.def("coupling", py::overload_cast<const CavityParams&, const ModeSpec&, double, double>(&coupling),
          py::arg("params"), py::arg("mode"), py::arg("x"), py::arg("y"));
    m.def("max_coupling", &max_coupling, py::arg("params"), py::arg("mode"));

    m.def("transmission_ratio", &transmission_ratio, py::arg("g"), py::arg("detuning"), py::arg("params"));
    m.def("axial_average", &axial_average, py::arg("g"), py::arg("detuning"), py::arg("params"),
          py::arg("nodes") = kDefaultAxialNodes);
    m.def("mode_selectivity", &mode_selectivity, py::arg("splitting"), py::arg("params"));

    m.def("make_single_schedule", &make_single_schedule, py::arg("mode_id"), py::arg("detuning"), py::arg("start"),
          py::arg("end"), py::arg("bin_width"));
    m.def("make_switched_schedule", &make_switched_schedule, py::arg("first_id"), py::arg("second_id"),
          py::arg("first_detuning"), py::arg("second_detuning"), py::arg("switch_frequency"), py::arg("settle"),
          py::arg("start"), py::arg("end"), py::arg("bin_width") = 0.0);
    m.def("simulate_transit", &simulate_transit, py::arg("trajectory"), py::arg("schedule"), py::arg("modes"),
          py::arg("params"), py::arg("rate"), py::arg("seed"), py::arg("axial_nodes") = kDefaultAxialNodes);

    m.def(
        "fit_transit",
        [](const TransitRecord& rec, const ModeTable& modes, const CavityParams& params) {
            if (rec.bins.empty()) throw ConfigError("record has no bins");
            const auto fit = fit_transit(rec, modes, params);
            const auto mode = modes.find(rec.bins.front().probe.mode_id);
            if (mode == modes.end()) throw ConfigError("record mode is missing from the mode table");
            return to_python(io::fit_to_json(fit, mode->second.waist));
        },
        py::arg("record"), py::arg("modes"), py::arg("params"));
    m.def("equivalent_offsets", &equivalent_offsets, py::arg("mode"), py::arg("x0"));

    m.def("g2_of_stream", [](const std::vector<std::int64_t>& counts, double bin_width, double tau_max) {
        return g2_of_stream(counts, bin_width, tau_max);
    }, py::arg("counts"), py::arg("bin_width"), py::arg("tau_max"));
    m.def("significant_maxima", &significant_maxima, py::arg("estimate"), py::arg("tau_limit") = -1.0);

    m.def(
        "validate_config",
        [](const std::string& text, const std::string& base_dir) {
            const auto res = validate_config(text, base_dir);
            py::dict out;
            out["ok"] = res.ok();
            out["errors"] = res.errors;
            out["normalized"] = res.config ? to_python(res.config->normalized) : py::none();
            return out;
        },
        py::arg("text"), py::arg("base_dir") = "");
    m.def(
        "run_config",
        [](const std::string& text, const std::filesystem::path& out_dir, const std::string& base_dir) {
            const auto res = validate_config(text, base_dir);
            if (!res.ok()) {
                std::string msg;
                for (const auto& e : res.errors) msg += e + "\n";
                throw ConfigError(msg);
            }
            const auto run = run_scenario(*res.config, out_dir);
            py::dict out;
            out["exit_code"] = run.exit_code;
            out["summaries"] = run.summaries;
            out["files"] = run.files;
            out["error"] = run.error;
            return out;
        },
        py::arg("text"), py::arg("out_dir"), py::arg("base_dir") = "");
}
