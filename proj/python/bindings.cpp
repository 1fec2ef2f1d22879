#include "ohtlab/errors.hpp"
#include "ohtlab/fock.hpp"
#include "ohtlab/homodyne.hpp"
#include "ohtlab/io.hpp"
#include "ohtlab/moments.hpp"
#include "ohtlab/parallel.hpp"
#include "ohtlab/pattern.hpp"
#include "ohtlab/radon.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace ohtlab;

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Homodyne tomography simulation and reconstruction";
    m.attr("__version__") = OHTLAB_VERSION;

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    auto config = py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    auto data = py::register_exception<DataError>(m, "DataError", base.ptr());
    auto numerical = py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<UnsupportedStateError>(m, "UnsupportedStateError", config.ptr());
    py::register_exception<AliasingError>(m, "AliasingError", data.ptr());
    py::register_exception<TruncationError>(m, "TruncationError", numerical.ptr());
    py::register_exception<PurityError>(m, "PurityError", numerical.ptr());
    py::register_exception<ReferencePointError>(m, "ReferencePointError", numerical.ptr());

    m.def("set_max_threads", &set_max_threads, py::arg("n"));

    py::class_<StateSpec>(m, "StateSpec")
        .def_static("vacuum", &StateSpec::vacuum)
        .def_static("fock", &StateSpec::fock, py::arg("n"))
        .def_static("coherent", &StateSpec::coherent, py::arg("alpha"))
        .def_static("thermal", &StateSpec::thermal, py::arg("nbar"))
        .def_static("squeezed_vacuum", &StateSpec::squeezed_vacuum, py::arg("r"), py::arg("phi") = 0.0)
        .def_static("squeezed_coherent", &StateSpec::squeezed_coherent, py::arg("r"), py::arg("phi"),
                    py::arg("alpha"))
        .def_readwrite("truncation_dim", &StateSpec::truncation_dim);

    py::class_<DensityMatrix>(m, "DensityMatrix")
        .def_readonly("elements", &DensityMatrix::elements)
        .def_property_readonly("dim", [](const DensityMatrix& r) { return r.elements.rows(); });
    m.def("make_state", &make_state, py::arg("spec"));
    m.def("quadrature_pdf", &quadrature_pdf, py::arg("rho"), py::arg("theta"), py::arg("q"));

    py::class_<GridSpec>(m, "GridSpec")
        .def(py::init<>())
        .def_readwrite("q_min", &GridSpec::q_min)
        .def_readwrite("q_max", &GridSpec::q_max)
        .def_readwrite("n_q", &GridSpec::n_q)
        .def_readwrite("p_min", &GridSpec::p_min)
        .def_readwrite("p_max", &GridSpec::p_max)
        .def_readwrite("n_p", &GridSpec::n_p);

    py::class_<WignerGrid>(m, "WignerGrid")
        .def_readonly("q_axis", &WignerGrid::q_axis)
        .def_readonly("p_axis", &WignerGrid::p_axis)
        .def_readonly("values", &WignerGrid::values)
        .def("integral", &WignerGrid::integral)
        .def("at", &WignerGrid::at, py::arg("q"), py::arg("p"));
    m.def("wigner_from_rho", &wigner_from_rho, py::arg("rho"), py::arg("grid") = GridSpec{});

    py::class_<DetectorModel>(m, "DetectorModel")
        .def(py::init<>())
        .def_readwrite("eta_q", &DetectorModel::eta_q)
        .def_readwrite("eta_ls", &DetectorModel::eta_ls)
        .def_readwrite("lo_mean_photons", &DetectorModel::lo_mean_photons)
        .def_readwrite("sigma_e", &DetectorModel::sigma_e)
        .def_readwrite("gain", &DetectorModel::gain)
        .def_readwrite("balance_imbalance", &DetectorModel::balance_imbalance);

    py::class_<PhaseSchedule>(m, "PhaseSchedule")
        .def_static("grid", &PhaseSchedule::grid, py::arg("d"), py::arg("span") = 2 * kPi)
        .def_static("uniform_random", &PhaseSchedule::uniform_random)
        .def_static("swept_linear", &PhaseSchedule::swept_linear)
        .def_property_readonly("name", &PhaseSchedule::name);

    py::class_<QuadratureDataset>(m, "QuadratureDataset")
        .def_readonly("theta", &QuadratureDataset::theta)
        .def_readonly("q", &QuadratureDataset::q)
        .def("__len__", &QuadratureDataset::size)
        .def("to_jsonl", [](const QuadratureDataset& ds) { return quad_dataset_to_jsonl(ds); })
        .def_static("from_jsonl", &quad_dataset_from_jsonl, py::arg("text"));
    m.def(
        "sample_quadratures",
        [](const DensityMatrix& rho, const PhaseSchedule& sched, const DetectorModel& det, std::size_t n,
           std::uint64_t seed) { return sample_quadratures(rho, sched, det, n, seed); },
        py::arg("rho"), py::arg("schedule"), py::arg("detector") = DetectorModel{}, py::arg("n"), py::arg("seed"),
        py::call_guard<py::gil_scoped_release>());

    py::class_<RadonConfig>(m, "RadonConfig")
        .def(py::init<>())
        .def_readwrite("grid", &RadonConfig::grid)
        .def_readwrite("k_cutoff", &RadonConfig::k_cutoff)
        .def_readwrite("n_phase_bins", &RadonConfig::n_phase_bins);
    m.def(
        "filtered_backprojection",
        [](const QuadratureDataset& ds, const RadonConfig& cfg) { return filtered_backprojection(ds, cfg).wigner; },
        py::arg("dataset"), py::arg("config") = RadonConfig{}, py::call_guard<py::gil_scoped_release>());
    m.def("bootstrap_stderr", &bootstrap_stderr, py::arg("dataset"), py::arg("config"), py::arg("n_resamples"),
          py::arg("seed"), py::call_guard<py::gil_scoped_release>());

    py::class_<PatternFunctionTable>(m, "PatternFunctionTable").def_readonly("dim", &PatternFunctionTable::dim);
    m.def("build_pattern_functions", py::overload_cast<int, double>(&build_pattern_functions), py::arg("dim"),
          py::arg("basis_exponent") = 1.0);
    py::class_<RhoEstimate>(m, "RhoEstimate")
        .def_readonly("rho", &RhoEstimate::rho)
        .def_readonly("errors", &RhoEstimate::errors)
        .def_readonly("phases_used", &RhoEstimate::phases_used);
    m.def("rho_from_quadratures",
          py::overload_cast<const QuadratureDataset&, const PatternFunctionTable&, int, int>(&rho_from_quadratures),
          py::arg("dataset"), py::arg("table"), py::arg("d_phases") = 0, py::arg("n_max") = -1,
          py::call_guard<py::gil_scoped_release>());

    py::class_<Estimate>(m, "Estimate")
        .def_readonly("value", &Estimate::value)
        .def_readonly("std_err", &Estimate::std_err)
        .def("__repr__", [](const Estimate& e) {
            return "Estimate(" + std::to_string(e.value) + " +- " + std::to_string(e.std_err) + ")";
        });
    m.def("mean_photon", &mean_photon, py::arg("dataset"));
    m.def("g2_single", &g2_single, py::arg("dataset"));
    m.def("factorial_moment", &factorial_moment, py::arg("dataset"), py::arg("r"));
    m.def("n_min", &n_min, py::arg("mean_n"), py::arg("mean_n2"));
}
