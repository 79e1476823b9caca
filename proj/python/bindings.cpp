#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "podeit/error.hpp"
#include "podeit/io.hpp"
#include "podeit/map_solver.hpp"
#include "podeit/phantom.hpp"
#include "podeit/workflow.hpp"

namespace py = pybind11;
using namespace podeit;

PYBIND11_MODULE(_core, m) {
  m.doc() = "POD reduced-order Bayesian EIT reconstruction";
  m.attr("__version__") = "0.1.0";
  py::register_exception<Error>(m, "PodeitError");

  py::class_<ElectrodeLayout>(m, "ElectrodeLayout")
      .def(py::init<>())
      .def(py::init([](int count, double width, double radius, double offset) {
             return ElectrodeLayout{count, width, radius, offset};
           }),
           py::arg("count") = 16, py::arg("width") = 2.5, py::arg("radius") = 14.0, py::arg("angular_offset") = 0.0)
      .def_readwrite("count", &ElectrodeLayout::count)
      .def_readwrite("width", &ElectrodeLayout::width)
      .def_readwrite("radius", &ElectrodeLayout::radius)
      .def_readwrite("angular_offset", &ElectrodeLayout::angular_offset)
      .def("pitch", &ElectrodeLayout::pitch);

  py::class_<Mesh2D>(m, "Mesh")
      .def_property_readonly("vertices",
                             [](const Mesh2D& mesh) {
                               Eigen::MatrixXd v(mesh.n_linear_nodes(), 2);
                               for (int i = 0; i < v.rows(); ++i) v.row(i) = mesh.vertices()[i].transpose();
                               return v;
                             })
      .def_property_readonly("triangles",
                             [](const Mesh2D& mesh) {
                               Eigen::MatrixXi t(mesh.n_triangles(), 3);
                               for (int i = 0; i < t.rows(); ++i) {
                                 for (int k = 0; k < 3; ++k) t(i, k) = mesh.triangles()[i][k];
                               }
                               return t;
                             })
      .def_property_readonly("n_triangles", &Mesh2D::n_triangles)
      .def_property_readonly("n_linear_nodes", &Mesh2D::n_linear_nodes)
      .def_property_readonly("n_quadratic_nodes", &Mesh2D::n_quadratic_nodes)
      .def_property_readonly("n_electrodes", &Mesh2D::n_electrodes)
      .def("content_hash", [](const Mesh2D& mesh) { return hash_hex(mesh.content_hash()); })
      .def("total_area", &Mesh2D::total_area)
      .def("is_valid", [](const Mesh2D& mesh) { return validate_mesh(mesh).empty(); });

  m.def("generate_disk_mesh", &generate_disk_mesh, py::arg("layout"), py::arg("target_elements"));
  m.def("read_mesh_json", [](const fs::path& p) { return read_mesh_json(p); });
  m.def("write_mesh_json", [](const fs::path& p, const Mesh2D& mesh) { write_mesh_json(p, mesh); });

  py::class_<StimulationProtocol>(m, "StimulationProtocol")
      .def_static("opposite_adjacent", &StimulationProtocol::opposite_adjacent, py::arg("electrodes"),
                  py::arg("amplitude") = 1.0)
      .def_readwrite("currents", &StimulationProtocol::currents)
      .def_readwrite("measurement", &StimulationProtocol::measurement)
      .def_property_readonly("n_measurements", &StimulationProtocol::n_measurements);

  py::class_<CemModel>(m, "CemModel")
      .def(py::init([](const Mesh2D& mesh, double z, double floor) {
             return std::make_unique<CemModel>(mesh, ContactImpedances::uniform(mesh.n_electrodes(), z), floor);
           }),
           py::arg("mesh"), py::arg("contact_impedance") = 0.01, py::arg("conductivity_floor") = 0.0,
           py::keep_alive<1, 2>());

  m.def("forward_voltages", &forward_voltages, py::arg("model"), py::arg("sigma"), py::arg("protocol"));
  m.def(
      "forward_and_jacobian",
      [](const CemModel& model, const Eigen::VectorXd& sigma, const StimulationProtocol& p) {
        ForwardWithJacobian f = forward_and_jacobian(model, sigma, p);
        return py::make_tuple(f.voltages, f.jacobian);
      },
      py::arg("model"), py::arg("sigma"), py::arg("protocol"));

  py::class_<NoiseSpec>(m, "NoiseSpec")
      .def(py::init([](double rel, double range) { return NoiseSpec{rel, range}; }), py::arg("relative") = 0.01,
           py::arg("range_fraction") = 0.001)
      .def_readwrite("relative", &NoiseSpec::relative)
      .def_readwrite("range_fraction", &NoiseSpec::range_fraction)
      .def("standard_deviation", &NoiseSpec::standard_deviation);

  py::class_<SimulatedData>(m, "SimulatedData")
      .def_readonly("noiseless", &SimulatedData::noiseless)
      .def_readonly("noise", &SimulatedData::noise)
      .def_readonly("measured", &SimulatedData::measured)
      .def_readonly("noise_std", &SimulatedData::noise_std)
      .def_readonly("inverse_crime_warning", &SimulatedData::inverse_crime_warning);

  m.def(
      "simulate_measurements",
      [](const Mesh2D& fine, const Eigen::VectorXd& sigma, double z, const StimulationProtocol& p,
         const NoiseSpec& noise, std::uint64_t seed, int recon_elements) {
        return simulate_measurements(fine, sigma, ContactImpedances::uniform(fine.n_electrodes(), z), p, noise, seed,
                                     recon_elements);
      },
      py::arg("mesh"), py::arg("sigma"), py::arg("contact_impedance"), py::arg("protocol"), py::arg("noise"),
      py::arg("seed"), py::arg("reconstruction_elements") = 0);

  py::class_<Phantom>(m, "Phantom")
      .def_static("by_name", &Phantom::by_name)
      .def_static("names", &Phantom::names)
      .def_readonly("name", &Phantom::name)
      .def_readwrite("background", &Phantom::background)
      .def("__call__", [](const Phantom& p, double x, double y) { return p(Point2(x, y)); })
      .def("nodal", &Phantom::nodal)
      .def("validate", &Phantom::validate);

  py::class_<SmoothnessKernel>(m, "SmoothnessKernel")
      .def(py::init([](double var, double ell, double nugget) { return SmoothnessKernel{var, ell, nugget}; }),
           py::arg("nodal_variance") = 0.25, py::arg("correlation_length") = 4.0, py::arg("nugget") = 1e-4)
      .def_readwrite("nodal_variance", &SmoothnessKernel::nodal_variance)
      .def_readwrite("correlation_length", &SmoothnessKernel::correlation_length)
      .def_readwrite("nugget", &SmoothnessKernel::nugget);

  py::class_<GaussianPrior>(m, "GaussianPrior")
      .def_readonly("mean", &GaussianPrior::mean)
      .def_readonly("covariance", &GaussianPrior::covariance)
      .def_property_readonly("dimension", &GaussianPrior::dimension);
  m.def("build_prior", &build_prior, py::arg("mesh"), py::arg("kernel"), py::arg("mean_value") = 3.0);
  m.def("sample_prior", &sample_prior, py::arg("prior"), py::arg("count"), py::arg("seed"));

  py::class_<Truncation>(m, "Truncation")
      .def_static("fraction", &Truncation::fraction)
      .def_static("modes", &Truncation::modes);

  py::class_<PodBasis>(m, "PodBasis")
      .def_readonly("modes", &PodBasis::modes)
      .def_readonly("eigenvalues", &PodBasis::eigenvalues)
      .def_readonly("spectrum", &PodBasis::spectrum)
      .def_readonly("mean", &PodBasis::mean)
      .def_property_readonly("n_modes", &PodBasis::n_modes)
      .def("retained_variance", [](const PodBasis& b) { return b.curve().values(); })
      .def("truncated", &PodBasis::truncated);
  m.def("conductivity_pod", &conductivity_pod, py::arg("prior"), py::arg("truncation"));
  m.def("potential_pod", &potential_pod, py::arg("ensemble"), py::arg("truncation"), py::arg("injection") = 0);

  py::class_<ReducedModel>(m, "ReducedModel")
      .def_property_readonly("n_sigma_modes", &ReducedModel::n_sigma_modes)
      .def_property_readonly("n_potential_modes", &ReducedModel::n_potential_modes)
      .def_property_readonly("sigma_basis", &ReducedModel::sigma_basis)
      .def("nodal_conductivity", &ReducedModel::nodal_conductivity)
      .def("truncated", &ReducedModel::truncated)
      .def("content_hash", [](const ReducedModel& r) { return hash_hex(r.content_hash()); });
  m.def("reduced_forward", &reduced_forward, py::arg("model"), py::arg("alpha"));
  m.def(
      "reduced_forward_and_jacobian",
      [](const ReducedModel& model, const Eigen::VectorXd& alpha) {
        ReducedForwardWithJacobian f = reduced_forward_and_jacobian(model, alpha);
        return py::make_tuple(f.voltages, f.jacobian);
      },
      py::arg("model"), py::arg("alpha"));

  py::class_<NoiseModel>(m, "NoiseModel")
      .def_readonly("mean", &NoiseModel::mean)
      .def_readonly("covariance", &NoiseModel::covariance)
      .def_property_readonly("dimension", &NoiseModel::dimension)
      .def_static("from_std", &NoiseModel::from_std);
  m.def("measurement_noise_model", &measurement_noise_model, py::arg("noiseless"), py::arg("spec"));
  m.def("compose_total_error", &compose_total_error, py::arg("measurement"), py::arg("reduction"));
  m.def("estimate_reduction_error",
        py::overload_cast<const Eigen::MatrixXd&, const Eigen::MatrixXd&, const ReducedModel&>(
            &estimate_reduction_error),
        py::arg("sigma_samples"), py::arg("full_voltages"), py::arg("reduced"));

  py::class_<OfflineConfig>(m, "OfflineConfig")
      .def(py::init<>())
      .def_readwrite("samples", &OfflineConfig::samples)
      .def_readwrite("seed", &OfflineConfig::seed)
      .def_readwrite("sigma", &OfflineConfig::sigma)
      .def_readwrite("potential", &OfflineConfig::potential)
      .def_readwrite("rotate", &OfflineConfig::rotate);
  py::class_<OfflineProducts>(m, "OfflineProducts")
      .def_readonly("model", &OfflineProducts::model)
      .def_readonly("reduction_error", &OfflineProducts::reduction_error)
      .def_readonly("sigma_samples", &OfflineProducts::sigma_samples)
      .def_readonly("ensemble_voltages", &OfflineProducts::ensemble_voltages)
      .def_readonly("rotated", &OfflineProducts::rotated)
      .def_readonly("ensemble_seconds", &OfflineProducts::ensemble_seconds);
  m.def("build_offline", &build_offline, py::arg("model"), py::arg("prior"), py::arg("protocol"),
        py::arg("config") = OfflineConfig{});
  m.def(
      "retruncate",
      [](const ReducedModel& model, const Eigen::MatrixXd& samples, const Eigen::MatrixXd& voltages, int ns, int nu) {
        TruncatedModel t = retruncate(model, samples, voltages, ns, nu);
        return py::make_tuple(t.model, t.reduction_error);
      },
      py::arg("model"), py::arg("sigma_samples"), py::arg("ensemble_voltages"), py::arg("n_sigma"),
      py::arg("n_potential"));

  py::class_<GnConfig>(m, "GnConfig")
      .def(py::init<>())
      .def_readwrite("max_iterations", &GnConfig::max_iterations)
      .def_readwrite("relative_cost_tolerance", &GnConfig::relative_cost_tolerance)
      .def_readwrite("backtracking", &GnConfig::backtracking)
      .def_readwrite("max_trials", &GnConfig::max_trials);

  py::class_<MapResult>(m, "MapResult")
      .def_readonly("estimate", &MapResult::estimate)
      .def_readonly("nodal", &MapResult::nodal)
      .def_readonly("cost_trace", &MapResult::cost_trace)
      .def_readonly("iterations", &MapResult::iterations)
      .def_readonly("wall_time", &MapResult::wall_time)
      .def_readonly("converged", &MapResult::converged)
      .def_property_readonly("termination", [](const MapResult& r) { return to_string(r.termination); });
  m.def("map_full", &map_full, py::arg("model"), py::arg("prior"), py::arg("noise"), py::arg("protocol"),
        py::arg("measured"), py::arg("config") = GnConfig{});
  m.def("map_reduced", &map_reduced, py::arg("model"), py::arg("noise"), py::arg("measured"),
        py::arg("config") = GnConfig{});

  py::class_<PosteriorSummary>(m, "PosteriorSummary")
      .def_readonly("covariance", &PosteriorSummary::covariance)
      .def_readonly("pointwise_std", &PosteriorSummary::pointwise_std);
  m.def("posterior_full", &posterior_full, py::arg("model"), py::arg("prior"), py::arg("noise"),
        py::arg("protocol"), py::arg("result"));
  m.def("posterior_reduced", &posterior_reduced, py::arg("model"), py::arg("noise"), py::arg("result"));
  m.def("relative_l2_error", &relative_l2_error, py::arg("mesh"), py::arg("estimate"), py::arg("truth"));
}
