// podeit: command-line driver for mesh generation, simulation, offline reduced
// model construction, reconstruction and benchmarking.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "podeit/error.hpp"
#include "podeit/io.hpp"
#include "podeit/map_solver.hpp"
#include "podeit/phantom.hpp"
#include "podeit/workflow.hpp"

using namespace podeit;

namespace {

constexpr int kExitUser = 2;
constexpr int kExitNumerical = 3;

struct Globals {
  std::uint64_t seed = 1;
  fs::path out = ".";
  fs::path cache = ".podeit-cache";
  bool force = false;
};

struct PriorOptions {
  double variance = 0.25;
  double length = 4.0;
  double nugget = 1e-4;
  double mean = 3.0;
  double contact_impedance = 0.01;

  json to_json() const {
    return {{"variance", variance},
            {"correlation_length", length},
            {"nugget", nugget},
            {"mean", mean},
            {"contact_impedance", contact_impedance}};
  }
  static PriorOptions from_json(const json& j) {
    return {j.at("variance").get<double>(), j.at("correlation_length").get<double>(), j.at("nugget").get<double>(),
            j.at("mean").get<double>(), j.at("contact_impedance").get<double>()};
  }
  SmoothnessKernel kernel() const { return {variance, length, nugget}; }
};

void add_prior_options(CLI::App* app, PriorOptions& p) {
  app->add_option("--prior-variance", p.variance, "Nodal prior variance")->capture_default_str();
  app->add_option("--correlation-length", p.length, "Prior correlation length (cm)")->capture_default_str();
  app->add_option("--nugget", p.nugget, "Diagonal nugget relative to the variance")->capture_default_str();
  app->add_option("--prior-mean", p.mean, "Prior mean conductivity")->capture_default_str();
  app->add_option("--contact-impedance", p.contact_impedance, "Contact impedance (Ohm cm^2)")->capture_default_str();
}

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

// Provenance of an artifact: hashes of every input and the settings that shaped it.
json provenance(const std::string& kind, const Globals& g, json inputs, json settings) {
  return {{"artifact", kind}, {"version", 1}, {"seed", g.seed}, {"inputs", std::move(inputs)},
          {"settings", std::move(settings)}};
}

// Refuses to replace an artifact built from other inputs unless --force is set.
// Returns true when the existing artifact already matches.
bool up_to_date(const fs::path& path, const json& existing, const json& wanted, bool force) {
  const auto same = [&](const char* key) { return existing.value(key, json()) == wanted.value(key, json()); };
  if (same("inputs") && same("settings") && same("seed")) return true;
  if (force) return false;
  throw Error(ErrorKind::cache_conflict, path.string() +
                                             " was produced from different inputs or settings; rerun with --force "
                                             "to replace it");
}

json existing_provenance(const fs::path& path) {
  if (!fs::exists(path)) return nullptr;
  if (path.extension() == ".bin") return read_rom_provenance(path);
  const json j = read_json(path);
  return j.value("provenance", json());
}

Mesh2D load_mesh(const fs::path& path) {
  if (path.empty()) throw Error(ErrorKind::invalid_argument, "--mesh is required");
  return read_mesh_json(path);
}

StimulationProtocol protocol_for(const Mesh2D& mesh) {
  return StimulationProtocol::opposite_adjacent(mesh.n_electrodes());
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorKind::invalid_argument, "not a number list: '" + s + "'");
    }
  }
  return v;
}

// ---- mesh -----------------------------------------------------------------

struct MeshOptions {
  int electrodes = 16;
  double width = 2.5;
  double diameter = 28.0;
  int elements = 2414;
  double offset = 0.0;
  std::string name = "mesh.json";
};

int cmd_mesh(const Globals& g, const MeshOptions& o) {
  const ElectrodeLayout layout{o.electrodes, o.width, 0.5 * o.diameter, o.offset};
  const json settings = {{"electrodes", o.electrodes}, {"width", o.width}, {"diameter", o.diameter},
                         {"elements", o.elements},     {"angular_offset", o.offset}};
  const fs::path path = g.out / o.name;
  const json prov = provenance("mesh", g, json::object(), settings);
  const json old = existing_provenance(path);
  if (!old.is_null() && up_to_date(path, old, prov, g.force)) {
    std::cout << "mesh up to date: " << path.string() << "\n";
    return 0;
  }
  const Mesh2D mesh = generate_disk_mesh(layout, o.elements);
  const auto issues = validate_mesh(mesh);
  if (!issues.empty()) throw Error(ErrorKind::generation_failed, "generated mesh is invalid: " + issues[0].message);
  json j = mesh_to_json(mesh);
  j["provenance"] = prov;
  write_json(path, j);
  write_mesh_cache(g.cache / ("mesh-" + hash_hex(mesh.content_hash()) + ".bin"), mesh);
  std::cout << "mesh " << path.string() << ": " << mesh.n_triangles() << " triangles, " << mesh.n_linear_nodes()
            << " P1 nodes, " << mesh.n_quadratic_nodes() << " P2 nodes, hash " << hash_hex(mesh.content_hash())
            << "\n";
  return 0;
}

// ---- simulate -------------------------------------------------------------

struct SimulateOptions {
  std::string mesh;
  std::string phantom = "smooth-blob";
  std::string phantom_file;
  double relative = 0.01;
  double range = 0.001;
  bool zero_noise = false;
  double contact_impedance = 0.01;
  std::string reconstruction_mesh;
  std::string name = "data";
};

json phantom_to_json(const Phantom& p) {
  json j = {{"name", p.name}, {"background", p.background}};
  j["blobs"] = json::array();
  for (const auto& b : p.blobs) {
    j["blobs"].push_back({{"centre", {b.centre.x(), b.centre.y()}}, {"width", b.width}, {"amplitude", b.amplitude}});
  }
  j["rectangles"] = json::array();
  for (const auto& r : p.rectangles) {
    j["rectangles"].push_back({{"centre", {r.centre.x(), r.centre.y()}},
                               {"half_size", {r.half_size.x(), r.half_size.y()}},
                               {"contrast", r.contrast}});
  }
  j["disks"] = json::array();
  for (const auto& d : p.disks) {
    j["disks"].push_back({{"centre", {d.centre.x(), d.centre.y()}}, {"radius", d.radius}, {"contrast", d.contrast}});
  }
  return j;
}

Phantom phantom_from_json(const json& j) {
  try {
    Phantom p;
    p.name = j.value("name", std::string("custom"));
    p.background = j.value("background", 3.0);
    const auto pt = [](const json& a) { return Point2(a.at(0).get<double>(), a.at(1).get<double>()); };
    for (const auto& b : j.value("blobs", json::array())) {
      p.blobs.push_back({pt(b.at("centre")), b.at("width").get<double>(), b.at("amplitude").get<double>()});
    }
    for (const auto& r : j.value("rectangles", json::array())) {
      p.rectangles.push_back({pt(r.at("centre")), pt(r.at("half_size")), r.at("contrast").get<double>()});
    }
    for (const auto& d : j.value("disks", json::array())) {
      p.disks.push_back({pt(d.at("centre")), d.at("radius").get<double>(), d.at("contrast").get<double>()});
    }
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::invalid_argument, std::string("malformed phantom: ") + e.what());
  }
}

double mesh_radius(const Mesh2D& mesh) {
  if (mesh.layout()) return mesh.layout()->radius;
  double r = 0.0;
  for (const Point2& p : mesh.vertices()) r = std::max(r, p.norm());
  return r;
}

int cmd_simulate(const Globals& g, const SimulateOptions& o) {
  const Mesh2D fine = load_mesh(o.mesh);
  const Phantom phantom = o.phantom_file.empty() ? Phantom::by_name(o.phantom) : phantom_from_json(read_json(o.phantom_file));
  phantom.validate(mesh_radius(fine));
  const NoiseSpec noise = o.zero_noise ? NoiseSpec{0.0, 0.0} : NoiseSpec{o.relative, o.range};
  int recon_elements = 0;
  json inputs = {{"mesh", hash_hex(fine.content_hash())}};
  if (!o.reconstruction_mesh.empty()) {
    const Mesh2D coarse = load_mesh(o.reconstruction_mesh);
    recon_elements = coarse.n_triangles();
    inputs["reconstruction_mesh"] = hash_hex(coarse.content_hash());
  }
  const json settings = {{"phantom", phantom_to_json(phantom)},
                         {"noise", {{"relative", noise.relative}, {"range_fraction", noise.range_fraction}}},
                         {"contact_impedance", o.contact_impedance}};
  const fs::path csv = g.out / (o.name + ".csv");
  const fs::path meta = g.out / (o.name + ".json");
  const json prov = provenance("data", g, inputs, settings);
  const json old = existing_provenance(meta);
  if (!old.is_null() && up_to_date(meta, old, prov, g.force) && fs::exists(csv)) {
    std::cout << "data up to date: " << csv.string() << "\n";
    return 0;
  }

  const StimulationProtocol protocol = protocol_for(fine);
  const ContactImpedances z = ContactImpedances::uniform(fine.n_electrodes(), o.contact_impedance);
  const SimulatedData d = simulate_measurements(fine, phantom.nodal(fine), z, protocol, noise, g.seed, recon_elements);
  if (d.inverse_crime_warning) {
    std::cerr << "warning: data mesh is not finer than the reconstruction mesh (inverse crime)\n";
  }
  write_measurements_csv(csv, protocol, d.measured);
  json j;
  j["provenance"] = prov;
  j["measurements"] = csv.filename().string();
  j["measurements_hash"] = hash_hex(file_hash(csv));
  j["noise_std"] = std::vector<double>(d.noise_std.data(), d.noise_std.data() + d.noise_std.size());
  j["inverse_crime_warning"] = d.inverse_crime_warning;
  write_json(meta, j);
  const Eigen::VectorXd truth = phantom.nodal(fine);
  write_ppm(g.out / (o.name + "_truth.ppm"), fine, truth, phantom.background - 2.0, phantom.background + 2.0);
  std::cout << "data " << csv.string() << ": " << d.measured.size() << " voltages, phantom " << phantom.name
            << ", noise " << (o.zero_noise ? "off" : "on") << "\n";
  return 0;
}

// ---- build-rom ------------------------------------------------------------

struct BuildOptions {
  std::string mesh;
  PriorOptions prior;
  int samples = 2000;
  double retain_sigma = 0.99;
  double retain_u = 0.99;
  int n_sigma = 0;
  int n_u = 0;
  bool no_rotate = false;
  int fresh_error_samples = 0;
  std::string rom;
};

fs::path rom_path(const Globals& g, const std::string& explicit_path) {
  return explicit_path.empty() ? g.cache / "rom.bin" : fs::path(explicit_path);
}

int cmd_build_rom(const Globals& g, const BuildOptions& o) {
  const Mesh2D mesh = load_mesh(o.mesh);
  const fs::path path = rom_path(g, o.rom);
  const json settings = {{"prior", o.prior.to_json()},
                         {"samples", o.samples},
                         {"retain_sigma", o.retain_sigma},
                         {"retain_u", o.retain_u},
                         {"n_sigma", o.n_sigma},
                         {"n_u", o.n_u},
                         {"rotate", !o.no_rotate},
                         {"fresh_error_samples", o.fresh_error_samples}};
  json prov = provenance("rom", g, {{"mesh", hash_hex(mesh.content_hash())}}, settings);
  const json old = existing_provenance(path);
  if (!old.is_null() && up_to_date(path, old, prov, g.force)) {
    std::cout << "reduced model up to date: " << path.string() << "\n";
    return 0;
  }

  const double t0 = now_seconds();
  const StimulationProtocol protocol = protocol_for(mesh);
  const CemModel model(mesh, ContactImpedances::uniform(mesh.n_electrodes(), o.prior.contact_impedance),
                       1e-3 * o.prior.mean);
  const GaussianPrior prior = build_prior(mesh, o.prior.kernel(), o.prior.mean);
  OfflineConfig cfg;
  cfg.samples = o.samples;
  cfg.seed = g.seed;
  cfg.sigma = o.n_sigma > 0 ? Truncation::modes(o.n_sigma) : Truncation::fraction(o.retain_sigma);
  cfg.potential = o.n_u > 0 ? Truncation::modes(o.n_u) : Truncation::fraction(o.retain_u);
  cfg.rotate = !o.no_rotate;
  OfflineProducts p = build_offline(model, prior, protocol, cfg);
  json error_ensemble = {{"seed", g.seed}, {"samples", o.samples}};
  if (o.fresh_error_samples > 0) {
    const std::uint64_t seed = g.seed + 0x9e3779b97f4a7c15ULL;
    p.sigma_samples = sample_prior(prior, o.fresh_error_samples, seed);
    p.ensemble_voltages = solve_ensemble(model, p.sigma_samples, protocol, {}).voltages;
    p.reduction_error = estimate_reduction_error(p.sigma_samples, p.ensemble_voltages, p.model);
    error_ensemble = {{"seed", seed}, {"samples", o.fresh_error_samples}};
  }
  const double offline = now_seconds() - t0;

  RomArtifact a;
  a.model = std::move(p.model);
  a.reduction_error = std::move(p.reduction_error);
  a.ensemble_voltages = std::move(p.ensemble_voltages);
  a.provenance = prov;
  a.provenance["error_ensemble"] = error_ensemble;
  a.provenance["model_hash"] = hash_hex(a.model.content_hash());
  a.provenance["dims"] = {{"n_sigma", a.model.n_sigma_modes()}, {"n_u", a.model.n_potential_modes()}};
  a.provenance["rotated"] = p.rotated;
  a.provenance["timing"] = {{"ensemble_s", p.ensemble_seconds}, {"pod_s", p.pod_seconds},
                            {"assembly_s", p.assembly_seconds}, {"error_s", p.error_seconds},
                            {"offline_total_s", offline}};
  write_rom_cache(path, a);

  write_curve_csv(g.out / "sigma_curve.csv", a.model.sigma_basis());
  write_curve_csv(g.out / "u_curve.csv", a.model.potential_bases()[0]);
  json stats = noise_summary_json(a.reduction_error);
  stats["provenance"] = {{"inputs", {{"rom", hash_hex(a.model.content_hash())}}}, {"seed", g.seed}};
  write_json(g.out / "noise_stats.json", stats);
  std::cout << "reduced model " << path.string() << ": N_hat " << a.model.n_sigma_modes() << ", M_hat "
            << a.model.n_potential_modes() << ", offline " << offline << " s (ensemble " << p.ensemble_seconds
            << " s)\n";
  return 0;
}

// ---- loading a reduced model with its ensemble ------------------------------

struct LoadedRom {
  RomArtifact artifact;
  Eigen::MatrixXd samples;
  PriorOptions prior;
};

LoadedRom load_rom(const fs::path& path, const Mesh2D& mesh) {
  LoadedRom r;
  r.artifact = read_rom_cache(path);
  const json& prov = r.artifact.provenance;
  if (prov.at("inputs").at("mesh") != hash_hex(mesh.content_hash())) {
    throw Error(ErrorKind::cache_conflict,
                path.string() + " was built for a different mesh; rebuild it with build-rom --force");
  }
  r.prior = PriorOptions::from_json(prov.at("settings").at("prior"));
  const GaussianPrior prior = build_prior(mesh, r.prior.kernel(), r.prior.mean);
  const json& e = prov.at("error_ensemble");
  r.samples = sample_prior(prior, e.at("samples").get<int>(), e.at("seed").get<std::uint64_t>());
  if (r.samples.cols() != r.artifact.ensemble_voltages.cols()) {
    throw Error(ErrorKind::io_error, path.string() + ": ensemble size does not match its provenance");
  }
  return r;
}

// ---- reconstruct ----------------------------------------------------------

struct ReconstructOptions {
  std::string mesh;
  std::string data;
  std::string method = "reduced";
  std::string rom;
  PriorOptions prior;
  int n_sigma = 0;
  int n_u = 0;
  bool uncertainty = false;
  std::string chord = "-9.8,9.8,9.8,-9.8";
  int chord_samples = 101;
  GnConfig gn;
  std::string name = "result";
  std::string range;
};

struct DataSet {
  Eigen::VectorXd measured;
  json meta;
  NoiseSpec noise;
  std::optional<Phantom> phantom;
  std::string hash;
};

DataSet load_data(const fs::path& csv, const StimulationProtocol& protocol, bool force) {
  DataSet d;
  d.measured = read_measurements_csv(csv, protocol);
  d.hash = hash_hex(file_hash(csv));
  fs::path meta = csv;
  meta.replace_extension(".json");
  if (fs::exists(meta)) {
    d.meta = read_json(meta);
    if (d.meta.value("measurements_hash", std::string()) != d.hash && !force) {
      throw Error(ErrorKind::cache_conflict,
                  csv.string() + " changed since it was simulated; rerun with --force to use it anyway");
    }
    const json& s = d.meta.at("provenance").at("settings");
    d.noise = {s.at("noise").at("relative").get<double>(), s.at("noise").at("range_fraction").get<double>()};
    d.phantom = phantom_from_json(s.at("phantom"));
  }
  return d;
}

NoiseModel data_noise(const DataSet& d) {
  NoiseSpec spec = d.noise;
  // Noise-free data still need a likelihood; fall back to the default spec.
  if (spec.relative == 0.0 && spec.range_fraction == 0.0) spec = NoiseSpec{};
  return measurement_noise_model(d.measured, spec);
}

json result_json(const MapResult& r, const std::string& method, const json& prov) {
  return {{"provenance", prov},
          {"method", method},
          {"estimate", std::vector<double>(r.estimate.data(), r.estimate.data() + r.estimate.size())},
          {"nodal", std::vector<double>(r.nodal.data(), r.nodal.data() + r.nodal.size())},
          {"cost_trace", r.cost_trace},
          {"iterations", r.iterations},
          {"wall_time_s", r.wall_time},
          {"converged", r.converged},
          {"termination", to_string(r.termination)}};
}

int cmd_reconstruct(const Globals& g, const ReconstructOptions& o) {
  if (o.method != "full" && o.method != "reduced" && o.method != "both") {
    throw Error(ErrorKind::invalid_argument, "--method must be full, reduced or both");
  }
  if (o.data.empty()) throw Error(ErrorKind::invalid_argument, "--data is required");
  const Mesh2D mesh = load_mesh(o.mesh);
  const StimulationProtocol protocol = protocol_for(mesh);
  const DataSet data = load_data(o.data, protocol, g.force);
  const bool want_full = o.method != "reduced", want_reduced = o.method != "full";

  json inputs = {{"mesh", hash_hex(mesh.content_hash())}, {"data", data.hash}};
  std::optional<LoadedRom> rom;
  if (want_reduced) {
    const fs::path rp = rom_path(g, o.rom);
    if (!fs::exists(rp)) throw Error(ErrorKind::missing_artifact, rp.string() + " not found; run build-rom first");
    rom = load_rom(rp, mesh);
    inputs["rom"] = hash_hex(rom->artifact.model.content_hash());
  }
  const PriorOptions prior_opts = rom ? rom->prior : o.prior;
  const json settings = {{"method", o.method},     {"prior", prior_opts.to_json()}, {"n_sigma", o.n_sigma},
                         {"n_u", o.n_u},           {"uncertainty", o.uncertainty}, {"chord", o.chord},
                         {"max_iterations", o.gn.max_iterations}, {"tolerance", o.gn.relative_cost_tolerance}};
  const json prov = provenance("result", g, inputs, settings);
  const fs::path first = g.out / (o.name + "_" + (want_reduced ? "reduced" : "full") + ".json");
  const json old = existing_provenance(first);
  if (!old.is_null()) up_to_date(first, old, prov, g.force);

  const NoiseModel meas = data_noise(data);
  const std::optional<Eigen::VectorXd> truth =
      data.phantom ? std::optional<Eigen::VectorXd>(data.phantom->nodal(mesh)) : std::nullopt;
  double lo = prior_opts.mean - 2.0, hi = prior_opts.mean + 2.0;
  if (!o.range.empty()) {
    const auto r = parse_list(o.range);
    if (r.size() != 2) throw Error(ErrorKind::invalid_argument, "--range expects lo,hi");
    lo = r[0], hi = r[1];
  }
  const auto c = parse_list(o.chord);
  if (c.size() != 4) throw Error(ErrorKind::invalid_argument, "--chord expects x1,y1,x2,y2");

  json comparison = {{"provenance", prov}};
  std::optional<MapResult> full_result;
  auto emit = [&](const std::string& method, const MapResult& r, const PosteriorSummary* post) {
    json j = result_json(r, method, prov);
    if (truth) j["relative_error"] = relative_l2_error(mesh, r.nodal, *truth);
    const std::string stem = o.name + "_" + method;
    write_ppm(g.out / (stem + ".ppm"), mesh, r.nodal, lo, hi);
    if (post) {
      j["pointwise_std"] = std::vector<double>(post->pointwise_std.data(),
                                               post->pointwise_std.data() + post->pointwise_std.size());
      const CrossSection cs = cross_section(mesh, r.nodal, post->pointwise_std, Point2(c[0], c[1]),
                                            Point2(c[2], c[3]), o.chord_samples, truth ? *truth : Eigen::VectorXd());
      write_cross_section_csv(g.out / (stem + "_section.csv"), cs);
      write_ppm(g.out / (stem + "_std.ppm"), mesh, post->pointwise_std, 0.0, std::sqrt(prior_opts.variance));
      if (truth) j["coverage"] = cs.coverage();
    }
    write_json(g.out / (stem + ".json"), j);
    comparison[method] = {{"wall_time_s", r.wall_time}, {"iterations", r.iterations},
                          {"relative_error", j.value("relative_error", json())}};
    std::cout << method << ": " << r.iterations << " iterations, " << r.wall_time * 1e3 << " ms, cost "
              << r.cost_trace.back();
    if (truth) std::cout << ", relative error " << j["relative_error"].get<double>();
    std::cout << "\n";
  };

  if (want_full) {
    const CemModel model(mesh, ContactImpedances::uniform(mesh.n_electrodes(), prior_opts.contact_impedance),
                         1e-3 * prior_opts.mean);
    const GaussianPrior prior = build_prior(mesh, prior_opts.kernel(), prior_opts.mean);
    full_result = map_full(model, prior, meas, protocol, data.measured, o.gn);
    std::optional<PosteriorSummary> post;
    if (o.uncertainty) post = posterior_full(model, prior, meas, protocol, *full_result);
    emit("full", *full_result, post ? &*post : nullptr);
  }
  if (want_reduced) {
    const ReducedModel& base = rom->artifact.model;
    ReducedModel model = base;
    NoiseModel reduction = rom->artifact.reduction_error;
    if ((o.n_sigma > 0 && o.n_sigma != base.n_sigma_modes()) || (o.n_u > 0 && o.n_u != base.n_potential_modes())) {
      TruncatedModel t = retruncate(base, rom->samples, rom->artifact.ensemble_voltages,
                                    o.n_sigma > 0 ? o.n_sigma : base.n_sigma_modes(),
                                    o.n_u > 0 ? o.n_u : base.n_potential_modes());
      model = std::move(t.model);
      reduction = std::move(t.reduction_error);
    }
    const NoiseModel total = compose_total_error(meas, reduction);
    const MapResult r = map_reduced(model, total, data.measured, o.gn);
    std::optional<PosteriorSummary> post;
    if (o.uncertainty) post = posterior_reduced(model, total, r);
    emit("reduced", r, post ? &*post : nullptr);
    if (full_result) {
      comparison["speedup"] = full_result->wall_time / r.wall_time;
      comparison["relative_difference"] = relative_l2_error(mesh, r.nodal, full_result->nodal);
      write_json(g.out / (o.name + "_comparison.json"), comparison);
      std::cout << "speedup " << comparison["speedup"].get<double>() << "x\n";
    }
  }
  return 0;
}

// ---- benchmark ------------------------------------------------------------

struct BenchmarkOptions {
  std::string mesh;
  std::vector<std::string> data;
  std::string rom;
  std::string grid_sigma = "5,15,30,45,54";
  std::string grid_u = "5,10,15,20,25";
  int repeats = 3;
  bool skip_full = false;
  GnConfig gn;
  std::string name = "benchmark";
};

int cmd_benchmark(const Globals& g, const BenchmarkOptions& o) {
  if (o.data.empty()) throw Error(ErrorKind::invalid_argument, "--data needs at least one measurement file");
  if (o.repeats < 1) throw Error(ErrorKind::invalid_argument, "--repeats must be positive");
  const Mesh2D mesh = load_mesh(o.mesh);
  const StimulationProtocol protocol = protocol_for(mesh);
  const fs::path rp = rom_path(g, o.rom);
  if (!fs::exists(rp)) throw Error(ErrorKind::missing_artifact, rp.string() + " not found; run build-rom first");
  const LoadedRom rom = load_rom(rp, mesh);
  const ReducedModel& base = rom.artifact.model;
  std::vector<int> gs, gu;
  for (double v : parse_list(o.grid_sigma)) gs.push_back(static_cast<int>(v));
  for (double v : parse_list(o.grid_u)) gu.push_back(static_cast<int>(v));
  for (int v : gs) {
    if (v < 1 || v > base.n_sigma_modes()) throw Error(ErrorKind::invalid_argument, "N_hat grid exceeds the reduced model");
  }
  for (int v : gu) {
    if (v < 1 || v > base.n_potential_modes()) throw Error(ErrorKind::invalid_argument, "M_hat grid exceeds the reduced model");
  }

  const CemModel model(mesh, ContactImpedances::uniform(mesh.n_electrodes(), rom.prior.contact_impedance),
                       1e-3 * rom.prior.mean);
  const GaussianPrior prior = build_prior(mesh, rom.prior.kernel(), rom.prior.mean);
  std::string csv = "case,method,n_sigma,n_u,repeat,wall_time_s,iterations,final_cost,relative_error,speedup\n";
  json summary = json::array();
  const auto fmt = [](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.6g", v);
    return std::string(b);
  };
  for (const std::string& file : o.data) {
    const DataSet data = load_data(file, protocol, g.force);
    const NoiseModel meas = data_noise(data);
    const std::optional<Eigen::VectorXd> truth =
        data.phantom ? std::optional<Eigen::VectorXd>(data.phantom->nodal(mesh)) : std::nullopt;
    const std::string label = fs::path(file).stem().string();
    const auto err = [&](const MapResult& r) { return truth ? fmt(relative_l2_error(mesh, r.nodal, *truth)) : ""; };
    double full_time = 0.0;
    if (!o.skip_full) {
      std::vector<double> times;
      for (int k = 0; k < o.repeats; ++k) {
        const MapResult r = map_full(model, prior, meas, protocol, data.measured, o.gn);
        times.push_back(r.wall_time);
        csv += label + ",full,,," + std::to_string(k) + "," + fmt(r.wall_time) + "," + std::to_string(r.iterations) +
               "," + fmt(r.cost_trace.back()) + "," + err(r) + ",1\n";
      }
      std::sort(times.begin(), times.end());
      full_time = times[times.size() / 2];
    }
    for (int ns : gs) {
      for (int nu : gu) {
        const TruncatedModel t = retruncate(base, rom.samples, rom.artifact.ensemble_voltages, ns, nu);
        const NoiseModel total = compose_total_error(meas, t.reduction_error);
        std::vector<double> times;
        for (int k = 0; k < o.repeats; ++k) {
          const MapResult r = map_reduced(t.model, total, data.measured, o.gn);
          times.push_back(r.wall_time);
          csv += label + ",reduced," + std::to_string(ns) + "," + std::to_string(nu) + "," + std::to_string(k) + "," +
                 fmt(r.wall_time) + "," + std::to_string(r.iterations) + "," + fmt(r.cost_trace.back()) + "," +
                 err(r) + "," + (full_time > 0.0 ? fmt(full_time / r.wall_time) : "") + "\n";
        }
        const Eigen::Map<const Eigen::VectorXd> tv(times.data(), static_cast<Eigen::Index>(times.size()));
        const double mean = tv.mean();
        const double sd = times.size() > 1 ? std::sqrt((tv.array() - mean).square().sum() / (times.size() - 1)) : 0.0;
        summary.push_back({{"case", label}, {"n_sigma", ns}, {"n_u", nu}, {"mean_s", mean},
                           {"coefficient_of_variation", mean > 0.0 ? sd / mean : 0.0}});
      }
    }
    std::cout << label << " done\n";
  }
  write_text(g.out / (o.name + ".csv"), csv);
  write_json(g.out / (o.name + ".json"),
             {{"provenance", provenance("benchmark", g, {{"mesh", hash_hex(mesh.content_hash())},
                                                          {"rom", hash_hex(base.content_hash())}},
                                        {{"repeats", o.repeats}})},
              {"cells", summary}});
  std::cout << "benchmark table " << (g.out / (o.name + ".csv")).string() << "\n";
  return 0;
}

// ---- rom describe ---------------------------------------------------------

int cmd_rom_describe(const Globals& g, const std::string& path_opt) {
  const fs::path path = rom_path(g, path_opt);
  const RomArtifact a = read_rom_cache(path);
  const ReducedModel& m = a.model;
  json j = a.provenance;
  j["file"] = path.string();
  j["content_hash"] = hash_hex(m.content_hash());
  j["n_sigma"] = m.n_sigma_modes();
  j["n_u"] = m.n_potential_modes();
  j["n_injections"] = m.n_injections();
  j["n_measurements"] = m.n_measurements();
  j["sigma_retained"] = m.sigma_basis().curve().at(m.n_sigma_modes());
  j["u_retained"] = m.potential_bases()[0].curve().at(m.n_potential_modes());
  j["reduction_error"] = noise_summary_json(a.reduction_error);
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"POD reduced-order Bayesian EIT reconstruction"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Flat key = value file; subcommand options as <subcommand>.<option>");
  Globals g;
  std::string out = ".", cache = ".podeit-cache";
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--out", out, "Output directory")->capture_default_str();
  app.add_option("--cache", cache, "Cache directory for binary artifacts")->capture_default_str();
  app.add_flag("--force", g.force, "Replace artifacts built from other inputs");

  MeshOptions mo;
  auto* mesh = app.add_subcommand("mesh", "Generate a disk mesh");
  mesh->add_option("--electrodes", mo.electrodes)->capture_default_str();
  mesh->add_option("--width", mo.width, "Electrode width (cm)")->capture_default_str();
  mesh->add_option("--diameter", mo.diameter, "Disk diameter (cm)")->capture_default_str();
  mesh->add_option("--elements", mo.elements, "Target triangle count")->capture_default_str();
  mesh->add_option("--angular-offset", mo.offset, "Angle of electrode 1 (rad)")->capture_default_str();
  mesh->add_option("--name", mo.name, "Output file name")->capture_default_str();

  SimulateOptions so;
  auto* sim = app.add_subcommand("simulate", "Simulate noisy measurements of a phantom");
  sim->add_option("--mesh", so.mesh, "Data mesh JSON")->required();
  sim->add_option("--phantom", so.phantom, "smooth-blob, rectangles or disk-pair")->capture_default_str();
  sim->add_option("--phantom-file", so.phantom_file, "Phantom JSON overriding --phantom");
  sim->add_option("--noise-relative", so.relative)->capture_default_str();
  sim->add_option("--noise-range", so.range)->capture_default_str();
  sim->add_flag("--zero-noise", so.zero_noise);
  sim->add_option("--contact-impedance", so.contact_impedance)->capture_default_str();
  sim->add_option("--reconstruction-mesh", so.reconstruction_mesh, "Mesh used later for inversion");
  sim->add_option("--name", so.name, "Output stem")->capture_default_str();

  BuildOptions bo;
  auto* build = app.add_subcommand("build-rom", "Offline stage: ensemble, POD bases, reduced model, error model");
  build->add_option("--mesh", bo.mesh)->required();
  add_prior_options(build, bo.prior);
  build->add_option("--samples", bo.samples, "Ensemble size T")->capture_default_str();
  build->add_option("--retain-sigma", bo.retain_sigma)->capture_default_str();
  build->add_option("--retain-u", bo.retain_u)->capture_default_str();
  build->add_option("--n-sigma", bo.n_sigma, "Explicit N_hat (overrides --retain-sigma)");
  build->add_option("--n-u", bo.n_u, "Explicit M_hat (overrides --retain-u)");
  build->add_flag("--no-rotate", bo.no_rotate, "Solve every injection instead of rotating one basis");
  build->add_option("--fresh-error-samples", bo.fresh_error_samples,
                    "Estimate the reduction error on a new ensemble of this size");
  build->add_option("--rom", bo.rom, "Output file (default <cache>/rom.bin)");

  ReconstructOptions ro;
  auto* rec = app.add_subcommand("reconstruct", "MAP estimate from measurements");
  rec->add_option("--mesh", ro.mesh)->required();
  rec->add_option("--data", ro.data)->required();
  rec->add_option("--method", ro.method, "full, reduced or both")->capture_default_str();
  rec->add_option("--rom", ro.rom, "Reduced model (default <cache>/rom.bin)");
  add_prior_options(rec, ro.prior);
  rec->add_option("--n-sigma", ro.n_sigma, "Use the leading N_hat conductivity modes");
  rec->add_option("--n-u", ro.n_u, "Use the leading M_hat potential modes");
  rec->add_flag("--uncertainty", ro.uncertainty, "Linearized posterior std and a 2-std cross-section");
  rec->add_option("--chord", ro.chord, "Cross-section x1,y1,x2,y2")->capture_default_str();
  rec->add_option("--chord-samples", ro.chord_samples)->capture_default_str();
  rec->add_option("--max-iterations", ro.gn.max_iterations)->capture_default_str();
  rec->add_option("--tolerance", ro.gn.relative_cost_tolerance)->capture_default_str();
  rec->add_option("--range", ro.range, "Image colour range lo,hi");
  rec->add_option("--name", ro.name, "Output stem")->capture_default_str();

  BenchmarkOptions bm;
  auto* bench = app.add_subcommand("benchmark", "Wall times over test cases and an (N_hat, M_hat) grid");
  bench->add_option("--mesh", bm.mesh)->required();
  bench->add_option("--data", bm.data, "Measurement CSVs")->required()->delimiter(',');
  bench->add_option("--rom", bm.rom);
  bench->add_option("--grid-sigma", bm.grid_sigma)->capture_default_str();
  bench->add_option("--grid-u", bm.grid_u)->capture_default_str();
  bench->add_option("--repeats", bm.repeats)->capture_default_str();
  bench->add_flag("--skip-full", bm.skip_full);
  bench->add_option("--max-iterations", bm.gn.max_iterations)->capture_default_str();
  bench->add_option("--tolerance", bm.gn.relative_cost_tolerance)->capture_default_str();
  bench->add_option("--name", bm.name)->capture_default_str();

  std::string describe_path;
  auto* rom = app.add_subcommand("rom", "Inspect reduced models");
  rom->require_subcommand(1);
  auto* describe = rom->add_subcommand("describe", "Print dimensions, hashes and provenance");
  describe->add_option("--rom", describe_path, "Reduced model (default <cache>/rom.bin)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUser;
  }
  g.out = out;
  g.cache = cache;

  try {
    if (mesh->parsed()) return cmd_mesh(g, mo);
    if (sim->parsed()) return cmd_simulate(g, so);
    if (build->parsed()) return cmd_build_rom(g, bo);
    if (rec->parsed()) return cmd_reconstruct(g, ro);
    if (bench->parsed()) return cmd_benchmark(g, bm);
    if (describe->parsed()) return cmd_rom_describe(g, describe_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_user_error() ? kExitUser : kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUser;
}
