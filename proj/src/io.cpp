#include "podeit/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "podeit/error.hpp"

namespace podeit {

std::uint64_t parse_hash_hex(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw Error(ErrorKind::io_error, "malformed hash '" + s + "'");
  }
  return v;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::missing_artifact, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io_error, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorKind::io_error, "write failed for " + path.string());
  }
  fs::rename(tmp, path);
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::io_error, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::uint64_t file_hash(const fs::path& path) {
  const std::string s = read_text(path);
  ContentHasher h;
  h.bytes(s.data(), s.size());
  return h.value();
}

// ---- mesh -----------------------------------------------------------------

namespace {

std::vector<std::vector<Mesh2D::ElectrodeSegment>> electrode_segments(const Mesh2D& mesh) {
  std::vector<std::vector<Mesh2D::ElectrodeSegment>> out(mesh.n_electrodes());
  for (int l = 0; l < mesh.n_electrodes(); ++l) {
    for (const ElectrodeEdge& e : mesh.electrodes()[l]) {
      const auto& ab = mesh.edges()[e.edge];
      out[l].push_back({ab[0], ab[1], e.measure});
    }
  }
  return out;
}

json layout_to_json(const ElectrodeLayout& l) {
  return {{"count", l.count}, {"width", l.width}, {"radius", l.radius}, {"angular_offset", l.angular_offset}};
}

ElectrodeLayout layout_from_json(const json& j) {
  return {j.at("count").get<int>(), j.at("width").get<double>(), j.at("radius").get<double>(),
          j.at("angular_offset").get<double>()};
}

}  // namespace

json mesh_to_json(const Mesh2D& mesh) {
  json j;
  j["format"] = "podeit-mesh";
  j["version"] = 1;
  json verts = json::array();
  for (const Point2& p : mesh.vertices()) verts.push_back({p.x(), p.y()});
  j["vertices"] = std::move(verts);
  json tris = json::array();
  for (const auto& t : mesh.triangles()) tris.push_back({t[0], t[1], t[2]});
  j["triangles"] = std::move(tris);
  json els = json::array();
  for (const auto& segs : electrode_segments(mesh)) {
    json e = json::array();
    for (const auto& s : segs) e.push_back({{"a", s.a}, {"b", s.b}, {"measure", s.measure}});
    els.push_back(std::move(e));
  }
  j["electrodes"] = std::move(els);
  j["layout"] = mesh.layout() ? layout_to_json(*mesh.layout()) : json(nullptr);
  j["content_hash"] = hash_hex(mesh.content_hash());
  return j;
}

Mesh2D mesh_from_json(const json& j) {
  try {
    if (j.at("format") != "podeit-mesh") throw Error(ErrorKind::io_error, "not a mesh document");
    if (j.at("version").get<int>() != 1) throw Error(ErrorKind::io_error, "unsupported mesh version");
    std::vector<Point2> v;
    for (const auto& p : j.at("vertices")) v.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    std::vector<std::array<int, 3>> t;
    for (const auto& e : j.at("triangles")) t.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<int>()});
    std::vector<std::vector<Mesh2D::ElectrodeSegment>> els;
    for (const auto& e : j.at("electrodes")) {
      auto& segs = els.emplace_back();
      for (const auto& s : e) segs.push_back({s.at("a").get<int>(), s.at("b").get<int>(), s.at("measure").get<double>()});
    }
    std::optional<ElectrodeLayout> layout;
    if (!j.at("layout").is_null()) layout = layout_from_json(j.at("layout"));
    Mesh2D mesh = Mesh2D::build(std::move(v), std::move(t), els, layout);
    if (j.contains("content_hash") && parse_hash_hex(j["content_hash"].get<std::string>()) != mesh.content_hash()) {
      throw Error(ErrorKind::io_error, "mesh content hash does not match its data");
    }
    return mesh;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::io_error, std::string("malformed mesh document: ") + e.what());
  }
}

void write_mesh_json(const fs::path& path, const Mesh2D& mesh) { write_json(path, mesh_to_json(mesh)); }

Mesh2D read_mesh_json(const fs::path& path) { return mesh_from_json(read_json(path)); }

// ---- binary ---------------------------------------------------------------

BinaryWriter::BinaryWriter(const fs::path& path, const std::string& magic, std::uint32_t version)
    : path_(path), tmp_(path.string() + ".tmp") {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  out_.open(tmp_, std::ios::binary | std::ios::trunc);
  if (!out_) throw Error(ErrorKind::io_error, "cannot write " + path.string());
  out_.write(magic.data(), static_cast<std::streamsize>(magic.size()));
  u64(version);
}

BinaryWriter::~BinaryWriter() {
  if (!committed_) {
    out_.close();
    std::error_code ec;
    fs::remove(tmp_, ec);
  }
}

void BinaryWriter::u64(std::uint64_t v) { out_.write(reinterpret_cast<const char*>(&v), sizeof v); }
void BinaryWriter::i64(std::int64_t v) { out_.write(reinterpret_cast<const char*>(&v), sizeof v); }
void BinaryWriter::f64(double v) { out_.write(reinterpret_cast<const char*>(&v), sizeof v); }

void BinaryWriter::str(const std::string& s) {
  u64(s.size());
  out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void BinaryWriter::matrix(const Eigen::MatrixXd& m) {
  i64(m.rows());
  i64(m.cols());
  out_.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
}

void BinaryWriter::vector(const Eigen::VectorXd& v) {
  i64(v.size());
  out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * v.size()));
}

void BinaryWriter::commit() {
  out_.close();
  if (!out_) throw Error(ErrorKind::io_error, "write failed for " + path_.string());
  fs::rename(tmp_, path_);
  committed_ = true;
}

BinaryReader::BinaryReader(const fs::path& path, const std::string& magic, std::uint32_t version)
    : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw Error(ErrorKind::missing_artifact, "cannot open " + path.string());
  std::string tag(magic.size(), '\0');
  read(tag.data(), tag.size());
  if (tag != magic) throw Error(ErrorKind::io_error, path.string() + " is not a " + magic + " file");
  const std::uint64_t v = u64();
  if (v != version) {
    throw Error(ErrorKind::io_error, path.string() + ": format version " + std::to_string(v) + ", expected " +
                                         std::to_string(version));
  }
}

void BinaryReader::read(void* p, std::size_t n) {
  in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!in_) throw Error(ErrorKind::io_error, "truncated file " + path_.string());
}

std::uint64_t BinaryReader::u64() {
  std::uint64_t v;
  read(&v, sizeof v);
  return v;
}

std::int64_t BinaryReader::i64() {
  std::int64_t v;
  read(&v, sizeof v);
  return v;
}

double BinaryReader::f64() {
  double v;
  read(&v, sizeof v);
  return v;
}

std::string BinaryReader::str() {
  const std::uint64_t n = u64();
  if (n > (1ULL << 32)) throw Error(ErrorKind::io_error, "corrupt string length in " + path_.string());
  std::string s(n, '\0');
  read(s.data(), n);
  return s;
}

Eigen::MatrixXd BinaryReader::matrix() {
  const std::int64_t r = i64(), c = i64();
  if (r < 0 || c < 0 || r * c > (1LL << 32)) throw Error(ErrorKind::io_error, "corrupt matrix in " + path_.string());
  Eigen::MatrixXd m(r, c);
  read(m.data(), sizeof(double) * m.size());
  return m;
}

Eigen::VectorXd BinaryReader::vector() {
  const std::int64_t n = i64();
  if (n < 0 || n > (1LL << 32)) throw Error(ErrorKind::io_error, "corrupt vector in " + path_.string());
  Eigen::VectorXd v(n);
  read(v.data(), sizeof(double) * v.size());
  return v;
}

void write_mesh_cache(const fs::path& path, const Mesh2D& mesh) {
  BinaryWriter w(path, "PODEITMS", kCacheVersion);
  w.str(mesh_to_json(mesh).dump());
  w.commit();
}

Mesh2D read_mesh_cache(const fs::path& path) {
  BinaryReader r(path, "PODEITMS", kCacheVersion);
  try {
    return mesh_from_json(json::parse(r.str()));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::io_error, path.string() + ": " + e.what());
  }
}

// ---- reduced model --------------------------------------------------------

namespace {

void write_basis(BinaryWriter& w, const PodBasis& b) {
  w.matrix(b.modes);
  w.vector(b.eigenvalues);
  w.vector(b.spectrum);
  w.f64(b.total_variance);
  w.vector(b.mean);
  w.i64(b.ambient == PodAmbient::conductivity ? 0 : 1);
  w.i64(b.injection);
}

PodBasis read_basis(BinaryReader& r) {
  PodBasis b;
  b.modes = r.matrix();
  b.eigenvalues = r.vector();
  b.spectrum = r.vector();
  b.total_variance = r.f64();
  b.mean = r.vector();
  b.ambient = r.i64() == 0 ? PodAmbient::conductivity : PodAmbient::potential;
  b.injection = static_cast<int>(r.i64());
  return b;
}

}  // namespace

struct ReducedModelAccess {
  static void write(BinaryWriter& w, const ReducedModel& m) {
    write_basis(w, m.sigma_basis_);
    w.u64(m.potential_bases_.size());
    for (const auto& b : m.potential_bases_) write_basis(w, b);
    w.matrix(m.protocol_.currents);
    w.matrix(m.protocol_.measurement);
    w.u64(m.stiffness_.size());
    for (const auto& per : m.stiffness_) {
      w.u64(per.size());
      for (const auto& k : per) w.matrix(k);
    }
    for (const auto& c : m.contact_) w.matrix(c);
    for (const auto& c : m.coupling_) w.matrix(c);
    w.vector(m.F_);
    w.matrix(m.C_);
    w.u64(m.mesh_hash_);
    w.u64(m.model_hash_);
  }

  static ReducedModel read(BinaryReader& r) {
    ReducedModel m;
    m.sigma_basis_ = read_basis(r);
    const std::uint64_t nb = r.u64();
    for (std::uint64_t i = 0; i < nb; ++i) m.potential_bases_.push_back(read_basis(r));
    m.protocol_.currents = r.matrix();
    m.protocol_.measurement = r.matrix();
    const std::uint64_t ni = r.u64();
    m.stiffness_.resize(ni);
    for (auto& per : m.stiffness_) {
      per.resize(r.u64());
      for (auto& k : per) k = r.matrix();
    }
    m.contact_.resize(ni);
    m.coupling_.resize(ni);
    for (auto& c : m.contact_) c = r.matrix();
    for (auto& c : m.coupling_) c = r.matrix();
    m.F_ = r.vector();
    m.C_ = r.matrix();
    m.mesh_hash_ = r.u64();
    m.model_hash_ = r.u64();
    return m;
  }
};

void write_rom_cache(const fs::path& path, const RomArtifact& a) {
  BinaryWriter w(path, "PODEITRM", kCacheVersion);
  w.str(a.provenance.dump());
  ReducedModelAccess::write(w, a.model);
  w.vector(a.reduction_error.mean);
  w.matrix(a.reduction_error.covariance);
  w.matrix(a.ensemble_voltages);
  w.u64(a.model.content_hash());
  w.commit();
}

RomArtifact read_rom_cache(const fs::path& path) {
  BinaryReader r(path, "PODEITRM", kCacheVersion);
  RomArtifact a;
  try {
    a.provenance = json::parse(r.str());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::io_error, path.string() + ": " + e.what());
  }
  a.model = ReducedModelAccess::read(r);
  Eigen::VectorXd mean = r.vector();
  Eigen::MatrixXd cov = r.matrix();
  a.reduction_error = NoiseModel::from_moments(std::move(mean), std::move(cov));
  a.ensemble_voltages = r.matrix();
  if (r.u64() != a.model.content_hash()) {
    throw Error(ErrorKind::io_error, path.string() + ": reduced model hash mismatch (corrupt cache)");
  }
  return a;
}

json read_rom_provenance(const fs::path& path) {
  BinaryReader r(path, "PODEITRM", kCacheVersion);
  try {
    return json::parse(r.str());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::io_error, path.string() + ": " + e.what());
  }
}

// ---- CSV ------------------------------------------------------------------

namespace {

std::string pair_label(const Eigen::RowVectorXd& row) {
  Eigen::Index pos = 0, neg = 0;
  row.maxCoeff(&pos);
  row.minCoeff(&neg);
  return std::to_string(pos + 1) + "-" + std::to_string(neg + 1);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && *b == ' ') ++b;
  const auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) throw Error(ErrorKind::io_error, "not a number: '" + s + "'");
  return v;
}

}  // namespace

void write_measurements_csv(const fs::path& path, const StimulationProtocol& protocol, const Eigen::VectorXd& v) {
  if (v.size() != protocol.n_measurements()) {
    throw Error(ErrorKind::dimension_mismatch, "voltage vector length differs from the protocol");
  }
  std::string s = "injection,electrode_pair,value\n";
  const int r = protocol.n_measurements_per_injection();
  for (int i = 0; i < protocol.n_injections(); ++i) {
    for (int m = 0; m < r; ++m) {
      s += std::to_string(i + 1) + "," + pair_label(protocol.measurement.row(m)) + "," + fmt(v[i * r + m]) + "\n";
    }
  }
  write_text(path, s);
}

Eigen::VectorXd read_measurements_csv(const fs::path& path, const StimulationProtocol& protocol) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) || split(line) != std::vector<std::string>{"injection", "electrode_pair", "value"}) {
    throw Error(ErrorKind::io_error, path.string() + ": expected header injection,electrode_pair,value");
  }
  const int r = protocol.n_measurements_per_injection();
  Eigen::VectorXd v(protocol.n_measurements());
  int k = 0;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto f = split(line);
    if (f.size() != 3) throw Error(ErrorKind::io_error, path.string() + ":" + std::to_string(lineno) + ": 3 fields expected");
    if (k >= v.size()) throw Error(ErrorKind::dimension_mismatch, path.string() + ": more rows than the protocol has");
    const int inj = k / r, m = k % r;
    if (f[0] != std::to_string(inj + 1) || f[1] != pair_label(protocol.measurement.row(m))) {
      throw Error(ErrorKind::dimension_mismatch,
                  path.string() + ":" + std::to_string(lineno) + ": row does not follow the stimulation protocol");
    }
    try {
      v[k++] = parse_double(f[2]);
    } catch (const Error& e) {
      throw Error(ErrorKind::io_error, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (k != v.size()) throw Error(ErrorKind::dimension_mismatch, path.string() + ": fewer rows than the protocol has");
  return v;
}

void write_curve_csv(const fs::path& path, const PodBasis& basis) {
  const RetainedVarianceCurve curve = basis.curve();
  std::string s = "k,eigenvalue,retained_fraction\n";
  for (Eigen::Index k = 0; k < basis.spectrum.size(); ++k) {
    s += std::to_string(k + 1) + "," + fmt(basis.spectrum[k]) + "," + fmt(curve.at(static_cast<int>(k + 1))) + "\n";
  }
  write_text(path, s);
}

void write_cross_section_csv(const fs::path& path, const CrossSection& cs) {
  const bool truth = cs.truth.size() == cs.estimate.size();
  std::string s = truth ? "arc,x,y,estimate,std,lower,upper,truth\n" : "arc,x,y,estimate,std,lower,upper\n";
  const Eigen::VectorXd lo = cs.lower(), hi = cs.upper();
  for (Eigen::Index i = 0; i < cs.estimate.size(); ++i) {
    s += fmt(cs.arc[i]) + "," + fmt(cs.points[i].x()) + "," + fmt(cs.points[i].y()) + "," + fmt(cs.estimate[i]) +
         "," + fmt(cs.std[i]) + "," + fmt(lo[i]) + "," + fmt(hi[i]);
    if (truth) s += "," + fmt(cs.truth[i]);
    s += "\n";
  }
  write_text(path, s);
}

json noise_summary_json(const NoiseModel& model) {
  const NoiseSummary s = summarize(model);
  return {{"dimension", model.dimension()},
          {"trace", s.trace},
          {"min_eigenvalue", s.min_eigenvalue},
          {"max_eigenvalue", s.max_eigenvalue},
          {"mean_norm", s.mean_norm}};
}

// ---- images ---------------------------------------------------------------

std::array<std::uint8_t, 3> colormap(double t) {
  static constexpr std::array<std::array<int, 3>, 7> stops{{{0x30, 0x12, 0x3b},
                                                            {0x46, 0x86, 0xfb},
                                                            {0x1a, 0xe4, 0xb6},
                                                            {0xa2, 0xfc, 0x3c},
                                                            {0xfa, 0xba, 0x39},
                                                            {0xe4, 0x46, 0x0a},
                                                            {0x7a, 0x04, 0x03}}};
  if (!std::isfinite(t)) t = 0.0;
  t = std::clamp(t, 0.0, 1.0) * (stops.size() - 1);
  const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(t), stops.size() - 2);
  const double f = t - static_cast<double>(i);
  std::array<std::uint8_t, 3> c{};
  for (int k = 0; k < 3; ++k) {
    c[k] = static_cast<std::uint8_t>(std::lround((1.0 - f) * stops[i][k] + f * stops[i + 1][k]));
  }
  return c;
}

void write_ppm(const fs::path& path, const Mesh2D& mesh, const Eigen::VectorXd& nodal, double lo, double hi,
               int size) {
  if (nodal.size() != mesh.n_linear_nodes()) {
    throw Error(ErrorKind::dimension_mismatch, "image field must be nodal");
  }
  if (size < 8) throw Error(ErrorKind::invalid_argument, "image size too small");
  if (!(hi > lo)) hi = lo + 1.0;
  double radius = 0.0;
  for (const Point2& p : mesh.vertices()) radius = std::max(radius, p.norm());
  const PointLocator locator(mesh);
  std::string img = "P6\n" + std::to_string(size) + " " + std::to_string(size) + "\n255\n";
  const std::size_t header = img.size();
  img.resize(header + 3 * static_cast<std::size_t>(size) * size, static_cast<char>(255));
  const double px = 2.0 * radius / size;
  for (int j = 0; j < size; ++j) {
    for (int i = 0; i < size; ++i) {
      const Point2 p(-radius + (i + 0.5) * px, radius - (j + 0.5) * px);
      if (p.norm() > radius) continue;
      const auto hit = locator.locate(p);
      if (hit.triangle < 0) continue;
      const auto& t = mesh.triangles()[hit.triangle];
      const double v = (nodal[t[0]] + nodal[t[1]] + nodal[t[2]]) / 3.0;
      const auto c = colormap((v - lo) / (hi - lo));
      const std::size_t o = header + 3 * (static_cast<std::size_t>(j) * size + i);
      for (int k = 0; k < 3; ++k) img[o + k] = static_cast<char>(c[k]);
    }
  }
  write_text(path, img);
}

}  // namespace podeit
