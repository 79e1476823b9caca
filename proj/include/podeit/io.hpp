#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "podeit/approx_error.hpp"
#include "podeit/hash.hpp"
#include "podeit/map_solver.hpp"
#include "podeit/mesh.hpp"
#include "podeit/pod.hpp"
#include "podeit/rom.hpp"

namespace podeit {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t parse_hash_hex(const std::string& s);

std::string read_text(const fs::path& path);
/// Writes through a temporary sibling and renames, so readers never see a
/// partially written artifact.
void write_text(const fs::path& path, const std::string& text);
json read_json(const fs::path& path);
void write_json(const fs::path& path, const json& j);
std::uint64_t file_hash(const fs::path& path);

// Mesh JSON, schema "podeit-mesh" version 1.
json mesh_to_json(const Mesh2D& mesh);
Mesh2D mesh_from_json(const json& j);
void write_mesh_json(const fs::path& path, const Mesh2D& mesh);
Mesh2D read_mesh_json(const fs::path& path);

/// Little-endian binary stream with a magic tag and format version. Readers
/// refuse other versions with io_error.
class BinaryWriter {
 public:
  BinaryWriter(const fs::path& path, const std::string& magic, std::uint32_t version);
  ~BinaryWriter();
  BinaryWriter(const BinaryWriter&) = delete;
  BinaryWriter& operator=(const BinaryWriter&) = delete;

  void u64(std::uint64_t v);
  void i64(std::int64_t v);
  void f64(double v);
  void str(const std::string& s);
  void matrix(const Eigen::MatrixXd& m);
  void vector(const Eigen::VectorXd& v);
  /// Flushes and moves the temporary file into place.
  void commit();

 private:
  fs::path path_;
  fs::path tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

class BinaryReader {
 public:
  BinaryReader(const fs::path& path, const std::string& magic, std::uint32_t version);

  std::uint64_t u64();
  std::int64_t i64();
  double f64();
  std::string str();
  Eigen::MatrixXd matrix();
  Eigen::VectorXd vector();

 private:
  void read(void* p, std::size_t n);
  fs::path path_;
  std::ifstream in_;
};

constexpr std::uint32_t kCacheVersion = 1;

void write_mesh_cache(const fs::path& path, const Mesh2D& mesh);
Mesh2D read_mesh_cache(const fs::path& path);

/// Offline products of build-rom: the reduced model, the reduction error
/// estimate and the full-order voltages of the ensemble, plus a JSON provenance
/// block (input hashes, seeds, settings). The conductivity samples are not
/// stored; they are regenerated from the prior and the recorded seed.
struct RomArtifact {
  ReducedModel model;
  NoiseModel reduction_error;
  Eigen::MatrixXd ensemble_voltages;
  json provenance;
};

void write_rom_cache(const fs::path& path, const RomArtifact& artifact);
RomArtifact read_rom_cache(const fs::path& path);
/// Only the provenance block, without loading the matrices.
json read_rom_provenance(const fs::path& path);

/// Measurement CSV with header injection,electrode_pair,value. Injections and
/// electrodes are 1-based; the pair "a-b" names the positive and negative
/// electrode of the measurement row.
void write_measurements_csv(const fs::path& path, const StimulationProtocol& protocol, const Eigen::VectorXd& v);
/// Throws io_error on malformed rows and dimension_mismatch when the rows do not
/// follow `protocol`.
Eigen::VectorXd read_measurements_csv(const fs::path& path, const StimulationProtocol& protocol);

/// k,eigenvalue,retained_fraction for k = 1..n.
void write_curve_csv(const fs::path& path, const PodBasis& basis);
/// arc,x,y,estimate,std,lower,upper[,truth].
void write_cross_section_csv(const fs::path& path, const CrossSection& cs);

json noise_summary_json(const NoiseModel& model);

/// Fixed colormap: linear interpolation through
/// #30123b #4686fb #1ae4b6 #a2fc3c #faba39 #e4460a #7a0403 (low to high).
std::array<std::uint8_t, 3> colormap(double t);

/// Binary PPM (P6) of a nodal field, each triangle filled with the mean of its
/// vertex values mapped linearly from [lo, hi]. Pixels outside the circumscribed
/// circle are white; those between the circle and the polygon take the nearest triangle.
void write_ppm(const fs::path& path, const Mesh2D& mesh, const Eigen::VectorXd& nodal, double lo, double hi,
               int size = 256);

}  // namespace podeit
