#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pps/observables.hpp"
#include "pps/spectroscopy.hpp"

namespace pps {

// CSV with a '#'-comment metadata line and the header delta_over_omega,transfer_fraction.
void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& spectrum);
Spectrum read_spectrum_csv(const std::filesystem::path& path);

// Named columns of equal length; `comments` become leading '#' lines.
struct Table {
  std::vector<std::string> comments;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};
void write_table_csv(const std::filesystem::path& path, const Table& table);
Table read_table_csv(const std::filesystem::path& path);

struct ArrayAxis {
  std::string name;
  std::string unit;
  // sine-DVR box walls and interior point count
  double min = 0.0;
  double max = 0.0;
  int points = 0;
};

// Line 1 "PPSARRAY 1", line 2 a JSON header, then little-endian float64 in column-major order
// (real block, then imaginary block for complex data).
struct ArrayFile {
  std::string quantity;
  std::string unit;
  Mat real;
  Mat imag;  // empty for real data
  std::vector<ArrayAxis> axes;
  nlohmann::json meta = nlohmann::json::object();

  bool is_complex() const { return imag.size() > 0; }
};

void write_array(const std::filesystem::path& path, const ArrayFile& array);
ArrayFile read_array(const std::filesystem::path& path);

ArrayAxis grid_axis(const Grid& grid, const std::string& name = "x");
GridPtr grid_from_axis(const ArrayAxis& axis);

ArrayFile density_matrix_array(const OneBodyDensityMatrix& rho);
OneBodyDensityMatrix density_matrix_from_array(const ArrayFile& array);

// manifest.json: verb, resolved config, outputs, extra results and creation metadata.
void write_manifest(const std::filesystem::path& dir, const std::string& verb, const nlohmann::json& config,
                    const std::vector<std::string>& outputs, const nlohmann::json& results = nlohmann::json::object(),
                    const std::vector<std::string>& argv = {});

}  // namespace pps
