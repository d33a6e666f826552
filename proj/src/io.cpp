#include "pps/io.hpp"

#include <bit>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace pps {

static_assert(std::endian::native == std::endian::little, "array files assume a little-endian host");

namespace {

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return in;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_cell(const std::string& cell, const std::filesystem::path& path, int line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || cell.find_first_not_of(" \r", used) != std::string::npos)
    throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": bad number '" + cell + "'");
  return v;
}

}  // namespace

void write_table_csv(const std::filesystem::path& path, const Table& table) {
  auto out = open_out(path);
  for (const auto& c : table.comments) out << "# " << c << '\n';
  for (std::size_t k = 0; k < table.columns.size(); ++k) out << (k ? "," : "") << table.columns[k];
  out << '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size()) throw std::invalid_argument("write_table_csv: ragged row");
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << row[k];
    out << '\n';
  }
}

Table read_table_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  Table t;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.comments.push_back(line.size() > 2 && line[1] == ' ' ? line.substr(2) : line.substr(1));
      continue;
    }
    if (t.columns.empty()) {
      t.columns = split_csv(line);
      continue;
    }
    const auto cells = split_csv(line);
    if (cells.size() != t.columns.size())
      throw std::runtime_error(path.string() + ":" + std::to_string(n) + ": expected " +
                               std::to_string(t.columns.size()) + " columns");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_cell(c, path, n));
    t.rows.push_back(std::move(row));
  }
  if (t.columns.empty()) throw std::runtime_error(path.string() + ": missing header");
  return t;
}

void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& spectrum) {
  spectrum.validate();
  Table t;
  std::ostringstream meta;
  meta << std::setprecision(17) << "pulse=" << to_string(spectrum.pulse) << " rabi=" << spectrum.rabi
       << " duration=" << spectrum.duration << " t_dark=" << spectrum.t_dark << " units=omega";
  t.comments.push_back(meta.str());
  t.columns = {"delta_over_omega", "transfer_fraction"};
  for (Eigen::Index k = 0; k < spectrum.detuning.size(); ++k) t.rows.push_back({spectrum.detuning(k), spectrum.fraction(k)});
  write_table_csv(path, t);
}

Spectrum read_spectrum_csv(const std::filesystem::path& path) {
  const Table t = read_table_csv(path);
  if (t.columns.size() != 2 || t.columns[0] != "delta_over_omega" || t.columns[1] != "transfer_fraction")
    throw std::runtime_error(path.string() + ": expected header delta_over_omega,transfer_fraction");
  Spectrum s;
  s.detuning.resize(static_cast<Eigen::Index>(t.rows.size()));
  s.fraction.resize(s.detuning.size());
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    s.detuning(static_cast<Eigen::Index>(k)) = t.rows[k][0];
    s.fraction(static_cast<Eigen::Index>(k)) = t.rows[k][1];
  }
  for (const auto& c : t.comments) {
    std::istringstream ss(c);
    std::string item;
    while (ss >> item) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
      if (key == "pulse") s.pulse = value == "probe" ? PulseLabel::probe : value == "dark" ? PulseLabel::dark : PulseLabel::pump;
      else if (key == "rabi") s.rabi = std::stod(value);
      else if (key == "duration") s.duration = std::stod(value);
      else if (key == "t_dark") s.t_dark = std::stod(value);
    }
  }
  s.validate();
  return s;
}

void write_array(const std::filesystem::path& path, const ArrayFile& array) {
  if (array.is_complex() && (array.imag.rows() != array.real.rows() || array.imag.cols() != array.real.cols()))
    throw std::invalid_argument("write_array: real and imaginary shapes differ");
  nlohmann::json h;
  h["quantity"] = array.quantity;
  h["unit"] = array.unit;
  h["shape"] = {array.real.rows(), array.real.cols()};
  h["dtype"] = array.is_complex() ? "complex128" : "float64";
  h["order"] = "column-major";
  h["axes"] = nlohmann::json::array();
  for (const auto& a : array.axes)
    h["axes"].push_back({{"name", a.name}, {"unit", a.unit}, {"min", a.min}, {"max", a.max}, {"points", a.points}});
  h["meta"] = array.meta;
  auto out = open_out(path, true);
  out << "PPSARRAY 1\n" << h.dump() << '\n';
  out.write(reinterpret_cast<const char*>(array.real.data()), static_cast<std::streamsize>(array.real.size() * sizeof(double)));
  if (array.is_complex())
    out.write(reinterpret_cast<const char*>(array.imag.data()), static_cast<std::streamsize>(array.imag.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ArrayFile read_array(const std::filesystem::path& path) {
  auto in = open_in(path, true);
  std::string magic, header;
  std::getline(in, magic);
  if (magic != "PPSARRAY 1") throw std::runtime_error(path.string() + ": not a PPSARRAY file");
  std::getline(in, header);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": bad header: " + e.what());
  }
  ArrayFile a;
  a.quantity = h.value("quantity", "");
  a.unit = h.value("unit", "");
  a.meta = h.value("meta", nlohmann::json::object());
  for (const auto& ax : h.at("axes"))
    a.axes.push_back({ax.at("name"), ax.at("unit"), ax.at("min"), ax.at("max"), ax.at("points")});
  const Eigen::Index rows = h.at("shape")[0], cols = h.at("shape")[1];
  const bool cplx = h.at("dtype") == "complex128";
  auto read_block = [&](Mat& m) {
    m.resize(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw std::runtime_error(path.string() + ": truncated data");
  };
  read_block(a.real);
  if (cplx) read_block(a.imag);
  return a;
}

ArrayAxis grid_axis(const Grid& grid, const std::string& name) {
  return {name, "alpha", grid.x_min, grid.x_max, grid.points};
}

GridPtr grid_from_axis(const ArrayAxis& axis) { return make_grid(axis.points, axis.min, axis.max); }

ArrayFile density_matrix_array(const OneBodyDensityMatrix& rho) {
  ArrayFile a;
  a.quantity = "rho1_" + to_string(rho.species);
  a.unit = "1/alpha";
  a.real = rho.rho.real();
  if (rho.rho.imag().cwiseAbs().maxCoeff() > 0.0) a.imag = rho.rho.imag();
  a.axes = {grid_axis(*rho.grid, "x"), grid_axis(*rho.grid, "x'")};
  a.meta["time"] = rho.time;
  a.meta["species"] = to_string(rho.species);
  return a;
}

OneBodyDensityMatrix density_matrix_from_array(const ArrayFile& a) {
  if (a.axes.size() != 2 || a.real.rows() != a.real.cols() || a.axes[0].points != a.real.rows())
    throw std::invalid_argument("density_matrix_from_array: expected a square matrix with two grid axes");
  OneBodyDensityMatrix r;
  r.grid = grid_from_axis(a.axes[0]);
  r.rho = a.real.cast<cplx>();
  if (a.is_complex()) r.rho.imag() = a.imag;
  r.time = a.meta.value("time", 0.0);
  r.species = species_from_string(a.meta.value("species", "up"));
  return r;
}

void write_manifest(const std::filesystem::path& dir, const std::string& verb, const nlohmann::json& config,
                    const std::vector<std::string>& outputs, const nlohmann::json& results,
                    const std::vector<std::string>& argv) {
  nlohmann::json m;
  m["verb"] = verb;
  m["argv"] = argv;
  m["config"] = config;
  m["outputs"] = outputs;
  m["results"] = results;
  m["units"] = "harmonic: lengths alpha = sqrt(hbar/m omega), energies hbar omega, times 1/omega";
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::ostringstream ts;
  ts << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
  m["created"] = ts.str();
  auto out = open_out(dir / "manifest.json");
  out << m.dump(2) << '\n';
}

}  // namespace pps
