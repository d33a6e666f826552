#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pps/eth.hpp"
#include "pps/pipeline.hpp"
#include "pps/spectroscopy.hpp"
#include "pps/units.hpp"

namespace pps {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

// [section] / key = value; '#' and ';' start comments.
struct IniValue {
  std::string text;
  int line = 0;
};
struct IniDocument {
  std::string source;
  std::map<std::string, std::map<std::string, IniValue>> sections;
  std::map<std::string, int> section_lines;
};

IniDocument parse_ini(const std::string& text, const std::string& source);

struct SweepSettings {
  std::optional<Vec> pump_detunings;   // default_pump_detunings when absent
  std::optional<Vec> probe_detunings;  // default_probe_detunings when absent
  std::vector<double> t_dark{0.0};
  bool calibrate_probe = true;  // probe duration pi / Omega_R+ from a resonant fit
};

struct EvolveSettings {
  double duration = 10.0;  // dark time after the blast
  double snapshot_stride = 0.1;
};

struct EthSettings {
  DarkRunOptions run;
  EthTruncation truncation;
  std::optional<Ensemble> ensemble;  // from the statistics when absent
};

struct UnitsSettings {
  double mass_amu = 86.909180527;
  double axial_hz = 100.0;
  double transverse_hz = 5100.0;
  double temperature = 0.0;  // k_B T / hbar omega
  ScatteringRoute route = ScatteringRoute::confinement;
  ValidityOptions thresholds;

  TrapGeometry geometry() const;
  PhysicalScale scale() const;
};

struct ConvergenceSettings {
  std::vector<int> bath_orbitals{2, 3, 4};
  std::vector<int> imp_orbitals{4, 6, 8};
};

struct RunConfig {
  std::string source;
  SystemParams system;
  SolverSetup setup;
  ProtocolSequence protocol;
  bool probe_enabled = false;
  SweepSettings sweep;
  EvolveSettings evolve;
  EthSettings eth;
  double ramsey_duration = 20.0;
  UnitsSettings units;
  ConvergenceSettings convergence;
  std::string output_dir = "pps-out";
  std::uint64_t seed = 0;
  int workers = 0;  // 0: PPS_THREADS or hardware concurrency

  Ensemble ensemble() const;
};

// Defaults fill everything but [system] n_bath, n_imp, g_bb, g_bi; unknown keys are rejected.
RunConfig parse_config_text(const std::string& text, const std::string& source = "<config>");
RunConfig parse_config(const std::filesystem::path& path);

nlohmann::json to_json(const RunConfig& config);

}  // namespace pps
