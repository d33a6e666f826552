#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pps/ci.hpp"
#include "pps/coupled.hpp"

namespace pps {

enum class BlastMode { projector, dissipative };
enum class Solver { coupled, ci };

std::string to_string(BlastMode m);
std::string to_string(Solver s);
BlastMode blast_mode_from_string(const std::string& s);
Solver solver_from_string(const std::string& s);

// pump -> blast -> dark -> probe
struct ProtocolSequence {
  PulseSpec pump{PulseLabel::pump, 10.0, 0.0, 0.1 * 3.141592653589793};
  BlastMode blast = BlastMode::projector;
  double blast_gamma = 100.0;
  double blast_time = 0.1;
  double t_dark = 0.0;
  std::optional<PulseSpec> probe;

  void validate() const;
};

// Grids and solver choice. The mean-field single impurity shares the bath grid;
// two impurities use their own pair grid.
struct SolverSetup {
  Solver solver = Solver::coupled;
  int bath_points = 600;
  double bath_extent = 50.0;  // grid on [-extent, extent]
  int pair_points = 149;
  double pair_extent = 15.0;
  PropagationOptions propagation;

  int ci_points = 120;
  double ci_extent = 8.0;
  int ci_bath_orbitals = 4;
  int ci_imp_orbitals = 8;
  double ci_cap = 4e6;  // largest admissible CI dimension
};

struct ProtocolSample {
  PulseLabel stage = PulseLabel::dark;
  double time = 0.0;  // since the start of the pump
  double n_up = 0.0;
  double n_down = 0.0;
  double interspecies = 0.0;  // <H_BI> / N_I
};

using ProtocolObserver = std::function<void(const ProtocolSample&)>;

// State of either solver.
struct ProtocolState {
  CoupledState mf;
  CVec ci;
  double time = 0.0;
};

struct ProtocolResult {
  double up_after_pump = 0.0;    // <N_up>/N_I at the end of the pump
  double pump_fidelity = 0.0;    // flip_fidelity of the blasted state
  double pump_fidelity_impurity = 0.0;
  double down_after_probe = 0.0; // <N_down>/N_I after the probe (NaN without probe)
  ProtocolState final;
};

// Holds the prepared initial state and solver data; const methods are safe to call concurrently.
class ProtocolEngine {
 public:
  // Throws std::invalid_argument when the solver cannot represent `params`.
  ProtocolEngine(const SystemParams& params, const SolverSetup& setup);

  const SystemParams& params() const { return params_; }
  const SolverSetup& setup() const { return setup_; }

  ProtocolState initial() const { return initial_; }
  ProtocolState pulse(ProtocolState s, const PulseSpec& p, const ProtocolObserver& observer = {}) const;
  ProtocolState blast(ProtocolState s, const ProtocolSequence& seq) const;
  // (<N_up>, <N_down>)
  std::pair<double, double> populations(const ProtocolState& s) const;
  double interspecies(const ProtocolState& s) const;
  // Squared overlap with the spin-flipped initial state. The mean-field value is the Hartree product
  // (bath factor to the power N_B); `include_bath = false` keeps only the impurity factor.
  double flip_fidelity(const ProtocolState& s, bool include_bath = true) const;

  ProtocolResult run(const ProtocolSequence& seq, const ProtocolObserver& observer = {}) const;
  // pump + blast + dark, the common part of every probe detuning
  ProtocolState prepare_probe(const ProtocolSequence& seq, const ProtocolObserver& observer = {}) const;

  // CI internals, empty for the mean-field solver.
  const FockBasis* basis() const { return ci_ ? &ci_->basis : nullptr; }
  const OrbitalSet* orbitals() const { return ci_ ? &ci_->orbitals : nullptr; }
  const CiHamiltonian* hamiltonian() const { return ci_ ? &ci_->h : nullptr; }

 private:
  struct CiData {
    FockBasis basis;
    OrbitalSet orbitals;
    CiHamiltonian h;
  };
  SystemParams params_;
  SolverSetup setup_;
  std::shared_ptr<const CiData> ci_;
  ProtocolState initial_;

  ProtocolSample sample(const ProtocolState& s, PulseLabel stage) const;
};

struct Spectrum {
  PulseLabel pulse = PulseLabel::pump;
  double t_dark = 0.0;
  double rabi = 0.0;
  double duration = 0.0;
  Vec detuning;
  Vec fraction;

  // fractions in [0, 1 + 1e-9], strictly increasing detunings
  void validate() const;
};

// 81 points over g_BI rho_TF(0) +- 15.
Vec default_pump_detunings(const SystemParams& params);
// 121 points over [-12, 12] merged with 41 points over shift +- 4 when the shift lies outside.
Vec default_probe_detunings(double expected_shift);

Spectrum sweep_pump(const ProtocolEngine& engine, const Vec& detunings, double rabi = 10.0, double duration = 0.0,
                    int workers = 0);
// `seq` supplies pump, blast and dark time; its probe is replaced per detuning.
Spectrum sweep_probe(const ProtocolEngine& engine, const ProtocolSequence& seq, const Vec& detunings,
                     double rabi = 1.0, double duration = 0.0, int workers = 0);

// [Omega / W]^2 sin^2(W t / 2), W = sqrt(Omega^2 + (delta - delta_plus)^2)
double lineshape(double delta, double rabi, double delta_plus, double duration);

// n-th positive root of x = tan x, bracketed in (n pi, n pi + pi/2).
double tan_root(int n);

// Delta_0 = delta_plus and the side maxima delta_plus +- Omega sqrt((2 x_n / (Omega t))^2 - 1), ascending.
std::vector<double> solve_peak_locations(double rabi, double duration, double delta_plus, int n_max);

// Side-peak amplitude sin^2(x_n) / (4 x_n^2) in units of (Omega t)^2.
double side_peak_coefficient(int n = 1);

struct ResonanceFit {
  double rabi = 0.0;
  double delta_plus = 0.0;
  double residual = 0.0;  // sum of squared deviations
  int iterations = 0;
};

// Levenberg-Marquardt fit of (Omega, Delta_+) at the known pulse duration.
ResonanceFit fit_lineshape(const Spectrum& spectrum, double duration);
ResonanceFit fit_lineshape(const Spectrum& spectrum);

// t'_e = pi / Omega_R+ from a resonant probe fit at t_d = 0 with one impurity.
double calibrate_probe_duration(const SystemParams& params, const SolverSetup& setup, const ProtocolSequence& seq,
                                double rabi = 1.0, int workers = 0);

enum class PeakLabel { polaron, free, fringe };
std::string to_string(PeakLabel l);

struct Peak {
  Eigen::Index index = 0;
  double detuning = 0.0;
  double height = 0.0;
  PeakLabel label = PeakLabel::polaron;
  bool ambiguous = false;
  int parent = -1;  // main peak of a fringe, as an index into the returned list
};

struct ClassifyOptions {
  double fringe_ratio = 0.12;
  double polaron_height = 0.96;
  double free_window = 0.5;
  double ambiguity_band = 0.02;
};

// Local maxima in ascending detuning with labels.
std::vector<Peak> classify_peaks(const Spectrum& spectrum, const ClassifyOptions& options = {});

}  // namespace pps
