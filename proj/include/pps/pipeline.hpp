#pragma once

#include <functional>

#include "pps/observables.hpp"
#include "pps/spectroscopy.hpp"

namespace pps {

// Pump, blast, then field-free evolution with time averages over a window of the dark time.
struct DarkRunOptions {
  double duration = 300.0;
  double window_start = 100.0;
  double window_end = 300.0;
  double sample_stride = 0.1;
  double checkpoint_stride = 10.0;
  bool coherence = true;

  void validate() const;
};

struct DarkRun {
  double up_after_pump = 0.0;
  double pump_fidelity = 0.0;
  GridPtr grid;  // impurity grid
  // dark time t_d measured from the end of the blast
  TimeSeries<double> interspecies, impurity_energy, total_energy, n_up;
  Vec rho_bath_bar;                  // window average on `grid`
  OneBodyDensityMatrix rho_up_bar;   // window average
  double impurity_energy_bar = 0.0;  // window average
  Region region;                     // rho_up_bar above 1e-3 of its maximum
  TimeSeries<double> coherence_variance;  // at checkpoints, over `region`

  double energy_drift() const;  // max |E(t) - E(0)| / |E(0)|
};

using DarkProgress = std::function<void(double t_dark)>;

DarkRun run_dark_evolution(const ProtocolEngine& engine, const ProtocolSequence& seq, const DarkRunOptions& options = {},
                           const DarkProgress& progress = {});

}  // namespace pps
