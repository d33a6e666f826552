#include "pps/pipeline.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>

namespace pps {

void DarkRunOptions::validate() const {
  if (!(sample_stride > 0.0) || !(duration >= sample_stride)) throw std::invalid_argument("dark run: bad duration");
  if (!(window_start >= 0.0 && window_end > window_start && window_end <= duration + 1e-9))
    throw std::invalid_argument("dark run: averaging window must lie inside [0, duration]");
  if (!(checkpoint_stride > 0.0)) throw std::invalid_argument("dark run: bad checkpoint stride");
}

double DarkRun::energy_drift() const {
  if (total_energy.empty()) return 0.0;
  const double e0 = total_energy.values.front();
  double worst = 0.0;
  for (double e : total_energy.values) worst = std::max(worst, std::abs(e - e0));
  return worst / std::abs(e0);
}

DarkRun run_dark_evolution(const ProtocolEngine& engine, const ProtocolSequence& seq, const DarkRunOptions& options,
                           const DarkProgress& progress) {
  options.validate();
  const SystemParams& params = engine.params();
  DarkRun run;
  ProtocolState s = engine.pulse(engine.initial(), seq.pump);
  run.up_after_pump = engine.populations(s).first / params.n_imp;
  s = engine.blast(std::move(s), seq);
  run.pump_fidelity = engine.flip_fidelity(s);

  const bool ci = engine.basis() != nullptr;
  const SpMat h_free = ci ? engine.hamiltonian()->spin_free() : SpMat();
  run.grid = ci ? engine.orbitals()->grid : s.mf.imp.grid;

  auto rho_up = [&](const ProtocolState& st) {
    return ci ? one_body_density_matrix(*engine.basis(), *engine.orbitals(), st.ci, Species::up, st.time)
              : one_body_density_matrix(st.mf, Species::up);
  };
  auto rho_bath = [&](const ProtocolState& st) -> Vec {
    return ci ? one_body_density_matrix(*engine.basis(), *engine.orbitals(), st.ci, Species::bath).density()
              : bath_density_on(st.mf.bath, *run.grid);
  };

  CoherenceAccumulator coherence;
  CMat rho_acc;
  Vec bath_acc;
  double energy_acc = 0.0;
  struct Previous {
    double t;
    CMat rho;
    Vec bath;
    double energy;
  };
  std::optional<Previous> prev;
  double window_t0 = 0.0;

  const long steps = std::lround(options.duration / options.sample_stride);
  const double stride = options.duration / steps;
  const long per_checkpoint = std::max(1L, std::lround(options.checkpoint_stride / stride));
  for (long k = 0; k <= steps; ++k) {
    if (k > 0) s = engine.pulse(std::move(s), PulseSpec::dark(stride));
    const double td = k * stride;
    const auto [up, down] = engine.populations(s);
    run.n_up.push(td, up);
    run.interspecies.push(td, engine.interspecies(s));
    const double e_imp = ci ? impurity_energy(*engine.hamiltonian(), s.ci) : impurity_energy(s.mf, params);
    run.impurity_energy.push(td, e_imp);
    run.total_energy.push(td, ci ? expectation(h_free, s.ci) / s.ci.squaredNorm()
                                 : coupled_energy(s.mf, params, PulseSpec::dark(1.0)).total());
    const bool in_window = td >= options.window_start - 1e-9 && td <= options.window_end + 1e-9;
    OneBodyDensityMatrix rho;
    if (options.coherence || in_window) rho = rho_up(s);
    if (options.coherence) {
      CoherenceField g = coherence_function(rho);
      g.time = td;
      coherence.push(g);
      if (k % per_checkpoint == 0 || k == steps) coherence.checkpoint();
    }
    if (in_window) {
      Previous cur{td, rho.rho, rho_bath(s), e_imp};
      if (prev) {
        const double h = 0.5 * (cur.t - prev->t);
        rho_acc += h * (cur.rho + prev->rho);
        bath_acc += h * (cur.bath + prev->bath);
        energy_acc += h * (cur.energy + prev->energy);
      } else {
        rho_acc = CMat::Zero(cur.rho.rows(), cur.rho.cols());
        bath_acc = Vec::Zero(cur.bath.size());
        window_t0 = td;
      }
      prev = std::move(cur);
    }
    if (progress) progress(td);
  }
  if (!prev || !(prev->t > window_t0)) throw std::invalid_argument("dark run: window holds fewer than two samples");
  const double span = prev->t - window_t0;
  run.rho_up_bar.species = Species::up;
  run.rho_up_bar.grid = run.grid;
  run.rho_up_bar.rho = rho_acc / span;
  run.rho_up_bar.time = prev->t;
  run.rho_bath_bar = (bath_acc / span).cwiseMax(0.0);
  run.impurity_energy_bar = energy_acc / span;
  run.region = region_from_density(run.rho_up_bar.density());
  if (options.coherence) run.coherence_variance = coherence.curve(run.region);
  return run;
}

}  // namespace pps
