#include "pps/commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include "pps/io.hpp"
#include "pps/parallel.hpp"
#include "pps/pipeline.hpp"

namespace pps {

namespace {

namespace fs = std::filesystem;

struct Context {
  const RunConfig& config;
  const CommandOptions& options;
  std::ostream& out;
  fs::path dir;
  std::vector<std::string> outputs;
  nlohmann::json results = nlohmann::json::object();

  int workers() const { return config.workers > 0 ? config.workers : worker_count(); }

  fs::path file(const std::string& name) {
    outputs.push_back(name);
    return dir / name;
  }
};

std::string number_tag(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

GridPtr bath_grid(const SolverSetup& s) { return make_grid(s.bath_points, -s.bath_extent, s.bath_extent); }

int relax(Context& c) {
  const SystemParams& p = c.config.system;
  if (c.config.setup.solver == Solver::ci) {
    const ProtocolEngine engine(p, c.config.setup);
    const ProtocolState s = engine.initial();
    const double e = expectation(engine.hamiltonian()->spin_free(), s.ci);
    const auto bath = one_body_density_matrix(*engine.basis(), *engine.orbitals(), s.ci, Species::bath);
    const auto imp = one_body_density_matrix(*engine.basis(), *engine.orbitals(), s.ci, Species::down);
    Table t;
    t.comments = {"CI ground state, impurities down; densities in 1/alpha"};
    t.columns = {"x", "bath_density", "impurity_density"};
    const Vec nb = bath.density(), ni = imp.density();
    for (Eigen::Index q = 0; q < nb.size(); ++q) t.rows.push_back({bath.grid->x(q), nb(q), ni(q)});
    write_table_csv(c.file("density.csv"), t);
    c.results["energy"] = e;
    c.results["dimension"] = engine.basis()->dimension();
    c.out << "CI ground state: E = " << e << " hbar omega, dimension " << engine.basis()->dimension() << '\n';
    return 0;
  }
  const GridPtr grid = bath_grid(c.config.setup);
  const RelaxResult r = relax_ground_state(p, grid);
  const ThomasFermi tf = thomas_fermi_profile(p);
  Table t;
  t.comments = {"GP ground state; densities in 1/alpha"};
  t.columns = {"x", "density", "thomas_fermi"};
  const Vec n = r.field.density(), ntf = tf.density(*grid);
  for (Eigen::Index q = 0; q < n.size(); ++q) t.rows.push_back({grid->x(q), n(q), ntf(q)});
  write_table_csv(c.file("density.csv"), t);
  ArrayFile psi;
  psi.quantity = "psi_bath";
  psi.unit = "alpha^-1/2";
  psi.real = r.field.psi.real();
  psi.imag = r.field.psi.imag();
  psi.axes = {grid_axis(*grid)};
  psi.meta = {{"mu", r.mu}, {"energy", r.energy}};
  write_array(c.file("ground_state.bin"), psi);
  c.results = {{"mu", r.mu}, {"mu_thomas_fermi", tf.mu}, {"energy", r.energy}, {"residual", r.residual},
               {"iterations", r.iterations}, {"density_at_centre", r.field.density().maxCoeff()}};
  c.out << std::setprecision(8) << "mu = " << r.mu << " (Thomas-Fermi " << tf.mu << "), E = " << r.energy
        << ", residual " << r.residual << " after " << r.iterations << " steps\n";
  return 0;
}

int evolve(Context& c) {
  const SystemParams& p = c.config.system;
  const ProtocolEngine engine(p, c.config.setup);
  const ProtocolSequence& seq = c.config.protocol;
  const double stride = c.config.evolve.snapshot_stride;
  const bool ci = engine.basis() != nullptr;

  Table traj;
  traj.comments = {"stage: 0 pump, 1 dark, 2 probe; time in 1/omega, energies in hbar omega"};
  traj.columns = {"time", "stage", "n_up", "n_down", "interspecies", "impurity_energy"};
  std::vector<double> times;
  std::vector<Vec> bath_cols, up_cols, down_cols;
  auto record = [&](const ProtocolState& s, int stage) {
    const auto [up, down] = engine.populations(s);
    const double e_imp = ci ? impurity_energy(*engine.hamiltonian(), s.ci) : impurity_energy(s.mf, p);
    traj.rows.push_back({s.time, double(stage), up, down, engine.interspecies(s), e_imp});
    times.push_back(s.time);
    if (ci) {
      bath_cols.push_back(one_body_density_matrix(*engine.basis(), *engine.orbitals(), s.ci, Species::bath).density());
      up_cols.push_back(one_body_density_matrix(*engine.basis(), *engine.orbitals(), s.ci, Species::up).density());
      down_cols.push_back(one_body_density_matrix(*engine.basis(), *engine.orbitals(), s.ci, Species::down).density());
    } else {
      bath_cols.push_back(s.mf.bath.density());
      up_cols.push_back(s.mf.imp.density_up());
      down_cols.push_back(s.mf.imp.density_down());
    }
  };
  auto run_stage = [&](ProtocolState s, const PulseSpec& pulse, int stage) {
    const long chunks = std::max(1L, std::lround(std::ceil(pulse.duration / stride - 1e-9)));
    for (long k = 0; k < chunks; ++k) {
      PulseSpec part = pulse;
      part.duration = pulse.duration / chunks;
      s = engine.pulse(std::move(s), part);
      record(s, stage);
    }
    return s;
  };

  ProtocolState s = engine.initial();
  record(s, 0);
  s = run_stage(std::move(s), seq.pump, 0);
  const double up_after_pump = engine.populations(s).first / p.n_imp;
  s = engine.blast(std::move(s), seq);
  record(s, 1);
  if (c.config.evolve.duration > 0) s = run_stage(std::move(s), PulseSpec::dark(c.config.evolve.duration), 1);
  if (c.config.probe_enabled) s = run_stage(std::move(s), *seq.probe, 2);
  write_table_csv(c.file("trajectory.csv"), traj);

  const GridPtr grid_b = ci ? engine.orbitals()->grid : s.mf.bath.grid;
  const GridPtr grid_i = ci ? engine.orbitals()->grid : s.mf.imp.grid;
  auto snapshots = [&](const std::string& name, const std::vector<Vec>& cols, const GridPtr& g) {
    ArrayFile a;
    a.quantity = name;
    a.unit = "1/alpha";
    a.real.resize(g->points, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) a.real.col(static_cast<Eigen::Index>(k)) = cols[k];
    a.axes = {grid_axis(*g), {"time", "1/omega", times.front(), times.back(), static_cast<int>(times.size())}};
    a.meta["times"] = times;
    write_array(c.file(name + ".bin"), a);
  };
  snapshots("density_bath", bath_cols, grid_b);
  snapshots("density_up", up_cols, grid_i);
  snapshots("density_down", down_cols, grid_i);
  c.results = {{"up_after_pump", up_after_pump}, {"final_n_down", engine.populations(s).second}};
  c.out << "pump transferred " << up_after_pump << " of the impurities; " << times.size() << " snapshots\n";
  return 0;
}

void report_fit(Context& c, const Spectrum& sp, const std::string& key) {
  try {
    const ResonanceFit fit = fit_lineshape(sp, sp.duration);
    c.results[key] = {{"rabi", fit.rabi}, {"delta_plus", fit.delta_plus}, {"residual", fit.residual}};
    c.out << "  fit: Delta_+ = " << fit.delta_plus << ", Omega = " << fit.rabi << ", residual " << fit.residual << '\n';
  } catch (const std::exception& e) {
    c.out << "  fit failed: " << e.what() << '\n';
  }
}

int sweep_pump_verb(Context& c) {
  const ProtocolEngine engine(c.config.system, c.config.setup);
  const Vec det = c.config.sweep.pump_detunings.value_or(default_pump_detunings(c.config.system));
  const PulseSpec& pump = c.config.protocol.pump;
  const Spectrum sp = sweep_pump(engine, det, pump.rabi, pump.duration, c.workers());
  write_spectrum_csv(c.file("pump_spectrum.csv"), sp);
  c.out << "pump spectrum: " << det.size() << " detunings, max transfer " << sp.fraction.maxCoeff() << '\n';
  report_fit(c, sp, "fit");
  return 0;
}

int sweep_probe_verb(Context& c) {
  const ProtocolEngine engine(c.config.system, c.config.setup);
  ProtocolSequence seq = c.config.protocol;
  const PulseSpec& probe = *seq.probe;
  const double duration = c.config.sweep.calibrate_probe
                              ? calibrate_probe_duration(c.config.system, c.config.setup, seq, probe.rabi, c.workers())
                              : probe.duration;
  c.results["probe_duration"] = duration;
  c.out << "probe duration " << duration << (c.config.sweep.calibrate_probe ? " (calibrated)" : "") << '\n';
  const std::vector<double> t_dark = c.options.t_dark ? std::vector<double>{*c.options.t_dark} : c.config.sweep.t_dark;
  const double shift = c.config.system.g_bi * thomas_fermi_profile(c.config.system).density(0.0);
  const Vec det = c.config.sweep.probe_detunings.value_or(default_probe_detunings(shift));
  for (double td : t_dark) {
    seq.t_dark = td;
    const Spectrum sp = sweep_probe(engine, seq, det, probe.rabi, duration, c.workers());
    write_spectrum_csv(c.file("probe_td" + number_tag(td) + ".csv"), sp);
    c.out << "t_d = " << td << ": max transfer " << sp.fraction.maxCoeff() << '\n';
    for (const Peak& pk : classify_peaks(sp))
      c.out << "  peak " << pk.detuning << " height " << pk.height << " " << to_string(pk.label)
            << (pk.ambiguous ? " (ambiguous)" : "") << '\n';
  }
  return 0;
}

int ramsey(Context& c) {
  const SystemParams& p = c.config.system;
  const double duration = c.config.ramsey_duration;
  TimeSeries<double> s;
  if (c.config.setup.solver == Solver::ci) {
    const ProtocolEngine engine(p, c.config.setup);
    s = structure_factor(*engine.basis(), p, *engine.orbitals(), duration, c.config.setup.propagation.stride);
  } else {
    const SolverSetup& st = c.config.setup;
    const GridPtr bg = bath_grid(st);
    const GridPtr ig = p.n_imp == 1 ? bg : make_grid(st.pair_points, -st.pair_extent, st.pair_extent);
    s = structure_factor(p, bg, ig, duration, st.propagation);
  }
  Table t;
  t.comments = {"Ramsey structure factor; time in 1/omega"};
  t.columns = {"time", "abs_S"};
  for (std::size_t k = 0; k < s.size(); ++k) t.rows.push_back({s.t[k], s.values[k]});
  write_table_csv(c.file("ramsey.csv"), t);
  const double smin = *std::min_element(s.values.begin(), s.values.end());
  c.results = {{"abs_S_min", smin}, {"abs_S_0", s.values.front()}};
  c.out << "|S(0)| = " << s.values.front() << ", min |S| = " << smin << '\n';
  return 0;
}

int eth_fit(Context& c) {
  const SystemParams& p = c.config.system;
  OneBodyDensityMatrix rho;
  Vec bath;
  std::optional<double> energy;
  if (c.options.input) {
    rho = density_matrix_from_array(read_array(*c.options.input));
    if (!c.options.bath) throw std::invalid_argument("eth-fit --input needs --bath with the averaged bath density");
    const ArrayFile b = read_array(*c.options.bath);
    if (b.real.rows() != rho.grid->points) throw std::invalid_argument("bath density and rho1 grids differ");
    bath = b.real.col(0);
    const ArrayFile a = read_array(*c.options.input);
    if (a.meta.contains("impurity_energy_bar")) energy = a.meta["impurity_energy_bar"].get<double>();
  } else {
    const ProtocolEngine engine(p, c.config.setup);
    const DarkRun run = run_dark_evolution(engine, c.config.protocol, c.config.eth.run);
    rho = run.rho_up_bar;
    bath = run.rho_bath_bar;
    energy = run.impurity_energy_bar;
    ArrayFile a = density_matrix_array(rho);
    a.meta["impurity_energy_bar"] = *energy;
    a.meta["window"] = {c.config.eth.run.window_start, c.config.eth.run.window_end};
    write_array(c.file("rho_up_avg.bin"), a);
    ArrayFile b;
    b.quantity = "density_bath_avg";
    b.unit = "1/alpha";
    b.real = bath;
    b.axes = {grid_axis(*rho.grid)};
    write_array(c.file("rho_bath_avg.bin"), b);
    Table t;
    t.comments = {"dark time in 1/omega after the blast; energies in hbar omega"};
    t.columns = {"t_dark", "n_up", "interspecies", "impurity_energy", "total_energy"};
    for (std::size_t k = 0; k < run.n_up.size(); ++k)
      t.rows.push_back({run.n_up.t[k], run.n_up.values[k], run.interspecies.values[k], run.impurity_energy.values[k],
                        run.total_energy.values[k]});
    write_table_csv(c.file("dark_run.csv"), t);
    Table v;
    v.columns = {"t_dark", "coherence_variance"};
    for (std::size_t k = 0; k < run.coherence_variance.size(); ++k)
      v.rows.push_back({run.coherence_variance.t[k], run.coherence_variance.values[k]});
    write_table_csv(c.file("coherence_variance.csv"), v);
    c.results["energy_drift"] = run.energy_drift();
  }
  const Ensemble ens = c.config.ensemble();
  const int n_imp = p.n_imp;
  const EffectiveHamiltonian h = effective_hamiltonian(rho.grid, bath, p, c.config.eth.truncation);
  const TemperatureFit fit = fit_temperature(rho, h, ens, n_imp);
  const OccupationDistribution occ_fit = occupations(h, ens, n_imp, fit.temperature);
  c.results["ensemble"] = to_string(ens);
  c.results["t_fit"] = fit.temperature;
  c.results["residual"] = fit.residual;
  c.results["at_boundary"] = fit.at_boundary;
  c.out << "ensemble " << to_string(ens) << ": T_eff (fit) = " << fit.temperature << ", residual " << fit.residual << '\n';
  if (fit.at_boundary) c.out << "  warning: " << fit.warning << '\n';
  std::optional<OccupationDistribution> occ_e;
  if (energy) {
    const double te = temperature_from_energy(*energy, h, ens, n_imp);
    occ_e = occupations(h, ens, n_imp, te);
    c.results["t_energy"] = te;
    c.results["energy_bar"] = *energy;
    c.out << "  T_eff (energy) = " << te << " from E = " << *energy << '\n';
  }
  Table t;
  t.comments = {"T_fit=" + number_tag(fit.temperature) + " residual=" + number_tag(fit.residual) +
                " ensemble=" + to_string(ens) + " units=hbar_omega/k_B"};
  t.columns = {"level", "energy", "occupation_fit"};
  if (occ_e) t.columns.push_back("occupation_energy");
  for (int i = 0; i < h.size(); ++i) {
    std::vector<double> row{double(i), h.energies(i), occ_fit.n(i)};
    if (occ_e) row.push_back(occ_e->n(i));
    t.rows.push_back(row);
  }
  write_table_csv(c.file("eth_fit.csv"), t);
  return 0;
}

int units(Context& c) {
  const UnitsSettings& u = c.config.units;
  const TrapGeometry geo = u.geometry();
  const PhysicalScale sc = u.scale();
  const SystemParams& p = c.config.system;
  const double a_bb = scattering_from_coupling(p.g_bb, geo, u.route);
  c.out << std::setprecision(6) << "alpha = " << sc.length() << " m, eta = " << geo.eta() << ", g_BB = " << p.g_bb
        << " -> " << p.g_bb * sc.coupling() << " J m, a_BB = " << a_bb * sc.length() << " m (" << to_string(u.route)
        << ")\n";
  c.results = {{"alpha_m", sc.length()}, {"eta", geo.eta()}, {"a_bb_m", a_bb * sc.length()},
               {"g_bb_si", p.g_bb * sc.coupling()}};
  if (!c.options.check) return 0;
  const ValidityReport r = validate_1d_regime(p.g_bb, p.n_bath, p.n_imp, u.temperature, geo, u.route, u.thresholds);
  c.out << "thermal bound " << r.thermal_bound << " hbar omega = " << r.thermal_bound * sc.temperature() * 1e6
        << " uK\n";
  std::ofstream csv(c.file("units.csv"));
  csv << std::setprecision(17) << "condition,value,verdict\n";
  for (const ValidityCondition* v : {&r.density, &r.thermal, &r.impurity}) {
    c.out << "  " << std::left << std::setw(32) << v->name << std::right << std::setw(14) << v->value << "  "
          << to_string(v->verdict) << '\n';
    csv << v->name << ',' << v->value << ',' << to_string(v->verdict) << '\n';
    c.results[v->name] = {{"value", v->value}, {"verdict", to_string(v->verdict)}};
  }
  c.results["thermal_bound"] = r.thermal_bound;
  return 0;
}

Spectrum input_spectrum(const Context& c) {
  if (!c.options.input) throw std::invalid_argument(c.options.verb + " needs --input <spectrum.csv>");
  return read_spectrum_csv(*c.options.input);
}

int classify(Context& c) {
  const Spectrum sp = input_spectrum(c);
  const auto peaks = classify_peaks(sp);
  std::ofstream csv(c.file("peaks.csv"));
  csv << std::setprecision(17) << "delta_over_omega,height,label,ambiguous,parent\n";
  for (const Peak& pk : peaks) {
    csv << pk.detuning << ',' << pk.height << ',' << to_string(pk.label) << ',' << (pk.ambiguous ? 1 : 0) << ','
        << pk.parent << '\n';
    c.out << pk.detuning << "  " << pk.height << "  " << to_string(pk.label) << (pk.ambiguous ? " (ambiguous)" : "")
          << '\n';
  }
  c.results["peaks"] = peaks.size();
  return 0;
}

int fit(Context& c) {
  const Spectrum sp = input_spectrum(c);
  const double duration = c.options.duration.value_or(sp.duration);
  const ResonanceFit f = duration > 0 ? fit_lineshape(sp, duration) : fit_lineshape(sp);
  Table t;
  t.columns = {"rabi", "delta_plus", "residual", "duration"};
  t.rows.push_back({f.rabi, f.delta_plus, f.residual, duration});
  write_table_csv(c.file("fit.csv"), t);
  c.results = {{"rabi", f.rabi}, {"delta_plus", f.delta_plus}, {"residual", f.residual}};
  c.out << "Delta_+ = " << f.delta_plus << ", Omega = " << f.rabi << ", residual " << f.residual << '\n';
  return 0;
}

int convergence(Context& c) {
  const auto& cv = c.config.convergence;
  struct Row {
    int db, di;
    Eigen::Index dim;
    double energy;
    Mat g;
  };
  std::vector<Row> rows;
  for (std::size_t k = 0; k < cv.bath_orbitals.size(); ++k) {
    SolverSetup st = c.config.setup;
    st.solver = Solver::ci;
    st.ci_bath_orbitals = cv.bath_orbitals[k];
    st.ci_imp_orbitals = cv.imp_orbitals[k];
    const ProtocolEngine engine(c.config.system, st);
    const ProtocolState s = engine.prepare_probe(c.config.protocol);
    const auto rho = one_body_density_matrix(*engine.basis(), *engine.orbitals(), s.ci, Species::up);
    rows.push_back({st.ci_bath_orbitals, st.ci_imp_orbitals, engine.basis()->dimension(), engine.interspecies(s),
                    coherence_function(rho).g});
  }
  Table t;
  t.comments = {"up-species coherence deviation against the largest basis, after pump, blast and t_dark = " +
                number_tag(c.config.protocol.t_dark)};
  t.columns = {"d_bath", "d_imp", "dimension", "interspecies", "delta_g"};
  for (const Row& r : rows) {
    const double dg = convergence_deviation(r.g, rows.back().g);
    t.rows.push_back({double(r.db), double(r.di), double(r.dim), r.energy, dg});
    c.out << "(" << r.db << ", " << r.di << ") dim " << r.dim << ": <H_BI>/N_I = " << r.energy << ", Delta G = " << dg
          << '\n';
  }
  write_table_csv(c.file("convergence.csv"), t);
  return 0;
}

}  // namespace

const std::vector<std::string>& command_verbs() {
  static const std::vector<std::string> verbs{"relax",  "evolve", "sweep-pump", "sweep-probe", "ramsey",
                                              "eth-fit", "units", "classify",   "fit",         "convergence"};
  return verbs;
}

int run_command(const RunConfig& config, const CommandOptions& options, std::ostream& out) {
  Context c{config, options, out, options.output_dir.value_or(config.output_dir)};
  fs::create_directories(c.dir);
  int status = 0;
  const std::string& v = options.verb;
  if (v == "relax") status = relax(c);
  else if (v == "evolve") status = evolve(c);
  else if (v == "sweep-pump") status = sweep_pump_verb(c);
  else if (v == "sweep-probe") status = sweep_probe_verb(c);
  else if (v == "ramsey") status = ramsey(c);
  else if (v == "eth-fit") status = eth_fit(c);
  else if (v == "units") status = units(c);
  else if (v == "classify") status = classify(c);
  else if (v == "fit") status = fit(c);
  else if (v == "convergence") status = convergence(c);
  else throw std::invalid_argument("unknown verb '" + v + "'");
  write_manifest(c.dir, v, to_json(config), c.outputs, c.results, options.argv);
  return status;
}

}  // namespace pps
