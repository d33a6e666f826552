#include "pps/spectroscopy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/tools/roots.hpp>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include "pps/gp.hpp"
#include "pps/observables.hpp"
#include "pps/parallel.hpp"

namespace pps {

std::string to_string(BlastMode m) { return m == BlastMode::projector ? "projector" : "dissipative"; }
std::string to_string(Solver s) { return s == Solver::coupled ? "coupled" : "ci"; }

BlastMode blast_mode_from_string(const std::string& s) {
  if (s == "projector") return BlastMode::projector;
  if (s == "dissipative") return BlastMode::dissipative;
  throw std::invalid_argument("unknown blast mode '" + s + "' (expected projector or dissipative)");
}

Solver solver_from_string(const std::string& s) {
  if (s == "coupled" || s == "mean-field") return Solver::coupled;
  if (s == "ci") return Solver::ci;
  throw std::invalid_argument("unknown solver '" + s + "' (expected coupled or ci)");
}

std::string to_string(PeakLabel l) {
  switch (l) {
    case PeakLabel::polaron: return "polaron";
    case PeakLabel::free: return "free";
    case PeakLabel::fringe: return "lineshape-fringe";
  }
  return "?";
}

void ProtocolSequence::validate() const {
  pump.validate();
  if (pump.label != PulseLabel::pump || !(pump.rabi > 0)) throw std::invalid_argument("protocol: pump must be a driven pump pulse");
  if (t_dark < 0) throw std::invalid_argument("protocol: dark time must be non-negative");
  if (blast == BlastMode::dissipative && (!(blast_gamma > 0) || !(blast_time > 0)))
    throw std::invalid_argument("protocol: dissipative blast needs gamma > 0 and t_b > 0");
  if (probe) {
    probe->validate();
    if (probe->label != PulseLabel::probe || !(probe->rabi > 0))
      throw std::invalid_argument("protocol: probe must be a driven probe pulse");
  }
}

namespace {

CVec flip_down_to_up(const FockBasis& basis, const CVec& state) {
  CVec out = CVec::Zero(state.size());
  for (Eigen::Index i = 0; i < basis.imp_size(); ++i) {
    if (basis.spin_up_count(i) != 0) continue;
    Occupation occ = basis.imp[i];
    Occupation flipped(occ.size(), 0);
    for (std::size_t m = 1; m < occ.size(); m += 2) flipped[m - 1] = occ[m];
    const Eigen::Index j = basis.imp_index.at(flipped);
    for (Eigen::Index b = 0; b < basis.bath_size(); ++b) out(basis.index(b, j)) = state(basis.index(b, i));
  }
  return out;
}

}  // namespace

ProtocolEngine::ProtocolEngine(const SystemParams& params, const SolverSetup& setup) : params_(params), setup_(setup) {
  if (setup.solver == Solver::coupled) {
    params.validate();
    auto bath_grid = make_grid(setup.bath_points, -setup.bath_extent, setup.bath_extent);
    auto imp_grid = params.n_imp == 1 ? bath_grid : make_grid(setup.pair_points, -setup.pair_extent, setup.pair_extent);
    initial_.mf.bath = relax_ground_state(params, bath_grid).field;
    initial_.mf.imp = impurity_ground_state(params, imp_grid, false);
    return;
  }
  params.validate(true);
  auto grid = make_grid(setup.ci_points, -setup.ci_extent, setup.ci_extent);
  auto data = std::make_shared<CiData>();
  try {
    data->basis = build_fock_basis(params.n_bath, setup.ci_bath_orbitals, params.n_imp, setup.ci_imp_orbitals,
                                   params.statistics, setup.ci_cap);
  } catch (const std::length_error& e) {
    throw std::invalid_argument(std::string("CI solver cannot represent this system: ") + e.what());
  }
  data->orbitals = trap_orbital_set(params, grid, setup.ci_bath_orbitals, setup.ci_imp_orbitals);
  data->h = assemble_hamiltonian(data->basis, params, data->orbitals);
  initial_.ci = ground_state_lanczos(data->h.spin_free(), sector_start(data->basis, 0), 1e-11).state.cast<cplx>();
  ci_ = std::move(data);
}

ProtocolSample ProtocolEngine::sample(const ProtocolState& s, PulseLabel stage) const {
  ProtocolSample r;
  r.stage = stage;
  r.time = s.time;
  std::tie(r.n_up, r.n_down) = populations(s);
  r.interspecies = interspecies(s);
  return r;
}

std::pair<double, double> ProtocolEngine::populations(const ProtocolState& s) const {
  if (ci_) return spin_populations(ci_->h, s.ci, params_.n_imp);
  return spin_populations(s.mf);
}

double ProtocolEngine::interspecies(const ProtocolState& s) const {
  if (ci_) return interspecies_energy(ci_->h, s.ci, params_);
  return interspecies_energy(s.mf, params_);
}

double ProtocolEngine::flip_fidelity(const ProtocolState& s, bool include_bath) const {
  if (ci_) {
    const CVec ref = flip_down_to_up(ci_->basis, initial_.ci);
    return std::norm(ref.dot(s.ci)) / (ref.squaredNorm() * s.ci.squaredNorm());
  }
  const CoupledState& a = initial_.mf;
  const CoupledState& b = s.mf;
  auto overlap = [](const auto& x, const auto& y) {
    return std::norm((x.conjugate().cwiseProduct(y)).sum()) / (x.squaredNorm() * y.squaredNorm());
  };
  const double imp = a.imp.particles == 1 ? overlap(a.imp.down, b.imp.up) : overlap(a.imp.dd, b.imp.uu);
  return include_bath ? imp * std::pow(overlap(a.bath.psi, b.bath.psi), params_.n_bath) : imp;
}

ProtocolState ProtocolEngine::pulse(ProtocolState s, const PulseSpec& p, const ProtocolObserver& observer) const {
  p.validate();
  if (!ci_) {
    Observer obs;
    if (observer) obs = [&](const CoupledState& c) {
      ProtocolState tmp;
      tmp.mf = c;
      tmp.time = c.time;
      observer(sample(tmp, p.label));
    };
    s.mf.time = s.time;
    s.mf = evolve_coupled(std::move(s.mf), params_, p, setup_.propagation, obs);
    s.time = s.mf.time;
    return s;
  }
  const SpMat h = ci_->h.assemble(p);
  const long steps = std::max(1L, std::lround(p.duration / setup_.propagation.stride));
  const double dt = p.duration / steps;
  const double t0 = s.time;
  if (observer && setup_.propagation.observe_start) observer(sample(s, p.label));
  for (long k = 1; k <= steps; ++k) {
    krylov_propagate(h, s.ci, dt);
    s.time = t0 + k * dt;
    if (observer) observer(sample(s, p.label));
  }
  return s;
}

ProtocolState ProtocolEngine::blast(ProtocolState s, const ProtocolSequence& seq) const {
  if (!ci_) {
    s.mf = seq.blast == BlastMode::projector
               ? blast_project(std::move(s.mf))
               : apply_blast_dissipative(std::move(s.mf), params_, seq.blast_gamma, seq.blast_time, setup_.propagation);
    s.time = s.mf.time;
    return s;
  }
  if (seq.blast == BlastMode::dissipative)
    throw std::invalid_argument("CI solver supports only the projector blast");
  const FockBasis& basis = ci_->basis;
  for (Eigen::Index i = 0; i < basis.imp_size(); ++i) {
    if (basis.spin_up_count(i) == params_.n_imp) continue;
    for (Eigen::Index b = 0; b < basis.bath_size(); ++b) s.ci(basis.index(b, i)) = 0.0;
  }
  const double n = s.ci.norm();
  if (n < 1e-6) throw std::runtime_error("blast projection: no spin-up population left (pump failed)");
  s.ci /= n;
  return s;
}

ProtocolState ProtocolEngine::prepare_probe(const ProtocolSequence& seq, const ProtocolObserver& observer) const {
  seq.validate();
  ProtocolState s = pulse(initial_, seq.pump, observer);
  s = blast(std::move(s), seq);
  if (seq.t_dark > 0) s = pulse(std::move(s), PulseSpec::dark(seq.t_dark), observer);
  return s;
}

ProtocolResult ProtocolEngine::run(const ProtocolSequence& seq, const ProtocolObserver& observer) const {
  seq.validate();
  ProtocolResult r;
  ProtocolState s = pulse(initial_, seq.pump, observer);
  r.up_after_pump = populations(s).first / params_.n_imp;
  s = blast(std::move(s), seq);
  r.pump_fidelity = flip_fidelity(s);
  r.pump_fidelity_impurity = flip_fidelity(s, false);
  if (seq.t_dark > 0) s = pulse(std::move(s), PulseSpec::dark(seq.t_dark), observer);
  r.down_after_probe = std::numeric_limits<double>::quiet_NaN();
  if (seq.probe) {
    s = pulse(std::move(s), *seq.probe, observer);
    r.down_after_probe = populations(s).second / params_.n_imp;
  }
  r.final = std::move(s);
  return r;
}

void Spectrum::validate() const {
  if (detuning.size() != fraction.size()) throw std::invalid_argument("spectrum: size mismatch");
  for (Eigen::Index k = 1; k < detuning.size(); ++k)
    if (!(detuning(k) > detuning(k - 1))) throw std::invalid_argument("spectrum: detunings must increase strictly");
  for (Eigen::Index k = 0; k < fraction.size(); ++k)
    if (!(fraction(k) >= -1e-9 && fraction(k) <= 1.0 + 1e-9)) throw std::invalid_argument("spectrum: fraction outside [0, 1]");
}

Vec default_pump_detunings(const SystemParams& params) {
  const double centre = params.g_bi * thomas_fermi_profile(params).density(0.0);
  return Vec::LinSpaced(81, centre - 15.0, centre + 15.0);
}

Vec default_probe_detunings(double expected_shift) {
  std::vector<double> v;
  const Vec base = Vec::LinSpaced(121, -12.0, 12.0);
  v.assign(base.data(), base.data() + base.size());
  if (std::abs(expected_shift) > 12.0 - 4.0) {
    const Vec extra = Vec::LinSpaced(41, expected_shift - 4.0, expected_shift + 4.0);
    v.insert(v.end(), extra.data(), extra.data() + extra.size());
  }
  std::sort(v.begin(), v.end());
  std::vector<double> u;
  for (double d : v)
    if (u.empty() || d - u.back() > 1e-9) u.push_back(d);
  return Eigen::Map<const Vec>(u.data(), static_cast<Eigen::Index>(u.size()));
}

Spectrum sweep_pump(const ProtocolEngine& engine, const Vec& detunings, double rabi, double duration, int workers) {
  Spectrum s;
  s.pulse = PulseLabel::pump;
  s.rabi = rabi;
  s.duration = duration > 0 ? duration : std::numbers::pi / rabi;
  s.detuning = detunings;
  const ProtocolState init = engine.initial();
  const auto f = parallel_map(
      detunings.size(),
      [&](std::size_t k) {
        const ProtocolState out = engine.pulse(init, {PulseLabel::pump, rabi, detunings(k), s.duration});
        return engine.populations(out).first / engine.params().n_imp;
      },
      workers > 0 ? workers : worker_count());
  s.fraction = Eigen::Map<const Vec>(f.data(), static_cast<Eigen::Index>(f.size()));
  return s;
}

Spectrum sweep_probe(const ProtocolEngine& engine, const ProtocolSequence& seq, const Vec& detunings, double rabi,
                     double duration, int workers) {
  Spectrum s;
  s.pulse = PulseLabel::probe;
  s.t_dark = seq.t_dark;
  s.rabi = rabi;
  s.duration = duration > 0 ? duration : std::numbers::pi / rabi;
  s.detuning = detunings;
  const ProtocolState base = engine.prepare_probe(seq);
  const auto f = parallel_map(
      detunings.size(),
      [&](std::size_t k) {
        const ProtocolState out = engine.pulse(base, {PulseLabel::probe, rabi, detunings(k), s.duration});
        return engine.populations(out).second / engine.params().n_imp;
      },
      workers > 0 ? workers : worker_count());
  s.fraction = Eigen::Map<const Vec>(f.data(), static_cast<Eigen::Index>(f.size()));
  return s;
}

double lineshape(double delta, double rabi, double delta_plus, double duration) {
  const double d = delta - delta_plus;
  const double w2 = rabi * rabi + d * d;
  if (w2 == 0.0) return 0.0;
  const double s = std::sin(0.5 * std::sqrt(w2) * duration);
  return rabi * rabi / w2 * s * s;
}

double tan_root(int n) {
  if (n < 1) throw std::invalid_argument("tan_root: n must be >= 1");
  // x - tan x is positive just above n pi and tends to -inf below n pi + pi/2
  const double lo = n * std::numbers::pi;
  const double hi = lo + 0.5 * std::numbers::pi - 1e-12;
  auto f = [](double x) { return x - std::tan(x); };
  auto tol = [](double a, double b) { return std::abs(b - a) < 1e-15 * std::abs(a); };
  const auto [a, b] = boost::math::tools::bisect(f, lo + 1e-12, hi, tol);
  return 0.5 * (a + b);
}

double side_peak_coefficient(int n) {
  const double x = tan_root(n);
  const double s = std::sin(x);
  return s * s / (4.0 * x * x);
}

std::vector<double> solve_peak_locations(double rabi, double duration, double delta_plus, int n_max) {
  if (!(rabi * duration > 0)) throw std::invalid_argument("solve_peak_locations: need Omega t > 0");
  std::vector<double> out{delta_plus};
  for (int n = 1; n <= n_max; ++n) {
    const double r = 2.0 * tan_root(n) / (rabi * duration);
    const double radicand = r * r - 1.0;
    if (radicand <= 0) continue;
    const double shift = rabi * std::sqrt(radicand);
    out.push_back(delta_plus - shift);
    out.push_back(delta_plus + shift);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

struct LineshapeResidual {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  const Spectrum& s;
  double duration;

  int inputs() const { return 2; }
  int values() const { return static_cast<int>(s.detuning.size()); }
  int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
    for (Eigen::Index k = 0; k < s.detuning.size(); ++k)
      r(k) = lineshape(s.detuning(k), std::abs(p(0)), p(1), duration) - s.fraction(k);
    return 0;
  }
};

}  // namespace

ResonanceFit fit_lineshape(const Spectrum& spectrum, double duration) {
  if (spectrum.detuning.size() < 5) throw std::invalid_argument("fit_lineshape: need at least 5 samples");
  if (!(duration > 0)) throw std::invalid_argument("fit_lineshape: pulse duration must be positive");
  if (spectrum.fraction.maxCoeff() - spectrum.fraction.minCoeff() < 1e-6)
    throw std::runtime_error("fit_lineshape: flat spectrum, fit is degenerate");
  Eigen::Index peak;
  spectrum.fraction.maxCoeff(&peak);
  ResonanceFit best;
  best.residual = std::numeric_limits<double>::infinity();
  // a few starting Rabi frequencies around the pi-pulse value
  for (double scale : {1.0, 0.6, 1.6, 0.3, 3.0}) {
    Eigen::VectorXd p(2);
    p << scale * std::numbers::pi / duration, spectrum.detuning(peak);
    LineshapeResidual f{spectrum, duration};
    Eigen::NumericalDiff<LineshapeResidual, Eigen::Central> nd(f);
    Eigen::LevenbergMarquardt<decltype(nd)> lm(nd);
    lm.parameters.xtol = 1e-14;
    lm.parameters.ftol = 1e-14;
    lm.parameters.maxfev = 4000;
    lm.minimize(p);
    Eigen::VectorXd r(spectrum.detuning.size());
    f(p, r);
    if (r.squaredNorm() < best.residual) {
      best.rabi = std::abs(p(0));
      best.delta_plus = p(1);
      best.residual = r.squaredNorm();
      best.iterations = static_cast<int>(lm.nfev);
    }
  }
  return best;
}

ResonanceFit fit_lineshape(const Spectrum& spectrum) { return fit_lineshape(spectrum, spectrum.duration); }

double calibrate_probe_duration(const SystemParams& params, const SolverSetup& setup, const ProtocolSequence& seq,
                                double rabi, int workers) {
  SystemParams one = params;
  one.n_imp = 1;
  const ProtocolEngine engine(one, setup);
  ProtocolSequence s0 = seq;
  s0.t_dark = 0.0;
  s0.probe.reset();
  const double centre = seq.pump.detuning;
  const Vec deltas = Vec::LinSpaced(41, centre - 4.0 * rabi, centre + 4.0 * rabi);
  const Spectrum sp = sweep_probe(engine, s0, deltas, rabi, std::numbers::pi / rabi, workers);
  const ResonanceFit fit = fit_lineshape(sp);
  return std::numbers::pi / fit.rabi;
}

std::vector<Peak> classify_peaks(const Spectrum& spectrum, const ClassifyOptions& options) {
  const Vec& f = spectrum.fraction;
  const Eigen::Index n = f.size();
  if (n == 0) throw std::invalid_argument("classify_peaks: empty spectrum");
  const double floor = 1e-4 * std::max(f.maxCoeff(), 1e-300);
  std::vector<Peak> peaks;
  for (Eigen::Index k = 0; k < n; ++k) {
    const bool left = k == 0 || f(k) > f(k - 1);
    const bool right = k == n - 1 || f(k) >= f(k + 1);
    // endpoints count only when the spectrum has a single sample
    if (n > 1 && (k == 0 || k == n - 1)) continue;
    if (left && right && f(k) > floor) peaks.push_back({k, spectrum.detuning(k), f(k)});
  }
  if (peaks.empty() && n > 0) {
    Eigen::Index k;
    f.maxCoeff(&k);
    peaks.push_back({k, spectrum.detuning(k), f(k)});
  }
  std::vector<std::size_t> order(peaks.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return peaks[a].height > peaks[b].height; });
  std::vector<bool> done(peaks.size(), false);
  for (std::size_t i : order) {
    Peak& p = peaks[i];
    // nearest already classified main peak
    int parent = -1;
    for (std::size_t j = 0; j < peaks.size(); ++j) {
      if (!done[j] || peaks[j].label == PeakLabel::fringe) continue;
      if (parent < 0 || std::abs(peaks[j].detuning - p.detuning) < std::abs(peaks[parent].detuning - p.detuning))
        parent = static_cast<int>(j);
    }
    done[i] = true;
    if (parent >= 0) {
      const double ratio = p.height / peaks[parent].height;
      if (ratio < options.fringe_ratio) {
        p.label = PeakLabel::fringe;
        p.parent = parent;
        p.ambiguous = options.fringe_ratio - ratio < options.ambiguity_band;
        continue;
      }
      if (ratio - options.fringe_ratio < options.ambiguity_band) p.ambiguous = true;
    }
    if (std::abs(p.detuning) < options.free_window) {
      p.label = PeakLabel::free;
    } else {
      p.label = PeakLabel::polaron;
      // a peak of full height away from zero does not satisfy the polaron criterion cleanly
      if (p.height >= options.polaron_height - options.ambiguity_band) p.ambiguous = true;
    }
  }
  return peaks;
}

}  // namespace pps
