#include "pps/coupled.hpp"

#include <array>
#include <vector>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace pps {

std::string to_string(PulseLabel l) {
  switch (l) {
    case PulseLabel::pump: return "pump";
    case PulseLabel::probe: return "probe";
    default: return "dark";
  }
}

void PulseSpec::validate() const {
  if (!(duration > 0)) throw std::invalid_argument("pulse duration must be positive");
  if (label == PulseLabel::dark && rabi != 0.0) throw std::invalid_argument("dark pulse must have zero Rabi frequency");
  if (rabi < 0) throw std::invalid_argument("Rabi frequency must be non-negative");
}

Mat build_rf_hamiltonian(const PulseSpec& pulse, int n_imp) {
  Mat h(2, 2);
  h << -0.5 * pulse.detuning, 0.5 * pulse.rabi, 0.5 * pulse.rabi, 0.5 * pulse.detuning;
  if (n_imp == 1) return h;
  if (n_imp != 2) throw std::invalid_argument("build_rf_hamiltonian: n_imp must be 1 or 2");
  const Mat id = Mat::Identity(2, 2);
  Mat out(4, 4);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) out(2 * a + b, 2 * c + d) = h(a, c) * id(b, d) + id(a, c) * h(b, d);
  return out;
}

double ImpurityState::norm() const {
  const double dx = grid->dx;
  if (particles == 1) return dx * (up.squaredNorm() + down.squaredNorm());
  return dx * dx * (uu.squaredNorm() + 2.0 * ud.squaredNorm() + dd.squaredNorm());
}

Vec ImpurityState::density_up() const {
  if (particles == 1) return up.cwiseAbs2();
  const double dx = grid->dx;
  return 2.0 * dx * (uu.cwiseAbs2().rowwise().sum() + ud.cwiseAbs2().rowwise().sum());
}

Vec ImpurityState::density_down() const {
  if (particles == 1) return down.cwiseAbs2();
  const double dx = grid->dx;
  Vec r = 2.0 * dx * dd.cwiseAbs2().rowwise().sum();
  r += 2.0 * dx * ud.cwiseAbs2().colwise().sum().transpose();
  return r;
}

double ImpurityState::population_up() const { return grid->dx * density_up().sum(); }
double ImpurityState::population_down() const { return grid->dx * density_down().sum(); }

double ImpurityState::symmetry_residual() const {
  if (particles == 1) return 0.0;
  const double s = exchange_sign();
  const double total = std::sqrt(norm());
  if (total == 0.0) return 0.0;
  double r = 0.0;
  for (const CMat* f : {&uu, &dd}) r = std::max(r, grid->dx * (*f - s * f->transpose()).norm() / total);
  return r;
}

Mat trap_orbitals(const Grid& grid, double mass, double omega, int count) {
  if (count < 1 || count > grid.points) throw std::invalid_argument("trap_orbitals: invalid orbital count");
  Mat h = cached_kinetic_matrix(grid, mass);
  h.diagonal() += harmonic_potential(grid, mass, omega).diagonal();
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  Mat phi = es.eigenvectors().leftCols(count) / std::sqrt(grid.dx);
  for (int k = 0; k < count; ++k) {
    Eigen::Index imax;
    phi.col(k).cwiseAbs().maxCoeff(&imax);
    // fix the sign on the left-most lobe for reproducible orbitals
    Eigen::Index first = 0;
    while (first < phi.rows() && std::abs(phi(first, k)) < 1e-3 * std::abs(phi(imax, k))) ++first;
    if (phi(first, k) < 0) phi.col(k) *= -1.0;
  }
  return phi;
}

ImpurityState impurity_ground_state(const SystemParams& params, GridPtr grid, bool spin_up) {
  ImpurityState s;
  s.grid = grid;
  s.particles = params.n_imp;
  s.statistics = params.statistics;
  const int m = grid->points;
  if (params.n_imp == 1) {
    const Mat phi = trap_orbitals(*grid, params.mass_imp, params.omega, 1);
    CVec p = phi.col(0).cast<cplx>();
    s.up = spin_up ? p : CVec::Zero(m);
    s.down = spin_up ? CVec::Zero(m) : p;
    return s;
  }
  const Mat phi = trap_orbitals(*grid, params.mass_imp, params.omega, 2);
  Mat f;
  if (params.statistics == Statistics::boson) f = phi.col(0) * phi.col(0).transpose();
  else f = (phi.col(0) * phi.col(1).transpose() - phi.col(1) * phi.col(0).transpose()) / std::sqrt(2.0);
  s.uu = CMat::Zero(m, m);
  s.ud = CMat::Zero(m, m);
  s.dd = CMat::Zero(m, m);
  (spin_up ? s.uu : s.dd) = f.cast<cplx>();
  return s;
}

Vec bath_density_on(const BathField& bath, const Grid& target) {
  if (same_grid(*bath.grid, target)) return bath.density();
  return cached_transfer_matrix(*bath.grid, target) * bath.density();
}

namespace {

struct Unitary2 {
  cplx a, b, c, d;  // [[a, b], [c, d]]
};

// exp(-i h [[p, w], [w, q]])
Unitary2 exp2(double p, double q, double w, double h) {
  const double m = 0.5 * (p + q);
  const double dd = 0.5 * (p - q);
  const double r = std::sqrt(dd * dd + w * w);
  const double cs = std::cos(r * h);
  const double sn = r > 0 ? std::sin(r * h) / r : h;
  const cplx e = std::exp(cplx(0, -m * h));
  const cplx i(0, 1);
  return {e * (cs - i * sn * dd), e * (-i * sn * w), e * (-i * sn * w), e * (cs + i * sn * dd)};
}

class SplitStepper {
 public:
  SplitStepper(const SystemParams& p, const CoupledState& s, const PulseSpec& pulse, const PropagationOptions& o,
               double dt, double loss, const PotentialSeries* extra)
      : p_(p), pulse_(pulse), o_(o), loss_(loss), extra_(extra) {
    has_bath_ = s.bath.grid && s.bath.psi.size() > 0;
    has_imp_ = s.imp.grid != nullptr;
    if (o.splitting_order == 4) {
      const double w1 = 1.0 / (2.0 - std::cbrt(2.0));
      weights_ = {w1, 1.0 - 2.0 * w1, w1};
    } else if (o.splitting_order == 2) {
      weights_ = {1.0};
    } else {
      throw std::invalid_argument("splitting_order must be 2 or 4");
    }
    if (has_bath_) {
      bath_grid_ = s.bath.grid.get();
      kb_ = KineticPropagator(*bath_grid_, p.mass_bath);
      vb_ = harmonic_potential(*bath_grid_, p.mass_bath, p.omega).diagonal();
    }
    if (has_imp_) {
      imp_grid_ = s.imp.grid.get();
      ki_ = KineticPropagator(*imp_grid_, p.mass_imp);
      vi_ = harmonic_potential(*imp_grid_, p.mass_imp, p.omega).diagonal();
      two_body_ = s.imp.particles == 2;
      sign_ = s.imp.exchange_sign();
    }
    coupled_ = has_bath_ && has_imp_ && p.g_bi != 0.0;
    if (coupled_ && !same_grid(*bath_grid_, *imp_grid_)) {
      transfer_ = &cached_transfer_matrix(*bath_grid_, *imp_grid_);
      adjoint_ = (imp_grid_->dx / bath_grid_->dx) * transfer_->transpose();
    }
    for (double w : weights_) {
      const double tau = w * dt;
      if (has_bath_) bath_phase_.push_back(kb_.phases(tau));
      if (has_imp_) {
        if (two_body_) imp_pair_phase_.push_back(ki_.pair_phases(tau));
        else imp_phase_.push_back(ki_.phases(tau));
      }
    }
    // sectors that are zero stay zero without rf coupling
    const bool dark = pulse.rabi == 0.0;
    if (has_imp_) {
      if (!two_body_) {
        active_ = {!dark || s.imp.up.squaredNorm() > 0, !dark || s.imp.down.squaredNorm() > 0, false};
      } else {
        active_ = {!dark || s.imp.uu.squaredNorm() > 0, !dark || s.imp.ud.squaredNorm() > 0,
                   !dark || s.imp.dd.squaredNorm() > 0};
      }
    }
  }

  void step(CoupledState& s, double t, double dt) {
    for (size_t k = 0; k < weights_.size(); ++k) {
      const double tau = weights_[k] * dt;
      const double tm = t + 0.5 * tau;
      bath_local(s, 0.5 * tau, tm);
      imp_local(s, 0.5 * tau);
      kinetic(s, k);
      imp_local(s, 0.5 * tau);
      bath_local(s, 0.5 * tau, tm);
      t += tau;
    }
  }

 private:
  void bath_local(CoupledState& s, double h, double t) {
    if (!has_bath_ || o_.frozen_bath) return;
    CVec& psi = s.bath.psi;
    Vec v = vb_ + p_.g_bb * psi.cwiseAbs2();
    if (extra_ && *extra_) v += (*extra_)(t);
    if (coupled_) {
      const Vec rho_up = s.imp.density_up();
      if (transfer_) v += p_.g_bi * (adjoint_ * rho_up);
      else v += p_.g_bi * rho_up;
    }
    for (Eigen::Index q = 0; q < psi.size(); ++q) psi(q) *= std::exp(cplx(0, -h * v(q)));
  }

  void imp_local(CoupledState& s, double h) {
    if (!has_imp_) return;
    const int m = imp_grid_->points;
    Vec up_pot = vi_ - 0.5 * pulse_.detuning * Vec::Ones(m);
    const Vec down_pot = vi_ + 0.5 * pulse_.detuning * Vec::Ones(m);
    if (coupled_) up_pot += p_.g_bi * (transfer_ ? Vec(*transfer_ * s.bath.density()) : s.bath.density());
    const double w = 0.5 * pulse_.rabi;
    const double damp = std::exp(-loss_ * h);
    ImpurityState& st = s.imp;

    std::vector<Unitary2> u(m);
    for (int q = 0; q < m; ++q) {
      if (w == 0.0) {
        u[q] = {std::exp(cplx(0, -h * up_pot(q))), 0.0, 0.0, damp * std::exp(cplx(0, -h * down_pot(q)))};
      } else {
        u[q] = exp2(up_pot(q), down_pot(q), w, h);
      }
    }

    if (!two_body_) {
      if (w == 0.0) {
        for (int q = 0; q < m; ++q) {
          st.up(q) *= u[q].a;
          st.down(q) *= u[q].d;
        }
      } else {
        for (int q = 0; q < m; ++q) {
          const cplx a = st.up(q), b = st.down(q);
          st.up(q) = u[q].a * a + u[q].b * b;
          st.down(q) = u[q].c * a + u[q].d * b;
        }
      }
      return;
    }

    const cplx contact = std::exp(cplx(0, -h * p_.g_ii / imp_grid_->dx));
    if (w == 0.0) {
      for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) {
          if (active_[0]) st.uu(i, j) *= u[i].a * u[j].a;
          if (active_[1]) st.ud(i, j) *= u[i].a * u[j].d;
          if (active_[2]) st.dd(i, j) *= u[i].d * u[j].d;
        }
    } else {
      CMat nuu(m, m), nud(m, m), ndd(m, m);
      for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) {
          const Unitary2& a = u[i];
          const Unitary2& b = u[j];
          const cplx x_uu = st.uu(i, j), x_ud = st.ud(i, j), x_du = sign_ * st.ud(j, i), x_dd = st.dd(i, j);
          // rows of U_i (x) U_j acting on (uu, ud, du, dd)
          nuu(i, j) = a.a * (b.a * x_uu + b.b * x_ud) + a.b * (b.a * x_du + b.b * x_dd);
          nud(i, j) = a.a * (b.c * x_uu + b.d * x_ud) + a.b * (b.c * x_du + b.d * x_dd);
          ndd(i, j) = a.c * (b.c * x_uu + b.d * x_ud) + a.d * (b.c * x_du + b.d * x_dd);
        }
      st.uu.swap(nuu);
      st.ud.swap(nud);
      st.dd.swap(ndd);
    }
    if (p_.g_ii != 0.0)
      for (int q = 0; q < m; ++q) st.uu(q, q) *= contact;
  }

  void kinetic(CoupledState& s, size_t k) {
    if (has_bath_ && !o_.frozen_bath) kb_.apply(s.bath.psi, bath_phase_[k]);
    if (!has_imp_) return;
    if (!two_body_) {
      if (active_[0]) ki_.apply(s.imp.up, imp_phase_[k]);
      if (active_[1]) ki_.apply(s.imp.down, imp_phase_[k]);
    } else {
      if (active_[0]) ki_.apply_pair(s.imp.uu, imp_pair_phase_[k]);
      if (active_[1]) ki_.apply_pair(s.imp.ud, imp_pair_phase_[k]);
      if (active_[2]) ki_.apply_pair(s.imp.dd, imp_pair_phase_[k]);
    }
  }

  const SystemParams& p_;
  PulseSpec pulse_;
  PropagationOptions o_;
  double loss_;
  const PotentialSeries* extra_;
  bool has_bath_ = false, has_imp_ = false, two_body_ = false, coupled_ = false;
  double sign_ = 1.0;
  const Grid* bath_grid_ = nullptr;
  const Grid* imp_grid_ = nullptr;
  KineticPropagator kb_, ki_;
  Vec vb_, vi_;
  const Mat* transfer_ = nullptr;
  Mat adjoint_;
  std::vector<double> weights_;
  std::vector<CVec> bath_phase_, imp_phase_;
  std::vector<CMat> imp_pair_phase_;
  std::array<bool, 3> active_{true, true, true};
};

CoupledState evolve_impl(CoupledState state, const SystemParams& params, const PulseSpec& pulse,
                         const PropagationOptions& options, const Observer& observer, double loss,
                         const PotentialSeries* extra) {
  pulse.validate();
  if (!(options.dt > 0)) throw std::invalid_argument("time step must be positive");
  const long steps = std::max(1L, std::lround(pulse.duration / options.dt));
  const double dt = pulse.duration / steps;
  const long stride = std::max(1L, std::lround(options.stride / dt));
  SplitStepper stepper(params, state, pulse, options, dt, loss, extra);

  const bool has_bath = state.bath.grid && state.bath.psi.size() > 0;
  const bool has_imp = state.imp.grid != nullptr;
  const double nb0 = has_bath ? state.bath.norm() : 0.0;
  const double ni0 = has_imp ? state.imp.norm() : 0.0;
  const double t0 = state.time;

  auto check = [&](long k) {
    std::ostringstream msg;
    if (has_bath && std::abs(state.bath.norm() - nb0) > options.norm_tolerance * nb0) {
      msg << "bath norm drift " << state.bath.norm() - nb0 << " at step " << k << " (t=" << state.time << ")";
      throw std::runtime_error(msg.str());
    }
    if (has_imp && loss == 0.0 && std::abs(state.imp.norm() - ni0) > options.norm_tolerance * ni0) {
      msg << "impurity norm drift " << state.imp.norm() - ni0 << " at step " << k << " (t=" << state.time << ")";
      throw std::runtime_error(msg.str());
    }
    if (has_imp && state.imp.particles == 2) {
      const double r = state.imp.symmetry_residual();
      if (r > options.symmetry_tolerance) {
        msg << "exchange symmetry residual " << r << " at step " << k << " (t=" << state.time << ")";
        throw std::runtime_error(msg.str());
      }
    }
  };

  if (observer && options.observe_start) observer(state);
  for (long k = 1; k <= steps; ++k) {
    stepper.step(state, t0 + (k - 1) * dt, dt);
    state.time = t0 + k * dt;
    if (k % stride == 0 || k == steps) {
      check(k);
      if (observer) observer(state);
    }
  }
  return state;
}

}  // namespace

CoupledState evolve_coupled(CoupledState state, const SystemParams& params, const PulseSpec& pulse,
                            const PropagationOptions& options, const Observer& observer) {
  return evolve_impl(std::move(state), params, pulse, options, observer, 0.0, nullptr);
}

CoupledState blast_project(CoupledState state) {
  ImpurityState& s = state.imp;
  if (s.particles == 1) s.down.setZero();
  else {
    s.ud.setZero();
    s.dd.setZero();
  }
  const double n = s.norm();
  if (n < 1e-12) throw std::runtime_error("blast projection: no spin-up population left (pump failed)");
  const double c = 1.0 / std::sqrt(n);
  if (s.particles == 1) s.up *= c;
  else s.uu *= c;
  return state;
}

CoupledState apply_blast_dissipative(CoupledState state, const SystemParams& params, double gamma, double t_b,
                                     const PropagationOptions& options) {
  if (!(gamma > 0) || !(t_b > 0)) throw std::invalid_argument("dissipative blast needs gamma > 0 and t_b > 0");
  PropagationOptions o = options;
  o.observe_start = false;
  state = evolve_impl(std::move(state), params, PulseSpec::dark(t_b), o, {}, gamma, nullptr);
  const double n = state.imp.norm();
  if (n < 1e-300) throw std::runtime_error("dissipative blast: impurity fully depleted");
  const double c = 1.0 / std::sqrt(n);
  ImpurityState& s = state.imp;
  if (s.particles == 1) {
    s.up *= c;
    s.down *= c;
  } else {
    s.uu *= c;
    s.ud *= c;
    s.dd *= c;
  }
  return state;
}

BathField propagate_gp(const BathField& state, const SystemParams& params, const PotentialSeries& extra_potential,
                       double duration, const GpPropagation& options,
                       const std::function<void(double, const BathField&)>& observer) {
  CoupledState s;
  s.bath = state;
  PropagationOptions o;
  o.dt = options.dt;
  o.splitting_order = options.splitting_order;
  o.stride = options.stride;
  o.norm_tolerance = options.norm_tolerance;
  Observer obs;
  if (observer) obs = [&](const CoupledState& c) { observer(c.time, c.bath); };
  const PotentialSeries* extra = extra_potential ? &extra_potential : nullptr;
  s = evolve_impl(std::move(s), params, PulseSpec::dark(duration), o, obs, 0.0, extra);
  return s.bath;
}

EnergyParts coupled_energy(const CoupledState& state, const SystemParams& params, const PulseSpec& pulse) {
  EnergyParts e;
  const bool has_bath = state.bath.grid && state.bath.psi.size() > 0;
  if (has_bath) e.bath = gp_energy(state.bath, params);
  if (!state.imp.grid) return e;
  const ImpurityState& s = state.imp;
  const Grid& g = *s.grid;
  const double dx = g.dx;
  const Mat& t = cached_kinetic_matrix(g, params.mass_imp);
  const Vec v = harmonic_potential(g, params.mass_imp, params.omega).diagonal();
  const Mat h1 = t;
  auto one_body = [&](const CVec& f) {
    return dx * ((f.adjoint() * (h1 * f))(0).real() + v.dot(f.cwiseAbs2()));
  };
  auto pair_body = [&](const CMat& f) {
    if (f.squaredNorm() == 0.0) return 0.0;
    const CMat hf = h1 * f + f * h1;
    double r = (f.conjugate().cwiseProduct(hf)).sum().real();
    const Mat a = f.cwiseAbs2();
    r += (v.transpose() * a).sum() + (a * v).sum();
    return dx * dx * r;
  };
  if (s.particles == 1) {
    e.impurity = one_body(s.up) + one_body(s.down);
    const cplx ov = dx * s.up.dot(s.down);
    e.spin = pulse.rabi * ov.real() - 0.5 * pulse.detuning * (s.population_up() - s.population_down());
  } else {
    e.impurity = pair_body(s.uu) + 2.0 * pair_body(s.ud) + pair_body(s.dd);
    // sum sigma_x = 2 Re <up|down> summed over particles
    const double sgn = s.exchange_sign();
    cplx sx = 0.0;
    const int m = g.points;
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) {
        // <uu|ud> + <uu|du> + <ud|dd> + <du|dd> pieces of the collective sigma_x
        const cplx du = sgn * s.ud(j, i);
        sx += std::conj(s.uu(i, j)) * (s.ud(i, j) + du) + std::conj(s.ud(i, j) + du) * s.dd(i, j);
      }
    e.spin = pulse.rabi * dx * dx * sx.real() - 0.5 * pulse.detuning * (s.population_up() - s.population_down());
    if (params.g_ii != 0.0) e.intraspecies = params.g_ii * dx * s.uu.diagonal().squaredNorm();
  }
  if (has_bath && params.g_bi != 0.0) {
    e.interspecies = params.g_bi * dx * bath_density_on(state.bath, g).dot(s.density_up());
  }
  return e;
}

}  // namespace pps
