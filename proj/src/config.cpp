#include "pps/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace pps {

ConfigError::ConfigError(const std::string& source, int line, const std::string& message)
    : std::runtime_error(line > 0 ? source + ":" + std::to_string(line) + ": " + message : source + ": " + message),
      line_(line) {}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace

IniDocument parse_ini(const std::string& text, const std::string& source) {
  IniDocument doc;
  doc.source = source;
  std::istringstream in(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find_first_of("#;");
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(source, line, "unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty()) throw ConfigError(source, line, "empty section name");
      if (doc.section_lines.count(section)) throw ConfigError(source, line, "duplicate section [" + section + "]");
      doc.section_lines[section] = line;
      doc.sections[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(source, line, "expected 'key = value'");
    if (section.empty()) throw ConfigError(source, line, "key outside any section");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) throw ConfigError(source, line, "empty key");
    auto& sec = doc.sections[section];
    if (sec.count(key)) throw ConfigError(source, line, "duplicate key '" + key + "'");
    sec[key] = {trim(s.substr(eq + 1)), line};
  }
  return doc;
}

namespace {

// Typed access with line-numbered errors; every key read is marked so leftovers can be rejected.
class Reader {
 public:
  explicit Reader(const IniDocument& doc) : doc_(doc) {}

  const IniValue* find(const std::string& section, const std::string& key) {
    allowed_[section].insert(key);
    auto s = doc_.sections.find(section);
    if (s == doc_.sections.end()) return nullptr;
    auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

  [[noreturn]] void fail(const IniValue& v, const std::string& key, const std::string& what) const {
    throw ConfigError(doc_.source, v.line, "key '" + key + "' expects " + what + ", got '" + v.text + "'");
  }

  double to_double(const IniValue& v, const std::string& key, const std::string& text) const {
    double x = 0.0;
    const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
    if (ec != std::errc() || p != text.data() + text.size() || !std::isfinite(x)) fail(v, key, "a number");
    return x;
  }

  void real(const std::string& section, const std::string& key, double& out) {
    if (const IniValue* v = find(section, key)) out = to_double(*v, key, v->text);
  }

  void integer(const std::string& section, const std::string& key, int& out) {
    if (const IniValue* v = find(section, key)) {
      int x = 0;
      const auto [p, ec] = std::from_chars(v->text.data(), v->text.data() + v->text.size(), x);
      if (ec != std::errc() || p != v->text.data() + v->text.size()) fail(*v, key, "an integer");
      out = x;
    }
  }

  void boolean(const std::string& section, const std::string& key, bool& out) {
    if (const IniValue* v = find(section, key)) {
      if (v->text == "true" || v->text == "yes" || v->text == "1")
        out = true;
      else if (v->text == "false" || v->text == "no" || v->text == "0")
        out = false;
      else
        fail(*v, key, "true or false");
    }
  }

  void string(const std::string& section, const std::string& key, std::string& out) {
    if (const IniValue* v = find(section, key)) out = v->text;
  }

  template <typename E, typename F>
  void choice(const std::string& section, const std::string& key, E& out, F&& from_string, const std::string& what) {
    if (const IniValue* v = find(section, key)) {
      try {
        out = from_string(v->text);
      } catch (const std::invalid_argument&) {
        fail(*v, key, what);
      }
    }
  }

  // "a, b, c" or "linspace(lo, hi, n)"
  std::optional<Vec> list(const std::string& section, const std::string& key) {
    const IniValue* v = find(section, key);
    if (!v) return std::nullopt;
    const std::string& t = v->text;
    if (t.rfind("linspace(", 0) == 0) {
      if (t.back() != ')') fail(*v, key, "linspace(lo, hi, n)");
      const auto parts = split(t.substr(9, t.size() - 10), ',');
      if (parts.size() != 3) fail(*v, key, "linspace(lo, hi, n)");
      const double lo = to_double(*v, key, parts[0]), hi = to_double(*v, key, parts[1]);
      const double n = to_double(*v, key, parts[2]);
      if (n < 2 || n != std::floor(n) || !(hi > lo)) fail(*v, key, "linspace(lo, hi, n) with n >= 2 and hi > lo");
      return Vec::LinSpaced(static_cast<Eigen::Index>(n), lo, hi);
    }
    const auto parts = split(t, ',');
    Vec out(static_cast<Eigen::Index>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) out(static_cast<Eigen::Index>(i)) = to_double(*v, key, parts[i]);
    return out;
  }

  void int_list(const std::string& section, const std::string& key, std::vector<int>& out) {
    if (auto l = list(section, key)) {
      out.clear();
      for (double x : *l) {
        if (x != std::floor(x) || x < 1) fail(*find(section, key), key, "a list of positive integers");
        out.push_back(static_cast<int>(x));
      }
    }
  }

  void require(const std::string& section, const std::string& key) {
    if (!find(section, key)) {
      auto s = doc_.section_lines.find(section);
      throw ConfigError(doc_.source, s == doc_.section_lines.end() ? 0 : s->second,
                        "missing required key '" + section + "." + key + "'");
    }
  }

  void reject_unknown() const {
    for (const auto& [section, keys] : doc_.sections) {
      auto a = allowed_.find(section);
      if (a == allowed_.end()) throw ConfigError(doc_.source, doc_.section_lines.at(section), "unknown section [" + section + "]");
      for (const auto& [key, v] : keys)
        if (!a->second.count(key)) throw ConfigError(doc_.source, v.line, "unknown key '" + key + "' in [" + section + "]");
    }
  }

  int line_of(const std::string& section) const {
    auto s = doc_.section_lines.find(section);
    return s == doc_.section_lines.end() ? 0 : s->second;
  }

 private:
  const IniDocument& doc_;
  std::map<std::string, std::set<std::string>> allowed_;
};

}  // namespace

TrapGeometry UnitsSettings::geometry() const {
  return {2 * std::numbers::pi * axial_hz, 2 * std::numbers::pi * transverse_hz};
}

PhysicalScale UnitsSettings::scale() const { return {mass_amu * si::amu, 2 * std::numbers::pi * axial_hz}; }

Ensemble RunConfig::ensemble() const {
  if (eth.ensemble) return *eth.ensemble;
  return system.n_imp == 2 && system.statistics == Statistics::fermion ? Ensemble::fermi_pair : Ensemble::boltzmann;
}

RunConfig parse_config_text(const std::string& text, const std::string& source) {
  const IniDocument doc = parse_ini(text, source);
  Reader r(doc);
  RunConfig c;
  c.source = source;

  for (const char* key : {"n_bath", "n_imp", "g_bb", "g_bi"}) r.require("system", key);
  SystemParams& p = c.system;
  r.integer("system", "n_bath", p.n_bath);
  r.integer("system", "n_imp", p.n_imp);
  r.real("system", "mass_bath", p.mass_bath);
  r.real("system", "mass_imp", p.mass_imp);
  r.real("system", "omega", p.omega);
  r.real("system", "g_bb", p.g_bb);
  r.real("system", "g_bi", p.g_bi);
  r.real("system", "g_ii", p.g_ii);
  r.choice("system", "statistics", p.statistics, statistics_from_string, "boson or fermion");

  SolverSetup& s = c.setup;
  r.choice("solver", "kind", s.solver, solver_from_string, "coupled or ci");
  r.real("solver", "dt", s.propagation.dt);
  r.integer("solver", "splitting_order", s.propagation.splitting_order);
  r.real("solver", "stride", s.propagation.stride);
  r.boolean("solver", "frozen_bath", s.propagation.frozen_bath);
  r.integer("solver", "workers", c.workers);
  r.integer("grid", "bath_points", s.bath_points);
  r.real("grid", "bath_extent", s.bath_extent);
  r.integer("grid", "pair_points", s.pair_points);
  r.real("grid", "pair_extent", s.pair_extent);
  r.integer("grid", "ci_points", s.ci_points);
  r.real("grid", "ci_extent", s.ci_extent);
  r.integer("grid", "ci_bath_orbitals", s.ci_bath_orbitals);
  r.integer("grid", "ci_imp_orbitals", s.ci_imp_orbitals);
  r.real("grid", "ci_cap", s.ci_cap);

  ProtocolSequence& q = c.protocol;
  r.real("protocol", "pump_rabi", q.pump.rabi);
  q.pump.duration = std::numbers::pi / q.pump.rabi;
  r.real("protocol", "pump_duration", q.pump.duration);
  if (p.g_bb > 0.0 && p.n_bath > 0) q.pump.detuning = p.g_bi * thomas_fermi_profile(p).density(0.0);
  r.real("protocol", "pump_detuning", q.pump.detuning);
  r.choice("protocol", "blast", q.blast, blast_mode_from_string, "projector or dissipative");
  r.real("protocol", "blast_gamma", q.blast_gamma);
  r.real("protocol", "blast_time", q.blast_time);
  r.real("protocol", "t_dark", q.t_dark);
  PulseSpec probe{PulseLabel::probe, 1.0, 0.0, 0.0};
  r.boolean("protocol", "probe", c.probe_enabled);
  r.real("protocol", "probe_rabi", probe.rabi);
  probe.duration = std::numbers::pi / probe.rabi;
  if (r.find("protocol", "probe_duration")) c.sweep.calibrate_probe = false;
  r.real("protocol", "probe_duration", probe.duration);
  r.real("protocol", "probe_detuning", probe.detuning);
  q.probe = probe;

  c.sweep.pump_detunings = r.list("sweep", "pump_detunings");
  c.sweep.probe_detunings = r.list("sweep", "probe_detunings");
  if (auto t = r.list("sweep", "t_dark")) c.sweep.t_dark.assign(t->data(), t->data() + t->size());
  r.boolean("sweep", "calibrate_probe", c.sweep.calibrate_probe);

  r.real("evolve", "duration", c.evolve.duration);
  r.real("evolve", "snapshot_stride", c.evolve.snapshot_stride);

  DarkRunOptions& d = c.eth.run;
  r.real("eth", "duration", d.duration);
  d.window_end = d.duration;
  r.real("eth", "window_start", d.window_start);
  r.real("eth", "window_end", d.window_end);
  r.real("eth", "sample_stride", d.sample_stride);
  r.real("eth", "checkpoint_stride", d.checkpoint_stride);
  r.integer("eth", "max_states", c.eth.truncation.max_states);
  r.real("eth", "max_energy", c.eth.truncation.max_energy);
  Ensemble ens{};
  if (r.find("eth", "ensemble")) {
    r.choice("eth", "ensemble", ens, ensemble_from_string, "boltzmann, fermi-pair or bose-pair");
    c.eth.ensemble = ens;
  }

  r.real("ramsey", "duration", c.ramsey_duration);

  UnitsSettings& u = c.units;
  r.real("units", "mass_amu", u.mass_amu);
  r.real("units", "axial_hz", u.axial_hz);
  r.real("units", "transverse_hz", u.transverse_hz);
  r.real("units", "temperature", u.temperature);
  r.real("units", "threshold", u.thresholds.threshold);
  r.real("units", "warning", u.thresholds.warning);
  r.choice("units", "route", u.route, [](const std::string& v) {
    if (v == "confinement") return ScatteringRoute::confinement;
    if (v == "mean-field") return ScatteringRoute::mean_field;
    throw std::invalid_argument(v);
  }, "confinement or mean-field");

  r.int_list("convergence", "bath_orbitals", c.convergence.bath_orbitals);
  r.int_list("convergence", "imp_orbitals", c.convergence.imp_orbitals);

  r.string("output", "directory", c.output_dir);
  int seed = 0;
  r.integer("output", "seed", seed);
  c.seed = static_cast<std::uint64_t>(seed);

  r.reject_unknown();

  auto semantic = [&](const std::string& section, auto&& check) {
    try {
      check();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(source, r.line_of(section), e.what());
    }
  };
  semantic("system", [&] { p.validate(s.solver == Solver::ci); });
  semantic("protocol", [&] { q.validate(); });
  semantic("units", [&] { u.geometry().validate(); });
  semantic("eth", [&] { d.validate(); });
  semantic("sweep", [&] {
    for (double t : c.sweep.t_dark)
      if (t < 0) throw std::invalid_argument("t_dark values must be >= 0");
  });
  if (c.evolve.duration < 0 || !(c.evolve.snapshot_stride > 0))
    throw ConfigError(source, r.line_of("evolve"), "evolve needs duration >= 0 and snapshot_stride > 0");
  if (c.ramsey_duration <= 0) throw ConfigError(source, r.line_of("ramsey"), "ramsey duration must be positive");
  if (c.convergence.bath_orbitals.size() != c.convergence.imp_orbitals.size())
    throw ConfigError(source, r.line_of("convergence"), "bath_orbitals and imp_orbitals need equal lengths");
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

namespace {

nlohmann::json pulse_json(const PulseSpec& p) {
  return {{"label", to_string(p.label)}, {"rabi", p.rabi}, {"detuning", p.detuning}, {"duration", p.duration}};
}

nlohmann::json vec_json(const std::optional<Vec>& v) {
  if (!v) return nullptr;
  return std::vector<double>(v->data(), v->data() + v->size());
}

}  // namespace

nlohmann::json to_json(const RunConfig& c) {
  const SystemParams& p = c.system;
  const SolverSetup& s = c.setup;
  nlohmann::json j;
  j["source"] = c.source;
  j["system"] = {{"n_bath", p.n_bath}, {"n_imp", p.n_imp},   {"mass_bath", p.mass_bath},
                 {"mass_imp", p.mass_imp}, {"omega", p.omega}, {"g_bb", p.g_bb},
                 {"g_bi", p.g_bi},     {"g_ii", p.g_ii},     {"statistics", to_string(p.statistics)}};
  j["solver"] = {{"kind", to_string(s.solver)},
                 {"dt", s.propagation.dt},
                 {"splitting_order", s.propagation.splitting_order},
                 {"stride", s.propagation.stride},
                 {"frozen_bath", s.propagation.frozen_bath},
                 {"workers", c.workers}};
  j["grid"] = {{"bath_points", s.bath_points},     {"bath_extent", s.bath_extent},
               {"pair_points", s.pair_points},     {"pair_extent", s.pair_extent},
               {"ci_points", s.ci_points},         {"ci_extent", s.ci_extent},
               {"ci_bath_orbitals", s.ci_bath_orbitals}, {"ci_imp_orbitals", s.ci_imp_orbitals},
               {"ci_cap", s.ci_cap}};
  j["protocol"] = {{"pump", pulse_json(c.protocol.pump)},
                   {"blast", to_string(c.protocol.blast)},
                   {"blast_gamma", c.protocol.blast_gamma},
                   {"blast_time", c.protocol.blast_time},
                   {"t_dark", c.protocol.t_dark},
                   {"probe_enabled", c.probe_enabled},
                   {"probe", pulse_json(*c.protocol.probe)}};
  j["sweep"] = {{"pump_detunings", vec_json(c.sweep.pump_detunings)},
                {"probe_detunings", vec_json(c.sweep.probe_detunings)},
                {"t_dark", c.sweep.t_dark},
                {"calibrate_probe", c.sweep.calibrate_probe}};
  j["evolve"] = {{"duration", c.evolve.duration}, {"snapshot_stride", c.evolve.snapshot_stride}};
  const DarkRunOptions& d = c.eth.run;
  j["eth"] = {{"duration", d.duration},
              {"window_start", d.window_start},
              {"window_end", d.window_end},
              {"sample_stride", d.sample_stride},
              {"checkpoint_stride", d.checkpoint_stride},
              {"max_states", c.eth.truncation.max_states},
              {"max_energy", c.eth.truncation.max_energy},
              {"ensemble", to_string(c.ensemble())}};
  j["ramsey"] = {{"duration", c.ramsey_duration}};
  j["units"] = {{"mass_amu", c.units.mass_amu},       {"axial_hz", c.units.axial_hz},
                {"transverse_hz", c.units.transverse_hz}, {"temperature", c.units.temperature},
                {"route", to_string(c.units.route)},  {"threshold", c.units.thresholds.threshold},
                {"warning", c.units.thresholds.warning}};
  j["convergence"] = {{"bath_orbitals", c.convergence.bath_orbitals}, {"imp_orbitals", c.convergence.imp_orbitals}};
  j["output"] = {{"directory", c.output_dir}, {"seed", c.seed}};
  return j;
}

}  // namespace pps
