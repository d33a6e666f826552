#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "pps/commands.hpp"
#include "pps/io.hpp"

using namespace pps;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pps_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* small_config = R"(
[system]
n_bath = 20
n_imp = 1
g_bb = 0.5
g_bi = 1.0

[grid]
bath_points = 99
bath_extent = 10
pair_points = 63
pair_extent = 8

[solver]
dt = 0.01
)";

int run(const RunConfig& c, CommandOptions o, const fs::path& dir, std::string* text = nullptr) {
  o.output_dir = dir.string();
  std::ostringstream out;
  const int status = run_command(c, o, out);
  if (text) *text = out.str();
  return status;
}

}  // namespace

TEST_CASE("ini syntax") {
  const IniDocument d = parse_ini("# c\n[a]\nx = 1 ; tail\n y=two words \n\n[b]\n", "t");
  CHECK(d.sections.at("a").at("x").text == "1");
  CHECK(d.sections.at("a").at("x").line == 3);
  CHECK(d.sections.at("a").at("y").text == "two words");
  CHECK(d.sections.at("b").empty());
  CHECK_THROWS_WITH_AS(parse_ini("x = 1\n", "t"), "t:1: key outside any section", ConfigError);
  CHECK_THROWS_WITH_AS(parse_ini("[a]\nx\n", "t"), "t:2: expected 'key = value'", ConfigError);
  CHECK_THROWS_WITH_AS(parse_ini("[a]\nx=1\nx=2\n", "t"), "t:3: duplicate key 'x'", ConfigError);
  CHECK_THROWS_AS(parse_ini("[a\n", "t"), ConfigError);
}

TEST_CASE("minimal config gets defaults") {
  const RunConfig c = parse_config_text("[system]\nn_bath = 100\nn_imp = 1\ng_bb = 0.5\ng_bi = 1.5\n");
  CHECK(c.system.n_bath == 100);
  CHECK(c.setup.bath_points == 600);
  CHECK(c.setup.solver == Solver::coupled);
  CHECK(c.protocol.pump.rabi == 10.0);
  CHECK(c.protocol.pump.duration == doctest::Approx(std::numbers::pi / 10));
  // resonant with the condensate centre
  CHECK(c.protocol.pump.detuning == doctest::Approx(1.5 * thomas_fermi_profile(c.system).density(0.0)));
  CHECK(c.protocol.probe->rabi == 1.0);
  CHECK(c.sweep.calibrate_probe);
  CHECK(c.eth.run.window_start == 100.0);
  CHECK(c.eth.run.window_end == 300.0);
  CHECK(c.ensemble() == Ensemble::boltzmann);
  CHECK(!c.sweep.pump_detunings);
}

TEST_CASE("full-scale configuration") {
  const RunConfig c = parse_config_text(R"(
[system]
n_bath = 100
n_imp = 2
g_bb = 0.5
g_bi = 1.5
statistics = fermion
[protocol]
pump_rabi = 10
probe_rabi = 1
probe = true
[sweep]
t_dark = 0, 2, 8
probe_detunings = linspace(-12, 12, 121)
)");
  CHECK(c.system.statistics == Statistics::fermion);
  CHECK(c.protocol.pump.rabi == 10.0);
  CHECK(c.protocol.probe->rabi == 1.0);
  CHECK(c.protocol.probe->duration == doctest::Approx(std::numbers::pi));
  CHECK(c.probe_enabled);
  CHECK(c.sweep.t_dark == std::vector<double>{0, 2, 8});
  REQUIRE(c.sweep.probe_detunings);
  CHECK(c.sweep.probe_detunings->size() == 121);
  CHECK((*c.sweep.probe_detunings)(60) == doctest::Approx(0.0));
  CHECK(c.ensemble() == Ensemble::fermi_pair);
  const auto j = to_json(c);
  CHECK(j["protocol"]["pump"]["rabi"] == 10.0);
  CHECK(j["system"]["statistics"] == "fermion");
}

TEST_CASE("config errors carry line numbers") {
  const std::string head = "[system]\nn_bath = 100\nn_imp = 1\ng_bb = 0.5\n";
  CHECK_THROWS_WITH_AS(parse_config_text(head + "g_bi = 1.5x\n", "cfg"),
                       "cfg:5: key 'g_bi' expects a number, got '1.5x'", ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text(head + "g_bi = 1\nn_bath_typo = 3\n", "cfg"),
                       "cfg:6: unknown key 'n_bath_typo' in [system]", ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text(head + "g_bi = 1\n[nonsense]\n", "cfg"), "cfg:6: unknown section [nonsense]",
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text(head, "cfg"), "cfg:1: missing required key 'system.g_bi'", ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text(head + "g_bi = 1\n[grid]\nbath_points = 1.5\n", "cfg"),
                       "cfg:7: key 'bath_points' expects an integer, got '1.5'", ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text(head + "g_bi = 1\nstatistics = anyon\n", "cfg"),
                       "cfg:6: key 'statistics' expects boson or fermion, got 'anyon'", ConfigError);
  CHECK_THROWS_AS(parse_config_text(head + "g_bi = 1\n[sweep]\nt_dark = linspace(1, 0, 3)\n", "cfg"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(head + "g_bi = 1\n[eth]\nwindow_start = 400\n", "cfg"), ConfigError);
  CHECK_THROWS_AS(parse_config(fs::path("/nonexistent/pps.ini")), ConfigError);
}

TEST_CASE("spectrum and table files round trip") {
  const fs::path dir = scratch("io");
  Spectrum s;
  s.pulse = PulseLabel::probe;
  s.t_dark = 8.0;
  s.rabi = 1.0;
  s.duration = std::numbers::pi;
  s.detuning = Vec::LinSpaced(31, -3.0, 3.0);
  s.fraction = s.detuning.unaryExpr([](double d) { return lineshape(d, 1.0, 0.1, std::numbers::pi); });
  s.fraction(3) = 1.0 / 3.0;
  write_spectrum_csv(dir / "s.csv", s);
  CHECK(slurp(dir / "s.csv").find("delta_over_omega,transfer_fraction\n") != std::string::npos);
  const Spectrum r = read_spectrum_csv(dir / "s.csv");
  CHECK(r.detuning == s.detuning);
  CHECK(r.fraction == s.fraction);
  CHECK(r.pulse == PulseLabel::probe);
  CHECK(r.t_dark == 8.0);
  CHECK(r.duration == s.duration);

  std::ofstream(dir / "bad.csv") << "delta_over_omega,transfer_fraction\n0.1,0.2\n0.2,abc\n";
  CHECK_THROWS_WITH(read_spectrum_csv(dir / "bad.csv"), ((dir / "bad.csv").string() + ":3: bad number 'abc'").c_str());
  std::ofstream(dir / "hdr.csv") << "a,b\n1,2\n";
  CHECK_THROWS(read_spectrum_csv(dir / "hdr.csv"));
}

TEST_CASE("array files are lossless") {
  const fs::path dir = scratch("array");
  auto grid = make_grid(17, -3, 3);
  OneBodyDensityMatrix rho;
  rho.species = Species::up;
  rho.grid = grid;
  rho.time = 12.5;
  rho.rho = CMat::Random(17, 17);
  rho.rho = (rho.rho + rho.rho.adjoint()).eval();
  rho.rho(2, 3) = cplx(1.0 / 3.0, -std::numbers::pi);
  rho.rho(3, 2) = std::conj(rho.rho(2, 3));
  write_array(dir / "rho.bin", density_matrix_array(rho));
  const OneBodyDensityMatrix back = density_matrix_from_array(read_array(dir / "rho.bin"));
  CHECK(back.rho == rho.rho);
  CHECK(back.time == 12.5);
  CHECK(back.species == Species::up);
  CHECK(same_grid(*back.grid, *grid));

  ArrayFile a;
  a.quantity = "density";
  a.real = Mat::Random(5, 3);
  a.axes = {grid_axis(*grid)};
  a.meta["note"] = "x";
  write_array(dir / "a.bin", a);
  const ArrayFile b = read_array(dir / "a.bin");
  CHECK(b.real == a.real);
  CHECK(!b.is_complex());
  CHECK(b.meta["note"] == "x");
  CHECK(slurp(dir / "a.bin").rfind("PPSARRAY 1\n{", 0) == 0);
  std::ofstream(dir / "junk.bin") << "hello\n";
  CHECK_THROWS(read_array(dir / "junk.bin"));
}

TEST_CASE("relax verb") {
  const fs::path dir = scratch("relax");
  const RunConfig c = parse_config_text(small_config);
  std::string text;
  CommandOptions o;
  o.verb = "relax";
  CHECK(run(c, o, dir, &text) == 0);
  CHECK(text.find("mu = ") != std::string::npos);
  const Table t = read_table_csv(dir / "density.csv");
  CHECK(t.rows.size() == 99);
  const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(m["verb"] == "relax");
  CHECK(m["config"]["system"]["n_bath"] == 20);
  CHECK(m["outputs"].size() == 2);
  const double mu = m["results"]["mu"];
  CHECK(mu == doctest::Approx(thomas_fermi_profile(c.system).mu).epsilon(0.15));
  CHECK(read_array(dir / "ground_state.bin").real.rows() == 99);
}

TEST_CASE("evolve verb writes trajectory and snapshots") {
  const fs::path dir = scratch("evolve");
  RunConfig c = parse_config_text(std::string(small_config) + "[evolve]\nduration = 0.5\nsnapshot_stride = 0.1\n");
  CommandOptions o;
  o.verb = "evolve";
  CHECK(run(c, o, dir) == 0);
  const Table t = read_table_csv(dir / "trajectory.csv");
  // initial, 4 pump chunks, after blast, 5 dark chunks
  CHECK(t.rows.size() == 11);
  for (const auto& row : t.rows) CHECK(row[2] + row[3] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(t.rows.back()[3] < 1e-12);
  const ArrayFile up = read_array(dir / "density_up.bin");
  CHECK(up.real.cols() == 11);
  CHECK(up.meta["times"].size() == 11);
}

TEST_CASE("sweeps are deterministic and independent of the worker count") {
  const fs::path d1 = scratch("sweep1"), d2 = scratch("sweep2");
  RunConfig c = parse_config_text(std::string(small_config) + "[sweep]\npump_detunings = linspace(-2, 16, 19)\n");
  CommandOptions o;
  o.verb = "sweep-pump";
  c.workers = 1;
  CHECK(run(c, o, d1) == 0);
  c.workers = 3;
  CHECK(run(c, o, d2) == 0);
  CHECK(slurp(d1 / "pump_spectrum.csv") == slurp(d2 / "pump_spectrum.csv"));
  const Spectrum s = read_spectrum_csv(d1 / "pump_spectrum.csv");
  CHECK(s.detuning.size() == 19);
  CHECK(s.pulse == PulseLabel::pump);
}

TEST_CASE("sweep-probe at a given dark time") {
  const fs::path dir = scratch("probe");
  RunConfig c = parse_config_text(std::string(small_config) +
                                  "[protocol]\nprobe_duration = 3.14159265358979\n[sweep]\nprobe_detunings = linspace(-3, 3, 13)\n");
  CommandOptions o;
  o.verb = "sweep-probe";
  o.t_dark = 0.5;
  std::string text;
  CHECK(run(c, o, dir, &text) == 0);
  CHECK(fs::exists(dir / "probe_td0.5.csv"));
  CHECK(read_spectrum_csv(dir / "probe_td0.5.csv").t_dark == 0.5);
}

TEST_CASE("ramsey verb") {
  const fs::path dir = scratch("ramsey");
  RunConfig c = parse_config_text(std::string(small_config) + "[ramsey]\nduration = 2\n");
  CommandOptions o;
  o.verb = "ramsey";
  CHECK(run(c, o, dir) == 0);
  const Table t = read_table_csv(dir / "ramsey.csv");
  CHECK(t.rows.front()[1] == doctest::Approx(1.0).epsilon(1e-12));
  for (const auto& r : t.rows) CHECK(r[1] <= 1.0 + 1e-10);
}

TEST_CASE("eth-fit from files recovers a synthetic temperature") {
  const fs::path dir = scratch("eth");
  RunConfig c = parse_config_text(small_config);
  auto grid = make_grid(99, -10, 10);
  const Vec bath = thomas_fermi_profile(c.system).density(*grid);
  const EffectiveHamiltonian h = effective_hamiltonian(grid, bath, c.system);
  const OneBodyDensityMatrix rho = gibbs_density_matrix(h, occupations(h, Ensemble::boltzmann, 1, 4.0));
  ArrayFile a = density_matrix_array(rho);
  a.meta["impurity_energy_bar"] = thermal_energy(h, Ensemble::boltzmann, 1, 4.0);
  write_array(dir / "rho.bin", a);
  ArrayFile b;
  b.real = bath;
  b.axes = {grid_axis(*grid)};
  write_array(dir / "bath.bin", b);
  CommandOptions o;
  o.verb = "eth-fit";
  o.input = dir / "rho.bin";
  o.bath = dir / "bath.bin";
  CHECK(run(c, o, dir / "out") == 0);
  const auto m = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  CHECK(m["results"]["t_fit"].get<double>() == doctest::Approx(4.0).epsilon(0.01 / 4));
  CHECK(m["results"]["t_energy"].get<double>() == doctest::Approx(4.0).epsilon(1e-4));
  CHECK(read_table_csv(dir / "out" / "eth_fit.csv").columns.size() == 4);
  o.bath.reset();
  CHECK_THROWS_AS(run(c, o, dir / "out2"), std::invalid_argument);
}

TEST_CASE("units, classify and fit verbs") {
  const fs::path dir = scratch("misc");
  RunConfig c = parse_config_text("[system]\nn_bath = 100\nn_imp = 1\ng_bb = 0.5\ng_bi = 0\n");
  CommandOptions o;
  o.verb = "units";
  o.check = true;
  std::string text;
  CHECK(run(c, o, dir / "u", &text) == 0);
  CHECK(text.find("N_B a_BB alpha_perp / alpha^2") != std::string::npos);
  const std::string csv = slurp(dir / "u" / "units.csv");
  CHECK(csv.rfind("condition,value,verdict\n", 0) == 0);
  CHECK(csv.find(",pass\n") != std::string::npos);

  Spectrum s;
  s.rabi = 1.0;
  s.duration = std::numbers::pi;
  s.detuning = Vec::LinSpaced(241, -12, 12);
  s.fraction = s.detuning.unaryExpr([](double d) { return lineshape(d, 1.0, 2.5, std::numbers::pi); });
  write_spectrum_csv(dir / "s.csv", s);
  o = {};
  o.verb = "fit";
  o.input = dir / "s.csv";
  CHECK(run(c, o, dir / "f") == 0);
  const Table f = read_table_csv(dir / "f" / "fit.csv");
  CHECK(f.rows[0][1] == doctest::Approx(2.5).epsilon(1e-6));
  CHECK(f.rows[0][0] == doctest::Approx(1.0).epsilon(1e-6));
  o.verb = "classify";
  CHECK(run(c, o, dir / "c", &text) == 0);
  CHECK(text.find("polaron") != std::string::npos);
  CHECK(text.find("lineshape-fringe") != std::string::npos);
  o.input.reset();
  CHECK_THROWS_AS(run(c, o, dir / "c2"), std::invalid_argument);
  o.verb = "bogus";
  CHECK_THROWS_AS(run(c, o, dir / "b"), std::invalid_argument);
}

TEST_CASE("convergence verb on a small CI system") {
  const fs::path dir = scratch("conv");
  RunConfig c = parse_config_text(R"(
[system]
n_bath = 2
n_imp = 1
g_bb = 0.5
g_bi = 1.0
[grid]
ci_points = 80
ci_extent = 7
[protocol]
t_dark = 0.5
[convergence]
bath_orbitals = 2, 3, 4
imp_orbitals = 3, 4, 6
)");
  CommandOptions o;
  o.verb = "convergence";
  CHECK(run(c, o, dir) == 0);
  const Table t = read_table_csv(dir / "convergence.csv");
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows.back()[4] == 0.0);
  CHECK(t.rows[0][4] > 0.0);
}
