#include <iostream>

#include <CLI11.hpp>

#include "pps/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"pump-probe spectroscopy of impurities in a trapped 1D Bose gas"};
  app.require_subcommand(1);

  std::string config_path;
  pps::CommandOptions opt;
  std::string out_dir;
  int threads = 0;
  std::string input, bath;
  double t_dark = 0, duration = 0;

  auto common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("-c,--config", config_path, "INI run configuration")->check(CLI::ExistingFile);
    if (needs_config) c->required();
    sub->add_option("-o,--out", out_dir, "output directory (overrides [output] directory)");
    sub->add_option("-j,--threads", threads, "worker threads (overrides PPS_THREADS)")->check(CLI::NonNegativeNumber);
  };

  common(app.add_subcommand("relax", "bath (or CI) ground state"), true);
  common(app.add_subcommand("evolve", "pump, blast and dark evolution with snapshots"), true);
  common(app.add_subcommand("sweep-pump", "pump spectrum over detunings"), true);
  auto* probe = app.add_subcommand("sweep-probe", "probe spectra after a dark time");
  common(probe, true);
  CLI::Option* t_dark_opt = probe->add_option("--t-dark", t_dark, "dark time (overrides [sweep] t_dark)")->check(CLI::NonNegativeNumber);
  common(app.add_subcommand("ramsey", "Ramsey structure factor |S(t)|"), true);
  auto* eth = app.add_subcommand("eth-fit", "effective temperature from the time-averaged impurity");
  common(eth, true);
  eth->add_option("--input", input, "averaged rho1 array file")->check(CLI::ExistingFile);
  eth->add_option("--bath", bath, "averaged bath density array file")->check(CLI::ExistingFile);
  auto* units = app.add_subcommand("units", "SI conversions and 1D validity");
  common(units, false);
  units->add_flag("--check", opt.check, "evaluate the 1D validity conditions");
  auto* classify = app.add_subcommand("classify", "label the peaks of a spectrum");
  common(classify, false);
  classify->add_option("--input", input, "spectrum CSV")->required()->check(CLI::ExistingFile);
  auto* fit = app.add_subcommand("fit", "fit the rectangular-pulse lineshape to a spectrum");
  common(fit, false);
  fit->add_option("--input", input, "spectrum CSV")->required()->check(CLI::ExistingFile);
  CLI::Option* duration_opt = fit->add_option("--duration", duration, "pulse duration (default: from the file)")->check(CLI::PositiveNumber);
  common(app.add_subcommand("convergence", "CI orbital-number convergence"), true);

  CLI11_PARSE(app, argc, argv);

  CLI::App* sub = app.get_subcommands().front();
  opt.verb = sub->get_name();
  opt.argv.assign(argv, argv + argc);
  if (!out_dir.empty()) opt.output_dir = out_dir;
  if (!input.empty()) opt.input = input;
  if (!bath.empty()) opt.bath = bath;
  if (t_dark_opt->count()) opt.t_dark = t_dark;
  if (duration_opt->count()) opt.duration = duration;

  try {
    pps::RunConfig config;
    if (!config_path.empty()) {
      config = pps::parse_config(config_path);
    } else {
      config = pps::parse_config_text("[system]\nn_bath = 100\nn_imp = 1\ng_bb = 0.5\ng_bi = 0\n", "<defaults>");
    }
    if (threads > 0) config.workers = threads;
    return pps::run_command(config, opt, std::cout);
  } catch (const pps::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
