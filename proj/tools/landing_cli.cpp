// Command-line driver: landing_cli {gevp|cca|ica|sweep} [--config FILE] [--<key> VALUE ...]

#include "landing/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>

int main(int argc, char** argv) {
  using namespace landing;

  CLI::App app{"Landing-method experiments on the generalized Stiefel manifold.\n"
               "Writes a metrics CSV (iter,time_s,f_val,h_norm,psi_norm,eta,merit,extra)\n"
               "and a JSON metadata sidecar. Precedence: defaults < --config < MNIST_PATH < flags.",
               "landing_cli"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kVersion);

  std::string config_path;
  bool print_config = false;
  app.add_option("--config", config_path, "flat key=value config file");
  app.add_flag("--print-config", print_config, "print the resolved config and exit");

  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  const ExperimentConfig defaults;
  for (const auto& key : config_keys()) {
    auto* opt = app.add_option("--" + key.name, values[key.name], key.help);
    opt->default_str(key.get(defaults));
    options[key.name] = opt;
  }

  auto* gevp = app.add_subcommand("gevp", "top-p generalized eigenvalue problem");
  auto* cca = app.add_subcommand("cca", "canonical correlation analysis (synthetic or split MNIST)");
  auto* ica = app.add_subcommand("ica", "independent component analysis on Laplace sources");
  auto* sweep = app.add_subcommand("sweep", "grid over eta and omega multipliers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  ExperimentConfig cfg;
  try {
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    if (const char* env = std::getenv("MNIST_PATH"); env != nullptr && *env != '\0')
      cfg.mnist_path = env;
    for (const auto& [name, opt] : options)
      if (opt->count() > 0) set_config_value(cfg, name, values[name]);
    if (gevp->parsed()) cfg.experiment = "gevp";
    if (cca->parsed()) cfg.experiment = "cca";
    if (ica->parsed()) cfg.experiment = "ica";
    if (print_config) {
      std::cout << to_config_text(cfg);
      return 0;
    }
    if (sweep->parsed()) return run_sweep(cfg, parse_grid(cfg.eta_grid, cfg.omega_grid), std::cerr);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  return run_experiment(cfg, std::cerr);
}
