#pragma once

// Experiment configuration, execution and output (metrics CSV plus a JSON
// metadata sidecar). Used by the command-line tool and the tests.

#include "landing/optimize.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace landing {

inline constexpr const char* kVersion = "0.1.0";

enum class Method { landing_psi_b, landing_psi_br, rgd, rsgd_rolling };

std::string to_string(Method m);
Method parse_method(std::string_view name);

struct ExperimentConfig {
  std::string experiment = "gevp";  // gevp | cca | ica
  Method method = Method::landing_psi_b;
  std::string mode = "auto";  // auto | deterministic | stochastic

  Eigen::Index n = 20;
  Eigen::Index p = 4;
  Eigen::Index samples = 20000;
  Eigen::Index batch = 128;
  double kappa_a = 10.0;
  double kappa_b = 10.0;
  std::string spectrum_a = "equidistant";
  std::string spectrum_b = "exponential";

  double eta = 0.0;    // 0: method default
  double omega = 1.0;
  double epsilon = 0.5;
  std::string schedule = "auto";  // auto | constant | inverse_sqrt

  std::int64_t max_iters = 10000;
  double max_seconds = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  std::int64_t record_every = 1;
  std::int64_t eval_every = 0;
  bool record_merit = false;
  double merit_beta = 0.0;
  bool safeguard = true;
  double field_tol = 1e-10;
  std::string retraction = "polar";

  std::string cca_data = "synthetic";  // synthetic | mnist
  std::string mnist_path;
  Eigen::Index mnist_images = 0;
  double ridge = -1.0;  // negative: default ridge
  Eigen::Index latent = 10;

  std::string out = "run.csv";
  std::string meta;  // empty: <out>.json

  std::string eta_grid = "0.25,0.5,1,2,4,8";
  std::string omega_grid = "1";
  std::string sweep_dir = "sweep";
  int threads = 0;  // 0: hardware concurrency

  void validate() const;
  bool stochastic() const;
  double resolved_eta() const;
  double resolved_omega() const;
  StepSchedule::Kind resolved_schedule() const;
  std::string meta_path() const;
};

/// One configuration key: name, help text, and string conversion both ways.
struct ConfigKey {
  enum class Kind { text, integer, real, flag };
  std::string name;
  std::string help;
  Kind kind;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<ConfigKey>& config_keys();

/// Throws ConfigError for unknown keys or unparsable values.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Flat key=value file; blank lines and lines starting with # are ignored.
void apply_config_file(ExperimentConfig& cfg, const std::string& path);
std::string to_config_text(const ExperimentConfig& cfg);

/// A generated or loaded problem with its exact optimum when available.
struct Instance {
  std::unique_ptr<Problem> problem;
  std::optional<double> oracle_value;
  Eigen::Index p = 0;
  std::string description;
  /// Named scalars reported in the metadata (ridge, generator settings, ...).
  std::vector<std::pair<std::string, double>> info;
};

Instance build_instance(const ExperimentConfig& cfg);

struct Outcome {
  RunResult run;
  std::string metadata_json;
};

/// Runs one configuration on an existing instance. run_seed drives the
/// initial point and the sampler.
Outcome execute_run(const Instance& instance, const ExperimentConfig& cfg, std::uint64_t run_seed);

/// Seed of sweep point `index` (index 0 is used by single runs).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& trace);
void write_text_file(const std::string& path, const std::string& text);

/// Builds the instance, runs it, writes CSV and JSON. Returns the process exit
/// code: 0 on success, 2 for configuration errors, 1 for runtime errors.
int run_experiment(const ExperimentConfig& cfg, std::ostream& log);

struct SweepPoint {
  double eta_mult = 1.0;
  double omega_mult = 1.0;
};

/// Cartesian product of comma-separated multiplier lists. Throws on an empty grid.
std::vector<SweepPoint> parse_grid(const std::string& eta_grid, const std::string& omega_grid);

/// One CSV per point under sweep_dir plus summary.csv. Points run in parallel.
int run_sweep(const ExperimentConfig& cfg, const std::vector<SweepPoint>& grid, std::ostream& log);

}  // namespace landing
