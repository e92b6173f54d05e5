#include "landing/experiment.hpp"

#include "landing/data.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace landing {

using json = nlohmann::ordered_json;

std::string to_string(Method m) {
  switch (m) {
    case Method::landing_psi_b:
      return "landing_psi_b";
    case Method::landing_psi_br:
      return "landing_psi_br";
    case Method::rgd:
      return "rgd";
    case Method::rsgd_rolling:
      return "rsgd_rolling";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "landing_psi_b") return Method::landing_psi_b;
  if (name == "landing_psi_br") return Method::landing_psi_br;
  if (name == "rgd") return Method::rgd;
  if (name == "rsgd_rolling") return Method::rsgd_rolling;
  throw ConfigError("unknown method: " + std::string(name));
}

namespace {

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("key '" + key + "': not a number: '" + s + "'");
}

long long parse_int(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("key '" + key + "': not an integer: '" + s + "'");
}

bool parse_flag(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("key '" + key + "': not a boolean: '" + s + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
ConfigKey int_key(std::string name, std::string help, T ExperimentConfig::*field) {
  return {name, std::move(help), ConfigKey::Kind::integer,
          [name, field](ExperimentConfig& c, const std::string& v) {
            c.*field = static_cast<T>(parse_int(name, v));
          },
          [field](const ExperimentConfig& c) { return std::to_string(c.*field); }};
}

ConfigKey real_key(std::string name, std::string help, double ExperimentConfig::*field) {
  return {name, std::move(help), ConfigKey::Kind::real,
          [name, field](ExperimentConfig& c, const std::string& v) { c.*field = parse_double(name, v); },
          [field](const ExperimentConfig& c) { return format_double(c.*field); }};
}

ConfigKey text_key(std::string name, std::string help, std::string ExperimentConfig::*field) {
  return {name, std::move(help), ConfigKey::Kind::text,
          [field](ExperimentConfig& c, const std::string& v) { c.*field = v; },
          [field](const ExperimentConfig& c) { return c.*field; }};
}

ConfigKey flag_key(std::string name, std::string help, bool ExperimentConfig::*field) {
  return {name, std::move(help), ConfigKey::Kind::flag,
          [name, field](ExperimentConfig& c, const std::string& v) { c.*field = parse_flag(name, v); },
          [field](const ExperimentConfig& c) { return std::string(c.*field ? "true" : "false"); }};
}

std::vector<ConfigKey> make_keys() {
  using C = ExperimentConfig;
  std::vector<ConfigKey> keys;
  keys.push_back(text_key("experiment", "problem: gevp | cca | ica", &C::experiment));
  keys.push_back({"method", "landing_psi_b | landing_psi_br | rgd | rsgd_rolling",
                  ConfigKey::Kind::text,
                  [](C& c, const std::string& v) { c.method = parse_method(v); },
                  [](const C& c) { return to_string(c.method); }});
  keys.push_back(text_key("mode", "auto | deterministic | stochastic (auto: stochastic for cca/ica)",
                          &C::mode));
  keys.push_back(int_key("n", "dimension (per view for cca)", &C::n));
  keys.push_back(int_key("p", "number of columns (ica uses p = n)", &C::p));
  keys.push_back(int_key("samples", "number of data samples N (cca synthetic, ica)", &C::samples));
  keys.push_back(int_key("batch", "minibatch size r", &C::batch));
  keys.push_back(real_key("kappa_a", "condition number of A (gevp)", &C::kappa_a));
  keys.push_back(real_key("kappa_b", "condition number of B (gevp)", &C::kappa_b));
  keys.push_back(text_key("spectrum_a", "equidistant | exponential", &C::spectrum_a));
  keys.push_back(text_key("spectrum_b", "equidistant | exponential", &C::spectrum_b));
  keys.push_back(real_key("eta", "step size eta0 (0: method default)", &C::eta));
  keys.push_back(real_key("omega", "normal-component weight (0: 1)", &C::omega));
  keys.push_back(real_key("epsilon", "safe-region radius, in (0, 1)", &C::epsilon));
  keys.push_back(text_key("schedule", "auto | constant | inverse_sqrt", &C::schedule));
  keys.push_back(int_key("max_iters", "iteration budget", &C::max_iters));
  keys.push_back(real_key("max_seconds", "wall-clock budget in seconds (inf: none)", &C::max_seconds));
  keys.push_back(int_key("seed", "base random seed", &C::seed));
  keys.push_back(int_key("record_every", "record every k-th iterate (deterministic runs)",
                         &C::record_every));
  keys.push_back(int_key("eval_every", "full-data evaluation cadence of stochastic runs (0: per epoch)",
                         &C::eval_every));
  keys.push_back(flag_key("record_merit", "record the Fletcher merit", &C::record_merit));
  keys.push_back(real_key("merit_beta", "merit penalty (<= 0: select automatically)", &C::merit_beta));
  keys.push_back(flag_key("safeguard", "cap steps at the safeguard (deterministic landing)",
                          &C::safeguard));
  keys.push_back(real_key("field_tol", "stop when the field norm falls below this", &C::field_tol));
  keys.push_back(text_key("retraction", "polar | svd | cholesky_qr (baselines)", &C::retraction));
  keys.push_back(text_key("cca_data", "synthetic | mnist", &C::cca_data));
  keys.push_back(text_key("mnist_path", "IDX image file (env MNIST_PATH overrides the config file)",
                          &C::mnist_path));
  keys.push_back(int_key("mnist_images", "use only the first k images (0: all)", &C::mnist_images));
  keys.push_back(real_key("ridge", "cca ridge added to C11 and C22 (< 0: default)", &C::ridge));
  keys.push_back(int_key("latent", "latent dimension of synthetic cca data", &C::latent));
  keys.push_back(text_key("out", "metrics CSV path", &C::out));
  keys.push_back(text_key("meta", "metadata JSON path (empty: <out>.json)", &C::meta));
  keys.push_back(text_key("eta_grid", "sweep: comma-separated eta multipliers", &C::eta_grid));
  keys.push_back(text_key("omega_grid", "sweep: comma-separated omega multipliers", &C::omega_grid));
  keys.push_back(text_key("sweep_dir", "sweep: output directory", &C::sweep_dir));
  keys.push_back(int_key("threads", "sweep: worker threads (0: hardware)", &C::threads));
  return keys;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = make_keys();
  return keys;
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : config_keys()) {
    if (k.name == key) {
      k.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key: " + key);
}

void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    set_config_value(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

std::string to_config_text(const ExperimentConfig& cfg) {
  std::ostringstream os;
  for (const auto& k : config_keys()) os << k.name << '=' << k.get(cfg) << '\n';
  return os.str();
}

bool ExperimentConfig::stochastic() const {
  if (mode == "deterministic") return false;
  if (mode == "stochastic") return true;
  return experiment != "gevp" || method == Method::rsgd_rolling;
}

double ExperimentConfig::resolved_eta() const {
  if (eta > 0.0) return eta;
  if (experiment == "gevp" && !stochastic() && method == Method::landing_psi_b) return 1.0;
  return 0.1;
}

double ExperimentConfig::resolved_omega() const { return omega > 0.0 ? omega : 1.0; }

StepSchedule::Kind ExperimentConfig::resolved_schedule() const {
  if (schedule == "auto")
    return stochastic() ? StepSchedule::Kind::inverse_sqrt : StepSchedule::Kind::constant;
  return parse_schedule_kind(schedule);
}

std::string ExperimentConfig::meta_path() const { return meta.empty() ? out + ".json" : meta; }

void ExperimentConfig::validate() const {
  if (experiment != "gevp" && experiment != "cca" && experiment != "ica")
    throw ConfigError("experiment must be gevp, cca or ica");
  if (mode != "auto" && mode != "deterministic" && mode != "stochastic")
    throw ConfigError("mode must be auto, deterministic or stochastic");
  if (n < 1 || p < 1) throw ConfigError("n and p must be positive");
  if (experiment != "ica" && p > n) throw ConfigError("p must not exceed n");
  if (batch < 1) throw ConfigError("batch must be positive");
  if (experiment != "gevp" && !(experiment == "cca" && cca_data == "mnist")) {
    if (samples < 2) throw ConfigError("samples must be at least 2");
    if (batch > samples) throw ConfigError("batch must not exceed samples");
    if (experiment == "ica" && samples < n) throw ConfigError("ica needs samples >= n");
  }
  if (!(kappa_a >= 1.0) || !(kappa_b >= 1.0)) throw ConfigError("kappa values must be >= 1");
  parse_spectrum_kind(spectrum_a);
  parse_spectrum_kind(spectrum_b);
  if (eta < 0.0 || omega < 0.0) throw ConfigError("eta and omega must be nonnegative (0: default)");
  if (schedule != "auto") parse_schedule_kind(schedule);
  parse_retraction_kind(retraction);
  if (cca_data != "synthetic" && cca_data != "mnist")
    throw ConfigError("cca_data must be synthetic or mnist");
  if (experiment == "cca" && cca_data == "mnist" && mnist_path.empty())
    throw ConfigError("cca_data=mnist needs mnist_path (or MNIST_PATH)");
  if (mnist_images < 0) throw ConfigError("mnist_images must be nonnegative");
  if (latent < 1) throw ConfigError("latent must be positive");
  if (method == Method::rsgd_rolling && !stochastic())
    throw ConfigError("rsgd_rolling needs mode=stochastic");
  if (threads < 0) throw ConfigError("threads must be nonnegative");
  if (out.empty()) throw ConfigError("out must not be empty");
  RunConfig rc;
  rc.landing.omega = resolved_omega();
  rc.landing.epsilon = epsilon;
  rc.landing.step = {resolved_schedule(), resolved_eta()};
  rc.max_iters = max_iters;
  rc.max_seconds = max_seconds;
  rc.record_every = record_every;
  rc.eval_every = eval_every;
  rc.field_tol = field_tol;
  rc.validate();
}

Instance build_instance(const ExperimentConfig& cfg) {
  cfg.validate();
  Instance inst;
  inst.p = cfg.p;
  if (cfg.experiment == "gevp") {
    const SpectrumSpec sa{parse_spectrum_kind(cfg.spectrum_a), cfg.kappa_a, cfg.n};
    const SpectrumSpec sb{parse_spectrum_kind(cfg.spectrum_b), cfg.kappa_b, cfg.n};
    auto pair = gen_spd_pair(sa, sb, cfg.seed);
    auto prob = std::make_unique<GevpProblem>(std::move(pair.a), std::move(pair.b));
    inst.oracle_value = gevp_oracle(*prob, cfg.p).value;
    inst.description = "gevp n=" + std::to_string(cfg.n) + " p=" + std::to_string(cfg.p);
    inst.info = {{"kappa_a", cfg.kappa_a}, {"kappa_b", cfg.kappa_b}};
    inst.problem = std::move(prob);
  } else if (cfg.experiment == "cca") {
    std::unique_ptr<CcaProblem> prob;
    if (cfg.cca_data == "mnist") {
      const std::optional<double> ridge =
          cfg.ridge >= 0.0 ? std::optional<double>(cfg.ridge) : std::nullopt;
      prob = std::make_unique<CcaProblem>(load_mnist_split(cfg.mnist_path, ridge, cfg.mnist_images));
      inst.description = "split-mnist cca";
      inst.info.push_back({"pixel_scale_max", 1.0});
    } else {
      auto [d1, d2] = gen_cca_synthetic(cfg.n, cfg.n, cfg.samples, cfg.latent, cfg.seed);
      const double ridge = cfg.ridge >= 0.0 ? cfg.ridge : default_cca_ridge(d1, d2);
      prob = std::make_unique<CcaProblem>(std::move(d1), std::move(d2), ridge);
      inst.description = "synthetic cca";
      inst.info.push_back({"latent", static_cast<double>(cfg.latent)});
    }
    inst.info.push_back({"ridge", prob->ridge()});
    inst.info.push_back({"samples", static_cast<double>(prob->samples())});
    inst.oracle_value = cca_oracle(*prob, cfg.p).value;
    inst.problem = std::move(prob);
  } else {
    auto prob = std::make_unique<IcaProblem>(gen_ica_dataset(cfg.n, cfg.samples, cfg.seed));
    inst.p = cfg.n;
    inst.description = "synthetic ica n=" + std::to_string(cfg.n);
    inst.info.push_back({"samples", static_cast<double>(cfg.samples)});
    inst.problem = std::move(prob);
  }
  return inst;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  // splitmix64 finalizer
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

std::unique_ptr<StochasticSampler> make_sampler(const Instance& inst, const ExperimentConfig& cfg,
                                                std::uint64_t seed) {
  const Problem& prob = *inst.problem;
  if (const auto* g = dynamic_cast<const GevpProblem*>(&prob))
    return std::make_unique<GevpStreamSampler>(*g, cfg.batch, seed);
  if (const auto* c = dynamic_cast<const CcaProblem*>(&prob)) {
    if (cfg.batch > c->samples()) throw ConfigError("batch must not exceed the number of samples");
    return std::make_unique<CcaSampler>(*c, cfg.batch, seed);
  }
  if (const auto* i = dynamic_cast<const IcaProblem*>(&prob))
    return std::make_unique<IcaSampler>(*i, cfg.batch, seed);
  throw ConfigError("no sampler for problem " + prob.name());
}

json optional_number(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

json typed_config(const ExperimentConfig& cfg) {
  json out = json::object();
  for (const auto& k : config_keys()) {
    const std::string v = k.get(cfg);
    switch (k.kind) {
      case ConfigKey::Kind::integer:
        out[k.name] = std::stoll(v);
        break;
      case ConfigKey::Kind::real: {
        const double d = parse_double(k.name, v);
        out[k.name] = std::isfinite(d) ? json(d) : json(v);
        break;
      }
      case ConfigKey::Kind::flag:
        out[k.name] = v == "true";
        break;
      case ConfigKey::Kind::text:
        out[k.name] = v;
        break;
    }
  }
  return out;
}

}  // namespace

Outcome execute_run(const Instance& inst, const ExperimentConfig& cfg, std::uint64_t run_seed) {
  cfg.validate();
  const Problem& prob = *inst.problem;
  RunConfig rc;
  rc.landing.omega = cfg.resolved_omega();
  rc.landing.epsilon = cfg.epsilon;
  rc.landing.variant = cfg.method == Method::landing_psi_br ? AscentVariant::psi_b_riemannian
                                                            : AscentVariant::psi_b;
  rc.landing.step = {cfg.resolved_schedule(), cfg.resolved_eta()};
  rc.max_iters = cfg.max_iters;
  rc.max_seconds = cfg.max_seconds;
  rc.seed = run_seed;
  rc.record_merit = cfg.record_merit;
  rc.merit_beta = cfg.merit_beta;
  rc.safeguard_check = cfg.safeguard;
  rc.record_every = cfg.record_every;
  rc.eval_every = cfg.eval_every;
  rc.field_tol = cfg.field_tol;

  Rng rng(run_seed);
  const Iterate x0 = initial_point(prob, inst.p, rng);
  std::unique_ptr<StochasticSampler> sampler;
  if (cfg.stochastic()) sampler = make_sampler(inst, cfg, derive_seed(run_seed, 1));

  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  switch (cfg.method) {
    case Method::landing_psi_b:
    case Method::landing_psi_br:
      out.run = sampler ? run_landing_stochastic(prob, *sampler, x0, rc)
                        : run_landing_deterministic(prob, x0, rc);
      break;
    case Method::rgd:
      out.run = run_riemannian_baseline(prob, BSource::fixed, sampler.get(), x0, rc,
                                        parse_retraction_kind(cfg.retraction));
      break;
    case Method::rsgd_rolling:
      out.run = run_riemannian_baseline(prob, BSource::rolling_average, sampler.get(), x0, rc,
                                        parse_retraction_kind(cfg.retraction));
      break;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json meta;
  meta["version"] = kVersion;
  meta["config"] = typed_config(cfg);
  meta["resolved"] = {{"eta0", rc.landing.step.eta0},
                      {"omega", rc.landing.omega},
                      {"schedule", to_string(rc.landing.step.kind)},
                      {"stochastic", cfg.stochastic()},
                      {"p", inst.p},
                      {"run_seed", run_seed}};
  json instance = {{"description", inst.description}};
  for (const auto& [k, v] : inst.info) instance[k] = v;
  json betas = json::array();
  for (std::size_t b = 0; b < prob.num_blocks(); ++b)
    betas.push_back({{"beta_1", prob.constraint(b).beta_max()},
                     {"beta_n", prob.constraint(b).beta_min()}});
  instance["blocks"] = betas;
  meta["instance"] = instance;

  const auto consts = problem_constants(prob, cfg.epsilon);
  meta["constants"] = {{"c_h", consts.c_h},
                       {"c_h_lower", consts.c_h_lower},
                       {"l_n", consts.l_n},
                       {"epsilon", consts.epsilon},
                       {"rho", problem_rho(prob, rc.landing)}};
  if (cfg.method == Method::landing_psi_b || cfg.method == Method::landing_psi_br) {
    Rng warm(derive_seed(run_seed, 2));
    const double c_psi = estimate_c_psi(prob, inst.p, rc.landing, 16, warm);
    meta["c_psi_estimate"] = c_psi;
    meta["safeguard_lower_bound"] =
        c_psi > 0.0 ? json(safeguard_lower_bound(consts, c_psi, rc.landing.omega)) : json(nullptr);
  }
  meta["merit_beta"] = optional_number(out.run.merit_beta);
  meta["status"] = to_string(out.run.status);
  meta["iterations"] = out.run.iterations;
  meta["violations"] = out.run.violations;
  meta["wall_time_s"] = wall;
  meta["oracle_value"] = optional_number(inst.oracle_value);
  if (!out.run.trace.empty()) {
    const auto& last = out.run.trace.back();
    json fin = {{"iter", last.k},
                {"f_val", last.f_val},
                {"h_norm", last.h_norm},
                {"block_h", last.block_h},
                {"psi_norm", last.psi_norm},
                {"extra", optional_number(last.extra)}};
    if (inst.oracle_value && *inst.oracle_value != 0.0)
      fin["relative_gap"] = std::abs(last.f_val - *inst.oracle_value) / std::abs(*inst.oracle_value);
    meta["final"] = fin;
  }
  meta["csv_columns"] = {"iter", "time_s", "f_val", "h_norm", "psi_norm", "eta", "merit", "extra"};
  out.metadata_json = meta.dump(2) + "\n";
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::filesystem::path fp(path);
  if (fp.has_parent_path()) std::filesystem::create_directories(fp.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os << text;
  if (!os) throw IoError("write failed: " + path);
}

void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& trace) {
  std::ostringstream os;
  os << "iter,time_s,f_val,h_norm,psi_norm,eta,merit,extra\n";
  const auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : ""; };
  for (const auto& r : trace)
    os << r.k << ',' << format_double(r.time_s) << ',' << format_double(r.f_val) << ','
       << format_double(r.h_norm) << ',' << format_double(r.psi_norm) << ','
       << format_double(r.eta) << ',' << opt(r.merit) << ',' << opt(r.extra) << '\n';
  write_text_file(path, os.str());
}

int run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  try {
    const Instance inst = build_instance(cfg);
    try {
      const Outcome o = execute_run(inst, cfg, derive_seed(cfg.seed, 0));
      write_trace_csv(cfg.out, o.run.trace);
      write_text_file(cfg.meta_path(), o.metadata_json);
      const auto& last = o.run.trace.back();
      log << inst.description << " " << to_string(cfg.method) << ": " << to_string(o.run.status)
          << " after " << o.run.iterations << " iterations, f=" << format_double(last.f_val)
          << " h=" << format_double(last.h_norm);
      if (inst.oracle_value) log << " oracle=" << format_double(*inst.oracle_value);
      log << "\n";
      return 0;
    } catch (const SafeRegionEscapeError& e) {
      write_trace_csv(cfg.out, e.trace());
      throw;
    }
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }
}

std::vector<SweepPoint> parse_grid(const std::string& eta_grid, const std::string& omega_grid) {
  const auto parse_list = [](const std::string& name, const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      const double v = parse_double(name, item);
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(name + ": multipliers must be positive");
      out.push_back(v);
    }
    return out;
  };
  const auto etas = parse_list("eta_grid", eta_grid);
  const auto omegas = parse_list("omega_grid", omega_grid);
  std::vector<SweepPoint> grid;
  for (double e : etas)
    for (double w : omegas) grid.push_back({e, w});
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  return grid;
}

int run_sweep(const ExperimentConfig& cfg, const std::vector<SweepPoint>& grid, std::ostream& log) {
  struct Row {
    std::string status = "not_run";
    std::int64_t iterations = 0;
    double final_f = std::nan("");
    double best_f = std::nan("");
    double final_h = std::nan("");
    std::string csv;
    std::string error;
  };
  try {
    if (grid.empty()) throw ConfigError("sweep grid is empty");
    const Instance inst = build_instance(cfg);
    const double base_eta = cfg.resolved_eta();
    const double base_omega = cfg.resolved_omega();
    std::vector<Row> rows(grid.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;

    const auto worker = [&] {
      for (std::size_t i = next++; i < grid.size(); i = next++) {
        ExperimentConfig pc = cfg;
        pc.eta = base_eta * grid[i].eta_mult;
        pc.omega = base_omega * grid[i].omega_mult;
        pc.out = (std::filesystem::path(cfg.sweep_dir) / ("point_" + std::to_string(i) + ".csv")).string();
        pc.meta = pc.out + ".json";
        Row& row = rows[i];
        row.csv = pc.out;
        try {
          const Outcome o = execute_run(inst, pc, derive_seed(cfg.seed, i));
          write_trace_csv(pc.out, o.run.trace);
          write_text_file(pc.meta, o.metadata_json);
          row.status = to_string(o.run.status);
          row.iterations = o.run.iterations;
          row.final_f = o.run.trace.back().f_val;
          row.final_h = o.run.trace.back().h_norm;
          row.best_f = row.final_f;
          for (const auto& r : o.run.trace)
            if (std::isfinite(r.f_val) && !(r.f_val >= row.best_f)) row.best_f = r.f_val;
        } catch (const SafeRegionEscapeError& e) {
          write_trace_csv(pc.out, e.trace());
          row.status = "failed";
          row.error = e.what();
        } catch (const std::exception& e) {
          row.status = "failed";
          row.error = e.what();
        }
        std::lock_guard<std::mutex> lock(log_mutex);
        log << "point " << i << " (eta x" << format_double(grid[i].eta_mult) << ", omega x"
            << format_double(grid[i].omega_mult) << "): " << row.status << "\n";
      }
    };

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t n_threads =
        std::min<std::size_t>(grid.size(), cfg.threads > 0 ? static_cast<std::size_t>(cfg.threads) : hw);
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::ostringstream os;
    os << "point,eta_mult,omega_mult,eta,omega,status,iterations,final_f,best_f,final_h_norm,csv,error\n";
    bool all_ok = true;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Row& r = rows[i];
      all_ok = all_ok && r.status != "failed";
      std::string err = r.error;
      for (char& c : err)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
      os << i << ',' << format_double(grid[i].eta_mult) << ',' << format_double(grid[i].omega_mult)
         << ',' << format_double(base_eta * grid[i].eta_mult) << ','
         << format_double(base_omega * grid[i].omega_mult) << ',' << r.status << ','
         << r.iterations << ',' << format_double(r.final_f) << ',' << format_double(r.best_f) << ','
         << format_double(r.final_h) << ',' << r.csv << ',' << err << '\n';
    }
    write_text_file((std::filesystem::path(cfg.sweep_dir) / "summary.csv").string(), os.str());
    return all_ok ? 0 : 1;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace landing
