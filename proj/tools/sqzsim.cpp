// sqzsim: command-line front end.
//
// Exit codes: 0 success, 2 configuration error, 3 ensemble abort,
// 4 I/O error, 1 anything else.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "sqz/covariance.hpp"
#include "sqz/ensemble.hpp"
#include "sqz/io.hpp"
#include "sqz/stability.hpp"

namespace fs = std::filesystem;
using namespace sqz;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitAbort = 3;
constexpr int kExitIo = 4;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string out_dir;
};

AppConfig resolve(const Common& c) {
  AppConfig cfg = c.config_path.empty() ? default_config() : load_config(c.config_path);
  if (c.seed) cfg.run.seed = *c.seed;
  cfg.run.threads = c.threads;
  if (!c.out_dir.empty()) cfg.out_dir = c.out_dir;
  return cfg;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string temp_tag(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", t);
  return buf;
}

void print_squeeze(const SqueezeReport& r) {
  const CoordSqueeze& q2 = r.at(Coord::Q2);
  std::printf("q2: first crossing %s, min %.5f at t'=%.2f (SE %.5f), window mean %.5f, sustained %s\n",
              q2.first_crossing ? std::to_string(*q2.first_crossing).c_str() : "none", q2.min_variance,
              q2.time_of_min, q2.se_at_min, q2.window_mean, q2.sustained ? "yes" : "no");
}

int cmd_run(const Common& common) {
  const auto t0 = std::chrono::steady_clock::now();
  const AppConfig cfg = resolve(common);
  const RunResult r = run_ensemble(cfg.run);
  const fs::path dir = cfg.out_dir;
  const auto header = provenance_lines(cfg, cfg.run.seed);
  std::vector<std::string> files{"variance.csv", "report.json"};
  write_variance_csv(dir / "variance.csv", r.series, header);
  write_json(dir / "report.json", run_report_json(cfg, r));
  for (const auto& [idx, snaps] : r.snapshots) {
    for (int mode : {1, 2}) {
      const double t = r.series.time(idx);
      const MarginalHistogram h = marginal_histogram(snaps, mode, t);
      const std::string name = "hist_mode" + std::to_string(mode) + "_t" + temp_tag(t) + ".csv";
      write_histogram(dir / name, h, header);
      files.push_back(name);
    }
  }
  write_json(dir / "manifest.json", manifest_json("run", config_to_json(cfg), cfg.run.seed, files, seconds_since(t0)));
  print_squeeze(r.report);
  std::printf("%zu trajectories, %zu failed; results in %s\n", r.completed, r.failures.size(), dir.c_str());
  return 0;
}

int cmd_sweep(const Common& common, const std::string& grid, bool oracle_only, const std::string& criterion) {
  const auto t0 = std::chrono::steady_clock::now();
  const AppConfig cfg = resolve(common);
  const std::vector<double> temps = parse_temperature_grid(grid);
  SweepOptions opt;
  opt.oracle_only = oracle_only;
  if (criterion == "window_mean")
    opt.criterion = ThresholdCriterion::WindowMean;
  else if (criterion == "minimum")
    opt.criterion = ThresholdCriterion::Minimum;
  else
    throw ConfigError("--criterion must be window_mean or minimum");

  const SweepResult s = temperature_sweep(cfg.run, temps, opt);
  const fs::path dir = cfg.out_dir;
  std::vector<std::string> files{"sweep.json"};
  json j = sweep_json(cfg, s);
  j["grid"] = grid;
  write_json(dir / "sweep.json", j);
  for (const auto& row : s.rows) {
    if (!row.mc_run) continue;
    AppConfig one = cfg;
    one.run.model.temperature = row.temperature;
    one.run.seed = row.seed;
    const std::string name = "variance_T" + temp_tag(row.temperature) + ".csv";
    write_variance_csv(dir / name, row.series, provenance_lines(one, one.run.seed));
    files.push_back(name);
  }
  write_json(dir / "manifest.json",
             manifest_json(oracle_only ? "sweep --oracle-only" : "sweep", config_to_json(cfg), cfg.run.seed, files,
                           seconds_since(t0)));
  for (const auto& row : s.rows)
    std::printf("T'=%.4f  min %.5f  window mean %.5f  oracle min %.5f  oracle mean %.5f  %s\n", row.temperature,
                row.min_variance, row.window_mean, row.oracle_min, row.oracle_window_mean,
                row.significant ? "squeezed" : "-");
  if (s.threshold_defined)
    std::printf("grid threshold %.4f +- %.4f\n", s.threshold, s.threshold_uncertainty);
  else
    std::printf("grid threshold undefined\n");
  if (s.oracle_threshold) std::printf("oracle threshold %.5f\n", *s.oracle_threshold);
  return 0;
}

int cmd_stability(const Common& common, const std::string& window_text, const std::vector<double>& point,
                  std::size_t steps) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!point.empty()) {
    if (point.size() != 2) throw ConfigError("--point takes two values: x y");
    if (point[0] < 0.0 || point[1] < 0.0) throw ConfigError("--point: x and y must be >= 0");
    const StabilityCell c = classify_point(point[0], point[1], steps);
    std::printf("x=%.6g y=%.6g a=%.6g q=%.6g |trace|=%.10g det=%.12g %s%s\n", c.x, c.y, c.x + c.y, 0.5 * c.y,
                c.abs_trace, c.det, c.unstable ? "unstable" : "stable", c.marginal ? " (marginal)" : "");
    return 0;
  }
  const StabilityWindow w = window_text.empty() ? StabilityWindow{} : parse_window(window_text);
  const StabilityMap map = stability_map(w, steps, resolve_threads(common.threads));
  const fs::path dir = common.out_dir.empty() ? fs::path("results") : fs::path(common.out_dir);
  json cfg = {{"window", {w.x_min, w.x_max, w.y_min, w.y_max}},
              {"nodes", {w.nx, w.ny}},
              {"steps_per_period", steps}};
  write_stability_csv(dir / "stability.csv", map,
                      {"sqzsim " + std::string(kVersion), "config " + cfg.dump(), "seed 0"});
  write_json(dir / "manifest.json", manifest_json("stability", cfg, 0, {"stability.csv"}, seconds_since(t0)));
  std::size_t unstable = 0;
  for (const auto& c : map.cells) unstable += c.unstable ? 1 : 0;
  std::printf("%zu of %zu cells unstable; map in %s\n", unstable, map.cells.size(), (dir / "stability.csv").c_str());
  return 0;
}

int cmd_compare(const Common& common, std::vector<double> masses) {
  const auto t0 = std::chrono::steady_clock::now();
  const AppConfig cfg = resolve(common);
  if (masses.empty()) masses.push_back(cfg.run.model.mass_eta1);
  for (double m : masses)
    if (!(m > 0.0)) throw ConfigError("fictitious mass must be > 0");
  const std::vector<AgreementReport> reps = mass_scan(cfg.run, masses);
  json arr = json::array();
  for (const auto& a : reps) {
    arr.push_back(agreement_json(a));
    std::printf("m_eta=%.3f  max rel dev q1 %.4f q2 %.4f p1 %.4f p2 %.4f  %s\n", a.mass_eta,
                a.at(Coord::Q1).max_rel_dev, a.at(Coord::Q2).max_rel_dev, a.at(Coord::P1).max_rel_dev,
                a.at(Coord::P2).max_rel_dev, a.pass() ? "pass" : "fail");
  }
  const fs::path dir = cfg.out_dir;
  write_json(dir / "agreement.json", {{"config", config_to_json(cfg)}, {"masses", masses}, {"reports", arr}});
  write_json(dir / "manifest.json",
             manifest_json("compare-baths", config_to_json(cfg), cfg.run.seed, {"agreement.json"}, seconds_since(t0)));
  return 0;
}

int cmd_oracle(const Common& common, bool full) {
  const auto t0 = std::chrono::steady_clock::now();
  const AppConfig cfg = resolve(common);
  const ModelConfig& m = cfg.run.model;
  const TimeGrid grid = TimeGrid::from(cfg.run.integrator);
  const fs::path dir = cfg.out_dir;
  const auto header = provenance_lines(cfg, cfg.run.seed);
  std::vector<std::string> files;

  const ModeVarianceCurve c1 = mode_variance_exact(m.system, m.temperature, grid, m.sampling, 1);
  const ModeVarianceCurve c2 = mode2_variance_exact(m.system, m.temperature, grid, m.sampling);
  write_exact_curve_csv(dir / "oracle_modes.csv", c2.times(), {c1.var_q, c2.var_q, c1.var_p, c2.var_p}, header);
  files.push_back("oracle_modes.csv");

  if (full) {
    if (m.bath != BathKind::Ohmic) throw ConfigError("--full needs an ohmic bath");
    const CovarianceSeries cs =
        full_covariance_exact(m.system, build_ohmic_bath(m.bath_size, m.kondo, m.cutoff), m.temperature, grid,
                              m.sampling);
    std::array<std::vector<double>, 4> v;
    for (const auto& row : cs.mode_variances)
      for (std::size_t k = 0; k < 4; ++k) v[k].push_back(row[k]);
    write_exact_curve_csv(dir / "oracle_full.csv", c2.times(), v, header);
    files.push_back("oracle_full.csv");
  }

  json thr = json::object();
  ThresholdOptions opt;
  opt.dt = cfg.run.integrator.dt;
  opt.horizon = cfg.run.integrator.dt * static_cast<double>(cfg.run.integrator.n_steps);
  opt.sampling = m.sampling;
  for (ThresholdCriterion crit : {ThresholdCriterion::WindowMean, ThresholdCriterion::Minimum}) {
    opt.criterion = crit;
    try {
      const ThresholdResult r = threshold_temperature(m.system, 0.05, 20.0, opt);
      thr[to_string(crit)] = {{"t_prime", r.temperature},
                              {"kelvin", to_physical_units(r.temperature, Quantity::Temperature,
                                                           m.system.carrier_hz())},
                              {"iterations", r.iterations}};
      std::printf("threshold (%s): T'=%.5f  (%.2f K)\n", to_string(crit), r.temperature,
                  to_physical_units(r.temperature, Quantity::Temperature, m.system.carrier_hz()));
    } catch (const NoBracketError& e) {
      thr[to_string(crit)] = {{"error", e.what()}};
      std::printf("threshold (%s): %s\n", to_string(crit), e.what());
    }
  }
  write_json(dir / "oracle.json", {{"config", config_to_json(cfg)}, {"threshold", thr}});
  files.push_back("oracle.json");
  write_json(dir / "manifest.json", manifest_json("oracle", config_to_json(cfg), cfg.run.seed, files, seconds_since(t0)));
  return 0;
}

int cmd_plot(const std::string& dir) {
  const std::vector<std::string> scripts = emit_plot_scripts(dir);
  for (const auto& s : scripts) std::printf("%s\n", (fs::path(dir) / s).c_str());
  return 0;
}

void add_common(CLI::App* sub, Common& c, bool with_config = true) {
  if (with_config) {
    sub->add_option("--config", c.config_path, "JSON config file (defaults apply when omitted)");
    sub->add_option("--seed", c.seed, "Master seed, overrides the config");
  }
  sub->add_option("--threads", c.threads, "Worker threads (0: all cores)");
  sub->add_option("--out-dir", c.out_dir, "Output directory, overrides the config");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Driven coupled oscillators in a thermal bath: squeezing simulations"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Common common;
  std::string grid = "0.95:1.06:0.01";
  std::string criterion = "window_mean";
  std::string window;
  std::vector<double> point;
  std::vector<double> masses;
  std::size_t steps = 4096;
  bool oracle_only = false;
  bool full = false;
  std::string plot_dir;

  auto* run = app.add_subcommand("run", "Run one Monte Carlo ensemble");
  add_common(run, common);

  auto* sweep = app.add_subcommand("sweep", "Temperature sweep with oracle comparison");
  add_common(sweep, common);
  sweep->add_option("--grid", grid, "Temperatures lo:hi[:step]")->capture_default_str();
  sweep->add_flag("--oracle-only", oracle_only, "Skip Monte Carlo, report exact curves only");
  sweep->add_option("--criterion", criterion, "window_mean or minimum")->capture_default_str();

  auto* stab = app.add_subcommand("stability", "Floquet stability map of the relative mode");
  add_common(stab, common, false);
  stab->add_option("--window", window, "xmin:xmax:ymin:ymax[:nx[:ny]]");
  stab->add_option("--point", point, "Single point x y")->expected(2);
  stab->add_option("--steps", steps, "Substeps per drive period")->capture_default_str();

  auto* cmp = app.add_subcommand("compare-baths", "Ohmic vs chain-thermostat bath agreement");
  add_common(cmp, common);
  cmp->add_option("--mass-eta", masses, "Fictitious masses to scan (default: config value)");

  auto* plot = app.add_subcommand("plot", "Write plotting scripts for the CSVs in a results directory");
  plot->add_option("dir", plot_dir, "Results directory")->required();

  auto* oracle = app.add_subcommand("oracle", "Exact covariance curves and threshold temperature");
  add_common(oracle, common);
  oracle->add_flag("--full", full, "Also propagate the full system + bath covariance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(common);
    if (*sweep) return cmd_sweep(common, grid, oracle_only, criterion);
    if (*stab) return cmd_stability(common, window, point, steps);
    if (*cmp) return cmd_compare(common, masses);
    if (*plot) return cmd_plot(plot_dir);
    if (*oracle) return cmd_oracle(common, full);
  } catch (const IoError& e) {
    std::cerr << "sqzsim: I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "sqzsim: I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const EnsembleAbort& e) {
    std::cerr << "sqzsim: " << e.what() << '\n';
    return kExitAbort;
  } catch (const TrajectoryFailure& e) {
    std::cerr << "sqzsim: " << e.what() << '\n';
    return kExitAbort;
  } catch (const std::invalid_argument& e) {
    std::cerr << "sqzsim: configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "sqzsim: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
