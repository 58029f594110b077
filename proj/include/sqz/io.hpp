#pragma once

// Configuration files and result serialisation.
//
// Config files are JSON documents with the sections system, bath,
// thermostat, integrator, ensemble and output. Every key is optional and
// defaults to the reference setup; unknown keys are rejected by name.
// Every CSV starts with '#' lines holding the code version, the fully
// resolved config and the seed, so a run can be repeated from its outputs.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "sqz/ensemble.hpp"
#include "sqz/observables.hpp"
#include "sqz/stability.hpp"

#ifndef SQZ_VERSION
#define SQZ_VERSION "0.3.0"
#endif

namespace sqz {

using json = nlohmann::json;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kVersion = SQZ_VERSION;

struct AppConfig {
  RunConfig run;
  std::vector<double> snapshot_times;
  std::string out_dir = "results";
};

inline AppConfig default_config() {
  AppConfig c;
  c.run.n_mc = 10000;
  return c;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace detail {

inline const json& section(const json& doc, const char* name, const std::set<std::string>& keys) {
  static const json empty = json::object();
  if (!doc.contains(name)) return empty;
  const json& s = doc.at(name);
  if (!s.is_object()) throw ConfigError(std::string("config: section '") + name + "' must be an object");
  for (const auto& [k, v] : s.items())
    if (!keys.count(k)) throw ConfigError(std::string("config: unknown key '") + name + "." + k + "'");
  return s;
}

template <class T>
T get_or(const json& s, const char* section_name, const char* key, T fallback) {
  if (!s.contains(key)) return fallback;
  const json& v = s.at(key);
  const std::string where = std::string(section_name) + "." + key;
  if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ConfigError("config: '" + where + "' must be a string");
    return v.get<std::string>();
  } else if constexpr (std::is_same_v<T, double>) {
    if (!v.is_number()) throw ConfigError("config: '" + where + "' must be a number");
    return v.get<double>();
  } else {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
      throw ConfigError("config: '" + where + "' must be a non-negative integer");
    return static_cast<T>(v.get<unsigned long long>());
  }
}

}  // namespace detail

/// Parses a config document; throws ConfigError on unknown keys, wrong types
/// or invalid values.
inline AppConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  static const std::set<std::string> sections{"system", "bath", "thermostat", "integrator", "ensemble", "output"};
  for (const auto& [k, v] : doc.items())
    if (!sections.count(k)) throw ConfigError("config: unknown section '" + k + "'");

  AppConfig c = default_config();
  RunConfig& r = c.run;
  ModelConfig& m = r.model;
  try {
    const json& sys = detail::section(doc, "system",
                                      {"mass", "spring", "coupling_amplitude", "drive_freq", "drive", "carrier_hz"});
    const SystemParams ref = SystemParams::reference();
    const std::string drive = detail::get_or<std::string>(sys, "system", "drive", "sinusoidal");
    if (drive != "sinusoidal" && drive != "static")
      throw ConfigError("config: 'system.drive' must be \"sinusoidal\" or \"static\"");
    m.system = SystemParams(detail::get_or(sys, "system", "mass", ref.mass()),
                            detail::get_or(sys, "system", "spring", ref.spring()),
                            detail::get_or(sys, "system", "coupling_amplitude", ref.coupling_amplitude()),
                            detail::get_or(sys, "system", "drive_freq", ref.drive_freq()),
                            detail::get_or(sys, "system", "carrier_hz", ref.carrier_hz()),
                            drive == "static" ? DriveMode::Static : DriveMode::Sinusoidal);

    const json& bath =
        detail::section(doc, "bath", {"kind", "kondo", "cutoff", "size", "temperature", "sampling"});
    m.bath = parse_bath_kind(detail::get_or<std::string>(bath, "bath", "kind", to_string(m.bath)));
    m.kondo = detail::get_or(bath, "bath", "kondo", m.kondo);
    m.cutoff = detail::get_or(bath, "bath", "cutoff", m.cutoff);
    m.bath_size = detail::get_or<std::size_t>(bath, "bath", "size", m.bath_size);
    m.temperature = detail::get_or(bath, "bath", "temperature", m.temperature);
    const std::string sampling = detail::get_or<std::string>(bath, "bath", "sampling", to_string(m.sampling));
    if (sampling == "quantum")
      m.sampling = SamplingMode::QuantumWigner;
    else if (sampling == "classical")
      m.sampling = SamplingMode::ClassicalCanonical;
    else
      throw ConfigError("config: 'bath.sampling' must be \"quantum\" or \"classical\"");

    const json& th =
        detail::section(doc, "thermostat", {"mass_eta1", "mass_eta2", "dof", "eta1", "eta2", "p_eta1", "p_eta2"});
    m.mass_eta1 = detail::get_or(th, "thermostat", "mass_eta1", m.mass_eta1);
    m.mass_eta2 = detail::get_or(th, "thermostat", "mass_eta2", m.mass_eta2);
    m.dof = detail::get_or<int>(th, "thermostat", "dof", m.dof);
    m.chain.eta1 = detail::get_or(th, "thermostat", "eta1", m.chain.eta1);
    m.chain.eta2 = detail::get_or(th, "thermostat", "eta2", m.chain.eta2);
    m.chain.p_eta1 = detail::get_or(th, "thermostat", "p_eta1", m.chain.p_eta1);
    m.chain.p_eta2 = detail::get_or(th, "thermostat", "p_eta2", m.chain.p_eta2);
    if (!(m.mass_eta1 > 0.0) || !(m.mass_eta2 > 0.0)) throw ConfigError("config: thermostat masses must be > 0");

    const json& integ = detail::section(doc, "integrator", {"dt", "n_steps", "n_yoshida", "n_mts", "stride"});
    IntegratorConfig& ic = r.integrator;
    ic.dt = detail::get_or(integ, "integrator", "dt", ic.dt);
    ic.n_steps = detail::get_or<std::size_t>(integ, "integrator", "n_steps", ic.n_steps);
    ic.n_yoshida = detail::get_or<int>(integ, "integrator", "n_yoshida", ic.n_yoshida);
    ic.n_mts = detail::get_or<int>(integ, "integrator", "n_mts", ic.n_mts);
    ic.stride = detail::get_or<std::size_t>(integ, "integrator", "stride", ic.stride);

    const json& ens =
        detail::section(doc, "ensemble", {"n_mc", "seed", "threads", "max_failure_fraction", "snapshot_times"});
    r.n_mc = detail::get_or<std::size_t>(ens, "ensemble", "n_mc", r.n_mc);
    r.seed = detail::get_or<std::uint64_t>(ens, "ensemble", "seed", r.seed);
    r.threads = detail::get_or<unsigned>(ens, "ensemble", "threads", r.threads);
    r.max_failure_fraction = detail::get_or(ens, "ensemble", "max_failure_fraction", r.max_failure_fraction);
    if (!(r.max_failure_fraction >= 0.0 && r.max_failure_fraction < 1.0))
      throw ConfigError("config: 'ensemble.max_failure_fraction' must be in [0, 1)");
    if (ens.contains("snapshot_times")) {
      const json& st = ens.at("snapshot_times");
      if (!st.is_array()) throw ConfigError("config: 'ensemble.snapshot_times' must be an array of numbers");
      for (const json& v : st) {
        if (!v.is_number()) throw ConfigError("config: 'ensemble.snapshot_times' must be an array of numbers");
        c.snapshot_times.push_back(v.get<double>());
      }
    }

    const json& out = detail::section(doc, "output", {"dir"});
    c.out_dir = detail::get_or<std::string>(out, "output", "dir", c.out_dir);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  // Snapshot times must land on the observation grid.
  r.snapshot_indices.clear();
  const double spacing = r.integrator.dt * static_cast<double>(r.integrator.stride);
  for (double t : c.snapshot_times) {
    const double idx = t / spacing;
    const double nearest = std::round(idx);
    if (t < 0.0 || std::abs(idx - nearest) > 1e-6)
      throw ConfigError("config: snapshot time " + format_double(t) + " is not on the observation grid");
    r.snapshot_indices.push_back(static_cast<std::size_t>(nearest));
  }
  try {
    r.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline AppConfig load_config(const std::filesystem::path& path) { return parse_config(read_json_file(path)); }

/// Fully resolved config, suitable for feeding back into parse_config().
inline json config_to_json(const AppConfig& c) {
  const RunConfig& r = c.run;
  const ModelConfig& m = r.model;
  json j;
  j["system"] = {{"mass", m.system.mass()},
                 {"spring", m.system.spring()},
                 {"coupling_amplitude", m.system.coupling_amplitude()},
                 {"drive_freq", m.system.drive_freq()},
                 {"drive", m.system.drive() == DriveMode::Static ? "static" : "sinusoidal"},
                 {"carrier_hz", m.system.carrier_hz()}};
  j["bath"] = {{"kind", to_string(m.bath)},       {"kondo", m.kondo},
               {"cutoff", m.cutoff},              {"size", m.bath_size},
               {"temperature", m.temperature},    {"sampling", to_string(m.sampling)}};
  j["thermostat"] = {{"mass_eta1", m.mass_eta1}, {"mass_eta2", m.mass_eta2}, {"dof", m.dof},
                     {"eta1", m.chain.eta1},     {"eta2", m.chain.eta2},     {"p_eta1", m.chain.p_eta1},
                     {"p_eta2", m.chain.p_eta2}};
  j["integrator"] = {{"dt", r.integrator.dt},
                     {"n_steps", r.integrator.n_steps},
                     {"n_yoshida", r.integrator.n_yoshida},
                     {"n_mts", r.integrator.n_mts},
                     {"stride", r.integrator.stride}};
  // Thread count and output directory are left out: neither changes results.
  j["ensemble"] = {{"n_mc", r.n_mc},
                   {"seed", r.seed},
                   {"max_failure_fraction", r.max_failure_fraction},
                   {"snapshot_times", c.snapshot_times}};
  return j;
}

inline std::string config_hash(const AppConfig& c) { return hex64(fnv1a64(config_to_json(c).dump())); }

inline std::vector<std::string> provenance_lines(const AppConfig& c, std::uint64_t seed) {
  return {"sqzsim " + std::string(kVersion), "config " + config_to_json(c).dump(), "seed " + std::to_string(seed)};
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

inline void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline void write_header(std::ostream& out, const std::vector<std::string>& header) {
  for (const auto& h : header) out << "# " << h << '\n';
}

}  // namespace detail

inline constexpr const char* kVarianceColumns = "t_prime,var_q1,se_q1,var_q2,se_q2,var_p1,se_p1,var_p2,se_p2,n";

inline void write_variance_csv(const std::filesystem::path& path, const VarianceSeries& s,
                               const std::vector<std::string>& header) {
  auto out = detail::open_out(path);
  detail::write_header(out, header);
  out << kVarianceColumns << '\n';
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << format_double(s.time(i));
    for (Coord c : kAllCoords) out << ',' << format_double(s.variance(i, c)) << ',' << format_double(s.se(i, c));
    out << ',' << s.count(i) << '\n';
  }
  detail::finish(out, path);
}

/// Exact curves in the variance schema: SE columns are zero and n is 0.
/// `var` holds the q~1, q~2, p~1, p~2 curves; an empty curve is written as 0.
inline void write_exact_curve_csv(const std::filesystem::path& path, const std::vector<double>& times,
                                  const std::array<std::vector<double>, 4>& var,
                                  const std::vector<std::string>& header) {
  auto out = detail::open_out(path);
  detail::write_header(out, header);
  out << kVarianceColumns << '\n';
  for (std::size_t i = 0; i < times.size(); ++i) {
    out << format_double(times[i]);
    for (const auto& v : var) out << ',' << format_double(v.empty() ? 0.0 : v.at(i)) << ",0";
    out << ",0\n";
  }
  detail::finish(out, path);
}

/// Dense grid: one line per q bin, bins_p comma-separated counts.
inline void write_histogram(const std::filesystem::path& csv_path, const MarginalHistogram& h,
                            const std::vector<std::string>& header) {
  auto out = detail::open_out(csv_path);
  detail::write_header(out, header);
  for (std::size_t iq = 0; iq < h.bins_q; ++iq) {
    for (std::size_t ip = 0; ip < h.bins_p; ++ip) out << (ip ? "," : "") << h.at(iq, ip);
    out << '\n';
  }
  detail::finish(out, csv_path);

  json side = {{"mode", h.mode},
               {"t_prime", h.time},
               {"rows", "q"},
               {"columns", "p"},
               {"bins_q", h.bins_q},
               {"bins_p", h.bins_p},
               {"q_range", {h.q_min, h.q_max}},
               {"p_range", {h.p_min, h.p_max}},
               {"total", h.total},
               {"clamped", h.clamped},
               {"covariance", {{"qq", h.cov_qq}, {"qp", h.cov_qp}, {"pp", h.cov_pp}}},
               {"eigenvalues", {h.eig_min, h.eig_max}},
               {"ellipticity", h.ellipticity()},
               {"csv", csv_path.filename().string()}};
  std::filesystem::path side_path = csv_path;
  side_path.replace_extension(".json");
  auto js = detail::open_out(side_path);
  js << side.dump(2) << '\n';
  detail::finish(js, side_path);
}

inline void write_stability_csv(const std::filesystem::path& path, const StabilityMap& map,
                                const std::vector<std::string>& header) {
  auto out = detail::open_out(path);
  detail::write_header(out, header);
  out << "x,y,abs_trace,unstable,marginal\n";
  for (const auto& c : map.cells)
    out << format_double(c.x) << ',' << format_double(c.y) << ',' << format_double(c.abs_trace) << ','
        << (c.unstable ? 1 : 0) << ',' << (c.marginal ? 1 : 0) << '\n';
  detail::finish(out, path);
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
  detail::finish(out, path);
}

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json coord_squeeze_json(const CoordSqueeze& s) {
  return {{"threshold", s.threshold},
          {"first_crossing", optional_json(s.first_crossing)},
          {"crossing_significant", s.crossing_significant},
          {"min_variance", s.min_variance},
          {"time_of_min", s.time_of_min},
          {"se_at_min", s.se_at_min},
          {"fraction_below", s.fraction_below},
          {"sustained", s.sustained},
          {"last_excursion", optional_json(s.last_excursion)},
          {"window_mean", s.window_mean},
          {"running_mean_crossing", optional_json(s.running_mean_crossing)}};
}

inline json squeeze_report_json(const SqueezeReport& r) {
  json j = {{"threshold", r.threshold}, {"squeezed", r.squeezed()}};
  for (Coord c : kAllCoords) j["coords"][coord_name(c)] = coord_squeeze_json(r.at(c));
  return j;
}

inline json run_report_json(const AppConfig& c, const RunResult& r) {
  json j = squeeze_report_json(r.report);
  j["config"] = config_to_json(c);
  j["seed"] = c.run.seed;
  j["completed"] = r.completed;
  j["failed"] = r.failures.size();
  for (Coord cc : kAllCoords) {
    j["window"][coord_name(cc)] = {{"mean_variance", r.window_mean(cc)}, {"se", r.window_se(cc)}};
  }
  return j;
}

inline json sweep_json(const AppConfig& c, const SweepResult& s) {
  json rows = json::array();
  for (const auto& r : s.rows) {
    json row = {{"t_prime", r.temperature},
                {"mc_run", r.mc_run},
                {"min_variance_q2", r.min_variance},
                {"time_of_min", r.time_of_min},
                {"se_at_min", r.se_at_min},
                {"window_mean_q2", r.window_mean},
                {"window_se_q2", r.window_se},
                {"significant", r.significant},
                {"oracle_min_q2", r.oracle_min},
                {"oracle_window_mean_q2", r.oracle_window_mean}};
    if (r.mc_run) {
      row["seed"] = r.seed;
      row["report"] = squeeze_report_json(r.report);
    }
    rows.push_back(row);
  }
  json j = {{"criterion", to_string(s.criterion)},
            {"rows", rows},
            {"threshold_defined", s.threshold_defined},
            {"oracle_threshold", optional_json(s.oracle_threshold)},
            {"config", config_to_json(c)}};
  if (s.threshold_defined) {
    j["threshold"] = s.threshold;
    j["threshold_uncertainty"] = s.threshold_uncertainty;
  }
  if (!s.oracle_error.empty()) j["oracle_error"] = s.oracle_error;
  return j;
}

inline json agreement_json(const AgreementReport& a) {
  json j = {{"mass_eta", a.mass_eta}, {"tolerance", a.tolerance}, {"se_factor", a.se_factor}, {"pass", a.pass()}};
  for (Coord c : kAllCoords) {
    const CoordAgreement& ca = a.at(c);
    j["coords"][coord_name(c)] = {{"max_rel_dev", ca.max_rel_dev},
                                  {"time_of_max", ca.time_of_max},
                                  {"violations", ca.violations},
                                  {"first_violation", optional_json(ca.first_violation)},
                                  {"pass", ca.pass}};
  }
  return j;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Run manifest. Everything outside "timing" is a pure function of the
/// command, config and seed.
inline json manifest_json(const std::string& command, const json& config, std::uint64_t seed,
                          const std::vector<std::string>& files, double wall_seconds) {
  return {{"command", command},
          {"version", kVersion},
          {"config_hash", hex64(fnv1a64(config.dump()))},
          {"seed", seed},
          {"config", config},
          {"files", files},
          {"timing", {{"wall_seconds", wall_seconds}, {"finished_utc", utc_timestamp()}}}};
}

/// Reads the column header and data rows of one of our CSV files.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  CsvTable t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    if (!have_header) {
      while (std::getline(ss, cell, ',')) t.columns.push_back(cell);
      have_header = true;
      continue;
    }
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline const char* kVariancePlotScript = R"(import sys
import pandas as pd
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

for path in sys.argv[1:] or ["@CSV@"]:
    df = pd.read_csv(path, comment="#")
    fig, ax = plt.subplots(figsize=(7, 4))
    for col, label in (("var_q1", "q1"), ("var_q2", "q2"), ("var_p1", "p1"), ("var_p2", "p2")):
        ax.plot(df["t_prime"], df[col], label=label, lw=0.8)
    ax.axhline(0.5, color="k", ls="--", lw=0.8)
    ax.set_xlabel("t'")
    ax.set_ylabel("variance")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
)";

inline const char* kStabilityPlotScript = R"(import sys
import numpy as np
import pandas as pd
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "@CSV@"
df = pd.read_csv(path, comment="#")
xs = np.unique(df["x"])
ys = np.unique(df["y"])
grid = df["unstable"].to_numpy().reshape(len(ys), len(xs))
fig, ax = plt.subplots(figsize=(5, 5))
ax.pcolormesh(xs, ys, grid, cmap="Greys", shading="auto")
ax.set_xlabel("(w/wd)^2")
ax.set_ylabel("(w0/wd)^2")
fig.tight_layout()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
)";

inline const char* kHistogramPlotScript = R"(import json
import sys
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "@CSV@"
meta = json.load(open(path.rsplit(".", 1)[0] + ".json"))
counts = np.loadtxt(path, delimiter=",", comments="#")
fig, ax = plt.subplots(figsize=(5, 5))
ax.imshow(counts, origin="lower", aspect="auto",
          extent=[*meta["p_range"], *meta["q_range"]])
ax.set_xlabel("p%d" % meta["mode"])
ax.set_ylabel("q%d" % meta["mode"])
fig.tight_layout()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
)";

/// Writes one plotting script per CSV found in `dir`. Throws IoError when
/// the directory holds no CSV files.
inline std::vector<std::string> emit_plot_scripts(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
  std::vector<std::filesystem::path> csvs;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") csvs.push_back(e.path());
  std::sort(csvs.begin(), csvs.end());
  if (csvs.empty()) throw IoError("no CSV files in '" + dir.string() + "'");

  std::vector<std::string> written;
  for (const auto& csv : csvs) {
    std::ifstream in(csv);
    std::string line;
    while (std::getline(in, line) && !line.empty() && line[0] == '#') {
    }
    const char* tmpl = nullptr;
    std::filesystem::path json_side = csv;
    json_side.replace_extension(".json");
    if (line.rfind("t_prime,", 0) == 0)
      tmpl = kVariancePlotScript;
    else if (line.rfind("x,y,abs_trace", 0) == 0)
      tmpl = kStabilityPlotScript;
    else if (std::filesystem::exists(json_side))
      tmpl = kHistogramPlotScript;
    if (tmpl == nullptr) continue;
    std::string script = tmpl;
    const std::string name = csv.filename().string();
    for (std::size_t pos; (pos = script.find("@CSV@")) != std::string::npos;) script.replace(pos, 5, name);
    std::filesystem::path out = csv;
    out.replace_extension(".py");
    out = out.parent_path() / ("plot_" + out.filename().string());
    auto f = detail::open_out(out);
    f << script;
    detail::finish(f, out);
    written.push_back(out.filename().string());
  }
  if (written.empty()) throw IoError("no plottable CSV files in '" + dir.string() + "'");
  return written;
}

namespace detail {

inline std::vector<double> split_numbers(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ':')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != cell.size()) throw ConfigError(std::string(what) + ": '" + text + "' is not a number list");
    out.push_back(v);
  }
  return out;
}

}  // namespace detail

/// "lo:hi" or "lo:hi:step" (default step 0.01). Grid points are rounded to
/// 1e-9 so that e.g. 0.95 + 7 * 0.01 prints as 1.02.
inline std::vector<double> parse_temperature_grid(const std::string& text) {
  const std::vector<double> v = detail::split_numbers(text, "grid");
  if (v.size() < 2 || v.size() > 3) throw ConfigError("grid: expected lo:hi or lo:hi:step, got '" + text + "'");
  const double lo = v[0], hi = v[1], step = v.size() == 3 ? v[2] : 0.01;
  if (!(lo > 0.0) || !(hi >= lo)) throw ConfigError("grid: need 0 < lo <= hi");
  if (!(step > 0.0)) throw ConfigError("grid: step must be > 0");
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::round((lo + static_cast<double>(i) * step) * 1e9) / 1e9);
  return out;
}

/// "xmin:xmax:ymin:ymax" with optional ":nx" and ":ny" (ny defaults to nx).
inline StabilityWindow parse_window(const std::string& text) {
  const std::vector<double> v = detail::split_numbers(text, "window");
  if (v.size() < 4 || v.size() > 6)
    throw ConfigError("window: expected xmin:xmax:ymin:ymax[:nx[:ny]], got '" + text + "'");
  StabilityWindow w;
  w.x_min = v[0];
  w.x_max = v[1];
  w.y_min = v[2];
  w.y_max = v[3];
  auto count = [&](double d) {
    if (!(d >= 2.0) || d != std::floor(d) || d > 1e5) throw ConfigError("window: node counts must be integers >= 2");
    return static_cast<std::size_t>(d);
  };
  if (v.size() >= 5) w.nx = w.ny = count(v[4]);
  if (v.size() == 6) w.ny = count(v[5]);
  try {
    w.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("window: ") + e.what());
  }
  return w;
}

}  // namespace sqz
