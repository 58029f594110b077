#pragma once

// Monte Carlo ensembles over thermal initial conditions.
//
// Trajectories are grouped into fixed chunks of kChunkSize consecutive
// indices. Workers pull chunks from a shared counter; finished chunks are
// merged strictly in index order, so results do not depend on the thread
// count or on scheduling.

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "sqz/bath.hpp"
#include "sqz/covariance.hpp"
#include "sqz/integrator.hpp"
#include "sqz/model.hpp"
#include "sqz/observables.hpp"
#include "sqz/sampling.hpp"

namespace sqz {

enum class BathKind { Isolated, Ohmic, NHC };

inline const char* to_string(BathKind k) {
  switch (k) {
    case BathKind::Isolated: return "isolated";
    case BathKind::Ohmic: return "ohmic";
    case BathKind::NHC: return "nhc";
  }
  return "?";
}

inline BathKind parse_bath_kind(std::string_view s) {
  if (s == "isolated") return BathKind::Isolated;
  if (s == "ohmic") return BathKind::Ohmic;
  if (s == "nhc") return BathKind::NHC;
  throw std::invalid_argument("unknown bath kind '" + std::string(s) + "' (expected isolated, ohmic or nhc)");
}

struct ModelConfig {
  SystemParams system = SystemParams::reference();
  double temperature = 1.0;
  SamplingMode sampling = SamplingMode::QuantumWigner;
  BathKind bath = BathKind::Ohmic;
  double kondo = 0.007;
  double cutoff = 3.0;
  std::size_t bath_size = 200;
  double mass_eta1 = 1.0;
  double mass_eta2 = 1.0;
  int dof = 1;
  ChainStart chain;

  void validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature))
      throw std::invalid_argument("model: temperature must be > 0");
    build_model();
  }

  Model build_model() const {
    switch (bath) {
      case BathKind::Isolated: return {system, IsolatedBath{}};
      case BathKind::Ohmic: return {system, build_ohmic_bath(bath_size, kondo, cutoff)};
      case BathKind::NHC: return {system, nhc_bath_from_ohmic(kondo, cutoff, temperature, mass_eta1, mass_eta2, dof)};
    }
    throw std::invalid_argument("model: unknown bath kind");
  }
};

struct RunConfig {
  ModelConfig model;
  IntegratorConfig integrator;
  std::size_t n_mc = 10000;
  std::uint64_t seed = 20240611;
  unsigned threads = 0;  // 0: hardware concurrency
  /// Observation-grid indices at which every trajectory's normal-mode
  /// coordinates are kept (for phase-space histograms).
  std::vector<std::size_t> snapshot_indices;
  /// Fraction of failed trajectories tolerated before aborting.
  double max_failure_fraction = 1e-3;

  void validate() const {
    if (n_mc < 2) throw std::invalid_argument("ensemble: N_MC must be >= 2");
    model.validate();
    integrator.validate();
    for (std::size_t i : snapshot_indices)
      if (i >= integrator.n_observations())
        throw std::invalid_argument("ensemble: snapshot index " + std::to_string(i) + " is beyond the time grid");
  }
  double observation_spacing() const { return integrator.dt * static_cast<double>(integrator.stride); }
};

class EnsembleAbort : public std::runtime_error {
 public:
  EnsembleAbort(const std::string& what, std::size_t failures) : std::runtime_error(what), failures_(failures) {}
  std::size_t failures() const { return failures_; }

 private:
  std::size_t failures_;
};

struct FailureRecord {
  std::size_t trajectory = 0;
  std::size_t step = 0;
  std::string message;
};

struct RunResult {
  VarianceSeries series;
  SqueezeReport report;
  /// Per-trajectory time average of y_c^2 over the observation grid.
  std::array<RunningMoments, 4> window_second_moment;
  std::map<std::size_t, std::vector<NormalModePhase>> snapshots;
  std::vector<FailureRecord> failures;
  std::size_t completed = 0;
  double wall_seconds = 0.0;

  /// Window-averaged variance and its standard error, for the squeezing
  /// significance test on the time average.
  double window_mean(Coord c) const { return report.at(c).window_mean; }
  double window_se(Coord c) const { return window_second_moment[static_cast<std::size_t>(c)].mean_se(); }
};

inline constexpr std::size_t kChunkSize = 64;

namespace detail {

struct ChunkResult {
  VarianceSeries series;
  std::array<RunningMoments, 4> window;
  std::map<std::size_t, std::vector<NormalModePhase>> snapshots;
  std::vector<FailureRecord> failures;
  std::size_t completed = 0;
};

inline TrajectoryState initial_state(const ModelConfig& mc, const Model& model, std::uint64_t seed, std::size_t index) {
  StreamRng rng(seed, index);
  TrajectoryState s;
  s.t = 0.0;
  s.system = sample_system(rng, mc.system, mc.temperature, mc.sampling);
  if (const auto* o = std::get_if<OhmicBath>(&model.bath))
    s.bath = sample_ohmic_bath(rng, *o, mc.temperature, mc.sampling);
  else if (const auto* n = std::get_if<NHCBathParams>(&model.bath))
    s.bath = init_nhc_bath(rng, *n, mc.temperature, mc.sampling, mc.chain);
  return s;
}

inline ChunkResult run_chunk(const RunConfig& cfg, const Model& model, std::size_t first, std::size_t last,
                             std::vector<NormalModePhase>& buffer) {
  const std::size_t n_obs = cfg.integrator.n_observations();
  ChunkResult out;
  out.series = VarianceSeries(n_obs, cfg.observation_spacing());
  buffer.resize(n_obs);
  for (std::size_t idx = first; idx < last; ++idx) {
    try {
      const TrajectoryState s0 = initial_state(cfg.model, model, cfg.seed, idx);
      integrate(s0, model, cfg.integrator, [&](std::size_t step, const TrajectoryState& s) {
        buffer[step / cfg.integrator.stride] = to_normal_modes(s.system);
      });
    } catch (const TrajectoryFailure& e) {
      out.failures.push_back({idx, e.step(), e.what()});
      continue;
    }
    std::array<double, 4> sq{};
    for (std::size_t i = 0; i < n_obs; ++i) {
      const NormalModePhase& y = buffer[i];
      out.series.add(i, y);
      sq[0] += y.q1 * y.q1;
      sq[1] += y.q2 * y.q2;
      sq[2] += y.p1 * y.p1;
      sq[3] += y.p2 * y.p2;
    }
    for (std::size_t k = 0; k < 4; ++k) out.window[k].add(sq[k] / static_cast<double>(n_obs));
    for (std::size_t i : cfg.snapshot_indices) out.snapshots[i].push_back(buffer[i]);
    ++out.completed;
  }
  return out;
}

}  // namespace detail

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Samples, integrates and aggregates cfg.n_mc trajectories. Trajectory k
/// always uses stream (seed, k), so smaller ensembles are prefixes of larger
/// ones.
inline RunResult run_ensemble(const RunConfig& cfg) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();
  const Model model = cfg.model.build_model();
  const std::size_t n_chunks = (cfg.n_mc + kChunkSize - 1) / kChunkSize;
  const std::size_t max_failures =
      static_cast<std::size_t>(std::floor(cfg.max_failure_fraction * static_cast<double>(cfg.n_mc)));

  RunResult result;
  result.series = VarianceSeries(cfg.integrator.n_observations(), cfg.observation_spacing());
  std::vector<std::optional<detail::ChunkResult>> pending(n_chunks);
  std::size_t next_merge = 0;
  std::atomic<std::size_t> next_chunk{0};
  std::atomic<std::size_t> failures{0};
  std::atomic<bool> abort{false};
  std::mutex merge_mutex;
  std::exception_ptr worker_error;

  auto merge_ready = [&] {
    while (next_merge < n_chunks && pending[next_merge]) {
      detail::ChunkResult& c = *pending[next_merge];
      result.series.merge(c.series);
      for (std::size_t k = 0; k < 4; ++k) result.window_second_moment[k].merge(c.window[k]);
      for (auto& [i, v] : c.snapshots) {
        auto& dst = result.snapshots[i];
        dst.insert(dst.end(), v.begin(), v.end());
      }
      result.failures.insert(result.failures.end(), c.failures.begin(), c.failures.end());
      result.completed += c.completed;
      pending[next_merge].reset();
      ++next_merge;
    }
  };

  auto worker = [&] {
    std::vector<NormalModePhase> buffer;
    try {
      for (;;) {
        if (abort.load()) return;
        const std::size_t chunk = next_chunk.fetch_add(1);
        if (chunk >= n_chunks) return;
        const std::size_t first = chunk * kChunkSize;
        const std::size_t last = std::min(cfg.n_mc, first + kChunkSize);
        detail::ChunkResult r = detail::run_chunk(cfg, model, first, last, buffer);
        if (failures.fetch_add(r.failures.size()) + r.failures.size() > max_failures) abort.store(true);
        std::lock_guard lock(merge_mutex);
        pending[chunk] = std::move(r);
        merge_ready();
      }
    } catch (...) {
      std::lock_guard lock(merge_mutex);
      if (!worker_error) worker_error = std::current_exception();
      abort.store(true);
    }
  };

  const unsigned threads = std::min<unsigned>(resolve_threads(cfg.threads), static_cast<unsigned>(n_chunks));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (worker_error) std::rethrow_exception(worker_error);

  const std::size_t n_failed = failures.load();
  if (n_failed > max_failures) {
    std::ostringstream msg;
    msg << "ensemble aborted: " << n_failed << " of " << cfg.n_mc << " trajectories failed (limit " << max_failures
        << ")";
    std::lock_guard lock(merge_mutex);
    merge_ready();
    if (!result.failures.empty())
      msg << "; first failure: trajectory " << result.failures.front().trajectory << ": "
          << result.failures.front().message;
    throw EnsembleAbort(msg.str(), n_failed);
  }
  if (result.completed < 2) throw EnsembleAbort("ensemble: fewer than two trajectories completed", n_failed);
  result.report = squeeze_report(result.series, 0.5);
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

/// Master seed used for one temperature of a sweep. Depends only on the
/// base seed and the temperature value, not on its position in the list.
inline std::uint64_t temperature_seed(std::uint64_t master, double temperature) {
  return derive_stream_seed(master, std::bit_cast<std::uint64_t>(temperature));
}

struct SweepRow {
  double temperature = 0.0;
  std::uint64_t seed = 0;
  SqueezeReport report;
  double min_variance = 0.0;  // q~2
  double time_of_min = 0.0;
  double se_at_min = 0.0;
  double window_mean = 0.0;
  double window_se = 0.0;
  bool significant = false;  // squeezing established under the sweep criterion
  bool mc_run = false;
  double oracle_min = 0.0;
  double oracle_window_mean = 0.0;
  VarianceSeries series;  // empty unless mc_run
};

struct SweepOptions {
  ThresholdCriterion criterion = ThresholdCriterion::WindowMean;
  bool oracle_only = false;
  double threshold = 0.5;
  double oracle_lo = 0.05;
  double oracle_hi = 20.0;
};

struct SweepResult {
  ThresholdCriterion criterion = ThresholdCriterion::WindowMean;
  std::vector<SweepRow> rows;
  bool threshold_defined = false;
  double threshold = 0.0;              // midpoint of the bracketing grid pair
  double threshold_uncertainty = 0.0;  // half the bracketing gap
  std::optional<double> oracle_threshold;
  std::string oracle_error;
};

inline void validate_temperatures(const std::vector<double>& temps) {
  if (temps.empty()) throw std::invalid_argument("sweep: temperature list is empty");
  for (std::size_t i = 0; i < temps.size(); ++i) {
    if (!(temps[i] > 0.0) || !std::isfinite(temps[i])) throw std::invalid_argument("sweep: temperatures must be > 0");
    if (i > 0 && !(temps[i] > temps[i - 1]))
      throw std::invalid_argument("sweep: temperatures must be strictly increasing");
  }
}

/// One ensemble per temperature (unless oracle_only). The MC threshold is
/// bracketed by the highest temperature with significant squeezing and the
/// lowest one without; the oracle threshold comes from bisection.
inline SweepResult temperature_sweep(const RunConfig& base, const std::vector<double>& temps,
                                     const SweepOptions& opt = {}) {
  validate_temperatures(temps);
  SweepResult out;
  out.criterion = opt.criterion;
  const TimeGrid grid{base.integrator.dt, base.integrator.n_steps, base.integrator.stride};
  const FundamentalSolution fs = fundamental_solution(base.model.system, grid, 2);
  const double omega2 = normal_mode_freqs(0.0, base.model.system).omega2;

  for (double T : temps) {
    SweepRow row;
    row.temperature = T;
    const ModeVarianceCurve oc =
        mode_variance_from(fs, thermal_widths(base.model.system.mass(), omega2, T, base.model.sampling));
    row.oracle_min = *std::min_element(oc.var_q.begin(), oc.var_q.end());
    double acc = 0.0;
    for (double v : oc.var_q) acc += v;
    row.oracle_window_mean = acc / static_cast<double>(oc.var_q.size());

    if (!opt.oracle_only) {
      RunConfig cfg = base;
      cfg.model.temperature = T;
      cfg.seed = temperature_seed(base.seed, T);
      row.seed = cfg.seed;
      const RunResult r = run_ensemble(cfg);
      row.mc_run = true;
      row.report = r.report;
      row.series = r.series;
      const CoordSqueeze& q2 = r.report.at(Coord::Q2);
      row.min_variance = q2.min_variance;
      row.time_of_min = q2.time_of_min;
      row.se_at_min = q2.se_at_min;
      row.window_mean = r.window_mean(Coord::Q2);
      row.window_se = r.window_se(Coord::Q2);
      row.significant = opt.criterion == ThresholdCriterion::WindowMean
                            ? row.window_mean < opt.threshold - 2.0 * row.window_se
                            : row.min_variance < opt.threshold - 2.0 * row.se_at_min;
    } else {
      row.min_variance = row.oracle_min;
      row.window_mean = row.oracle_window_mean;
      row.significant = (opt.criterion == ThresholdCriterion::WindowMean ? row.oracle_window_mean : row.oracle_min) <
                        opt.threshold;
    }
    out.rows.push_back(row);
  }

  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    if (out.rows[i - 1].significant && !out.rows[i].significant) {
      out.threshold_defined = true;
      out.threshold = 0.5 * (out.rows[i - 1].temperature + out.rows[i].temperature);
      out.threshold_uncertainty = 0.5 * (out.rows[i].temperature - out.rows[i - 1].temperature);
      break;
    }
  }

  try {
    ThresholdOptions to;
    to.criterion = opt.criterion;
    to.dt = base.integrator.dt;
    to.horizon = base.integrator.dt * static_cast<double>(base.integrator.n_steps);
    to.sampling = base.model.sampling;
    to.threshold = opt.threshold;
    out.oracle_threshold = threshold_temperature(base.model.system, opt.oracle_lo, opt.oracle_hi, to).temperature;
  } catch (const NoBracketError& e) {
    out.oracle_error = e.what();
  }
  return out;
}

/// Per-coordinate agreement of two variance curves on the same grid.
struct CoordAgreement {
  double max_rel_dev = 0.0;  // max_t |var_a - var_b| / var_a
  double time_of_max = 0.0;
  std::size_t violations = 0;  // grid times where |diff| > max(tol * var_a, k * SE_comb)
  std::optional<double> first_violation;
  bool pass = true;
};

struct AgreementReport {
  double tolerance = 0.05;
  double se_factor = 3.0;
  double mass_eta = 1.0;
  std::array<CoordAgreement, 4> coords;
  const CoordAgreement& at(Coord c) const { return coords[static_cast<std::size_t>(c)]; }
  bool pass() const {
    return std::all_of(coords.begin(), coords.end(), [](const CoordAgreement& a) { return a.pass; });
  }
};

inline AgreementReport compare_series(const VarianceSeries& a, const VarianceSeries& b, double tolerance = 0.05,
                                      double se_factor = 3.0) {
  if (a.size() != b.size() || a.spacing() != b.spacing())
    throw std::invalid_argument("compare_series: series are on different grids");
  AgreementReport rep;
  rep.tolerance = tolerance;
  rep.se_factor = se_factor;
  for (Coord c : kAllCoords) {
    CoordAgreement& ca = rep.coords[static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double va = a.variance(i, c), vb = b.variance(i, c);
      const double diff = std::abs(va - vb);
      const double rel = va > 0.0 ? diff / va : (diff > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
      if (rel > ca.max_rel_dev) {
        ca.max_rel_dev = rel;
        ca.time_of_max = a.time(i);
      }
      const double se = std::hypot(a.se(i, c), b.se(i, c));
      if (diff > std::max(tolerance * va, se_factor * se)) {
        ++ca.violations;
        if (!ca.first_violation) ca.first_violation = a.time(i);
      }
    }
    ca.pass = ca.violations == 0;
  }
  return rep;
}

/// Runs the Ohmic configuration and the chain configuration with the same
/// system, temperature, grid and seed, and compares their variance curves.
inline AgreementReport bath_equivalence(const RunConfig& base, double mass_eta, double tolerance = 0.05,
                                        const RunResult* ohmic_run = nullptr) {
  RunConfig ohm = base;
  ohm.model.bath = BathKind::Ohmic;
  RunConfig nhc = base;
  nhc.model.bath = BathKind::NHC;
  nhc.model.mass_eta1 = mass_eta;
  nhc.model.mass_eta2 = mass_eta;
  nhc.validate();
  std::optional<RunResult> own;
  if (ohmic_run == nullptr) {
    own = run_ensemble(ohm);
    ohmic_run = &*own;
  }
  const RunResult r_nhc = run_ensemble(nhc);
  AgreementReport rep = compare_series(ohmic_run->series, r_nhc.series, tolerance);
  rep.mass_eta = mass_eta;
  return rep;
}

/// Fictitious-mass scan sharing one Ohmic reference run.
inline std::vector<AgreementReport> mass_scan(const RunConfig& base, const std::vector<double>& masses,
                                              double tolerance = 0.05) {
  RunConfig ohm = base;
  ohm.model.bath = BathKind::Ohmic;
  const RunResult ref = run_ensemble(ohm);
  std::vector<AgreementReport> out;
  for (double m : masses) out.push_back(bath_equivalence(base, m, tolerance, &ref));
  return out;
}

}  // namespace sqz
