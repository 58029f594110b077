#pragma once

// Exact Gaussian covariance propagation. Every model here is linear in the
// phase-space coordinates and the initial Wigner function is Gaussian with
// zero mean, so the ensemble stays Gaussian and its covariance follows
// Sigma_{n+1} = S_n Sigma_n S_n^T, where S_n is the one-step map of the
// trajectory integrator. The oracles therefore carry the same time
// discretisation as the Monte Carlo runs, and only sampling noise separates
// the two.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sqz/bath.hpp"
#include "sqz/integrator.hpp"
#include "sqz/model.hpp"
#include "sqz/sampling.hpp"

namespace sqz {

/// Uniform grid t_i = i * dt * stride, i = 0 .. n_steps / stride.
struct TimeGrid {
  double dt = 0.01;
  std::size_t n_steps = 25000;
  std::size_t stride = 1;

  std::size_t size() const { return n_steps / stride + 1; }
  double time(std::size_t i) const { return static_cast<double>(i * stride) * dt; }
  static TimeGrid from(const IntegratorConfig& c) { return {c.dt, c.n_steps, c.stride}; }
};

/// Solutions of one normal mode's equation of motion starting from
/// (q, p) = (1, 0) [the "A" solution] and (0, 1) [the "B" solution].
struct FundamentalSolution {
  TimeGrid grid;
  int mode = 2;
  std::vector<double> A, A_p;
  std::vector<double> B, B_p;

  double wronskian(std::size_t i) const { return A[i] * B_p[i] - A_p[i] * B[i]; }
};

/// Integrates mode 1 (constant frequency) or mode 2 (driven) with the same
/// kick-drift-kick map and midpoint drive evaluation as the trajectories.
inline FundamentalSolution fundamental_solution(const SystemParams& sys, const TimeGrid& grid, int mode = 2) {
  if (mode != 1 && mode != 2) throw std::invalid_argument("fundamental_solution: mode must be 1 or 2");
  if (!(grid.dt > 0.0) || grid.stride < 1) throw std::invalid_argument("fundamental_solution: invalid grid");
  FundamentalSolution fs;
  fs.grid = grid;
  fs.mode = mode;
  const std::size_t n_obs = grid.size();
  fs.A.resize(n_obs);
  fs.A_p.resize(n_obs);
  fs.B.resize(n_obs);
  fs.B_p.resize(n_obs);

  const double m = sys.mass();
  const double h = 0.5 * grid.dt;
  double qa = 1.0, pa = 0.0, qb = 0.0, pb = 1.0;
  fs.A[0] = qa;
  fs.A_p[0] = pa;
  fs.B[0] = qb;
  fs.B_p[0] = pb;
  for (std::size_t step = 1; step <= grid.n_steps; ++step) {
    const double t = static_cast<double>(step - 1) * grid.dt;
    const double stiffness =
        mode == 1 ? sys.spring() : sys.spring() + 2.0 * m * coupling_freq_sq(t + h, sys);
    pa -= h * stiffness * qa;
    pb -= h * stiffness * qb;
    qa += grid.dt * pa / m;
    qb += grid.dt * pb / m;
    pa -= h * stiffness * qa;
    pb -= h * stiffness * qb;
    if (step % grid.stride == 0) {
      const std::size_t i = step / grid.stride;
      fs.A[i] = qa;
      fs.A_p[i] = pa;
      fs.B[i] = qb;
      fs.B_p[i] = pb;
    }
  }
  return fs;
}

struct ModeVarianceCurve {
  TimeGrid grid;
  std::vector<double> var_q;
  std::vector<double> var_p;
  std::vector<double> times() const {
    std::vector<double> t(grid.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = grid.time(i);
    return t;
  }
};

/// var_q = A^2 s_q^2 + B^2 s_p^2, var_p = A_p^2 s_q^2 + B_p^2 s_p^2 with the
/// thermal widths of the t = 0 frequency of the mode.
inline ModeVarianceCurve mode_variance_from(const FundamentalSolution& fs, const ThermalWidths& w) {
  ModeVarianceCurve c;
  c.grid = fs.grid;
  c.var_q.resize(fs.A.size());
  c.var_p.resize(fs.A.size());
  for (std::size_t i = 0; i < fs.A.size(); ++i) {
    c.var_q[i] = fs.A[i] * fs.A[i] * w.var_q + fs.B[i] * fs.B[i] * w.var_p;
    c.var_p[i] = fs.A_p[i] * fs.A_p[i] * w.var_q + fs.B_p[i] * fs.B_p[i] * w.var_p;
  }
  return c;
}

inline ModeVarianceCurve mode_variance_exact(const SystemParams& sys, double temperature, const TimeGrid& grid,
                                             SamplingMode sampling, int mode) {
  const ModeFrequencies f0 = normal_mode_freqs(0.0, sys);
  const double w0 = mode == 1 ? f0.omega1 : f0.omega2;
  return mode_variance_from(fundamental_solution(sys, grid, mode), thermal_widths(sys.mass(), w0, temperature, sampling));
}

/// Exact variance curves of the relative mode. The relative mode never
/// couples to either bath, so this holds for all three models.
inline ModeVarianceCurve mode2_variance_exact(const SystemParams& sys, double temperature, const TimeGrid& grid,
                                              SamplingMode sampling = SamplingMode::QuantumWigner) {
  return mode_variance_exact(sys, temperature, grid, sampling, 2);
}

/// How "squeezing occurs in the window" is decided for the threshold search.
///   WindowMean: the time-averaged var(q~2) over the window is below 0.5.
///   Minimum:    var(q~2) dips below 0.5 at any time in the window.
enum class ThresholdCriterion { WindowMean, Minimum };

inline const char* to_string(ThresholdCriterion c) {
  return c == ThresholdCriterion::WindowMean ? "window_mean" : "minimum";
}

class NoBracketError : public std::runtime_error {
 public:
  NoBracketError(double t_lo, double f_lo, double t_hi, double f_hi)
      : std::runtime_error("threshold search: no sign change of f in [" + std::to_string(t_lo) + ", " +
                           std::to_string(t_hi) + "]: f(lo) = " + std::to_string(f_lo) +
                           ", f(hi) = " + std::to_string(f_hi)),
        f_lo(f_lo),
        f_hi(f_hi) {}
  double f_lo;
  double f_hi;
};

struct ThresholdOptions {
  ThresholdCriterion criterion = ThresholdCriterion::WindowMean;
  double tolerance = 1e-3;
  double horizon = 250.0;
  double dt = 0.01;
  double threshold = 0.5;
  SamplingMode sampling = SamplingMode::QuantumWigner;
};

struct ThresholdResult {
  double temperature = 0.0;
  ThresholdCriterion criterion = ThresholdCriterion::WindowMean;
  double f_lo = 0.0;
  double f_hi = 0.0;
  int iterations = 0;
};

/// Evaluates f(T) = statistic of var(q~2) over the window minus threshold,
/// reusing one fundamental solution for every temperature.
class ThresholdFunction {
 public:
  ThresholdFunction(const SystemParams& sys, const ThresholdOptions& opt) : sys_(sys), opt_(opt) {
    if (!(opt.horizon > 0.0) || !(opt.dt > 0.0)) throw std::invalid_argument("threshold: invalid horizon or dt");
    const auto n = static_cast<std::size_t>(std::llround(opt.horizon / opt.dt));
    fs_ = fundamental_solution(sys, {opt.dt, n, 1}, 2);
    omega_ = normal_mode_freqs(0.0, sys).omega2;
  }

  double statistic(double temperature) const {
    const ThermalWidths w = thermal_widths(sys_.mass(), omega_, temperature, opt_.sampling);
    double acc = opt_.criterion == ThresholdCriterion::Minimum ? std::numeric_limits<double>::infinity() : 0.0;
    for (std::size_t i = 0; i < fs_.A.size(); ++i) {
      const double v = fs_.A[i] * fs_.A[i] * w.var_q + fs_.B[i] * fs_.B[i] * w.var_p;
      if (opt_.criterion == ThresholdCriterion::Minimum)
        acc = std::min(acc, v);
      else
        acc += v;
    }
    return opt_.criterion == ThresholdCriterion::Minimum ? acc : acc / static_cast<double>(fs_.A.size());
  }

  double operator()(double temperature) const { return statistic(temperature) - opt_.threshold; }

 private:
  SystemParams sys_;
  ThresholdOptions opt_;
  FundamentalSolution fs_;
  double omega_ = 1.0;
};

/// Bisection for the temperature where f changes sign. f increases with T
/// (both thermal widths do), so squeezing exists below the result.
inline ThresholdResult threshold_temperature(const SystemParams& sys, double t_lo, double t_hi,
                                             const ThresholdOptions& opt = {}) {
  if (!(t_lo > 0.0) || !(t_hi > t_lo)) throw std::invalid_argument("threshold: need 0 < lo < hi");
  if (!(opt.tolerance > 0.0)) throw std::invalid_argument("threshold: tolerance must be > 0");
  const ThresholdFunction f(sys, opt);
  double lo = t_lo, hi = t_hi;
  const double f_lo = f(lo), f_hi = f(hi);
  if (!(f_lo < 0.0 && f_hi > 0.0)) throw NoBracketError(t_lo, f_lo, t_hi, f_hi);
  ThresholdResult r;
  r.criterion = opt.criterion;
  r.f_lo = f_lo;
  r.f_hi = f_hi;
  while (hi - lo > opt.tolerance) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
    ++r.iterations;
  }
  r.temperature = 0.5 * (lo + hi);
  return r;
}

/// Covariance trajectory of the full linear system + Ohmic bath.
/// Coordinate order: q1, q2, p1, p2, R_1..R_N, P_1..P_N.
struct CovarianceSeries {
  TimeGrid grid;
  std::size_t dim = 0;
  /// Normal-mode variances (q~1, q~2, p~1, p~2) at every grid time.
  std::vector<std::array<double, 4>> mode_variances;
  /// Full matrices at the requested grid indices.
  std::vector<std::pair<std::size_t, Eigen::MatrixXd>> snapshots;

  double variance(std::size_t i, std::size_t coord) const { return mode_variances.at(i).at(coord); }
};

inline constexpr std::size_t kMaxOracleBathSize = 512;

inline std::array<double, 4> normal_mode_variances(const Eigen::MatrixXd& s) {
  return {0.5 * (s(0, 0) + s(1, 1) + 2.0 * s(0, 1)), 0.5 * (s(0, 0) + s(1, 1) - 2.0 * s(0, 1)),
          0.5 * (s(2, 2) + s(3, 3) + 2.0 * s(2, 3)), 0.5 * (s(2, 2) + s(3, 3) - 2.0 * s(2, 3))};
}

inline double min_eigenvalue(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Initial thermal covariance in the layout above.
inline Eigen::MatrixXd initial_covariance(const SystemParams& sys, const OhmicBath& bath, double temperature,
                                          SamplingMode sampling) {
  const std::size_t n = bath.size();
  const std::size_t dim = 4 + 2 * n;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  const ModeFrequencies f0 = normal_mode_freqs(0.0, sys);
  const ThermalWidths w1 = thermal_widths(sys.mass(), f0.omega1, temperature, sampling);
  const ThermalWidths w2 = thermal_widths(sys.mass(), f0.omega2, temperature, sampling);
  // q1 = (Q1 + Q2)/sqrt2, q2 = (Q1 - Q2)/sqrt2
  s(0, 0) = s(1, 1) = 0.5 * (w1.var_q + w2.var_q);
  s(0, 1) = s(1, 0) = 0.5 * (w1.var_q - w2.var_q);
  s(2, 2) = s(3, 3) = 0.5 * (w1.var_p + w2.var_p);
  s(2, 3) = s(3, 2) = 0.5 * (w1.var_p - w2.var_p);
  const auto w = bath.freqs();
  for (std::size_t j = 0; j < n; ++j) {
    const ThermalWidths tw = thermal_widths(bath.mass(), w[j], temperature, sampling);
    const auto r = static_cast<Eigen::Index>(4 + j);
    const auto p = static_cast<Eigen::Index>(4 + n + j);
    s(r, r) = tw.var_q;
    s(p, p) = tw.var_p;
  }
  return s;
}

/// Propagates the covariance through the integrator's own step map.
/// `snapshot_indices` are observation-grid indices whose full matrix is kept.
inline CovarianceSeries full_covariance_exact(const SystemParams& sys, const OhmicBath& bath, double temperature,
                                              const TimeGrid& grid,
                                              SamplingMode sampling = SamplingMode::QuantumWigner,
                                              std::span<const std::size_t> snapshot_indices = {}) {
  if (bath.size() > kMaxOracleBathSize)
    throw std::invalid_argument("full_covariance_exact: bath size " + std::to_string(bath.size()) +
                                " exceeds the oracle cap of " + std::to_string(kMaxOracleBathSize));
  if (!(grid.dt > 0.0) || grid.stride < 1) throw std::invalid_argument("full_covariance_exact: invalid grid");
  const std::size_t n = bath.size();
  CovarianceSeries out;
  out.grid = grid;
  out.dim = 4 + 2 * n;
  out.mode_variances.resize(grid.size());

  Eigen::MatrixXd s = initial_covariance(sys, bath, temperature, sampling);
  auto record = [&](std::size_t i) {
    out.mode_variances[i] = normal_mode_variances(s);
    if (std::find(snapshot_indices.begin(), snapshot_indices.end(), i) != snapshot_indices.end())
      out.snapshots.emplace_back(i, s);
  };
  record(0);

  auto apply_step = [&](Eigen::MatrixXd& m, double t) {
    for (Eigen::Index col = 0; col < m.cols(); ++col) {
      double* x = m.col(col).data();
      SystemPhase sp{x[0], x[1], x[2], x[3]};
      detail::ohmic_verlet_step(t, grid.dt, sys, bath, sp, std::span<double>(x + 4, n),
                                std::span<double>(x + 4 + n, n));
      x[0] = sp.q1;
      x[1] = sp.q2;
      x[2] = sp.p1;
      x[3] = sp.p2;
    }
  };

  for (std::size_t step = 1; step <= grid.n_steps; ++step) {
    const double t = static_cast<double>(step - 1) * grid.dt;
    apply_step(s, t);     // S Sigma
    s.transposeInPlace(); // Sigma S^T
    apply_step(s, t);     // S Sigma S^T
    s = 0.5 * (s + s.transpose()).eval();
    if (!s.allFinite()) throw std::runtime_error("full_covariance_exact: non-finite covariance at step " +
                                                 std::to_string(step));
    if (step % grid.stride == 0) record(step / grid.stride);
  }
  return out;
}

}  // namespace sqz
