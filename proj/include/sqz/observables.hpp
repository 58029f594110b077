#pragma once

// Ensemble statistics of the normal-mode coordinates.
//
// Variances use the population convention (divide by n). Standard errors
// assume Gaussian statistics: SE(var) = var * sqrt(2 / (n - 1)).

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sqz/model.hpp"

namespace sqz {

/// Welford accumulator with Chan et al. pairwise merge.
struct RunningMoments {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }

  void merge(const RunningMoments& other) {
    if (other.count == 0) return;
    if (count == 0) {
      *this = other;
      return;
    }
    const double na = static_cast<double>(count);
    const double nb = static_cast<double>(other.count);
    const double n = na + nb;
    const double delta = other.mean - mean;
    mean += delta * nb / n;
    m2 += other.m2 + delta * delta * na * nb / n;
    count += other.count;
  }

  double variance() const { return count > 0 ? m2 / static_cast<double>(count) : 0.0; }
  double sample_variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
  /// Standard error of the mean.
  double mean_se() const { return count > 1 ? std::sqrt(sample_variance() / static_cast<double>(count)) : 0.0; }
};

enum class Coord : std::size_t { Q1 = 0, Q2 = 1, P1 = 2, P2 = 3 };
inline constexpr std::array<Coord, 4> kAllCoords{Coord::Q1, Coord::Q2, Coord::P1, Coord::P2};

inline const char* coord_name(Coord c) {
  switch (c) {
    case Coord::Q1: return "q1";
    case Coord::Q2: return "q2";
    case Coord::P1: return "p1";
    case Coord::P2: return "p2";
  }
  return "?";
}

inline double component(const NormalModePhase& y, Coord c) {
  switch (c) {
    case Coord::Q1: return y.q1;
    case Coord::Q2: return y.q2;
    case Coord::P1: return y.p1;
    case Coord::P2: return y.p2;
  }
  return 0.0;
}

inline double variance_se(double variance, std::uint64_t n) {
  return n > 1 ? variance * std::sqrt(2.0 / static_cast<double>(n - 1)) : std::numeric_limits<double>::infinity();
}

/// Ensemble mean/variance of the four normal-mode coordinates on a uniform
/// time grid t_i = i * spacing.
class VarianceSeries {
 public:
  VarianceSeries() = default;
  VarianceSeries(std::size_t n_times, double spacing) : spacing_(spacing), moments_(n_times) {
    if (n_times == 0) throw std::invalid_argument("VarianceSeries: empty time grid");
    if (!(spacing > 0.0)) throw std::invalid_argument("VarianceSeries: grid spacing must be > 0");
  }

  std::size_t size() const { return moments_.size(); }
  double spacing() const { return spacing_; }
  double time(std::size_t i) const { return static_cast<double>(i) * spacing_; }

  void add(std::size_t i, const NormalModePhase& y) {
    auto& m = moments_.at(i);
    m[0].add(y.q1);
    m[1].add(y.q2);
    m[2].add(y.p1);
    m[3].add(y.p2);
  }

  /// Adds a snapshot taken at time t; t must sit on the grid.
  void accumulate(double t, const NormalModePhase& y) {
    const double idx = t / spacing_;
    const double nearest = std::round(idx);
    if (nearest < 0.0 || std::abs(idx - nearest) > 1e-6 || nearest >= static_cast<double>(size()))
      throw std::invalid_argument("VarianceSeries: time " + std::to_string(t) + " is not on the observation grid");
    add(static_cast<std::size_t>(nearest), y);
  }

  void merge(const VarianceSeries& other) {
    if (other.size() != size() || other.spacing_ != spacing_)
      throw std::invalid_argument("VarianceSeries: cannot merge series on different grids");
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t k = 0; k < 4; ++k) moments_[i][k].merge(other.moments_[i][k]);
  }

  const RunningMoments& moments(std::size_t i, Coord c) const { return moments_.at(i)[static_cast<std::size_t>(c)]; }
  double mean(std::size_t i, Coord c) const { return moments(i, c).mean; }
  double variance(std::size_t i, Coord c) const { return moments(i, c).variance(); }
  double se(std::size_t i, Coord c) const { return variance_se(variance(i, c), count(i)); }
  std::uint64_t count(std::size_t i) const { return moments_.at(i)[0].count; }

  std::vector<double> variance_curve(Coord c) const {
    std::vector<double> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = variance(i, c);
    return out;
  }

 private:
  double spacing_ = 1.0;
  std::vector<std::array<RunningMoments, 4>> moments_;
};

/// Squeezing diagnostics of one coordinate's variance curve.
struct CoordSqueeze {
  double threshold = 0.5;
  std::optional<double> first_crossing;  // first grid time with variance < threshold
  bool crossing_significant = false;     // |var - threshold| >= 2 SE at that time
  double min_variance = 0.0;
  double time_of_min = 0.0;
  double se_at_min = 0.0;
  double fraction_below = 0.0;
  /// After the first crossing, the curve never exceeds threshold + 2 SE.
  bool sustained = false;
  /// Latest grid time after the first crossing with variance > threshold + 2 SE.
  std::optional<double> last_excursion;
  double window_mean = 0.0;                   // grid average of the variance over the whole window
  std::optional<double> running_mean_crossing;  // first time the running time-average drops below threshold
};

struct SqueezeReport {
  double threshold = 0.5;
  std::array<CoordSqueeze, 4> coords;
  const CoordSqueeze& at(Coord c) const { return coords[static_cast<std::size_t>(c)]; }
  bool squeezed() const {
    return std::any_of(coords.begin(), coords.end(), [](const CoordSqueeze& s) { return s.first_crossing.has_value(); });
  }
};

/// Squeezing analysis of a curve. `se` may be empty (exact curves).
inline CoordSqueeze analyze_curve(std::span<const double> times, std::span<const double> variance,
                                  std::span<const double> se, double threshold) {
  if (variance.empty()) throw std::invalid_argument("analyze_curve: empty series");
  if (times.size() != variance.size() || (!se.empty() && se.size() != variance.size()))
    throw std::invalid_argument("analyze_curve: length mismatch");
  auto se_at = [&](std::size_t i) { return se.empty() ? 0.0 : se[i]; };

  CoordSqueeze out;
  out.threshold = threshold;
  std::size_t below = 0;
  std::size_t imin = 0;
  double running = 0.0;
  for (std::size_t i = 0; i < variance.size(); ++i) {
    const double v = variance[i];
    if (v < threshold) {
      ++below;
      if (!out.first_crossing) {
        out.first_crossing = times[i];
        out.crossing_significant = std::abs(v - threshold) >= 2.0 * se_at(i);
      }
    }
    if (v < variance[imin]) imin = i;
    if (out.first_crossing && v > threshold + 2.0 * se_at(i)) out.last_excursion = times[i];
    running += v;
    if (!out.running_mean_crossing && running / static_cast<double>(i + 1) < threshold)
      out.running_mean_crossing = times[i];
  }
  out.min_variance = variance[imin];
  out.time_of_min = times[imin];
  out.se_at_min = se_at(imin);
  out.fraction_below = static_cast<double>(below) / static_cast<double>(variance.size());
  out.sustained = out.first_crossing.has_value() && !out.last_excursion.has_value();
  out.window_mean = running / static_cast<double>(variance.size());
  return out;
}

inline SqueezeReport squeeze_report(const VarianceSeries& series, double threshold = 0.5) {
  if (series.size() == 0 || series.count(0) == 0) throw std::invalid_argument("squeeze_report: empty series");
  std::vector<double> times(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) times[i] = series.time(i);
  SqueezeReport r;
  r.threshold = threshold;
  for (Coord c : kAllCoords) {
    std::vector<double> var(series.size());
    std::vector<double> se(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
      var[i] = series.variance(i, c);
      se[i] = series.se(i, c);
    }
    r.coords[static_cast<std::size_t>(c)] = analyze_curve(times, var, se, threshold);
  }
  return r;
}

struct MarginalHistogram {
  int mode = 1;
  double time = 0.0;
  std::size_t bins_q = 64;
  std::size_t bins_p = 64;
  double q_min = 0.0;
  double q_max = 0.0;
  double p_min = 0.0;
  double p_max = 0.0;
  std::vector<std::uint64_t> counts;  // row-major, index = iq * bins_p + ip
  std::uint64_t total = 0;            // equals the ensemble size
  std::uint64_t clamped = 0;          // samples beyond the range, folded into the edge bins
  double cov_qq = 0.0;
  double cov_qp = 0.0;
  double cov_pp = 0.0;
  double eig_min = 0.0;
  double eig_max = 0.0;

  double ellipticity() const { return eig_max / eig_min; }
  std::uint64_t at(std::size_t iq, std::size_t ip) const { return counts.at(iq * bins_p + ip); }
};

/// 2-D histogram of mode k (1 or 2) over +-width_sd sample standard
/// deviations per axis, plus the sample covariance and its eigenvalues.
inline MarginalHistogram marginal_histogram(std::span<const NormalModePhase> snapshots, int mode, double time,
                                            std::size_t bins = 64, double width_sd = 4.0) {
  if (snapshots.empty()) throw std::invalid_argument("marginal_histogram: empty ensemble");
  if (mode != 1 && mode != 2) throw std::invalid_argument("marginal_histogram: mode must be 1 or 2");
  if (bins < 1) throw std::invalid_argument("marginal_histogram: need at least one bin");
  const Coord cq = mode == 1 ? Coord::Q1 : Coord::Q2;
  const Coord cp = mode == 1 ? Coord::P1 : Coord::P2;

  RunningMoments mq, mp;
  for (const auto& y : snapshots) {
    mq.add(component(y, cq));
    mp.add(component(y, cp));
  }
  double cqp = 0.0;
  for (const auto& y : snapshots) cqp += (component(y, cq) - mq.mean) * (component(y, cp) - mp.mean);
  cqp /= static_cast<double>(snapshots.size());

  MarginalHistogram h;
  h.mode = mode;
  h.time = time;
  h.bins_q = bins;
  h.bins_p = bins;
  h.cov_qq = mq.variance();
  h.cov_pp = mp.variance();
  h.cov_qp = cqp;
  Eigen::Matrix2d cov;
  cov << h.cov_qq, cqp, cqp, h.cov_pp;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov, Eigen::EigenvaluesOnly);
  h.eig_min = es.eigenvalues()(0);
  h.eig_max = es.eigenvalues()(1);

  const double sq = std::sqrt(h.cov_qq), sp = std::sqrt(h.cov_pp);
  // Degenerate axes still get a non-empty range.
  const double half_q = sq > 0.0 ? width_sd * sq : 1.0;
  const double half_p = sp > 0.0 ? width_sd * sp : 1.0;
  h.q_min = mq.mean - half_q;
  h.q_max = mq.mean + half_q;
  h.p_min = mp.mean - half_p;
  h.p_max = mp.mean + half_p;
  h.counts.assign(bins * bins, 0);
  h.total = snapshots.size();
  for (const auto& y : snapshots) {
    const double fq = (component(y, cq) - h.q_min) / (h.q_max - h.q_min);
    const double fp = (component(y, cp) - h.p_min) / (h.p_max - h.p_min);
    if (fq < 0.0 || fq >= 1.0 || fp < 0.0 || fp >= 1.0) ++h.clamped;
    auto to_bin = [bins](double f) {
      const double scaled = std::clamp(f, 0.0, 1.0) * static_cast<double>(bins);
      return std::min(static_cast<std::size_t>(scaled), bins - 1);
    };
    ++h.counts[to_bin(fq) * bins + to_bin(fp)];
  }
  return h;
}

}  // namespace sqz
