#pragma once

// Floquet analysis of the relative mode. In drive-scaled time s = omega_d t
// the mode obeys the Mathieu equation
//     y'' + (a - 2 q cos 2s) y = 0,   a = (w^2 + w0^2)/wd^2,  q = w0^2 / (2 wd^2),
// whose coefficient has period pi. |trace M| > 2 of the one-period
// propagator M means parametric instability.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <thread>
#include <vector>

#include "sqz/model.hpp"

namespace sqz {

struct MathieuParams {
  double a = 0.0;
  double q = 0.0;
};

inline MathieuParams mathieu_params(double omega_sq, double coupling_amplitude, double drive_freq) {
  if (!(drive_freq > 0.0)) throw std::invalid_argument("mathieu_params: drive frequency must be > 0");
  const double wd2 = drive_freq * drive_freq;
  const double w02 = coupling_amplitude * coupling_amplitude;
  return {(omega_sq + w02) / wd2, w02 / (2.0 * wd2)};
}

inline MathieuParams mathieu_params(const SystemParams& sys) {
  return mathieu_params(sys.omega_sq(), sys.coupling_amplitude(), sys.drive_freq());
}

/// Row-major 2x2 matrix acting on (y, y').
struct Mat2 {
  double a00 = 1.0, a01 = 0.0, a10 = 0.0, a11 = 1.0;
  double trace() const { return a00 + a11; }
  double det() const { return a00 * a11 - a01 * a10; }
  friend Mat2 operator*(const Mat2& l, const Mat2& r) {
    return {l.a00 * r.a00 + l.a01 * r.a10, l.a00 * r.a01 + l.a01 * r.a11, l.a10 * r.a00 + l.a11 * r.a10,
            l.a10 * r.a01 + l.a11 * r.a11};
  }
};

/// Exact propagator of y'' = -w2 y over a step h with w2 held fixed.
inline Mat2 frozen_frequency_propagator(double w2, double h) {
  if (w2 > 0.0) {
    const double w = std::sqrt(w2);
    const double c = std::cos(w * h), s = std::sin(w * h);
    return {c, s / w, -w * s, c};
  }
  if (w2 < 0.0) {
    const double k = std::sqrt(-w2);
    const double c = std::cosh(k * h), s = std::sinh(k * h);
    return {c, s / k, k * s, c};
  }
  return {1.0, h, 0.0, 1.0};
}

namespace detail {

// cos(2 s) at the midpoint of each of the `steps` substeps of [0, pi].
inline std::vector<double> midpoint_cos_table(std::size_t steps) {
  std::vector<double> table(steps);
  const double h = std::numbers::pi / static_cast<double>(steps);
  for (std::size_t k = 0; k < steps; ++k) table[k] = std::cos(2.0 * (static_cast<double>(k) + 0.5) * h);
  return table;
}

inline Mat2 monodromy_from_table(const MathieuParams& p, const std::vector<double>& cos_table) {
  const double h = std::numbers::pi / static_cast<double>(cos_table.size());
  Mat2 m;
  for (double c2 : cos_table) m = frozen_frequency_propagator(p.a - 2.0 * p.q * c2, h) * m;
  return m;
}

}  // namespace detail

/// One-period propagator of the fundamental solutions (1,0) and (0,1).
/// Each substep freezes the coefficient at its midpoint and applies the exact
/// harmonic propagator: symmetric, second order, exactly area preserving,
/// and exact when q = 0.
inline Mat2 monodromy(const MathieuParams& p, std::size_t steps_per_period = 4096) {
  if (steps_per_period < 256) throw std::invalid_argument("monodromy: need at least 256 steps per period");
  const Mat2 m = detail::monodromy_from_table(p, detail::midpoint_cos_table(steps_per_period));
  if (!std::isfinite(m.a00) || !std::isfinite(m.a01) || !std::isfinite(m.a10) || !std::isfinite(m.a11))
    throw std::runtime_error("monodromy: non-finite propagator");
  return m;
}

inline constexpr double kInstabilityTol = 1e-9;
inline constexpr double kMarginalBand = 1e-3;

/// Largest |y| reached by either fundamental solution over `periods` drive
/// periods, integrated with the kick-drift-kick stepper used for
/// trajectories. Independent of the monodromy route.
inline double mathieu_max_amplitude(const MathieuParams& p, std::size_t periods, std::size_t steps_per_period = 4096) {
  const double h = std::numbers::pi / static_cast<double>(steps_per_period);
  const std::size_t n = periods * steps_per_period;
  double largest = 1.0;
  for (int start = 0; start < 2; ++start) {
    double y = start == 0 ? 1.0 : 0.0;
    double v = start == 0 ? 0.0 : 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double s_mid = (static_cast<double>(k) + 0.5) * h;
      const double w2 = p.a - 2.0 * p.q * std::cos(2.0 * s_mid);
      v -= 0.5 * h * w2 * y;
      y += h * v;
      v -= 0.5 * h * w2 * y;
      largest = std::max(largest, std::abs(y));
      if (!std::isfinite(y) || largest > 1e300) return std::numeric_limits<double>::infinity();
    }
  }
  return largest;
}

struct StabilityWindow {
  double x_min = 0.0, x_max = 40.0;
  double y_min = 0.0, y_max = 40.0;
  std::size_t nx = 400, ny = 400;

  void validate() const {
    if (!(x_max > x_min) || !(y_max > y_min))
      throw std::invalid_argument("stability window must have positive area");
    if (x_min < 0.0 || y_min < 0.0) throw std::invalid_argument("stability window must lie in x, y >= 0");
    if (nx < 2 || ny < 2) throw std::invalid_argument("stability window needs at least 2 nodes per axis");
  }
  double x(std::size_t i) const { return x_min + (x_max - x_min) * static_cast<double>(i) / static_cast<double>(nx - 1); }
  double y(std::size_t j) const { return y_min + (y_max - y_min) * static_cast<double>(j) / static_cast<double>(ny - 1); }
};

struct StabilityCell {
  double x = 0.0;  // (w / wd)^2
  double y = 0.0;  // (w0 / wd)^2
  double abs_trace = 0.0;
  double det = 1.0;
  bool unstable = false;
  bool marginal = false;
};

/// Maps x = (w/wd)^2, y = (w0/wd)^2 to a = x + y, q = y / 2.
inline StabilityCell classify_point(double x, double y, std::size_t steps_per_period = 4096) {
  const Mat2 m = monodromy({x + y, 0.5 * y}, steps_per_period);
  StabilityCell c;
  c.x = x;
  c.y = y;
  c.abs_trace = std::abs(m.trace());
  c.det = m.det();
  c.unstable = c.abs_trace > 2.0 + kInstabilityTol;
  c.marginal = std::abs(c.abs_trace - 2.0) < kMarginalBand;
  return c;
}

struct StabilityMap {
  StabilityWindow window;
  std::vector<StabilityCell> cells;  // row-major over y, then x
  const StabilityCell& at(std::size_t ix, std::size_t iy) const { return cells.at(iy * window.nx + ix); }
};

/// Grid nodes include both window edges, so a map at 2n-1 nodes per axis
/// contains every node of the n-node map.
inline StabilityMap stability_map(const StabilityWindow& window, std::size_t steps_per_period = 4096,
                                  unsigned threads = 1) {
  window.validate();
  if (steps_per_period < 256) throw std::invalid_argument("stability_map: need at least 256 steps per period");
  StabilityMap map;
  map.window = window;
  map.cells.resize(window.nx * window.ny);
  const std::vector<double> table = detail::midpoint_cos_table(steps_per_period);

  auto do_rows = [&](std::size_t first, std::size_t stride) {
    for (std::size_t iy = first; iy < window.ny; iy += stride) {
      for (std::size_t ix = 0; ix < window.nx; ++ix) {
        const double x = window.x(ix), y = window.y(iy);
        const Mat2 m = detail::monodromy_from_table({x + y, 0.5 * y}, table);
        StabilityCell& c = map.cells[iy * window.nx + ix];
        c.x = x;
        c.y = y;
        c.abs_trace = std::abs(m.trace());
        c.det = m.det();
        c.unstable = c.abs_trace > 2.0 + kInstabilityTol;
        c.marginal = std::abs(c.abs_trace - 2.0) < kMarginalBand;
      }
    }
  };

  threads = std::max(1u, threads);
  if (threads == 1) {
    do_rows(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(do_rows, t, threads);
  }
  return map;
}

}  // namespace sqz
