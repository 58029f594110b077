#pragma once

// Trajectory propagation. The Hamiltonian part is a symmetric
// kick-drift-kick (velocity Verlet) step with the drive evaluated at the
// step midpoint; the chain thermostat is wrapped around it as
// thermostat(dt/2) . hamiltonian(dt) . thermostat(dt/2), each thermostat
// half split into Suzuki-Yoshida stages and multiple-time-step loops.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "sqz/bath.hpp"
#include "sqz/model.hpp"

namespace sqz {

struct IntegratorConfig {
  double dt = 0.01;
  std::size_t n_steps = 25000;
  int n_yoshida = 3;
  int n_mts = 3;
  std::size_t stride = 10;

  /// `allow_empty` permits n_steps == 0 for direct integrate() calls.
  void validate(bool allow_empty = false) const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("integrator: dt must be > 0");
    if (n_steps < 1 && !allow_empty) throw std::invalid_argument("integrator: n_steps must be >= 1");
    if (n_yoshida != 1 && n_yoshida != 3 && n_yoshida != 5)
      throw std::invalid_argument("integrator: n_yoshida must be 1, 3 or 5");
    if (n_mts < 1) throw std::invalid_argument("integrator: n_mts must be >= 1");
    if (stride < 1) throw std::invalid_argument("integrator: stride must be >= 1");
  }
  std::size_t n_observations() const { return n_steps / stride + 1; }
};

/// Suzuki-Yoshida composition weights; n = 3 and n = 5 are fourth order.
inline std::vector<double> yoshida_weights(int n) {
  switch (n) {
    case 1: return {1.0};
    case 3: {
      const double w = 1.0 / (2.0 - std::cbrt(2.0));
      return {w, 1.0 - 2.0 * w, w};
    }
    case 5: {
      const double w = 1.0 / (4.0 - std::cbrt(4.0));
      return {w, w, 1.0 - 4.0 * w, w, w};
    }
    default: throw std::invalid_argument("yoshida_weights: unsupported stage count " + std::to_string(n));
  }
}

struct IsolatedBath {};
using BathModel = std::variant<IsolatedBath, OhmicBath, NHCBathParams>;
using BathPhase = std::variant<std::monostate, OhmicBathPhase, NHCBathPhase>;

struct Model {
  SystemParams system;
  BathModel bath = IsolatedBath{};
};

struct TrajectoryState {
  double t = 0.0;
  SystemPhase system;
  BathPhase bath;

  bool finite() const {
    if (!std::isfinite(t) || !system.finite()) return false;
    if (const auto* o = std::get_if<OhmicBathPhase>(&bath)) return o->finite();
    if (const auto* n = std::get_if<NHCBathPhase>(&bath)) return n->finite();
    return true;
  }
  friend bool operator==(const TrajectoryState&, const TrajectoryState&) = default;
};

class TrajectoryFailure : public std::runtime_error {
 public:
  TrajectoryFailure(std::size_t step, double t)
      : std::runtime_error("trajectory became non-finite at step " + std::to_string(step) + " (t' = " +
                           std::to_string(t) + ")"),
        step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

namespace detail {

inline void isolated_verlet_step(double t, double dt, const SystemParams& sys, SystemPhase& x) {
  const double h = 0.5 * dt;
  const double k2 = coupling_freq_sq(t + h, sys);
  const double inv_m = 1.0 / sys.mass();
  ForcePair f = system_force_at(k2, x, sys);
  x.p1 += h * f.f1;
  x.p2 += h * f.f2;
  x.q1 += dt * x.p1 * inv_m;
  x.q2 += dt * x.p2 * inv_m;
  f = system_force_at(k2, x, sys);
  x.p1 += h * f.f1;
  x.p2 += h * f.f2;
}

// Operates on raw coordinates so the covariance oracle can push matrix
// columns through exactly the same map.
inline void ohmic_verlet_step(double t, double dt, const SystemParams& sys, const OhmicBath& bath, SystemPhase& x,
                              std::span<double> R, std::span<double> P) {
  const double h = 0.5 * dt;
  const double k2 = coupling_freq_sq(t + h, sys);
  const double inv_m = 1.0 / sys.mass();
  const auto w2 = bath.freqs_sq();
  const auto c = bath.couplings();
  const std::size_t n = R.size();

  double pull = ohmic_pull(c, R);
  ForcePair f = system_force_at(k2, x, sys);
  double s = x.q1 + x.q2;
  x.p1 += h * (f.f1 + pull);
  x.p2 += h * (f.f2 + pull);
  for (std::size_t j = 0; j < n; ++j) P[j] += h * (c[j] * s - w2[j] * R[j]);

  x.q1 += dt * x.p1 * inv_m;
  x.q2 += dt * x.p2 * inv_m;
  pull = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    R[j] += dt * P[j];
    pull += c[j] * R[j];
  }

  f = system_force_at(k2, x, sys);
  s = x.q1 + x.q2;
  x.p1 += h * (f.f1 + pull);
  x.p2 += h * (f.f2 + pull);
  for (std::size_t j = 0; j < n; ++j) P[j] += h * (c[j] * s - w2[j] * R[j]);
}

// Physical part of the chain model: system plus the bath oscillator, no drag.
inline void nhc_physical_verlet_step(double t, double dt, const SystemParams& sys, const NHCBathParams& bath,
                                     SystemPhase& x, NHCBathPhase& b) {
  const double h = 0.5 * dt;
  const double k2 = coupling_freq_sq(t + h, sys);
  const double inv_m = 1.0 / sys.mass();
  const double c = bath.coupling();
  const double w2 = bath.oscillator_freq() * bath.oscillator_freq();

  ForcePair f = system_force_at(k2, x, sys);
  x.p1 += h * (f.f1 + c * b.R);
  x.p2 += h * (f.f2 + c * b.R);
  b.P += h * (c * (x.q1 + x.q2) - w2 * b.R);

  x.q1 += dt * x.p1 * inv_m;
  x.q2 += dt * x.p2 * inv_m;
  b.R += dt * b.P / bath.oscillator_mass();

  f = system_force_at(k2, x, sys);
  x.p1 += h * (f.f1 + c * b.R);
  x.p2 += h * (f.f2 + c * b.R);
  b.P += h * (c * (x.q1 + x.q2) - w2 * b.R);
}

}  // namespace detail

/// Advances the physical coordinates by one symmetric step. For the chain
/// model only the system + bath oscillator move; the thermostat is left to
/// step_nhc().
inline void step_hamiltonian(TrajectoryState& state, const SystemParams& sys, const BathModel& bath, double dt) {
  std::visit(
      [&](const auto& model) {
        using M = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<M, IsolatedBath>) {
          detail::isolated_verlet_step(state.t, dt, sys, state.system);
        } else if constexpr (std::is_same_v<M, OhmicBath>) {
          auto& b = std::get<OhmicBathPhase>(state.bath);
          detail::ohmic_verlet_step(state.t, dt, sys, model, state.system, b.R, b.P);
        } else {
          detail::nhc_physical_verlet_step(state.t, dt, sys, model, state.system,
                                           std::get<NHCBathPhase>(state.bath));
        }
      },
      bath);
  state.t += dt;
}

/// Thermostat propagation over `span`: Yoshida stages x MTS loops, each
/// substep ordered P_eta2, P_eta1, (drag, eta), P_eta1, P_eta2.
inline void nhc_thermostat_update(NHCBathPhase& b, const NHCBathParams& bath, std::span<const double> weights,
                                  int n_mts, double span) {
  const double T = bath.temperature();
  const double g = static_cast<double>(bath.dof());
  const double m1 = bath.mass_eta1();
  const double m2 = bath.mass_eta2();
  const double inv_mass = 1.0 / bath.oscillator_mass();

  for (int k = 0; k < n_mts; ++k) {
    for (double w : weights) {
      const double d = w * span / n_mts;
      const double d2 = 0.5 * d;
      const double d4 = 0.25 * d;

      b.p_eta2 += d2 * (b.p_eta1 * b.p_eta1 / m1 - T);
      double scale = std::exp(-d4 * b.p_eta2 / m2);
      b.p_eta1 = (b.p_eta1 * scale + d2 * (b.P * b.P * inv_mass - g * T)) * scale;

      b.P *= std::exp(-d * b.p_eta1 / m1);
      b.eta1 += d * b.p_eta1 / m1;
      b.eta2 += d * b.p_eta2 / m2;

      scale = std::exp(-d4 * b.p_eta2 / m2);
      b.p_eta1 = (b.p_eta1 * scale + d2 * (b.P * b.P * inv_mass - g * T)) * scale;
      b.p_eta2 += d2 * (b.p_eta1 * b.p_eta1 / m1 - T);
    }
  }
}

inline void step_nhc(TrajectoryState& state, const SystemParams& sys, const NHCBathParams& bath,
                     std::span<const double> weights, int n_mts, double dt) {
  auto& b = std::get<NHCBathPhase>(state.bath);
  nhc_thermostat_update(b, bath, weights, n_mts, 0.5 * dt);
  detail::nhc_physical_verlet_step(state.t, dt, sys, bath, state.system, b);
  nhc_thermostat_update(b, bath, weights, n_mts, 0.5 * dt);
  state.t += dt;
}

/// Runs config.n_steps steps. The observer is called as observer(step, state)
/// at step 0 and every `stride` steps. Throws TrajectoryFailure on NaN/Inf.
template <class Observer>
TrajectoryState integrate(TrajectoryState state, const Model& model, const IntegratorConfig& config,
                          Observer&& observer) {
  config.validate(/*allow_empty=*/true);
  const SystemParams& sys = model.system;
  const double dt = config.dt;
  const double t0 = state.t;

  auto run = [&](auto&& advance) {
    if (!state.finite()) throw TrajectoryFailure(0, state.t);
    observer(std::size_t{0}, static_cast<const TrajectoryState&>(state));
    for (std::size_t step = 1; step <= config.n_steps; ++step) {
      advance();
      // Recompute from the step count so long runs do not accumulate time error.
      state.t = t0 + static_cast<double>(step) * dt;
      if (!state.system.finite()) throw TrajectoryFailure(step, state.t);
      if (step % config.stride == 0) {
        if (!state.finite()) throw TrajectoryFailure(step, state.t);
        observer(step, static_cast<const TrajectoryState&>(state));
      }
    }
  };

  std::visit(
      [&](const auto& bath) {
        using M = std::decay_t<decltype(bath)>;
        if constexpr (std::is_same_v<M, IsolatedBath>) {
          if (!std::holds_alternative<std::monostate>(state.bath))
            throw std::invalid_argument("integrate: isolated model requires a state without bath");
          run([&] { detail::isolated_verlet_step(state.t, dt, sys, state.system); });
        } else if constexpr (std::is_same_v<M, OhmicBath>) {
          auto* b = std::get_if<OhmicBathPhase>(&state.bath);
          if (b == nullptr || b->R.size() != bath.size() || b->P.size() != bath.size())
            throw std::invalid_argument("integrate: Ohmic model requires a matching Ohmic bath state");
          run([&] { detail::ohmic_verlet_step(state.t, dt, sys, bath, state.system, b->R, b->P); });
        } else {
          if (!std::holds_alternative<NHCBathPhase>(state.bath))
            throw std::invalid_argument("integrate: chain model requires a chain bath state");
          const std::vector<double> weights = yoshida_weights(config.n_yoshida);
          run([&] {
            auto& nb = std::get<NHCBathPhase>(state.bath);
            nhc_thermostat_update(nb, bath, weights, config.n_mts, 0.5 * dt);
            detail::nhc_physical_verlet_step(state.t, dt, sys, bath, state.system, nb);
            nhc_thermostat_update(nb, bath, weights, config.n_mts, 0.5 * dt);
          });
        }
      },
      model.bath);
  return state;
}

template <class Observer>
TrajectoryState integrate(TrajectoryState state, const Model& model, std::size_t n_steps, double dt,
                          Observer&& observer) {
  IntegratorConfig cfg;
  cfg.dt = dt;
  cfg.n_steps = n_steps;
  cfg.stride = 1;
  return integrate(std::move(state), model, cfg, std::forward<Observer>(observer));
}

}  // namespace sqz
