#pragma once

// Relevant system: two identical oscillators with a sinusoidally driven
// harmonic coupling. Everything here is in the dimensionless variables
// (hbar = 1, time in units of 1/omega_c); SI conversion happens only in
// to_physical_units().

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sqz {

inline constexpr double kHbar = 1.054571817e-34;       // J s
inline constexpr double kBoltzmann = 1.380649e-23;     // J / K
inline constexpr double kDefaultCarrierHz = 3.93e13;

/// How the coupling frequency depends on time. `Static` freezes it at the
/// amplitude omega_0 and is used for energy-conservation checks.
enum class DriveMode { Sinusoidal, Static };

class SystemParams {
 public:
  SystemParams(double mass, double spring, double coupling_amplitude, double drive_freq,
               double carrier_hz = kDefaultCarrierHz, DriveMode drive = DriveMode::Sinusoidal)
      : mass_(mass),
        spring_(spring),
        coupling_amplitude_(coupling_amplitude),
        drive_freq_(drive_freq),
        carrier_hz_(carrier_hz),
        drive_(drive) {
    if (!(mass > 0.0) || !std::isfinite(mass)) throw std::invalid_argument("system: mass must be > 0");
    if (!(spring > 0.0) || !std::isfinite(spring)) throw std::invalid_argument("system: spring constant must be > 0");
    if (!(coupling_amplitude >= 0.0) || !std::isfinite(coupling_amplitude))
      throw std::invalid_argument("system: coupling amplitude omega0 must be >= 0");
    if (!(drive_freq > 0.0) || !std::isfinite(drive_freq))
      throw std::invalid_argument("system: drive frequency must be > 0");
    if (!(carrier_hz > 0.0)) throw std::invalid_argument("system: carrier frequency must be > 0");
    omega_sq_ = spring_ / mass_;
    omega_ = std::sqrt(omega_sq_);
  }

  /// m=1, K=1.25, omega0=2.5, omega_d=0.45.
  static SystemParams reference() { return SystemParams(1.0, 1.25, 2.5, 0.45); }

  double mass() const { return mass_; }
  double spring() const { return spring_; }
  double omega() const { return omega_; }
  double omega_sq() const { return omega_sq_; }
  double coupling_amplitude() const { return coupling_amplitude_; }
  double drive_freq() const { return drive_freq_; }
  double carrier_hz() const { return carrier_hz_; }
  DriveMode drive() const { return drive_; }

  SystemParams with_drive(DriveMode d) const {
    SystemParams copy = *this;
    copy.drive_ = d;
    return copy;
  }

 private:
  double mass_;
  double spring_;
  double coupling_amplitude_;
  double drive_freq_;
  double carrier_hz_;
  DriveMode drive_;
  double omega_sq_ = 0.0;
  double omega_ = 0.0;
};

struct SystemPhase {
  double q1 = 0.0;
  double q2 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;

  bool finite() const {
    return std::isfinite(q1) && std::isfinite(q2) && std::isfinite(p1) && std::isfinite(p2);
  }
  friend bool operator==(const SystemPhase&, const SystemPhase&) = default;
};

/// Normal-mode coordinates. Mode 1 is the centre of mass, mode 2 the
/// relative displacement (the one carrying the driven frequency).
struct NormalModePhase {
  double q1 = 0.0;
  double q2 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
  friend bool operator==(const NormalModePhase&, const NormalModePhase&) = default;
};

struct ForcePair {
  double f1 = 0.0;
  double f2 = 0.0;
};

struct ModeFrequencies {
  double omega1 = 0.0;
  double omega2 = 0.0;
};

/// omega~^2(t) = (omega0 sin(omega_d t))^2, or omega0^2 for a static drive.
inline double coupling_freq_sq(double t, const SystemParams& sys) {
  if (sys.drive() == DriveMode::Static) return sys.coupling_amplitude() * sys.coupling_amplitude();
  const double w = sys.coupling_amplitude() * std::sin(sys.drive_freq() * t);
  return w * w;
}

// Force with an explicit coupling value; the integrator evaluates the drive
// once per step and reuses it.
inline ForcePair system_force_at(double coupling_sq, const SystemPhase& x, const SystemParams& sys) {
  const double stretch = x.q2 - x.q1;
  const double pull = sys.mass() * coupling_sq * stretch;
  return {-sys.spring() * x.q1 + pull, -sys.spring() * x.q2 - pull};
}

/// dp/dt of both oscillators, bath terms excluded.
inline ForcePair system_force(double t, const SystemPhase& x, const SystemParams& sys) {
  return system_force_at(coupling_freq_sq(t, sys), x, sys);
}

inline double system_energy(double t, const SystemPhase& x, const SystemParams& sys) {
  const double stretch = x.q2 - x.q1;
  return 0.5 * (x.p1 * x.p1 + x.p2 * x.p2) / sys.mass() +
         0.5 * sys.mass() * sys.omega_sq() * (x.q1 * x.q1 + x.q2 * x.q2) +
         0.5 * sys.mass() * coupling_freq_sq(t, sys) * stretch * stretch;
}

inline NormalModePhase to_normal_modes(const SystemPhase& x) {
  constexpr double r = std::numbers::sqrt2 / 2.0;
  return {r * (x.q1 + x.q2), r * (x.q1 - x.q2), r * (x.p1 + x.p2), r * (x.p1 - x.p2)};
}

inline SystemPhase from_normal_modes(const NormalModePhase& y) {
  constexpr double r = std::numbers::sqrt2 / 2.0;
  return {r * (y.q1 + y.q2), r * (y.q1 - y.q2), r * (y.p1 + y.p2), r * (y.p1 - y.p2)};
}

inline ModeFrequencies normal_mode_freqs(double t, const SystemParams& sys) {
  const double coupling_spring = sys.mass() * coupling_freq_sq(t, sys);
  return {sys.omega(), std::sqrt((sys.spring() + 2.0 * coupling_spring) / sys.mass())};
}

enum class Quantity { Time, Temperature, Frequency, Energy };

inline Quantity parse_quantity(std::string_view name) {
  if (name == "time") return Quantity::Time;
  if (name == "temperature") return Quantity::Temperature;
  if (name == "frequency") return Quantity::Frequency;
  if (name == "energy") return Quantity::Energy;
  throw std::invalid_argument("unknown quantity kind '" + std::string(name) + "'");
}

/// Converts a dimensionless value to SI (s, K, rad/s, J). The carrier
/// frequency plays the role of omega_c, so E_c = hbar * omega_c.
inline double to_physical_units(double value, Quantity kind, double carrier_hz) {
  if (!(carrier_hz > 0.0)) throw std::invalid_argument("carrier frequency must be > 0");
  switch (kind) {
    case Quantity::Time: return value / carrier_hz;
    case Quantity::Temperature: return value * kHbar * carrier_hz / kBoltzmann;
    case Quantity::Frequency: return value * carrier_hz;
    case Quantity::Energy: return value * kHbar * carrier_hz;
  }
  throw std::invalid_argument("unknown quantity kind");
}

inline double to_physical_units(double value, std::string_view kind, double carrier_hz) {
  return to_physical_units(value, parse_quantity(kind), carrier_hz);
}

}  // namespace sqz
