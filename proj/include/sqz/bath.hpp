#pragma once

// Environment representations: a discretised Ohmic bath of N harmonic
// oscillators, and a single oscillator thermalised by a two-link
// Nose-Hoover chain. Both couple bilinearly through (q1 + q2), so the
// relative normal mode never sees the bath.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sqz/model.hpp"

namespace sqz {

class OhmicBath {
 public:
  std::size_t size() const { return freqs_.size(); }
  double kondo() const { return kondo_; }
  double cutoff() const { return cutoff_; }
  double spacing() const { return spacing_; }
  std::span<const double> freqs() const { return freqs_; }
  std::span<const double> freqs_sq() const { return freqs_sq_; }
  std::span<const double> couplings() const { return couplings_; }
  /// Bath masses are 1 in the reduced units.
  double mass() const { return 1.0; }

  friend OhmicBath build_ohmic_bath_with_spacing(std::size_t, double, double, double);

 private:
  double kondo_ = 0.0;
  double cutoff_ = 0.0;
  double spacing_ = 0.0;
  std::vector<double> freqs_;
  std::vector<double> freqs_sq_;
  std::vector<double> couplings_;
};

/// Builds the bath from an explicit frequency spacing. Fails if any
/// j * spacing reaches 1 (the log map has no finite frequency there).
inline OhmicBath build_ohmic_bath_with_spacing(std::size_t n, double kondo, double cutoff, double spacing) {
  if (n < 1) throw std::invalid_argument("ohmic bath: N must be >= 1");
  if (!(kondo >= 0.0) || !std::isfinite(kondo)) throw std::invalid_argument("ohmic bath: Kondo parameter must be >= 0");
  if (!(spacing > 0.0)) throw std::invalid_argument("ohmic bath: spacing must be > 0");
  OhmicBath bath;
  bath.kondo_ = kondo;
  bath.cutoff_ = cutoff;
  bath.spacing_ = spacing;
  bath.freqs_.resize(n);
  bath.freqs_sq_.resize(n);
  bath.couplings_.resize(n);
  for (std::size_t j = 1; j <= n; ++j) {
    const double x = static_cast<double>(j) * spacing;
    if (x >= 1.0)
      throw std::invalid_argument("ohmic bath: j * spacing >= 1 at j = " + std::to_string(j));
    const double w = -std::log1p(-x);
    bath.freqs_[j - 1] = w;
    bath.freqs_sq_[j - 1] = w * w;
    bath.couplings_[j - 1] = std::sqrt(kondo * spacing * w);
  }
  return bath;
}

/// Omega_j = -ln(1 - j w0), w0 = (1 - exp(-w_max)) / N, c_j = sqrt(xi w0 Omega_j).
inline OhmicBath build_ohmic_bath(std::size_t n, double kondo, double cutoff) {
  if (n < 1) throw std::invalid_argument("ohmic bath: N must be >= 1");
  if (!(cutoff > 0.0) || !std::isfinite(cutoff)) throw std::invalid_argument("ohmic bath: cutoff must be > 0");
  const double spacing = -std::expm1(-cutoff) / static_cast<double>(n);
  return build_ohmic_bath_with_spacing(n, kondo, cutoff, spacing);
}

struct OhmicBathPhase {
  std::vector<double> R;
  std::vector<double> P;

  bool finite() const {
    for (double v : R)
      if (!std::isfinite(v)) return false;
    for (double v : P)
      if (!std::isfinite(v)) return false;
    return true;
  }
  friend bool operator==(const OhmicBathPhase&, const OhmicBathPhase&) = default;
};

namespace detail {

// sum_j c_j R_j
inline double ohmic_pull(std::span<const double> couplings, std::span<const double> R) {
  double s = 0.0;
  for (std::size_t j = 0; j < R.size(); ++j) s += couplings[j] * R[j];
  return s;
}

}  // namespace detail

struct OhmicForces {
  double system_add = 0.0;     // added to both dp1/dt and dp2/dt
  std::vector<double> bath;    // dP_j/dt
};

inline OhmicForces ohmic_forces(const SystemPhase& x, const OhmicBathPhase& b, const OhmicBath& bath) {
  if (b.R.size() != bath.size() || b.P.size() != bath.size())
    throw std::invalid_argument("ohmic_forces: bath phase length does not match bath size");
  OhmicForces out;
  out.system_add = detail::ohmic_pull(bath.couplings(), b.R);
  out.bath.resize(bath.size());
  const double s = x.q1 + x.q2;
  const auto w2 = bath.freqs_sq();
  const auto c = bath.couplings();
  for (std::size_t j = 0; j < bath.size(); ++j) out.bath[j] = -w2[j] * b.R[j] + c[j] * s;
  return out;
}

class NHCBathParams {
 public:
  NHCBathParams(double oscillator_freq, double coupling, double mass_eta1, double mass_eta2, int dof,
                double temperature)
      : oscillator_freq_(oscillator_freq),
        coupling_(coupling),
        mass_eta1_(mass_eta1),
        mass_eta2_(mass_eta2),
        dof_(dof),
        temperature_(temperature) {
    if (!(oscillator_freq > 0.0)) throw std::invalid_argument("nhc bath: oscillator frequency must be > 0");
    if (!(coupling >= 0.0) || !std::isfinite(coupling)) throw std::invalid_argument("nhc bath: coupling must be >= 0");
    // +inf masses are allowed: they switch the thermostat off.
    if (!(mass_eta1 > 0.0) || !(mass_eta2 > 0.0))
      throw std::invalid_argument("nhc bath: fictitious masses must be > 0");
    if (dof < 1) throw std::invalid_argument("nhc bath: thermostatted dof count g must be >= 1");
    if (!(temperature > 0.0) || !std::isfinite(temperature))
      throw std::invalid_argument("nhc bath: temperature must be > 0");
  }

  double oscillator_freq() const { return oscillator_freq_; }
  double coupling() const { return coupling_; }
  double mass_eta1() const { return mass_eta1_; }
  double mass_eta2() const { return mass_eta2_; }
  int dof() const { return dof_; }
  double temperature() const { return temperature_; }
  double oscillator_mass() const { return 1.0; }

 private:
  double oscillator_freq_;
  double coupling_;
  double mass_eta1_;
  double mass_eta2_;
  int dof_;
  double temperature_;
};

/// Single-oscillator bath whose frequency and coupling are the N = 1 limit
/// of the Ohmic discretisation with the same (xi, w_max).
inline NHCBathParams nhc_bath_from_ohmic(double kondo, double cutoff, double temperature, double mass_eta1 = 1.0,
                                         double mass_eta2 = 1.0, int dof = 1) {
  const OhmicBath single = build_ohmic_bath(1, kondo, cutoff);
  return NHCBathParams(single.freqs()[0], single.couplings()[0], mass_eta1, mass_eta2, dof, temperature);
}

struct NHCBathPhase {
  double R = 0.0;
  double P = 0.0;
  double eta1 = 0.0;
  double eta2 = 0.0;
  double p_eta1 = 0.0;
  double p_eta2 = 1.0;

  bool finite() const {
    return std::isfinite(R) && std::isfinite(P) && std::isfinite(eta1) && std::isfinite(eta2) &&
           std::isfinite(p_eta1) && std::isfinite(p_eta2);
  }
  friend bool operator==(const NHCBathPhase&, const NHCBathPhase&) = default;
};

struct NHCForces {
  double system_add = 0.0;
  double oscillator = 0.0;
};

inline NHCForces nhc_bath_forces(const SystemPhase& x, const NHCBathPhase& b, const NHCBathParams& bath) {
  const double w = bath.oscillator_freq();
  return {bath.coupling() * b.R, -w * w * b.R + bath.coupling() * (x.q1 + x.q2)};
}

struct NHCDerivatives {
  double d_eta1 = 0.0;
  double d_eta2 = 0.0;
  double d_p_eta1 = 0.0;
  double d_p_eta2 = 0.0;
  double drag = 0.0;  // contribution to dP/dt of the bath oscillator
};

/// Thermostat part of the chain equations; acts on the bath oscillator only.
inline NHCDerivatives nhc_thermostat_derivatives(const NHCBathPhase& b, const NHCBathParams& bath) {
  const double T = bath.temperature();
  const double v1 = b.p_eta1 / bath.mass_eta1();
  const double v2 = b.p_eta2 / bath.mass_eta2();
  NHCDerivatives d;
  d.d_eta1 = v1;
  d.d_eta2 = v2;
  d.d_p_eta1 = (b.P * b.P / bath.oscillator_mass() - bath.dof() * T) - v2 * b.p_eta1;
  d.d_p_eta2 = b.p_eta1 * b.p_eta1 / bath.mass_eta1() - T;
  d.drag = -v1 * b.P;
  return d;
}

/// Extended energy that the chain dynamics conserves when the Hamiltonian
/// part is time independent: physical energy plus thermostat kinetic terms
/// plus g T eta1 + T eta2.
inline double nhc_extended_energy(double t, const SystemPhase& x, const NHCBathPhase& b, const SystemParams& sys,
                                  const NHCBathParams& bath) {
  const double w = bath.oscillator_freq();
  const double T = bath.temperature();
  double e = system_energy(t, x, sys);
  e += 0.5 * b.P * b.P + 0.5 * w * w * b.R * b.R - bath.coupling() * b.R * (x.q1 + x.q2);
  e += 0.5 * b.p_eta1 * b.p_eta1 / bath.mass_eta1() + 0.5 * b.p_eta2 * b.p_eta2 / bath.mass_eta2();
  e += bath.dof() * T * b.eta1 + T * b.eta2;
  return e;
}

inline double ohmic_total_energy(double t, const SystemPhase& x, const OhmicBathPhase& b, const SystemParams& sys,
                                 const OhmicBath& bath) {
  double e = system_energy(t, x, sys);
  const auto w2 = bath.freqs_sq();
  for (std::size_t j = 0; j < bath.size(); ++j) e += 0.5 * b.P[j] * b.P[j] + 0.5 * w2[j] * b.R[j] * b.R[j];
  e -= (x.q1 + x.q2) * detail::ohmic_pull(bath.couplings(), b.R);
  return e;
}

}  // namespace sqz
