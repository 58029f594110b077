#pragma once

// Thermal initial conditions. Quantum mode draws from the Wigner function of
// a thermal harmonic oscillator; classical mode from the canonical
// distribution. Both are independent zero-mean Gaussians per mode.
//
// Stream contract (stable across releases):
//   stream seed   = splitmix64(master ^ splitmix64(index + 0x632be59bd9b4e019))
//   engine        = std::mt19937_64(stream seed)
//   uniform (0,1] = ((engine() >> 11) + 1) * 2^-53
//   normal        = Box-Muller, cosine branch first, sine branch cached
// Draw order per trajectory: system (q~1, p~1, q~2, p~2), then the bath
// oscillators in index order as (R_j, P_j).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>

#include "sqz/bath.hpp"
#include "sqz/model.hpp"

namespace sqz {

enum class SamplingMode { QuantumWigner, ClassicalCanonical };

inline const char* to_string(SamplingMode m) {
  return m == SamplingMode::QuantumWigner ? "quantum" : "classical";
}

struct ThermalWidths {
  double var_q = 0.0;
  double var_p = 0.0;
  double sigma_q() const { return std::sqrt(var_q); }
  double sigma_p() const { return std::sqrt(var_p); }
};

/// Position/momentum variances of a thermal oscillator (hbar = k_B = 1).
/// Quantum: var_q = 1 / (2 m w tanh(w / 2T)), var_p = m w / (2 tanh(w / 2T)).
inline ThermalWidths thermal_widths(double mass, double omega, double temperature, SamplingMode mode) {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw std::invalid_argument("thermal_widths: temperature must be > 0");
  if (!(mass > 0.0)) throw std::invalid_argument("thermal_widths: mass must be > 0");
  if (!(omega > 0.0)) throw std::invalid_argument("thermal_widths: frequency must be > 0");
  if (mode == SamplingMode::ClassicalCanonical)
    return {temperature / (mass * omega * omega), mass * temperature};
  const double th = std::tanh(omega / (2.0 * temperature));
  return {1.0 / (2.0 * mass * omega * th), mass * omega / (2.0 * th)};
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

/// One independent random stream per trajectory index.
class StreamRng {
 public:
  StreamRng(std::uint64_t master_seed, std::uint64_t stream_index)
      : engine_(derive_stream_seed(master_seed, stream_index)) {}

  double uniform() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double phi = 2.0 * std::numbers::pi * uniform();
    cached_ = r * std::sin(phi);
    has_cached_ = true;
    const double z = r * std::cos(phi);
    if (!std::isfinite(z)) throw std::runtime_error("StreamRng: non-finite normal deviate");
    return z;
  }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

/// Draws both normal modes with the given frequencies and maps back to the
/// oscillator coordinates.
inline SystemPhase sample_normal_modes(StreamRng& rng, double mass, double omega1, double omega2, double temperature,
                                       SamplingMode mode) {
  const ThermalWidths w1 = thermal_widths(mass, omega1, temperature, mode);
  const ThermalWidths w2 = thermal_widths(mass, omega2, temperature, mode);
  NormalModePhase y;
  y.q1 = w1.sigma_q() * rng.normal();
  y.p1 = w1.sigma_p() * rng.normal();
  y.q2 = w2.sigma_q() * rng.normal();
  y.p2 = w2.sigma_p() * rng.normal();
  return from_normal_modes(y);
}

/// Thermal state of the undriven system: the coupling vanishes at t = 0, so
/// both modes sample with omega_1.
inline SystemPhase sample_system(StreamRng& rng, const SystemParams& sys, double temperature, SamplingMode mode) {
  const ModeFrequencies f = normal_mode_freqs(0.0, sys);
  return sample_normal_modes(rng, sys.mass(), f.omega1, f.omega2, temperature, mode);
}

inline OhmicBathPhase sample_ohmic_bath(StreamRng& rng, const OhmicBath& bath, double temperature, SamplingMode mode) {
  OhmicBathPhase b;
  b.R.resize(bath.size());
  b.P.resize(bath.size());
  const auto w = bath.freqs();
  for (std::size_t j = 0; j < bath.size(); ++j) {
    const ThermalWidths tw = thermal_widths(bath.mass(), w[j], temperature, mode);
    b.R[j] = tw.sigma_q() * rng.normal();
    b.P[j] = tw.sigma_p() * rng.normal();
  }
  return b;
}

struct ChainStart {
  double eta1 = 0.0;
  double eta2 = 0.0;
  double p_eta1 = 0.0;
  double p_eta2 = 1.0;
};

/// Thermal bath oscillator; the chain variables start at fixed values,
/// (0, 0, 0, 1) by default.
inline NHCBathPhase init_nhc_bath(StreamRng& rng, const NHCBathParams& bath, double temperature, SamplingMode mode,
                                  const ChainStart& start = {}) {
  const ThermalWidths tw = thermal_widths(bath.oscillator_mass(), bath.oscillator_freq(), temperature, mode);
  NHCBathPhase b;
  b.R = tw.sigma_q() * rng.normal();
  b.P = tw.sigma_p() * rng.normal();
  b.eta1 = start.eta1;
  b.eta2 = start.eta2;
  b.p_eta1 = start.p_eta1;
  b.p_eta2 = start.p_eta2;
  return b;
}

}  // namespace sqz
