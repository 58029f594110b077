#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sqz/model.hpp"

using namespace sqz;

TEST(SystemParams, ReferenceValues) {
  const SystemParams s = SystemParams::reference();
  EXPECT_DOUBLE_EQ(s.mass(), 1.0);
  EXPECT_DOUBLE_EQ(s.spring(), 1.25);
  EXPECT_DOUBLE_EQ(s.coupling_amplitude(), 2.5);
  EXPECT_DOUBLE_EQ(s.drive_freq(), 0.45);
  EXPECT_NEAR(s.omega(), std::sqrt(1.25), 1e-15);
}

TEST(SystemParams, RejectsInvalid) {
  EXPECT_THROW(SystemParams(0.0, 1.25, 2.5, 0.45), std::invalid_argument);
  EXPECT_THROW(SystemParams(1.0, -1.0, 2.5, 0.45), std::invalid_argument);
  EXPECT_THROW(SystemParams(1.0, 1.25, -2.5, 0.45), std::invalid_argument);
  EXPECT_THROW(SystemParams(1.0, 1.25, 2.5, 0.0), std::invalid_argument);
  EXPECT_THROW(SystemParams(1.0, 1.25, 2.5, 0.45, -1.0), std::invalid_argument);
  EXPECT_THROW(SystemParams(NAN, 1.25, 2.5, 0.45), std::invalid_argument);
}

TEST(Coupling, SinusoidalAndStatic) {
  const SystemParams s = SystemParams::reference();
  EXPECT_DOUBLE_EQ(coupling_freq_sq(0.0, s), 0.0);
  const double t = std::numbers::pi / (2.0 * 0.45);
  EXPECT_NEAR(coupling_freq_sq(t, s), 6.25, 1e-12);
  const double t2 = 1.7;
  EXPECT_NEAR(coupling_freq_sq(t2, s), std::pow(2.5 * std::sin(0.45 * t2), 2), 1e-14);
  const SystemParams st = s.with_drive(DriveMode::Static);
  EXPECT_DOUBLE_EQ(coupling_freq_sq(0.0, st), 6.25);
  EXPECT_DOUBLE_EQ(coupling_freq_sq(123.4, st), 6.25);
}

TEST(Forces, MatchNegativeEnergyGradient) {
  const SystemParams s(1.7, 0.9, 1.3, 0.6);
  const SystemPhase x{0.3, -0.7, 0.2, 0.5};
  const double t = 2.3;
  const ForcePair f = system_force(t, x, s);
  const double h = 1e-6;
  auto energy_at = [&](double q1, double q2) { return system_energy(t, {q1, q2, x.p1, x.p2}, s); };
  const double d1 = -(energy_at(x.q1 + h, x.q2) - energy_at(x.q1 - h, x.q2)) / (2 * h);
  const double d2 = -(energy_at(x.q1, x.q2 + h) - energy_at(x.q1, x.q2 - h)) / (2 * h);
  EXPECT_NEAR(f.f1, d1, 1e-8);
  EXPECT_NEAR(f.f2, d2, 1e-8);
}

TEST(Forces, EqualDisplacementFeelsNoCoupling) {
  const SystemParams s = SystemParams::reference().with_drive(DriveMode::Static);
  const ForcePair f = system_force(0.0, {0.4, 0.4, 0.0, 0.0}, s);
  EXPECT_DOUBLE_EQ(f.f1, -1.25 * 0.4);
  EXPECT_DOUBLE_EQ(f.f2, -1.25 * 0.4);
}

TEST(NormalModes, RoundTripAndValues) {
  const SystemPhase x{1.0, 0.0, 0.5, -0.5};
  const NormalModePhase y = to_normal_modes(x);
  EXPECT_NEAR(y.q1, 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(y.q2, 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(y.p1, 0.0, 1e-15);
  EXPECT_NEAR(y.p2, 1.0 / std::sqrt(2.0), 1e-15);
  const SystemPhase back = from_normal_modes(y);
  EXPECT_NEAR(back.q1, x.q1, 1e-15);
  EXPECT_NEAR(back.q2, x.q2, 1e-15);
  EXPECT_NEAR(back.p1, x.p1, 1e-15);
  EXPECT_NEAR(back.p2, x.p2, 1e-15);
}

TEST(NormalModes, Frequencies) {
  const SystemParams s = SystemParams::reference();
  const ModeFrequencies f0 = normal_mode_freqs(0.0, s);
  EXPECT_NEAR(f0.omega1, std::sqrt(1.25), 1e-15);
  EXPECT_NEAR(f0.omega2, std::sqrt(1.25), 1e-15);
  const double t = 3.0;
  const double wt2 = std::pow(2.5 * std::sin(0.45 * t), 2);
  EXPECT_NEAR(normal_mode_freqs(t, s).omega2, std::sqrt(1.25 + 2.0 * wt2), 1e-14);
}

TEST(NormalModes, EnergySplitsIntoModes) {
  const SystemParams s(1.0, 1.25, 2.5, 0.45);
  const SystemPhase x{0.3, -1.1, 0.7, 0.2};
  const double t = 0.8;
  const NormalModePhase y = to_normal_modes(x);
  const ModeFrequencies f = normal_mode_freqs(t, s);
  const double e_modes = 0.5 * (y.p1 * y.p1 + f.omega1 * f.omega1 * y.q1 * y.q1) +
                         0.5 * (y.p2 * y.p2 + f.omega2 * f.omega2 * y.q2 * y.q2);
  EXPECT_NEAR(system_energy(t, x, s), e_modes, 1e-13);
}

TEST(Units, TemperatureConversion) {
  // hbar * omega_c / k_B written out from the CODATA constants.
  const double kelvin_per_unit = 1.054571817e-34 * 3.93e13 / 1.380649e-23;
  EXPECT_NEAR(to_physical_units(1.0, Quantity::Temperature, 3.93e13), kelvin_per_unit, 1e-9);
  EXPECT_NEAR(to_physical_units(1.037, "temperature", 3.93e13), 311.1, 0.5);
}

TEST(Units, OtherQuantities) {
  EXPECT_NEAR(to_physical_units(2.0, "time", 4.0), 0.5, 1e-15);
  EXPECT_NEAR(to_physical_units(2.0, "frequency", 4.0), 8.0, 1e-15);
  EXPECT_NEAR(to_physical_units(1.0, "energy", 3.93e13), 1.054571817e-34 * 3.93e13, 1e-40);
  EXPECT_THROW(to_physical_units(1.0, "length", 3.93e13), std::invalid_argument);
  EXPECT_THROW(to_physical_units(1.0, "time", 0.0), std::invalid_argument);
}
