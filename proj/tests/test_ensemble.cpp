#include <gtest/gtest.h>

#include <cmath>

#include "sqz/ensemble.hpp"

using namespace sqz;

namespace {

RunConfig small_config(BathKind kind) {
  RunConfig cfg;
  cfg.model.bath = kind;
  cfg.model.bath_size = 20;
  cfg.integrator.n_steps = 1000;
  cfg.integrator.stride = 20;
  cfg.n_mc = 300;
  cfg.seed = 123;
  return cfg;
}

void expect_same_series(const VarianceSeries& a, const VarianceSeries& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (Coord c : kAllCoords) {
      if (tol == 0.0)
        ASSERT_EQ(a.variance(i, c), b.variance(i, c));
      else
        ASSERT_NEAR(a.variance(i, c), b.variance(i, c), tol);
    }
}

}  // namespace

TEST(RunConfig, Validation) {
  RunConfig cfg = small_config(BathKind::Isolated);
  EXPECT_NO_THROW(cfg.validate());
  cfg.n_mc = 1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = small_config(BathKind::Isolated);
  cfg.model.temperature = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = small_config(BathKind::NHC);
  cfg.model.mass_eta1 = -1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = small_config(BathKind::Isolated);
  cfg.snapshot_indices = {51};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  EXPECT_EQ(parse_bath_kind("nhc"), BathKind::NHC);
  EXPECT_THROW(parse_bath_kind("lorentz"), std::invalid_argument);
}

TEST(Ensemble, ThreadCountDoesNotChangeResults) {
  RunConfig cfg = small_config(BathKind::Ohmic);
  cfg.threads = 1;
  const RunResult a = run_ensemble(cfg);
  cfg.threads = 4;
  const RunResult b = run_ensemble(cfg);
  expect_same_series(a.series, b.series, 0.0);
  EXPECT_EQ(a.completed, 300u);
  EXPECT_EQ(a.window_second_moment[1].mean, b.window_second_moment[1].mean);
}

TEST(Ensemble, SmallerEnsembleIsPrefix) {
  RunConfig cfg = small_config(BathKind::NHC);
  cfg.snapshot_indices = {0, 50};
  cfg.n_mc = 250;
  const RunResult big = run_ensemble(cfg);
  cfg.n_mc = 70;
  const RunResult small = run_ensemble(cfg);
  for (std::size_t idx : {0u, 50u}) {
    const auto& a = small.snapshots.at(idx);
    const auto& b = big.snapshots.at(idx);
    ASSERT_EQ(a.size(), 70u);
    ASSERT_EQ(b.size(), 250u);
    for (std::size_t k = 0; k < a.size(); ++k) ASSERT_EQ(a[k], b[k]);
  }
}

TEST(Ensemble, ZeroCouplingMatchesIsolated) {
  RunConfig iso = small_config(BathKind::Isolated);
  RunConfig ohm = small_config(BathKind::Ohmic);
  ohm.model.kondo = 0.0;
  ohm.model.bath_size = 200;
  expect_same_series(run_ensemble(iso).series, run_ensemble(ohm).series, 1e-12);
}

TEST(Ensemble, RelativeModeSameForAllBaths) {
  // Same seed: identical system draws, and mode 2 never sees the bath.
  const RunResult iso = run_ensemble(small_config(BathKind::Isolated));
  const RunResult ohm = run_ensemble(small_config(BathKind::Ohmic));
  const RunResult nhc = run_ensemble(small_config(BathKind::NHC));
  for (std::size_t i = 0; i < iso.series.size(); ++i) {
    ASSERT_NEAR(iso.series.variance(i, Coord::Q2), ohm.series.variance(i, Coord::Q2), 1e-10);
    ASSERT_NEAR(iso.series.variance(i, Coord::Q2), nhc.series.variance(i, Coord::Q2), 1e-10);
  }
}

TEST(Ensemble, AbortsWhenTrajectoriesBlowUp) {
  RunConfig cfg = small_config(BathKind::Isolated);
  cfg.integrator.dt = 1.0;  // far beyond the Verlet stability limit
  cfg.integrator.n_steps = 3000;
  cfg.integrator.stride = 100;
  cfg.n_mc = 64;
  try {
    run_ensemble(cfg);
    FAIL() << "expected EnsembleAbort";
  } catch (const EnsembleAbort& e) {
    EXPECT_GT(e.failures(), 0u);
    EXPECT_NE(std::string(e.what()).find("first failure"), std::string::npos);
  }
}

TEST(Ensemble, ReportHasWindowStatistics) {
  const RunResult r = run_ensemble(small_config(BathKind::Isolated));
  EXPECT_GT(r.window_se(Coord::Q2), 0.0);
  EXPECT_GT(r.window_mean(Coord::Q2), 0.0);
  // The mean of per-trajectory time averages of q^2 equals the window
  // average of the second moment.
  double second = 0.0;
  for (std::size_t i = 0; i < r.series.size(); ++i) {
    const auto& m = r.series.moments(i, Coord::Q2);
    second += m.variance() + m.mean * m.mean;
  }
  EXPECT_NEAR(r.window_second_moment[1].mean, second / r.series.size(), 1e-10);
}

TEST(Sweep, OracleOnlyRows) {
  RunConfig cfg = small_config(BathKind::Ohmic);
  SweepOptions opt;
  opt.oracle_only = true;
  const SweepResult s = temperature_sweep(cfg, {0.5, 1.0, 3.0}, opt);
  ASSERT_EQ(s.rows.size(), 3u);
  for (const auto& r : s.rows) {
    EXPECT_FALSE(r.mc_run);
    EXPECT_GT(r.oracle_min, 0.0);
  }
  EXPECT_LT(s.rows[0].oracle_window_mean, s.rows[2].oracle_window_mean);
  EXPECT_TRUE(s.oracle_threshold.has_value());
}

TEST(Sweep, SingleTemperatureHasNoThreshold) {
  SweepOptions opt;
  opt.oracle_only = true;
  const SweepResult s = temperature_sweep(small_config(BathKind::Isolated), {1.0}, opt);
  EXPECT_EQ(s.rows.size(), 1u);
  EXPECT_FALSE(s.threshold_defined);
}

TEST(Sweep, RejectsBadLists) {
  const RunConfig cfg = small_config(BathKind::Isolated);
  EXPECT_THROW(temperature_sweep(cfg, {}), std::invalid_argument);
  EXPECT_THROW(temperature_sweep(cfg, {1.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(temperature_sweep(cfg, {1.0, 0.9}), std::invalid_argument);
  EXPECT_THROW(temperature_sweep(cfg, {-1.0, 0.9}), std::invalid_argument);
}

TEST(Sweep, MonteCarloRowsUseDistinctSeeds) {
  RunConfig cfg = small_config(BathKind::Isolated);
  cfg.n_mc = 128;
  const SweepResult s = temperature_sweep(cfg, {0.5, 5.0});
  ASSERT_EQ(s.rows.size(), 2u);
  EXPECT_TRUE(s.rows[0].mc_run);
  EXPECT_NE(s.rows[0].seed, s.rows[1].seed);
  EXPECT_EQ(s.rows[0].seed, temperature_seed(cfg.seed, 0.5));
  EXPECT_EQ(s.rows[0].series.size(), 51u);
  // Cold: squeezed on average; hot: clearly not.
  EXPECT_TRUE(s.rows[0].significant);
  EXPECT_FALSE(s.rows[1].significant);
  EXPECT_TRUE(s.threshold_defined);
  EXPECT_DOUBLE_EQ(s.threshold, 2.75);
}

TEST(Agreement, IdenticalSeriesPass) {
  const RunResult r = run_ensemble(small_config(BathKind::Isolated));
  const AgreementReport a = compare_series(r.series, r.series);
  EXPECT_TRUE(a.pass());
  for (Coord c : kAllCoords) EXPECT_EQ(a.at(c).max_rel_dev, 0.0);
  VarianceSeries other(3, 1.0);
  EXPECT_THROW(compare_series(r.series, other), std::invalid_argument);
}

TEST(Agreement, BathEquivalenceModeTwoExact) {
  RunConfig cfg = small_config(BathKind::Ohmic);
  cfg.model.bath_size = 50;
  const auto reps = mass_scan(cfg, {0.5, 1.0});
  ASSERT_EQ(reps.size(), 2u);
  for (const auto& a : reps) {
    EXPECT_LT(a.at(Coord::Q2).max_rel_dev, 1e-9);
    EXPECT_LT(a.at(Coord::P2).max_rel_dev, 1e-9);
    EXPECT_TRUE(a.at(Coord::Q2).pass);
  }
  EXPECT_EQ(reps[0].mass_eta, 0.5);
}
