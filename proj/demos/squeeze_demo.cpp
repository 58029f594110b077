// Small isolated ensemble next to the exact relative-mode variance.

#include <cstdio>

#include "sqz/covariance.hpp"
#include "sqz/ensemble.hpp"

int main() {
  sqz::RunConfig cfg;
  cfg.model.bath = sqz::BathKind::Isolated;
  cfg.model.temperature = 1.0;
  cfg.integrator.n_steps = 2000;
  cfg.integrator.stride = 50;
  cfg.n_mc = 2000;
  cfg.seed = 7;

  const sqz::RunResult r = sqz::run_ensemble(cfg);
  const auto exact = sqz::mode2_variance_exact(cfg.model.system, cfg.model.temperature,
                                               sqz::TimeGrid::from(cfg.integrator));

  std::printf("%8s %12s %12s %12s\n", "t'", "var_q2(MC)", "SE", "exact");
  for (std::size_t i = 0; i < r.series.size(); ++i)
    std::printf("%8.2f %12.5f %12.5f %12.5f\n", r.series.time(i), r.series.variance(i, sqz::Coord::Q2),
                r.series.se(i, sqz::Coord::Q2), exact.var_q[i]);
  return 0;
}
