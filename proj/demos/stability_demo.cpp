// Prints a coarse ASCII stability chart: '#' marks parametrically unstable cells.

#include <cstdio>

#include "sqz/stability.hpp"

int main() {
  sqz::StabilityWindow w;
  w.nx = 80;
  w.ny = 40;
  const sqz::StabilityMap map = sqz::stability_map(w, 1024);
  for (std::size_t iy = w.ny; iy-- > 0;) {
    for (std::size_t ix = 0; ix < w.nx; ++ix) std::putchar(map.at(ix, iy).unstable ? '#' : '.');
    std::putchar('\n');
  }
  const sqz::StabilityCell op = sqz::classify_point(6.173, 30.864);
  std::printf("operating point |trace| = %.4f (%s)\n", op.abs_trace, op.unstable ? "unstable" : "stable");
  return 0;
}
