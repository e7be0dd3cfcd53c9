#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "scatlab/geometry.hpp"

namespace scatlab {

// Square [-R,R]^2 sampled with n nodes per side.
struct Grid {
  double R = 3.0;
  double h = 1.0 / 64;
  double dt = 0.5 / 64;
  int n = 0;

  // dt <= 0 selects the CFL default 0.5 h / v_max.
  static Grid make(double R, double h, double dt, double max_speed = 1.0) {
    if (!(R > 0) || !(h > 0)) throw std::invalid_argument("grid: R and h must be positive");
    Grid g;
    g.n = static_cast<int>(std::lround(2 * R / h)) + 1;
    g.h = h;
    g.R = 0.5 * h * (g.n - 1);
    double cfl = 0.5 * h / max_speed;
    g.dt = dt > 0 ? dt : cfl;
    if (g.dt > cfl * (1 + 1e-12))
      throw std::invalid_argument("grid: dt violates CFL bound 0.5 h / v_max");
    return g;
  }

  double coord(int i) const { return -R + i * h; }
  Vec2 node(int i, int j) const { return Vec2(coord(i), coord(j)); }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * n + i; }
  std::size_t size() const { return static_cast<std::size_t>(n) * n; }
};

}  // namespace scatlab
