#pragma once

#include <string>
#include <vector>

#include "scatlab/geometry.hpp"
#include "scatlab/grid.hpp"

namespace scatlab {

// Active sources j = first_index .. first_index + count - 1 with a_j = lambda^{-lambda^j}.
struct SourceSet {
  double lambda = 1.5;
  int first_index = 1;
  std::vector<int> index;           // j per active source
  std::vector<double> s;            // boundary arclength
  std::vector<Vec2> x;
  std::vector<double> log_weight;   // base-lambda logarithm, -lambda^j

  std::size_t size() const { return x.size(); }
  double ln_weight(std::size_t k) const;  // natural logarithm of a_j
  double weight(std::size_t k) const;     // throws if a_j underflows
  // Largest boundary-arclength gap between consecutive active sources.
  double max_gap(double perimeter) const;
  int position_of(int j) const;  // active slot for index j, -1 if not active
};

SourceSet generate_sources(double lambda, int count, const Boundary& boundary, int first_index = 1);

// Lattice point -lambda^j.
double lattice_point(int j, double lambda);

struct ModResult {
  double r = 0;        // s - a*
  int k = 1;           // a* = -lambda^k
  bool in_range = true;
};

ModResult m_A(double s, double lambda);

// Half the smaller gap around -lambda^k exceeds B.
bool in_band(int k, double lambda, double B);
int first_in_band(double lambda, double B);

struct SourceStencil {
  std::size_t source = 0;
  std::vector<std::size_t> node;
  std::vector<double> phi;  // sum phi h^2 = 1
};

struct Forcing {
  std::vector<SourceStencil> stencils;
  std::vector<double> amplitude;  // a_j per stencil
  double sigma_x = 0, sigma_t = 0;
  double T0 = 0, dt = 0;
  long n_first = 0;               // first step with nonzero time profile
  std::vector<double> psi;        // psi(t_n) for n = n_first ..; sum psi dt = 1
  std::vector<std::string> warnings;

  double profile(long n) const {
    long k = n - n_first;
    return k >= 0 && k < static_cast<long>(psi.size()) ? psi[k] : 0.0;
  }
  double t_end() const { return T0 + (n_first + static_cast<long>(psi.size())) * dt; }
};

// Optional subset selects active slots; empty means all. With confine, bumps keep only
// nodes in the closed region (sd <= 0) and are renormalized there.
Forcing mollify_source(const SourceSet& set, double sigma_x, double sigma_t, const Grid& grid,
                       double T0, const std::vector<std::size_t>& subset = {},
                       const Boundary* confine = nullptr);

}  // namespace scatlab
