#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "scatlab/geometry.hpp"
#include "scatlab/grid.hpp"
#include "scatlab/kernels.hpp"
#include "scatlab/source.hpp"

namespace scatlab {

enum class NodeKind : std::uint8_t { exterior, band, interior, outer };

// Node partition: outer square edge, exterior (sd > 0), band (sd <= 0 with an exterior
// 4-neighbour), interior (the rest of M).
std::vector<NodeKind> classify_nodes(const Grid& grid, const Boundary& boundary);

struct Operator {
  std::vector<double> ax, ay, cx, cy, wgt, sqrt_g;
  bool cross = false;
  StencilArrays arrays(int n) const {
    return {ax.data(), ay.data(), cx.data(), cy.data(), wgt.data(), n, cross};
  }
};

Operator build_full_operator(const MetricModel& model, const Grid& grid);
// Only faces touching an exterior node carry coefficients; a face whose midpoint lies
// in M takes the metric of its exterior endpoint, so g is never evaluated inside M.
Operator build_exterior_operator(const MetricModel& exterior, const Grid& grid,
                                 const std::vector<NodeKind>& kind);

// Discrete leapfrog energy between steps (prev, cur).
double discrete_energy(const Operator& op, const Grid& grid, const std::vector<double>& prev,
                       const std::vector<double>& cur);

struct BoundaryTrace {
  std::vector<double> s;     // arclength of each sample point
  std::vector<Vec2> points;
  double T0 = 0, dt = 0;
  long steps = 0;            // rows: t_n = T0 + n dt, n = 0 .. steps - 1
  std::vector<double> values;  // row-major (time x point)
  std::string config_hash;
  double perimeter = 0;

  std::size_t count() const { return points.size(); }
  double at(long n, std::size_t k) const { return values[static_cast<std::size_t>(n) * count() + k]; }
  // Linear interpolation in time and periodic arclength.
  double sample(double t, double s) const;
};

std::vector<double> trace_arclengths(const Boundary& boundary, int count);

struct FieldHistory {
  Grid grid;
  double T0 = 0;
  long last_step = 0;
  std::map<long, std::vector<double>> steps;
  double time_of(long n) const { return T0 + n * grid.dt; }
};

struct SigmaSnapshot {
  double t0_requested = 0, t0 = 0;
  long step = 0;
  std::vector<double> v, vt;
};

SigmaSnapshot snapshot_sigma(const FieldHistory& history, double t0);

class InstabilityError : public std::runtime_error {
 public:
  explicit InstabilityError(const std::string& what) : std::runtime_error(what) {}
};

struct SolveOptions {
  double T0 = -0.75, T = 3.0;
  std::vector<double> snapshot_times;
  std::vector<long> keep_steps;  // extra steps stored verbatim
  int trace_points = 512;
  int check_every = 100;
  bool record_energy = false;
};

struct FullSolution {
  FieldHistory history;
  BoundaryTrace trace;
  std::vector<double> energy;  // per step when requested
  double forcing_end = 0;
};

FullSolution solve_full(const MetricModel& model, const Forcing& forcing, const Grid& grid,
                        const SolveOptions& opt);

// Re-propagation in Omega with Dirichlet data chi(t) * trace on dM and zero on the outer edge.
// Band nodes take the boundary value (first order) or, with extrapolate, the linear
// extension through the boundary point and an exterior point 2h out along the normal.
class ExteriorSolver {
 public:
  ExteriorSolver(const MetricModel& exterior, const Grid& grid, const BoundaryTrace& trace,
                 bool extrapolate = true);

  // forcing, when given, is applied on exterior nodes only (the part of a designed source
  // that straddles dM and so cannot be carried by the boundary data).
  FieldHistory solve(const std::function<double(double)>& chi, double T0, double T,
                     const std::vector<double>& snapshot_times,
                     const std::vector<long>& keep_steps = {},
                     const Forcing* forcing = nullptr) const;

  const std::vector<NodeKind>& kinds() const { return kind_; }
  const Grid& grid() const { return grid_; }
  const Operator& op() const { return op_; }

 private:
  Grid grid_;
  const BoundaryTrace* trace_;
  std::vector<NodeKind> kind_;
  Operator op_;
  struct BandNode {
    std::size_t node;
    double s;
    double ratio;  // depth / 2h, 0 for first-order
    std::array<std::size_t, 4> q;
    std::array<double, 4> w;
  };
  std::vector<BandNode> band_;
};

FieldHistory solve_exterior(const MetricModel& exterior, const BoundaryTrace& trace,
                            const Grid& grid, double T0, double T,
                            const std::vector<double>& snapshot_times,
                            const std::function<double(double)>& chi = {});

double bilinear(const Grid& grid, const std::vector<double>& field, const Vec2& x);

}  // namespace scatlab
