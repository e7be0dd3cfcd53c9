#pragma once

#include <functional>
#include <vector>

#include "scatlab/beam.hpp"
#include "scatlab/source.hpp"
#include "scatlab/wavesim.hpp"

namespace scatlab {

// Complex number carried as (log|z|, arg z) so that tiny weights survive.
struct SValue {
  double log_abs = -kInf;
  double arg = 0;

  static SValue from(cplx z);
  static SValue from_log(cplx log_z);
  cplx value() const;  // may underflow to 0
  double abs() const { return std::exp(log_abs); }
  bool is_zero() const { return log_abs == -kInf; }
};

// log of a sum of exp(terms), evaluated relative to the largest real part.
SValue log_sum_exp(const std::vector<cplx>& log_terms);

// |a - b| computed in the scale of the larger magnitude.
double distance(const SValue& a, const SValue& b);

enum class SPath { oracle, data };
const char* path_name(SPath p);

struct SEstimate {
  SValue value;
  double eps = 0;
  SPath path = SPath::oracle;
  double error = 0;          // |last - previous| over the schedule
  bool stabilizing = true;   // successive differences non-increasing
  std::vector<double> schedule;
  std::vector<SValue> sequence;
};

// eps^{1/2} sum_j a_j U(t0, x_j) |g|^{1/2}(x_j) along the track's beam, per term in the
// log domain. Terms whose modulus is below 1e-300 of the largest are dropped.
SValue s_oracle(const SourceSet& set, const BeamTrack& track, double t0, double eps);

// Same pairing against the discrete mollified forcing: sum over stencil nodes and time
// samples of a_j psi(t_n) phi(x) U(t0 - t_n, x) |g|^{1/2}(x) h^2 dt.
SValue s_oracle_mollified(const SourceSet& set, const Forcing& forcing, const Grid& grid,
                          const BeamTrack& track, double t0, double eps);

// 1 for t <= t0 - r, smooth ramp to 0 at t0 - r/10.
struct TimeCutoff {
  double t0 = 0, r = 0;
  double operator()(double t) const;
};

// Distance from the cutoff ball of the beam data to dOmega (dM and the outer square).
double support_clearance(const BeamData& bd, const Boundary& boundary, const Grid& grid);

struct SDataOptions {
  double T0 = -0.75;
  double source_end = 0;  // forcing support end; chi must be 1 up to here
  double r = 0;           // cutoff width, <= 0 selects the clearance
  const Forcing* forcing = nullptr;  // designed source; its exterior part is re-applied
  double clearance = 0;   // precomputed beam_clearance, <= 0 recomputes
};

// Distance from the cutoff ball to the nearest non-exterior node (dM band and outer edge).
double beam_clearance(const ExteriorSolver& solver, const BeamData& bd);

struct SDataResult {
  SValue value;
  double t0 = 0;  // snapped to the time grid
  double r = 0;
};

// Exterior re-propagation of chi * trace, then
// eps^{1/2} [<d_t v(t0), w> - <v(t0), d_t w>] with dV = |g|^{1/2} h^2 on Omega.
SDataResult s_data(const ExteriorSolver& solver, const BeamData& bd, double t0,
                   const SDataOptions& opt = {});

// Finite-schedule stand-in for the eps -> 0 limit.
SEstimate s_limit(const std::function<SValue(double)>& provider,
                  const std::vector<double>& schedule, SPath path = SPath::oracle);

}  // namespace scatlab
