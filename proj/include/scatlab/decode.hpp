#pragma once

#include <functional>
#include <string>
#include <vector>

#include "scatlab/pairing.hpp"

namespace scatlab {

struct Probe {
  Vec2 y, eta;
  double offset = 0;
  double tau_ext = 0;  // exterior lead time to dM
  Vec2 entry_x, entry_xi;
};

// Backward exterior flow from (x, -xi) for each offset. Offsets whose ray leaves
// B(0, R), re-enters M, or fails the first-hit check (1e-6) are dropped.
std::vector<Probe> make_probes(const MetricModel& exterior, const Vec2& x, const Vec2& xi,
                               const std::vector<double>& offsets, double R = kInf);

// S(t0) for one beam at one eps.
using SFunction = std::function<SValue(double)>;
// S(t0) for the beam started at (y, eta).
using SFactory = std::function<SFunction(const Vec2& y, const Vec2& eta, double eps)>;

// Oracle factory: beams on the full metric, tracked up to the given horizon.
SFactory oracle_factory(const MetricModel& model, const SourceSet& set, double horizon);

enum class DecodeRoute { m_A, known_lattice };

struct HitEvent {
  double t = 0;
  SValue S;
  double beta = 0;
  int k = 0;
  double confidence = 0;
  bool merged = false;
  bool decodable = false;
};

struct ScanOptions {
  double eps = 0.02;
  double t_start = 0, t_end = 0;
  double step_factor = 0.25;   // scan step in units of sqrt(eps)
  double merge_factor = 2.0;   // peaks closer than this * sqrt(eps) merge
  double threshold = 0.0;      // |S| must exceed this
  int golden_iters = 24;
};

// Local maxima of |S| on the scan grid, refined by golden section; not yet decoded.
std::vector<HitEvent> scan_hits(const SFunction& S, const ScanOptions& opt);

struct Lattice {
  double lambda = 1.5;
  int first_index = 1;
  int count = 12;
  double B = 3.0;
};

struct DecodedIndex {
  int k = 0;
  double beta = 0;
  double residual = 0;  // log_lambda beta
  bool decodable = false;
};

DecodedIndex decode_value(const SValue& S, const Lattice& lat, DecodeRoute route);
void decode_hit(HitEvent& hit, const Lattice& lat, DecodeRoute route);

struct TauResult {
  double tau = kInf;
  int probe = -1;
  int hit = -1;
};

// min over probes of t* - tau_ext among decodable hits.
TauResult recover_tau(const std::vector<Probe>& probes,
                      const std::vector<std::vector<HitEvent>>& hits);

struct DirectionOptions {
  double half_width = 0.1;  // fan half-width (rad)
  int m = 3;                // 2m+1 directions
  int golden_iters = 24;
};

struct FanSample {
  double phi = 0;   // fan angle of the pass-through direction
  double s = 0;     // boundary arclength of the source
  double ell = 0;   // peak time from the fan base
  int k = 0;
};

struct DirectionResult {
  Vec2 zeta = Vec2::Constant(std::numeric_limits<double>::quiet_NaN());
  Vec2 z = Vec2::Constant(std::numeric_limits<double>::quiet_NaN());  // interpolated exit
  double dl_ds = std::numeric_limits<double>::quiet_NaN();
  double ell0 = std::numeric_limits<double>::quiet_NaN();  // total time at phi = 0
  std::vector<FanSample> samples;
  bool ok = false;
  bool grazing = false;      // |dl/ds| clamped at 1
  bool c4_failure = false;   // fan exits not monotone
  double fit_residual = 0;
};

// Fan over eta around the base probe; each pass-through sample comes from maximising the
// peak log|S| over the fan angle.
DirectionResult recover_exit_direction(const Boundary& boundary, const SourceSet& set,
                                       const Probe& base, const SFactory& factory,
                                       const ScanOptions& scan, const Lattice& lat,
                                       DecodeRoute route, const DirectionOptions& opt);

// ell as a function of exit arclength: local quadratic (or secant) slope at s0.
double fan_slope(const std::vector<FanSample>& samples, double s0, double perimeter,
                 double* residual = nullptr);

struct DecodeOptions {
  Lattice lattice;
  DecodeRoute route = DecodeRoute::m_A;
  std::vector<double> eps_schedule{0.08, 0.04, 0.02};
  std::vector<double> offsets{0.1, 0.2, 0.3};
  double start_margin = 2.0;  // scan starts tau_ext + start_margin * sqrt(eps)
  double max_travel = 3.0;    // scan ends tau_ext + max_travel
  double step_factor = 0.25;
  double threshold = 0.0;
  int golden_iters = 24;
  bool directions = true;
  // keep a final-eps hit only if every earlier eps has a decodable hit with the same index
  // within schedule_match * sqrt(eps) on the same probe
  bool schedule_filter = true;
  double schedule_match = 2.0;
  DirectionOptions fan;
  double R = kInf;
};

struct RecoveredEntry {
  Vec2 x, xi;
  double tau_hat = kInf;
  double tau_interp = std::numeric_limits<double>::quiet_NaN();
  Vec2 z_hat = Vec2::Constant(std::numeric_limits<double>::quiet_NaN());
  Vec2 zeta_hat = Vec2::Constant(std::numeric_limits<double>::quiet_NaN());
  int k_hat = 0;
  double confidence = 0;
  bool index_stable = true;
  DirectionResult direction;
  std::vector<Probe> probes;
  std::vector<std::vector<HitEvent>> hits;  // last eps, per probe, after the schedule filter
  std::vector<double> tau_by_eps;
  std::vector<int> k_by_eps;
  std::vector<std::string> notes;
};

RecoveredEntry decode_entry(const MetricModel& exterior, const SourceSet& set, const Vec2& x,
                            const Vec2& xi, const SFactory& factory, const DecodeOptions& opt);

struct ComparedEntry {
  RecoveredEntry rec;
  GroundTruthEntry truth;
  double tau_err = kInf;
  double z_err = kInf;
  double zeta_err = kInf;  // rad
  double chord = 0;
};

struct Summary {
  std::size_t count = 0, decoded = 0, transversal = 0, c4_flags = 0;
  double tau_err_max = 0, tau_err_median = 0, z_err_max = 0, zeta_err_max = 0, zeta_err_median = 0;
  double max_gap = 0;
  std::size_t speed_bound_violations = 0;
};

struct RecoveredScattering {
  std::vector<ComparedEntry> entries;
  Summary summary;
};

RecoveredScattering assemble_and_compare(std::vector<RecoveredEntry> entries,
                                         const MetricModel& model, const SourceSet& set);

double angle_between(const Vec2& a, const Vec2& b);

}  // namespace scatlab
