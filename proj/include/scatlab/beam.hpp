#pragma once

#include <complex>
#include <vector>

#include "scatlab/geometry.hpp"
#include "scatlab/grid.hpp"

namespace scatlab {

using cplx = std::complex<double>;
using Vec2c = Eigen::Vector2cd;
using Mat2c = Eigen::Matrix2cd;

struct BeamFrame {
  double t = 0;
  Vec2 x;
  Vec2 p;
  Mat2c Y, Z, H;
  cplx u0{1.0, 0.0};
  cplx sqrt_detY{1.0, 0.0};  // branch carried along the flow; u0 = 1 / sqrt_detY
  cplx detY() const { return sqrt_detY * sqrt_detY; }
};

// Frames at a fixed step from t = 0 to T. Intermediate times are reached by one
// partial RK4 step from the frame below, so at(t) agrees with the stored frames.
class BeamTrack {
 public:
  BeamTrack(const MetricModel& model, const PhasePoint& start, double T, double step = 1e-3);

  const std::vector<BeamFrame>& frames() const { return frames_; }
  BeamFrame at(double t) const;
  double horizon() const { return T_; }
  double step() const { return step_; }
  const MetricModel& model() const { return model_; }

 private:
  MetricModel model_;
  double T_, step_;
  std::vector<BeamFrame> frames_;
};

std::vector<BeamFrame> propagate_frame(const MetricModel& model, const PhasePoint& start,
                                       double T, double step = 1e-3);

BeamFrame initial_frame(const PhasePoint& start);
BeamFrame advance_frame(const MetricModel& model, const BeamFrame& f, double dt);

// Time derivatives of the frame data. Second-order rates differentiate the
// Hamiltonian blocks along the flow by central differences of width delta.
struct FrameRates {
  Vec2 xd, xdd, pd, pdd;
  Mat2c Hd, Hdd;
  cplx ud, udd;
  bool second_order = false;
};

FrameRates frame_rates(const MetricModel& model, const BeamFrame& f, bool second_order,
                       double delta = 1e-4);

cplx phase_at(const BeamFrame& f, const Vec2& x);

struct PhaseJet {
  cplx theta, theta_t, theta_tt;
  Vec2c grad;
  Mat2c hess;
};

PhaseJet phase_jet(const BeamFrame& f, const FrameRates& r, const Vec2& x);

// U = eps^{-1/2} exp(i theta / eps) u0.
cplx evaluate_beam(const BeamFrame& f, double eps, const Vec2& x);
// log U on the principal branch of the exponent (no underflow).
cplx log_beam(const BeamFrame& f, double eps, const Vec2& x);

// Gaussian decay constant: 0.8 * (1/2) * min eig Im H.
double decay_constant(const BeamFrame& f);

struct BeamData {
  Vec2 y, eta;
  double eps = 0, cutoff = 0;
  int n = 0;                 // grid nodes per side
  int i0 = 0, i1 = 0;        // node box [i0,i1) x [j0,j1) containing the support
  int j0 = 0, j1 = 0;
  std::vector<cplx> w, wt;   // full grid, zero outside the cutoff ball
};

// Smooth radial cutoff: 1 on r <= radius/2, 0 on r >= radius.
double radial_cutoff(double r, double radius);
// Smooth step, 0 for s <= 0 and 1 for s >= 1.
double smooth_step(double s);

BeamData beam_initial_data(const MetricModel& exterior, const Vec2& y, const Vec2& eta,
                           double eps, double cutoff_radius, const Grid& grid);

// Pointwise (d_t^2 - Delta_g) U and d_t^2 U for a given frame.
struct ResidualSample {
  cplx residual, dtt;
};
ResidualSample beam_residual(const MetricModel& model, const BeamFrame& f, const FrameRates& r,
                             double eps, const Vec2& x, bool with_transport = true);

// Sampling region: times in [t_min, t_max], offsets x - gamma(t) in [-half_width, half_width]^2.
struct ResidualBox {
  double t_min = 0.3, t_max = 1.5;
  double half_width = 0.5;
  int nt = 13, nx = 61;
};

struct ResidualReport {
  std::vector<double> eps;
  std::vector<double> sup_residual, sup_dtt, sup_residual_ablated;
  double slope = 0;            // log sup residual vs log eps
  double relative_slope = 0;   // log (sup residual / sup dtt) vs log eps
  double slope_ablated = 0;
  double relative_slope_ablated = 0;
};

ResidualReport residual_order(const MetricModel& model, const PhasePoint& start,
                              const std::vector<double>& eps_list, const ResidualBox& box = {});

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace scatlab
