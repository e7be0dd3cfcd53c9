#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <atomic>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace scatlab {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Region M. Signed distance is negative inside.
class Boundary {
 public:
  static Boundary disk(const Vec2& center, double radius);
  // sd: signed distance; curve: arclength parametrization of dM (counterclockwise).
  static Boundary custom(std::function<double(const Vec2&)> sd,
                         std::function<Vec2(double)> curve, double perimeter);

  double signed_distance(const Vec2& x) const;
  Vec2 normal(const Vec2& x) const;  // exterior, Euclidean unit
  Vec2 point_at(double s) const;
  Vec2 tangent_at(double s) const;  // counterclockwise unit tangent
  double arclength_of(const Vec2& x) const;
  double perimeter() const { return perimeter_; }
  bool is_disk() const { return disk_; }
  const Vec2& center() const { return center_; }
  double radius() const { return radius_; }

 private:
  bool disk_ = true;
  Vec2 center_ = Vec2::Zero();
  double radius_ = 1.0;
  double perimeter_ = 0.0;
  std::function<double(const Vec2&)> sd_;
  std::function<Vec2(double)> curve_;
};

// Metric value plus the derivatives the Hamiltonian and the Laplacian need.
struct MetricJet {
  Mat2 g;
  Mat2 inv;                     // G = g^{-1}
  double sqrt_det = 1.0;        // |g|^{1/2}
  std::array<Mat2, 2> d_inv;    // dG/dx^l
  std::array<std::array<Mat2, 2>, 2> dd_inv;  // d2G/dx^l dx^m
  Vec2 d_log_sqrt_det = Vec2::Zero();
};

enum class MetricKind { euclidean, conformal_bump, custom_analytic };

struct BumpParams {
  Vec2 center = Vec2::Zero();
  double amplitude = 0.3;
  double radius = 0.4;
};

class BlindnessViolation : public std::runtime_error {
 public:
  explicit BlindnessViolation(const std::string& what) : std::runtime_error(what) {}
};

class MetricModel {
 public:
  static MetricModel euclidean(Boundary region, double exterior_radius);
  static MetricModel conformal_bump(Boundary region, const BumpParams& bump,
                                    double exterior_radius);
  // jet must be exact identity outside M; c1, c2 are the caller's eigenvalue bounds.
  static MetricModel custom(Boundary region, std::function<MetricJet(const Vec2&)> jet,
                            double c1, double c2, double exterior_radius);

  MetricJet jet(const Vec2& x) const;
  Mat2 metric_at(const Vec2& x) const { return jet(x).g; }
  Mat2 inverse_at(const Vec2& x) const { return jet(x).inv; }
  double sqrt_det_at(const Vec2& x) const { return jet(x).sqrt_det; }

  // Copy that refuses any query inside M and counts attempts.
  MetricModel restricted_to_exterior() const;
  bool blind() const { return blind_; }
  long interior_queries() const { return violations_ ? violations_->load() : 0; }

  MetricKind kind() const { return kind_; }
  const BumpParams& bump() const { return bump_; }
  const Boundary& region() const { return region_; }
  double exterior_radius() const { return R_; }
  double c1() const { return c1_; }
  double c2() const { return c2_; }
  // Bound on the Euclidean speed of unit-speed geodesics.
  double max_speed() const { return 1.0 / std::sqrt(c1_); }

 private:
  MetricKind kind_ = MetricKind::euclidean;
  Boundary region_;
  BumpParams bump_;
  std::function<MetricJet(const Vec2&)> custom_;
  double c1_ = 1.0, c2_ = 1.0, R_ = 3.0;
  bool blind_ = false;
  std::shared_ptr<std::atomic<long>> violations_;
};

MetricJet identity_jet();

// Conformal bump factor c(x) and derivatives (value, gradient, Hessian).
struct BumpFactor {
  double c = 1.0;
  Vec2 dc = Vec2::Zero();
  Mat2 ddc = Mat2::Zero();
};
BumpFactor bump_factor(const BumpParams& bump, const Vec2& x);

struct HamiltonianBlocks {
  double h = 0.0;
  Vec2 h_p;   // dh/dp
  Vec2 h_x;   // dh/dx
  Mat2 B;     // B(j,l) = d2h/dx^l dp_j
  Mat2 C;     // d2h/dp dp
  Mat2 D;     // d2h/dx dx
  Mat2 E() const { return B.transpose(); }  // E(j,l) = d2h/dx^j dp_l
};

HamiltonianBlocks hamiltonian_blocks(const MetricModel& model, const Vec2& x, const Vec2& p);
double hamiltonian(const MetricModel& model, const Vec2& x, const Vec2& p);

// Cotangent state; the tangent view (y, eta) is obtained via tangent().
struct PhasePoint {
  Vec2 x;
  Vec2 p;
};

PhasePoint from_tangent(const MetricModel& model, const Vec2& y, const Vec2& eta);
Vec2 tangent(const MetricModel& model, const PhasePoint& z);

// One RK4 step of Hamilton's equations.
PhasePoint rk4_step(const MetricModel& model, const PhasePoint& z, double dt);

struct FlowOptions {
  double step = 1e-3;
  double drift_tol = 1e-6;
};

PhasePoint geodesic_flow(const MetricModel& model, const PhasePoint& start, double t,
                         const FlowOptions& opt = {});

struct HitResult {
  double tau = kInf;
  PhasePoint at{};
  bool tangential = false;  // |<nu, gamma'>_g| < threshold
  double normal_component = 0.0;
};

struct HitOptions {
  double step = 1e-3;
  double horizon = 10.0;
  double sd_tol = 1e-10;
  double tangential_threshold = 1e-3;
  bool stop_outside_radius = false;  // also stop (tau = inf) when leaving B(0,R)
};

HitResult first_hit_tau(const MetricModel& model, const PhasePoint& start,
                        const HitOptions& opt = {});

struct GroundTruthEntry {
  Vec2 entry_x;
  Vec2 entry_xi;
  Vec2 exit_z = Vec2::Constant(std::numeric_limits<double>::quiet_NaN());
  Vec2 zeta = Vec2::Constant(std::numeric_limits<double>::quiet_NaN());
  double tau = kInf;
  bool transversal = false;
};

GroundTruthEntry ground_truth_sigma(const MetricModel& model, const Vec2& x, const Vec2& xi,
                                    const HitOptions& opt = {});

// Entry on dM: boundary arclength and incidence angle measured from the inward normal.
struct EntrySpec {
  double s = 0.0;
  double incidence = 0.0;
};

struct Entry {
  Vec2 x;
  Vec2 xi;  // unit in g at x
};

Entry make_entry(const MetricModel& model, const EntrySpec& spec);

double g_inner(const MetricModel& model, const Vec2& x, const Vec2& a, const Vec2& b);

}  // namespace scatlab
