#include "scatlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace scatlab {

Boundary Boundary::disk(const Vec2& center, double radius) {
  if (!(radius > 0)) throw std::invalid_argument("disk radius must be positive");
  Boundary b;
  b.disk_ = true;
  b.center_ = center;
  b.radius_ = radius;
  b.perimeter_ = 2 * std::numbers::pi * radius;
  return b;
}

Boundary Boundary::custom(std::function<double(const Vec2&)> sd,
                          std::function<Vec2(double)> curve, double perimeter) {
  if (!sd || !curve || !(perimeter > 0)) throw std::invalid_argument("incomplete custom boundary");
  Boundary b;
  b.disk_ = false;
  b.sd_ = std::move(sd);
  b.curve_ = std::move(curve);
  b.perimeter_ = perimeter;
  return b;
}

double Boundary::signed_distance(const Vec2& x) const {
  if (disk_) return (x - center_).norm() - radius_;
  return sd_(x);
}

Vec2 Boundary::normal(const Vec2& x) const {
  if (disk_) {
    Vec2 d = x - center_;
    double n = d.norm();
    if (n == 0) return Vec2(1, 0);
    return d / n;
  }
  const double e = 1e-6;
  Vec2 g((sd_(x + Vec2(e, 0)) - sd_(x - Vec2(e, 0))) / (2 * e),
         (sd_(x + Vec2(0, e)) - sd_(x - Vec2(0, e))) / (2 * e));
  return g.normalized();
}

Vec2 Boundary::point_at(double s) const {
  double u = std::fmod(s, perimeter_);
  if (u < 0) u += perimeter_;
  if (disk_) {
    double a = u / radius_;
    return center_ + radius_ * Vec2(std::cos(a), std::sin(a));
  }
  return curve_(u);
}

Vec2 Boundary::tangent_at(double s) const {
  if (disk_) {
    double a = s / radius_;
    return Vec2(-std::sin(a), std::cos(a));
  }
  const double e = 1e-6;
  return (point_at(s + e) - point_at(s - e)).normalized();
}

double Boundary::arclength_of(const Vec2& x) const {
  if (disk_) {
    Vec2 d = x - center_;
    double a = std::atan2(d.y(), d.x());
    if (a < 0) a += 2 * std::numbers::pi;
    return a * radius_;
  }
  const int n = 4096;
  double best = 0, bd = kInf;
  for (int i = 0; i < n; ++i) {
    double s = perimeter_ * i / n;
    double d = (point_at(s) - x).squaredNorm();
    if (d < bd) bd = d, best = s;
  }
  double lo = best - perimeter_ / n, hi = best + perimeter_ / n;
  const double gr = (std::sqrt(5.0) - 1) / 2;
  for (int it = 0; it < 80; ++it) {
    double a = hi - gr * (hi - lo), b = lo + gr * (hi - lo);
    if ((point_at(a) - x).squaredNorm() < (point_at(b) - x).squaredNorm())
      hi = b;
    else
      lo = a;
  }
  double s = std::fmod(0.5 * (lo + hi), perimeter_);
  return s < 0 ? s + perimeter_ : s;
}

MetricJet identity_jet() {
  MetricJet j;
  j.g.setIdentity();
  j.inv.setIdentity();
  j.sqrt_det = 1.0;
  for (auto& m : j.d_inv) m.setZero();
  for (auto& r : j.dd_inv)
    for (auto& m : r) m.setZero();
  j.d_log_sqrt_det.setZero();
  return j;
}

BumpFactor bump_factor(const BumpParams& bump, const Vec2& x) {
  BumpFactor f;
  Vec2 d = x - bump.center;
  double rho2 = bump.radius * bump.radius;
  double q = d.squaredNorm() / rho2;
  if (q >= 1.0) return f;
  double w = 1.0 - q;
  double b = std::exp(-1.0 / w);
  double b1 = -b / (w * w);
  double b2 = b / (w * w * w * w) - 2 * b / (w * w * w);
  Vec2 dq = 2 * d / rho2;
  f.c = 1.0 + bump.amplitude * b;
  f.dc = bump.amplitude * b1 * dq;
  f.ddc = bump.amplitude * (b2 * dq * dq.transpose() + b1 * (2.0 / rho2) * Mat2::Identity());
  return f;
}

MetricModel MetricModel::euclidean(Boundary region, double exterior_radius) {
  MetricModel m;
  m.kind_ = MetricKind::euclidean;
  m.region_ = std::move(region);
  m.R_ = exterior_radius;
  return m;
}

MetricModel MetricModel::conformal_bump(Boundary region, const BumpParams& bump,
                                        double exterior_radius) {
  if (!(bump.radius > 0)) throw std::invalid_argument("bump radius must be positive");
  if (region.signed_distance(bump.center) + bump.radius >= 0)
    throw std::invalid_argument("bump support must lie strictly inside M");
  double cmin = std::min(1.0, 1.0 + bump.amplitude * std::exp(-1.0));
  double cmax = std::max(1.0, 1.0 + bump.amplitude * std::exp(-1.0));
  if (!(cmin > 0)) throw std::invalid_argument("bump amplitude makes the metric degenerate");
  MetricModel m;
  m.kind_ = MetricKind::conformal_bump;
  m.region_ = std::move(region);
  m.bump_ = bump;
  m.c1_ = cmin * cmin;
  m.c2_ = cmax * cmax;
  m.R_ = exterior_radius;
  return m;
}

MetricModel MetricModel::custom(Boundary region, std::function<MetricJet(const Vec2&)> jet,
                                double c1, double c2, double exterior_radius) {
  if (!jet || !(c1 > 0) || !(c2 >= c1)) throw std::invalid_argument("invalid custom metric");
  MetricModel m;
  m.kind_ = MetricKind::custom_analytic;
  m.region_ = std::move(region);
  m.custom_ = std::move(jet);
  m.c1_ = c1;
  m.c2_ = c2;
  m.R_ = exterior_radius;
  return m;
}

MetricModel MetricModel::restricted_to_exterior() const {
  MetricModel m = *this;
  m.blind_ = true;
  m.violations_ = std::make_shared<std::atomic<long>>(0);
  return m;
}

MetricJet MetricModel::jet(const Vec2& x) const {
  if (blind_ && region_.signed_distance(x) < -1e-9) {
    violations_->fetch_add(1);
    throw BlindnessViolation("metric queried inside M at (" + std::to_string(x.x()) + ", " +
                             std::to_string(x.y()) + ")");
  }
  switch (kind_) {
    case MetricKind::euclidean:
      return identity_jet();
    case MetricKind::conformal_bump: {
      BumpFactor f = bump_factor(bump_, x);
      MetricJet j = identity_jet();
      if (f.c == 1.0 && f.dc.isZero()) return j;
      double c = f.c;
      double w = 1.0 / (c * c);
      j.g = c * c * Mat2::Identity();
      j.inv = w * Mat2::Identity();
      j.sqrt_det = c * c;
      Vec2 dw = -2.0 / (c * c * c) * f.dc;
      Mat2 ddw = 6.0 / (c * c * c * c) * f.dc * f.dc.transpose() - 2.0 / (c * c * c) * f.ddc;
      for (int l = 0; l < 2; ++l) {
        j.d_inv[l] = dw(l) * Mat2::Identity();
        for (int m = 0; m < 2; ++m) j.dd_inv[l][m] = ddw(l, m) * Mat2::Identity();
      }
      j.d_log_sqrt_det = 2.0 * f.dc / c;
      return j;
    }
    case MetricKind::custom_analytic:
      return custom_(x);
  }
  return identity_jet();
}

double g_inner(const MetricModel& model, const Vec2& x, const Vec2& a, const Vec2& b) {
  return a.dot(model.metric_at(x) * b);
}

namespace {

constexpr double kMomentumFloor = 1e-12;

struct Gradient {
  Vec2 h_p, h_x;
  double h;
};

Gradient hamilton_gradient(const MetricModel& model, const Vec2& x, const Vec2& p) {
  MetricJet j = model.jet(x);
  Vec2 Gp = j.inv * p;
  double q = p.dot(Gp);
  if (!(q > kMomentumFloor * kMomentumFloor))
    throw std::domain_error("Hamiltonian evaluated at vanishing covector");
  double h = std::sqrt(q);
  Gradient g;
  g.h = h;
  g.h_p = Gp / h;
  for (int l = 0; l < 2; ++l) g.h_x(l) = p.dot(j.d_inv[l] * p) / (2 * h);
  return g;
}

}  // namespace

double hamiltonian(const MetricModel& model, const Vec2& x, const Vec2& p) {
  return std::sqrt(p.dot(model.inverse_at(x) * p));
}

HamiltonianBlocks hamiltonian_blocks(const MetricModel& model, const Vec2& x, const Vec2& p) {
  if (p.norm() < kMomentumFloor)
    throw std::domain_error("hamiltonian_blocks: |p| below floor");
  MetricJet j = model.jet(x);
  Vec2 Gp = j.inv * p;
  double q = p.dot(Gp);
  double h = std::sqrt(q);
  double h3 = h * h * h;
  Vec2 dq;
  for (int l = 0; l < 2; ++l) dq(l) = p.dot(j.d_inv[l] * p);

  HamiltonianBlocks out;
  out.h = h;
  out.h_p = Gp / h;
  out.h_x = dq / (2 * h);
  out.C = j.inv / h - Gp * Gp.transpose() / h3;
  for (int l = 0; l < 2; ++l) {
    Vec2 dGp = j.d_inv[l] * p;
    for (int jj = 0; jj < 2; ++jj)
      out.B(jj, l) = dGp(jj) / h - Gp(jj) * dq(l) / (2 * h3);
  }
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      out.D(a, b) = p.dot(j.dd_inv[a][b] * p) / (2 * h) - dq(a) * dq(b) / (4 * h3);
  return out;
}

PhasePoint from_tangent(const MetricModel& model, const Vec2& y, const Vec2& eta) {
  Mat2 g = model.metric_at(y);
  double n = std::sqrt(eta.dot(g * eta));
  if (!(n > 0)) throw std::invalid_argument("zero direction");
  return {y, g * eta / n};
}

Vec2 tangent(const MetricModel& model, const PhasePoint& z) {
  Vec2 Gp = model.inverse_at(z.x) * z.p;
  return Gp / std::sqrt(z.p.dot(Gp));
}

PhasePoint rk4_step(const MetricModel& model, const PhasePoint& z, double dt) {
  auto f = [&](const Vec2& x, const Vec2& p, Vec2& dx, Vec2& dp) {
    Gradient g = hamilton_gradient(model, x, p);
    dx = g.h_p;
    dp = -g.h_x;
  };
  Vec2 k1x, k1p, k2x, k2p, k3x, k3p, k4x, k4p;
  f(z.x, z.p, k1x, k1p);
  f(z.x + 0.5 * dt * k1x, z.p + 0.5 * dt * k1p, k2x, k2p);
  f(z.x + 0.5 * dt * k2x, z.p + 0.5 * dt * k2p, k3x, k3p);
  f(z.x + dt * k3x, z.p + dt * k3p, k4x, k4p);
  return {z.x + dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x),
          z.p + dt / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)};
}

PhasePoint geodesic_flow(const MetricModel& model, const PhasePoint& start, double t,
                         const FlowOptions& opt) {
  if (!(opt.step > 0)) throw std::invalid_argument("step must be positive");
  if (std::abs(hamiltonian(model, start.x, start.p) - 1.0) > opt.drift_tol)
    throw std::invalid_argument("geodesic_flow: start is not unit speed");
  if (t == 0) return start;
  long n = static_cast<long>(std::ceil(std::abs(t) / opt.step - 1e-12));
  double dt = t / n;
  PhasePoint z = start;
  for (long i = 0; i < n; ++i) {
    z = rk4_step(model, z, dt);
    if (std::abs(hamiltonian(model, z.x, z.p) - 1.0) > opt.drift_tol)
      throw std::runtime_error("geodesic_flow: Hamiltonian drift exceeds tolerance");
  }
  return z;
}

namespace {

double normal_component(const MetricModel& model, const PhasePoint& z) {
  const Boundary& b = model.region();
  Vec2 n = b.normal(z.x);
  Mat2 G = model.inverse_at(z.x);
  Vec2 v = tangent(model, z);
  // <nu_g, v>_g with nu_g = G n / |n|_G
  return n.dot(v) / std::sqrt(n.dot(G * n));
}

}  // namespace

HitResult first_hit_tau(const MetricModel& model, const PhasePoint& start, const HitOptions& opt) {
  const Boundary& b = model.region();
  const double vmax = model.max_speed() * 1.0000001;
  const double R = model.exterior_radius();
  PhasePoint z = start;
  double t = 0;
  double sd = b.signed_distance(z.x);
  if (std::abs(sd) <= 1e-9) {
    z = rk4_step(model, z, opt.step);
    t = opt.step;
    sd = b.signed_distance(z.x);
    if (std::abs(sd) <= opt.sd_tol) {
      HitResult r;
      r.tau = t;
      r.at = z;
      r.normal_component = normal_component(model, z);
      r.tangential = std::abs(r.normal_component) < opt.tangential_threshold;
      return r;
    }
  }
  const double side = sd > 0 ? 1.0 : -1.0;
  long small_steps = 0;
  while (t < opt.horizon) {
    double d = side * sd;
    if (d <= opt.sd_tol || small_steps > 200000) {
      HitResult r;
      r.tau = t;
      r.at = z;
      r.normal_component = normal_component(model, z);
      r.tangential =
          small_steps > 200000 || std::abs(r.normal_component) < opt.tangential_threshold;
      return r;
    }
    double dt = std::min(opt.step, opt.horizon - t);
    double limit = d / vmax;
    if (limit < dt) {
      dt = limit;
      ++small_steps;
    }
    z = rk4_step(model, z, dt);
    t += dt;
    sd = b.signed_distance(z.x);
    if (opt.stop_outside_radius && z.x.norm() > R) return {};
  }
  return {};
}

GroundTruthEntry ground_truth_sigma(const MetricModel& model, const Vec2& x, const Vec2& xi,
                                    const HitOptions& opt) {
  PhasePoint start = from_tangent(model, x, xi);
  Vec2 n = model.region().normal(x);
  if (!(n.dot(tangent(model, start)) < 0))
    throw std::invalid_argument("ground_truth_sigma: entry direction is not inward");
  GroundTruthEntry gt;
  gt.entry_x = x;
  gt.entry_xi = tangent(model, start);
  HitResult hit = first_hit_tau(model, start, opt);
  gt.tau = hit.tau;
  if (std::isfinite(hit.tau)) {
    gt.exit_z = hit.at.x;
    gt.zeta = tangent(model, hit.at);
    gt.transversal = !hit.tangential;
  }
  return gt;
}

Entry make_entry(const MetricModel& model, const EntrySpec& spec) {
  if (!(std::abs(spec.incidence) < std::numbers::pi / 2))
    throw std::invalid_argument("incidence must lie in (-pi/2, pi/2)");
  const Boundary& b = model.region();
  Vec2 x = b.point_at(spec.s);
  Vec2 n_in = -b.normal(x);
  double c = std::cos(spec.incidence), s = std::sin(spec.incidence);
  Vec2 xi(c * n_in.x() - s * n_in.y(), s * n_in.x() + c * n_in.y());
  PhasePoint z = from_tangent(model, x, xi);
  return {x, tangent(model, z)};
}

}  // namespace scatlab
