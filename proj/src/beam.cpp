#include "scatlab/beam.hpp"

#include <algorithm>
#include <cmath>

namespace scatlab {

namespace {

const cplx I1(0.0, 1.0);

struct Deriv {
  Vec2 dx, dp;
  Mat2c dY, dZ;
};

Deriv system_rhs(const MetricModel& model, const Vec2& x, const Vec2& p, const Mat2c& Y,
                 const Mat2c& Z) {
  HamiltonianBlocks hb = hamiltonian_blocks(model, x, p);
  Mat2c B = hb.B.cast<cplx>(), C = hb.C.cast<cplx>(), D = hb.D.cast<cplx>();
  Deriv d;
  d.dx = hb.h_p;
  d.dp = -hb.h_x;
  d.dY = B * Y + C * Z;
  d.dZ = -D * Y - B.transpose() * Z;
  return d;
}

cplx continue_sqrt(const cplx& det, const cplx& previous) {
  cplx s = std::sqrt(det);
  return std::abs(s - previous) <= std::abs(s + previous) ? s : -s;
}

void finish_frame(BeamFrame& f, const cplx& prev_sqrt) {
  cplx det = f.Y.determinant();
  if (std::abs(det) < 1e-10)
    throw std::runtime_error("beam construction breakdown: |det Y| below 1e-10");
  f.H = f.Z * f.Y.inverse();
  f.sqrt_detY = continue_sqrt(det, prev_sqrt);
  f.u0 = 1.0 / f.sqrt_detY;
}

cplx dot(const Vec2c& a, const Vec2c& b) { return a.transpose() * b; }

}  // namespace

BeamFrame initial_frame(const PhasePoint& start) {
  BeamFrame f;
  f.t = 0;
  f.x = start.x;
  f.p = start.p;
  f.Y = Mat2c::Identity();
  f.Z = I1 * Mat2c::Identity();
  f.H = f.Z;
  f.u0 = 1.0;
  f.sqrt_detY = 1.0;
  return f;
}

BeamFrame advance_frame(const MetricModel& model, const BeamFrame& f, double dt) {
  Deriv k1 = system_rhs(model, f.x, f.p, f.Y, f.Z);
  Deriv k2 = system_rhs(model, f.x + 0.5 * dt * k1.dx, f.p + 0.5 * dt * k1.dp,
                        f.Y + 0.5 * dt * k1.dY, f.Z + 0.5 * dt * k1.dZ);
  Deriv k3 = system_rhs(model, f.x + 0.5 * dt * k2.dx, f.p + 0.5 * dt * k2.dp,
                        f.Y + 0.5 * dt * k2.dY, f.Z + 0.5 * dt * k2.dZ);
  Deriv k4 = system_rhs(model, f.x + dt * k3.dx, f.p + dt * k3.dp, f.Y + dt * k3.dY,
                        f.Z + dt * k3.dZ);
  BeamFrame g;
  g.t = f.t + dt;
  g.x = f.x + dt / 6 * (k1.dx + 2 * k2.dx + 2 * k3.dx + k4.dx);
  g.p = f.p + dt / 6 * (k1.dp + 2 * k2.dp + 2 * k3.dp + k4.dp);
  g.Y = f.Y + dt / 6 * (k1.dY + 2.0 * k2.dY + 2.0 * k3.dY + k4.dY);
  g.Z = f.Z + dt / 6 * (k1.dZ + 2.0 * k2.dZ + 2.0 * k3.dZ + k4.dZ);
  finish_frame(g, f.sqrt_detY);
  return g;
}

BeamTrack::BeamTrack(const MetricModel& model, const PhasePoint& start, double T, double step)
    : model_(model), T_(T), step_(step) {
  if (!(T >= 0) || !(step > 0)) throw std::invalid_argument("BeamTrack: bad horizon or step");
  if (std::abs(hamiltonian(model, start.x, start.p) - 1.0) > 1e-9)
    throw std::invalid_argument("BeamTrack: start is not unit speed");
  long n = static_cast<long>(std::ceil(T / step - 1e-9));
  frames_.reserve(n + 1);
  frames_.push_back(initial_frame(start));
  for (long k = 0; k < n; ++k) {
    BeamFrame next = advance_frame(model_, frames_.back(), step);
    next.t = (k + 1) * step;
    frames_.push_back(next);
  }
  T_ = n * step;
}

BeamFrame BeamTrack::at(double t) const {
  if (t < -1e-12 || t > T_ + 1e-12) throw std::out_of_range("BeamTrack::at outside horizon");
  long k = std::clamp(static_cast<long>(std::floor(t / step_)), 0L,
                      static_cast<long>(frames_.size()) - 1);
  const BeamFrame& f = frames_[k];
  double dt = t - f.t;
  if (std::abs(dt) < 1e-15) return f;
  BeamFrame g = advance_frame(model_, f, dt);
  g.t = t;
  return g;
}

std::vector<BeamFrame> propagate_frame(const MetricModel& model, const PhasePoint& start,
                                       double T, double step) {
  return BeamTrack(model, start, T, step).frames();
}

FrameRates frame_rates(const MetricModel& model, const BeamFrame& f, bool second_order,
                       double delta) {
  HamiltonianBlocks hb = hamiltonian_blocks(model, f.x, f.p);
  Mat2c B = hb.B.cast<cplx>(), C = hb.C.cast<cplx>(), D = hb.D.cast<cplx>();
  Mat2c E = B.transpose();
  Mat2c Yi = f.Y.inverse();
  FrameRates r;
  r.xd = hb.h_p;
  r.pd = -hb.h_x;
  Mat2c Yd = B * f.Y + C * f.Z;
  Mat2c Zd = -D * f.Y - E * f.Z;
  r.Hd = (Zd - f.H * Yd) * Yi;
  cplx trYd = (Yi * Yd).trace();
  r.ud = -0.5 * f.u0 * trYd;
  r.xdd = hb.B * r.xd + hb.C * r.pd;
  r.pdd = -(hb.D * r.xd + hb.B.transpose() * r.pd);
  r.Hdd.setZero();
  r.udd = 0;
  r.second_order = second_order;
  if (!second_order) return r;

  PhasePoint z{f.x, f.p};
  PhasePoint zp = rk4_step(model, z, delta), zm = rk4_step(model, z, -delta);
  HamiltonianBlocks hp = hamiltonian_blocks(model, zp.x, zp.p);
  HamiltonianBlocks hm = hamiltonian_blocks(model, zm.x, zm.p);
  Mat2c Bd = ((hp.B - hm.B) / (2 * delta)).cast<cplx>();
  Mat2c Cd = ((hp.C - hm.C) / (2 * delta)).cast<cplx>();
  Mat2c Dd = ((hp.D - hm.D) / (2 * delta)).cast<cplx>();
  Mat2c Ydd = Bd * f.Y + B * Yd + Cd * f.Z + C * Zd;
  Mat2c Zdd = -Dd * f.Y - D * Yd - Bd.transpose() * f.Z - E * Zd;
  r.Hdd = (Zdd - 2.0 * r.Hd * Yd - f.H * Ydd) * Yi;
  Mat2c YiYd = Yi * Yd;
  r.udd = -0.5 * r.ud * trYd - 0.5 * f.u0 * (-(YiYd * YiYd).trace() + (Yi * Ydd).trace());
  return r;
}

cplx phase_at(const BeamFrame& f, const Vec2& x) {
  Vec2c d = (x - f.x).cast<cplx>();
  return dot(f.p.cast<cplx>(), d) + 0.5 * dot(d, f.H * d);
}

PhaseJet phase_jet(const BeamFrame& f, const FrameRates& r, const Vec2& x) {
  Vec2c d = (x - f.x).cast<cplx>();
  Vec2c p = f.p.cast<cplx>(), pd = r.pd.cast<cplx>(), pdd = r.pdd.cast<cplx>();
  Vec2c xd = r.xd.cast<cplx>(), xdd = r.xdd.cast<cplx>();
  Mat2c Hs = 0.5 * (f.H + f.H.transpose());
  PhaseJet j;
  j.theta = dot(p, d) + 0.5 * dot(d, Hs * d);
  j.theta_t = dot(pd, d) - dot(p, xd) + 0.5 * dot(d, r.Hd * d) - dot(xd, Hs * d);
  j.theta_tt = dot(pdd, d) - 2.0 * dot(pd, xd) - dot(p, xdd) + 0.5 * dot(d, r.Hdd * d) -
               2.0 * dot(xd, r.Hd * d) + dot(xd, Hs * xd) - dot(xdd, Hs * d);
  j.grad = p + Hs * d;
  j.hess = Hs;
  return j;
}

cplx log_beam(const BeamFrame& f, double eps, const Vec2& x) {
  return -0.5 * std::log(eps) + I1 * phase_at(f, x) / eps - std::log(f.sqrt_detY);
}

cplx evaluate_beam(const BeamFrame& f, double eps, const Vec2& x) {
  if (!(eps > 0)) throw std::invalid_argument("eps must be positive");
  cplx th = phase_at(f, x);
  if (th.imag() / eps > 700) return 0.0;
  return std::exp(I1 * th / eps) * f.u0 / std::sqrt(eps);
}

double decay_constant(const BeamFrame& f) {
  Mat2 im = (0.5 * (f.H + f.H.transpose())).imag();
  Eigen::SelfAdjointEigenSolver<Mat2> es(im);
  return 0.8 * 0.5 * es.eigenvalues()(0);
}

double smooth_step(double s) {
  if (s <= 0) return 0.0;
  if (s >= 1) return 1.0;
  double a = std::exp(-1.0 / s), b = std::exp(-1.0 / (1.0 - s));
  return a / (a + b);
}

double radial_cutoff(double r, double radius) {
  return smooth_step((radius - r) / (0.5 * radius));
}

BeamData beam_initial_data(const MetricModel& exterior, const Vec2& y, const Vec2& eta,
                           double eps, double cutoff_radius, const Grid& grid) {
  if (!(eps > 0) || !(cutoff_radius > 0))
    throw std::invalid_argument("beam_initial_data: eps and cutoff must be positive");
  if (exterior.region().signed_distance(y) <= cutoff_radius)
    throw std::invalid_argument("beam_initial_data: cutoff ball intersects M");
  if (y.cwiseAbs().maxCoeff() + cutoff_radius >= grid.R - grid.h)
    throw std::invalid_argument("beam_initial_data: cutoff ball leaves the grid");

  BeamFrame f0 = initial_frame(from_tangent(exterior, y, eta));
  FrameRates r = frame_rates(exterior, f0, false);

  BeamData bd;
  bd.y = y;
  bd.eta = tangent(exterior, {f0.x, f0.p});
  bd.eps = eps;
  bd.cutoff = cutoff_radius;
  bd.n = grid.n;
  bd.w.assign(grid.size(), 0.0);
  bd.wt.assign(grid.size(), 0.0);
  auto lo = [&](double c) { return std::max(0, static_cast<int>(std::floor((c + grid.R) / grid.h))); };
  auto hi = [&](double c) {
    return std::min(grid.n, static_cast<int>(std::ceil((c + grid.R) / grid.h)) + 1);
  };
  bd.i0 = lo(y.x() - cutoff_radius);
  bd.i1 = hi(y.x() + cutoff_radius);
  bd.j0 = lo(y.y() - cutoff_radius);
  bd.j1 = hi(y.y() + cutoff_radius);

  Vec2c p = f0.p.cast<cplx>(), pd = r.pd.cast<cplx>(), xd = r.xd.cast<cplx>();
  const double pref = 1.0 / std::sqrt(eps);
  for (int j = bd.j0; j < bd.j1; ++j)
    for (int i = bd.i0; i < bd.i1; ++i) {
      Vec2 x = grid.node(i, j);
      double chi = radial_cutoff((x - y).norm(), cutoff_radius);
      if (chi == 0) continue;
      Vec2c d = (x - y).cast<cplx>();
      cplx th = dot(p, d) + 0.5 * dot(d, f0.H * d);
      cplx th_t = dot(pd, d) - dot(p, xd) + 0.5 * dot(d, r.Hd * d) - dot(xd, f0.H * d);
      if (th.imag() / eps > 700) continue;
      cplx U = pref * std::exp(I1 * th / eps);  // u0(0) = 1
      cplx Ut = U * (I1 * th_t / eps + r.ud);
      bd.w[grid.index(i, j)] = chi * U;
      bd.wt[grid.index(i, j)] = -chi * Ut;
    }
  return bd;
}

ResidualSample beam_residual(const MetricModel& model, const BeamFrame& f, const FrameRates& r,
                             double eps, const Vec2& x, bool with_transport) {
  PhaseJet pj = phase_jet(f, r, x);
  ResidualSample out{0.0, 0.0};
  if (pj.theta.imag() / eps > 700) return out;
  MetricJet mj = model.jet(x);
  Mat2c G = mj.inv.cast<cplx>();
  Vec2 b;
  for (int k = 0; k < 2; ++k) {
    b(k) = 0;
    for (int j = 0; j < 2; ++j) b(k) += mj.d_inv[j](j, k) + mj.inv(j, k) * mj.d_log_sqrt_det(j);
  }
  cplx lap = (G.cwiseProduct(pj.hess)).sum() + dot(b.cast<cplx>(), pj.grad);
  cplx gg = dot(pj.grad, G * pj.grad);
  cplx u = with_transport ? f.u0 : 1.0;
  cplx ud = with_transport ? r.ud : 0.0;
  cplx udd = with_transport ? r.udd : 0.0;
  cplx E = std::exp(I1 * pj.theta / eps) / std::sqrt(eps);
  cplx tt = pj.theta_t * pj.theta_t;
  out.residual = E * (-(tt - gg) * u / (eps * eps) +
                      I1 / eps * (2.0 * pj.theta_t * ud + (pj.theta_tt - lap) * u) + udd);
  out.dtt = E * (-tt * u / (eps * eps) + I1 / eps * (2.0 * pj.theta_t * ud + pj.theta_tt * u) + udd);
  return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: sizes");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += std::log(x[i]), my += std::log(y[i]);
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double a = std::log(x[i]) - mx;
    sxy += a * (std::log(y[i]) - my);
    sxx += a * a;
  }
  return sxy / sxx;
}

ResidualReport residual_order(const MetricModel& model, const PhasePoint& start,
                              const std::vector<double>& eps_list, const ResidualBox& box) {
  if (eps_list.size() < 2) throw std::invalid_argument("residual_order: need >= 2 eps values");
  BeamTrack track(model, start, box.t_max + 1e-3);
  ResidualReport rep;
  rep.eps = eps_list;
  const std::size_t m = eps_list.size();
  rep.sup_residual.assign(m, 0);
  rep.sup_dtt.assign(m, 0);
  rep.sup_residual_ablated.assign(m, 0);
  for (int it = 0; it < box.nt; ++it) {
    double t = box.nt == 1 ? box.t_min : box.t_min + (box.t_max - box.t_min) * it / (box.nt - 1);
    BeamFrame f = track.at(t);
    FrameRates r = frame_rates(model, f, true);
    for (int a = 0; a < box.nx; ++a)
      for (int b = 0; b < box.nx; ++b) {
        Vec2 off(-box.half_width + 2 * box.half_width * a / (box.nx - 1),
                 -box.half_width + 2 * box.half_width * b / (box.nx - 1));
        Vec2 x = f.x + off;
        for (std::size_t k = 0; k < m; ++k) {
          ResidualSample s = beam_residual(model, f, r, eps_list[k], x, true);
          ResidualSample s0 = beam_residual(model, f, r, eps_list[k], x, false);
          rep.sup_residual[k] = std::max(rep.sup_residual[k], std::abs(s.residual));
          rep.sup_dtt[k] = std::max(rep.sup_dtt[k], std::abs(s.dtt));
          rep.sup_residual_ablated[k] = std::max(rep.sup_residual_ablated[k], std::abs(s0.residual));
        }
      }
  }
  std::vector<double> rel(m), rel0(m);
  for (std::size_t k = 0; k < m; ++k) {
    rel[k] = rep.sup_residual[k] / rep.sup_dtt[k];
    rel0[k] = rep.sup_residual_ablated[k] / rep.sup_dtt[k];
  }
  rep.slope = loglog_slope(eps_list, rep.sup_residual);
  rep.relative_slope = loglog_slope(eps_list, rel);
  rep.slope_ablated = loglog_slope(eps_list, rep.sup_residual_ablated);
  rep.relative_slope_ablated = loglog_slope(eps_list, rel0);
  return rep;
}

}  // namespace scatlab
