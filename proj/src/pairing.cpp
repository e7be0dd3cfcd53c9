#include "scatlab/pairing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scatlab {

namespace {
const double kDrop = std::log(1e-300);
}

SValue SValue::from(cplx z) {
  if (z == cplx(0.0)) return {};
  return {std::log(std::abs(z)), std::arg(z)};
}

SValue SValue::from_log(cplx log_z) {
  if (log_z.real() == -kInf) return {};
  return {log_z.real(), std::remainder(log_z.imag(), 2 * M_PI)};
}

cplx SValue::value() const {
  if (is_zero()) return 0.0;
  return std::polar(std::exp(log_abs), arg);
}

SValue log_sum_exp(const std::vector<cplx>& log_terms) {
  double m = -kInf;
  for (const cplx& t : log_terms) m = std::max(m, t.real());
  if (m == -kInf) return {};
  cplx acc = 0.0;
  for (const cplx& t : log_terms)
    if (t.real() - m > kDrop) acc += std::exp(t - m);
  if (acc == cplx(0.0)) return {};
  return SValue::from_log(std::log(acc) + m);
}

double distance(const SValue& a, const SValue& b) {
  if (a.is_zero() && b.is_zero()) return 0.0;
  double m = std::max(a.log_abs, b.log_abs);
  cplx za = a.is_zero() ? 0.0 : std::polar(std::exp(a.log_abs - m), a.arg);
  cplx zb = b.is_zero() ? 0.0 : std::polar(std::exp(b.log_abs - m), b.arg);
  return std::abs(za - zb) * std::exp(m);
}

const char* path_name(SPath p) { return p == SPath::oracle ? "oracle" : "data"; }

SValue s_oracle(const SourceSet& set, const BeamTrack& track, double t0, double eps) {
  if (!(eps > 0)) throw std::invalid_argument("s_oracle: eps must be positive");
  BeamFrame f = track.at(t0);
  const MetricModel& model = track.model();
  std::vector<cplx> terms;
  terms.reserve(set.size());
  for (std::size_t k = 0; k < set.size(); ++k) {
    cplx lu = log_beam(f, eps, set.x[k]) + 0.5 * std::log(eps);
    terms.push_back(lu + set.ln_weight(k) + std::log(model.sqrt_det_at(set.x[k])));
  }
  return log_sum_exp(terms);
}

SValue s_oracle_mollified(const SourceSet& set, const Forcing& forcing, const Grid& grid,
                          const BeamTrack& track, double t0, double eps) {
  const MetricModel& model = track.model();
  std::vector<cplx> terms;
  for (long q = 0; q < static_cast<long>(forcing.psi.size()); ++q) {
    double t = forcing.T0 + (forcing.n_first + q) * forcing.dt;
    BeamFrame f = track.at(t0 - t);
    double lt = std::log(forcing.psi[q] * forcing.dt);
    for (std::size_t m = 0; m < forcing.stencils.size(); ++m) {
      const SourceStencil& st = forcing.stencils[m];
      double la = set.ln_weight(st.source);
      for (std::size_t e = 0; e < st.node.size(); ++e) {
        int i = static_cast<int>(st.node[e] % grid.n), j = static_cast<int>(st.node[e] / grid.n);
        Vec2 x = grid.node(i, j);
        double w = st.phi[e] * model.sqrt_det_at(x) * grid.h * grid.h;
        terms.push_back(log_beam(f, eps, x) + 0.5 * std::log(eps) + la + lt + std::log(w));
      }
    }
  }
  return log_sum_exp(terms);
}

double TimeCutoff::operator()(double t) const {
  double a = t0 - r, b = t0 - 0.1 * r;
  if (t <= a) return 1.0;
  if (t >= b) return 0.0;
  return 1.0 - smooth_step((t - a) / (b - a));
}

double support_clearance(const BeamData& bd, const Boundary& boundary, const Grid& grid) {
  double to_m = boundary.signed_distance(bd.y) - bd.cutoff;
  double to_edge = grid.R - bd.y.cwiseAbs().maxCoeff() - bd.cutoff;
  return std::min(to_m, to_edge);
}

double beam_clearance(const ExteriorSolver& solver, const BeamData& bd) {
  const Grid& g = solver.grid();
  const auto& kind = solver.kinds();
  double clear = kInf;
  for (int j = 0; j < g.n; ++j)
    for (int i = 0; i < g.n; ++i)
      if (kind[g.index(i, j)] != NodeKind::exterior)
        clear = std::min(clear, (g.node(i, j) - bd.y).norm() - bd.cutoff);
  return clear;
}

SDataResult s_data(const ExteriorSolver& solver, const BeamData& bd, double t0,
                   const SDataOptions& opt) {
  const Grid& g = solver.grid();
  if (bd.n != g.n) throw std::invalid_argument("s_data: beam data built on another grid");
  double clear = opt.clearance > 0 ? opt.clearance : beam_clearance(solver, bd);
  if (!(clear > 0)) throw std::invalid_argument("s_data: beam support touches dOmega");
  double r = opt.r > 0 ? opt.r : clear;
  if (r > clear * (1 + 1e-12))
    throw std::invalid_argument("s_data: cutoff width exceeds the support clearance");
  if (t0 - r < opt.source_end)
    throw std::invalid_argument("s_data: chi must equal 1 over the source support");

  long s = std::lround((t0 - opt.T0) / g.dt);
  double t0s = opt.T0 + s * g.dt;
  TimeCutoff chi{t0s, r};
  FieldHistory hist = solver.solve(chi, opt.T0, t0s + 2 * g.dt, {t0s}, {}, opt.forcing);
  SigmaSnapshot snap = snapshot_sigma(hist, t0s);

  const auto& sqrt_g = solver.op().sqrt_g;
  const auto& kind = solver.kinds();
  cplx acc = 0.0;
  for (int j = bd.j0; j < bd.j1; ++j)
    for (int i = bd.i0; i < bd.i1; ++i) {
      std::size_t k = g.index(i, j);
      if (kind[k] != NodeKind::exterior) continue;
      acc += (snap.vt[k] * bd.w[k] - snap.v[k] * bd.wt[k]) * sqrt_g[k];
    }
  acc *= std::sqrt(bd.eps) * g.h * g.h;
  return {SValue::from(acc), t0s, r};
}

SEstimate s_limit(const std::function<SValue(double)>& provider,
                  const std::vector<double>& schedule, SPath path) {
  if (schedule.size() < 3) throw std::invalid_argument("s_limit: need at least 3 eps values");
  double ratio = schedule[1] / schedule[0];
  for (std::size_t k = 1; k < schedule.size(); ++k)
    if (std::abs(schedule[k] / schedule[k - 1] - ratio) > 1e-9 * std::abs(ratio))
      throw std::invalid_argument("s_limit: schedule must be geometric");
  SEstimate out;
  out.path = path;
  out.schedule = schedule;
  for (double e : schedule) out.sequence.push_back(provider(e));
  std::vector<double> diffs;
  for (std::size_t k = 1; k < out.sequence.size(); ++k)
    diffs.push_back(distance(out.sequence[k], out.sequence[k - 1]));
  out.value = out.sequence.back();
  out.eps = schedule.back();
  out.error = diffs.back();
  for (std::size_t k = 1; k < diffs.size(); ++k)
    if (diffs[k] > diffs[k - 1]) out.stabilizing = false;
  return out;
}

}  // namespace scatlab
