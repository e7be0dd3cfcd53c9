#include "scatlab/wavesim.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace scatlab {

std::vector<NodeKind> classify_nodes(const Grid& grid, const Boundary& boundary) {
  const int n = grid.n;
  std::vector<double> sd(grid.size());
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) sd[grid.index(i, j)] = boundary.signed_distance(grid.node(i, j));
  std::vector<NodeKind> kind(grid.size(), NodeKind::interior);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      std::size_t k = grid.index(i, j);
      if (i == 0 || j == 0 || i == n - 1 || j == n - 1)
        kind[k] = NodeKind::outer;
      else if (sd[k] > 0)
        kind[k] = NodeKind::exterior;
    }
  for (int j = 1; j < n - 1; ++j)
    for (int i = 1; i < n - 1; ++i) {
      std::size_t k = grid.index(i, j);
      if (kind[k] != NodeKind::interior) continue;
      if (kind[k + 1] == NodeKind::exterior || kind[k - 1] == NodeKind::exterior ||
          kind[k + n] == NodeKind::exterior || kind[k - n] == NodeKind::exterior)
        kind[k] = NodeKind::band;
    }
  return kind;
}

namespace {

void allocate(Operator& op, std::size_t size) {
  op.ax.assign(size, 0.0);
  op.ay.assign(size, 0.0);
  op.cx.assign(size, 0.0);
  op.cy.assign(size, 0.0);
  op.wgt.assign(size, 0.0);
  op.sqrt_g.assign(size, 1.0);
}

struct FaceCoef {
  double diag, cross;
};

FaceCoef face_coef(const MetricJet& j, int dir) {
  return {j.sqrt_det * j.inv(dir, dir), j.sqrt_det * j.inv(dir, 1 - dir)};
}

}  // namespace

Operator build_full_operator(const MetricModel& model, const Grid& grid) {
  Operator op;
  allocate(op, grid.size());
  const int n = grid.n;
  const double f = grid.dt * grid.dt / (grid.h * grid.h);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      std::size_t k = grid.index(i, j);
      Vec2 x = grid.node(i, j);
      if (i > 0 && j > 0 && i < n - 1 && j < n - 1) {
        op.sqrt_g[k] = model.jet(x).sqrt_det;
        op.wgt[k] = f / op.sqrt_g[k];
      }
      if (i < n - 1) {
        FaceCoef c = face_coef(model.jet(x + Vec2(0.5 * grid.h, 0)), 0);
        op.ax[k] = c.diag;
        op.cx[k] = c.cross;
      }
      if (j < n - 1) {
        FaceCoef c = face_coef(model.jet(x + Vec2(0, 0.5 * grid.h)), 1);
        op.ay[k] = c.diag;
        op.cy[k] = c.cross;
      }
    }
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (op.cx[k] != 0 || op.cy[k] != 0) op.cross = true;
  return op;
}

Operator build_exterior_operator(const MetricModel& exterior, const Grid& grid,
                                 const std::vector<NodeKind>& kind) {
  Operator op;
  allocate(op, grid.size());
  const int n = grid.n;
  const Boundary& b = exterior.region();
  const double f = grid.dt * grid.dt / (grid.h * grid.h);
  auto face = [&](std::size_t ka, std::size_t kb, const Vec2& xa, const Vec2& xb, int dir,
                  double& diag, double& cross) {
    bool ea = kind[ka] == NodeKind::exterior, eb = kind[kb] == NodeKind::exterior;
    if (!ea && !eb) return;
    Vec2 mid = 0.5 * (xa + xb);
    Vec2 where = b.signed_distance(mid) >= 0 ? mid : (ea ? xa : xb);
    FaceCoef c = face_coef(exterior.jet(where), dir);
    diag = c.diag;
    cross = c.cross;
  };
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      std::size_t k = grid.index(i, j);
      Vec2 x = grid.node(i, j);
      if (kind[k] == NodeKind::exterior) {
        op.sqrt_g[k] = exterior.jet(x).sqrt_det;
        op.wgt[k] = f / op.sqrt_g[k];
      }
      if (i < n - 1) face(k, k + 1, x, grid.node(i + 1, j), 0, op.ax[k], op.cx[k]);
      if (j < n - 1) face(k, k + n, x, grid.node(i, j + 1), 1, op.ay[k], op.cy[k]);
    }
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (op.cx[k] != 0 || op.cy[k] != 0) op.cross = true;
  return op;
}

double discrete_energy(const Operator& op, const Grid& grid, const std::vector<double>& prev,
                       const std::vector<double>& cur) {
  const int n = grid.n;
  double kin = 0, pot = 0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      std::size_t k = grid.index(i, j);
      if (op.wgt[k] != 0) {
        double v = (cur[k] - prev[k]) / grid.dt;
        kin += v * v * op.sqrt_g[k] * grid.h * grid.h;
      }
      if (i < n - 1 && op.ax[k] != 0) pot += op.ax[k] * (cur[k + 1] - cur[k]) * (prev[k + 1] - prev[k]);
      if (j < n - 1 && op.ay[k] != 0) pot += op.ay[k] * (cur[k + n] - cur[k]) * (prev[k + n] - prev[k]);
    }
  return 0.5 * (kin + pot);
}

double bilinear(const Grid& grid, const std::vector<double>& field, const Vec2& x) {
  double fx = (x.x() + grid.R) / grid.h, fy = (x.y() + grid.R) / grid.h;
  int i = std::clamp(static_cast<int>(std::floor(fx)), 0, grid.n - 2);
  int j = std::clamp(static_cast<int>(std::floor(fy)), 0, grid.n - 2);
  double a = fx - i, b = fy - j;
  std::size_t k = grid.index(i, j);
  std::size_t n = static_cast<std::size_t>(grid.n);
  return (1 - a) * (1 - b) * field[k] + a * (1 - b) * field[k + 1] + (1 - a) * b * field[k + n] +
         a * b * field[k + n + 1];
}

std::vector<double> trace_arclengths(const Boundary& boundary, int count) {
  if (count < 3) throw std::invalid_argument("trace needs at least 3 boundary points");
  std::vector<double> s(count);
  for (int k = 0; k < count; ++k) s[k] = boundary.perimeter() * k / count;
  return s;
}

double BoundaryTrace::sample(double t, double s_query) const {
  if (steps == 0 || count() == 0) return 0.0;
  double ft = (t - T0) / dt;
  if (ft < 0) return 0.0;
  long n0 = static_cast<long>(std::floor(ft));
  double at_ = ft - n0;
  if (n0 >= steps - 1) {
    n0 = steps - 1;
    at_ = 0;
  }
  const std::size_t K = count();
  double u = std::fmod(s_query / perimeter, 1.0);
  if (u < 0) u += 1.0;
  double fs = u * K;
  std::size_t k0 = static_cast<std::size_t>(std::floor(fs)) % K;
  std::size_t k1 = (k0 + 1) % K;
  double as = fs - std::floor(fs);
  auto row = [&](long n) { return (1 - as) * at(n, k0) + as * at(n, k1); };
  double v0 = row(n0);
  if (at_ == 0) return v0;
  return (1 - at_) * v0 + at_ * row(n0 + 1);
}

SigmaSnapshot snapshot_sigma(const FieldHistory& history, double t0) {
  const double dt = history.grid.dt;
  double T = history.time_of(history.last_step);
  if (!(t0 > history.T0) || !(t0 < T))
    throw std::out_of_range("snapshot_sigma: t0 outside (T0, T)");
  long s = std::lround((t0 - history.T0) / dt);
  auto a = history.steps.find(s - 1), b = history.steps.find(s), c = history.steps.find(s + 1);
  if (a == history.steps.end() || b == history.steps.end() || c == history.steps.end())
    throw std::out_of_range("snapshot_sigma: steps around t0 were not stored");
  SigmaSnapshot snap;
  snap.t0_requested = t0;
  snap.step = s;
  snap.t0 = history.time_of(s);
  snap.v = b->second;
  snap.vt.resize(snap.v.size());
  for (std::size_t k = 0; k < snap.v.size(); ++k)
    snap.vt[k] = (c->second[k] - a->second[k]) / (2 * dt);
  return snap;
}

namespace {

std::set<long> wanted_steps(const std::vector<double>& times, const std::vector<long>& extra,
                            double T0, double dt, long N) {
  std::set<long> keep(extra.begin(), extra.end());
  for (double t : times) {
    long s = std::lround((t - T0) / dt);
    for (long d = -1; d <= 1; ++d)
      if (s + d >= 0 && s + d <= N) keep.insert(s + d);
  }
  return keep;
}

double max_abs(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) {
    if (!std::isfinite(x)) return INFINITY;
    m = std::max(m, std::abs(x));
  }
  return m;
}

void check_growth(double m, double& last, double t, double quiet_after, double dt, double h) {
  if (!std::isfinite(m)) {
    std::ostringstream os;
    os << "non-finite field at t=" << t << " (dt=" << dt << ", h=" << h
       << "); check CFL dt <= 0.5 h / v_max";
    throw InstabilityError(os.str());
  }
  if (t > quiet_after && last > 0 && m > 10 * last) {
    std::ostringstream os;
    os << "field max grew " << m / last << "x between checks at t=" << t << " (dt=" << dt
       << ", h=" << h << "); check CFL dt <= 0.5 h / v_max";
    throw InstabilityError(os.str());
  }
  if (t > quiet_after) last = m;
}

}  // namespace

FullSolution solve_full(const MetricModel& model, const Forcing& forcing, const Grid& grid,
                        const SolveOptions& opt) {
  if (!(opt.T > opt.T0)) throw std::invalid_argument("solve_full: T must exceed T0");
  if (std::abs(forcing.dt - grid.dt) > 1e-15 || std::abs(forcing.T0 - opt.T0) > 1e-12)
    throw std::invalid_argument("solve_full: forcing built for a different time axis");
  const double cfl = 0.5 * grid.h / model.max_speed();
  if (grid.dt > cfl * (1 + 1e-12)) throw std::invalid_argument("solve_full: CFL violated");

  const long N = static_cast<long>(std::ceil((opt.T - opt.T0) / grid.dt - 1e-9));
  Operator op = build_full_operator(model, grid);
  StencilArrays sa = op.arrays(grid.n);
  KernelIsa isa = active_kernel();

  FullSolution out;
  out.forcing_end = forcing.t_end();
  out.history.grid = grid;
  out.history.T0 = opt.T0;
  out.history.last_step = N;
  BoundaryTrace& tr = out.trace;
  tr.s = trace_arclengths(model.region(), opt.trace_points);
  for (double s : tr.s) tr.points.push_back(model.region().point_at(s));
  tr.T0 = opt.T0;
  tr.dt = grid.dt;
  tr.steps = N + 1;
  tr.perimeter = model.region().perimeter();
  tr.values.assign(static_cast<std::size_t>(N + 1) * tr.count(), 0.0);

  std::set<long> keep = wanted_steps(opt.snapshot_times, opt.keep_steps, opt.T0, grid.dt, N);
  std::vector<double> prev(grid.size(), 0.0), cur(grid.size(), 0.0), next(grid.size(), 0.0);
  auto record = [&](long n, const std::vector<double>& u) {
    for (std::size_t k = 0; k < tr.count(); ++k)
      tr.values[static_cast<std::size_t>(n) * tr.count() + k] = bilinear(grid, u, tr.points[k]);
    if (keep.count(n)) out.history.steps[n] = u;
  };
  record(0, prev);
  record(1, cur);
  const double dt2 = grid.dt * grid.dt;
  double last_max = 0;
  for (long n = 1; n < N; ++n) {
    leapfrog_rows(isa, sa, cur.data(), prev.data(), next.data(), 1, grid.n - 1);
    double psi = forcing.profile(n);
    if (psi != 0)
      for (std::size_t q = 0; q < forcing.stencils.size(); ++q) {
        const SourceStencil& st = forcing.stencils[q];
        double amp = dt2 * forcing.amplitude[q] * psi;
        for (std::size_t m = 0; m < st.node.size(); ++m) next[st.node[m]] += amp * st.phi[m];
      }
    if (opt.record_energy) out.energy.push_back(discrete_energy(op, grid, cur, next));
    std::swap(prev, cur);
    std::swap(cur, next);
    record(n + 1, cur);
    if ((n + 1) % opt.check_every == 0)
      check_growth(max_abs(cur), last_max, opt.T0 + (n + 1) * grid.dt, out.forcing_end, grid.dt,
                   grid.h);
  }
  return out;
}

ExteriorSolver::ExteriorSolver(const MetricModel& exterior, const Grid& grid,
                               const BoundaryTrace& trace, bool extrapolate)
    : grid_(grid), trace_(&trace) {
  const double cfl = 0.5 * grid.h / exterior.max_speed();
  if (grid.dt > cfl * (1 + 1e-12)) throw std::invalid_argument("solve_exterior: CFL violated");
  const Boundary& bd = exterior.region();
  kind_ = classify_nodes(grid, bd);
  op_ = build_exterior_operator(exterior, grid, kind_);
  const double delta = 2 * grid.h;
  for (std::size_t k = 0; k < kind_.size(); ++k) {
    if (kind_[k] != NodeKind::band) continue;
    int i = static_cast<int>(k % grid.n), j = static_cast<int>(k / grid.n);
    Vec2 x = grid.node(i, j);
    BandNode b{k, bd.arclength_of(x), 0.0, {}, {}};
    if (extrapolate) {
      Vec2 p = bd.point_at(b.s);
      Vec2 q = p + delta * bd.normal(p);
      double fx = (q.x() + grid.R) / grid.h, fy = (q.y() + grid.R) / grid.h;
      int qi = static_cast<int>(std::floor(fx)), qj = static_cast<int>(std::floor(fy));
      if (qi >= 1 && qj >= 1 && qi + 1 < grid.n - 1 && qj + 1 < grid.n - 1) {
        double ax = fx - qi, ay = fy - qj;
        b.q = {grid.index(qi, qj), grid.index(qi + 1, qj), grid.index(qi, qj + 1),
               grid.index(qi + 1, qj + 1)};
        b.w = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
        bool ok = true;
        for (std::size_t c : b.q) ok = ok && kind_[c] == NodeKind::exterior;
        if (ok) b.ratio = std::max(0.0, -bd.signed_distance(x)) / delta;
      }
    }
    band_.push_back(b);
  }
}

FieldHistory ExteriorSolver::solve(const std::function<double(double)>& chi, double T0, double T,
                                   const std::vector<double>& snapshot_times,
                                   const std::vector<long>& keep_steps,
                                   const Forcing* forcing) const {
  if (forcing && (std::abs(forcing->dt - grid_.dt) > 1e-15 || std::abs(forcing->T0 - T0) > 1e-12))
    throw std::invalid_argument("solve_exterior: forcing built for a different time axis");
  if (!(T > T0)) throw std::invalid_argument("solve_exterior: T must exceed T0");
  const Grid& grid = grid_;
  const long N = static_cast<long>(std::ceil((T - T0) / grid.dt - 1e-9));
  StencilArrays sa = op_.arrays(grid.n);
  KernelIsa isa = active_kernel();
  FieldHistory hist;
  hist.grid = grid;
  hist.T0 = T0;
  hist.last_step = N;
  std::set<long> keep = wanted_steps(snapshot_times, keep_steps, T0, grid.dt, N);

  std::vector<double> prev(grid.size(), 0.0), cur(grid.size(), 0.0), next(grid.size(), 0.0);
  auto impose = [&](std::vector<double>& u, long n) {
    double t = T0 + n * grid.dt;
    double c = chi ? chi(t) : 1.0;
    for (const BandNode& b : band_) {
      double on = c == 0 ? 0.0 : c * trace_->sample(t, b.s);
      if (b.ratio > 0) {
        double uq = b.w[0] * u[b.q[0]] + b.w[1] * u[b.q[1]] + b.w[2] * u[b.q[2]] + b.w[3] * u[b.q[3]];
        on -= b.ratio * (uq - on);
      }
      u[b.node] = on;
    }
  };
  impose(prev, 0);
  impose(cur, 1);
  if (keep.count(0)) hist.steps[0] = prev;
  if (keep.count(1)) hist.steps[1] = cur;
  double last_max = 0;
  for (long n = 1; n < N; ++n) {
    leapfrog_rows(isa, sa, cur.data(), prev.data(), next.data(), 1, grid.n - 1);
    double psi = forcing ? forcing->profile(n) : 0.0;
    if (psi != 0)
      for (std::size_t q = 0; q < forcing->stencils.size(); ++q) {
        const SourceStencil& st = forcing->stencils[q];
        double amp = grid.dt * grid.dt * forcing->amplitude[q] * psi;
        for (std::size_t m = 0; m < st.node.size(); ++m)
          if (kind_[st.node[m]] == NodeKind::exterior) next[st.node[m]] += amp * st.phi[m];
      }
    impose(next, n + 1);
    std::swap(prev, cur);
    std::swap(cur, next);
    if (keep.count(n + 1)) hist.steps[n + 1] = cur;
    if ((n + 1) % 200 == 0) check_growth(max_abs(cur), last_max, INFINITY, INFINITY, grid.dt, grid.h);
  }
  return hist;
}

FieldHistory solve_exterior(const MetricModel& exterior, const BoundaryTrace& trace,
                            const Grid& grid, double T0, double T,
                            const std::vector<double>& snapshot_times,
                            const std::function<double(double)>& chi) {
  return ExteriorSolver(exterior, grid, trace).solve(chi, T0, T, snapshot_times);
}

}  // namespace scatlab
