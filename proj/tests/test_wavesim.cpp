#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "scatlab/wavesim.hpp"

using namespace scatlab;

namespace {

Boundary disk() { return Boundary::disk(Vec2::Zero(), 0.5); }

MetricModel bump_model(double A = 0.3) {
  BumpParams b;
  b.amplitude = A;
  b.radius = 0.4;
  return MetricModel::conformal_bump(disk(), b, 2.0);
}

SourceSet point_source(const Vec2& x) {
  SourceSet s;
  s.lambda = 2.0;
  s.index = {1};
  s.s = {0.0};
  s.x = {x};
  s.log_weight = {0.0};
  return s;
}

struct Case {
  MetricModel model;
  Grid grid;
  Forcing forcing;
};

Case make_setup(const MetricModel& model, const Vec2& src, double h, double sigma, double T0) {
  Grid g = Grid::make(2.0, h, -1, model.max_speed());
  Forcing f = mollify_source(point_source(src), sigma, sigma, g, T0);
  return {model, g, f};
}

double rel_l2(const std::vector<double>& a, const std::vector<double>& b,
              const std::vector<std::size_t>& nodes) {
  double num = 0, den = 0;
  for (std::size_t k : nodes) {
    num += (a[k] - b[k]) * (a[k] - b[k]);
    den += b[k] * b[k];
  }
  return std::sqrt(num / den);
}

void random_fill(std::vector<double>& v, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  for (double& x : v) x = d(rng);
}

void check_kernels(bool cross) {
  const int n = 39;
  std::mt19937_64 rng(7);
  std::vector<double> ax(n * n), ay(n * n), cx(n * n), cy(n * n), w(n * n), u(n * n), p(n * n);
  random_fill(ax, rng, 0.5, 2);
  random_fill(ay, rng, 0.5, 2);
  random_fill(cx, rng, -0.3, 0.3);
  random_fill(cy, rng, -0.3, 0.3);
  random_fill(w, rng, 0, 0.25);
  random_fill(u, rng, -1, 1);
  random_fill(p, rng, -1, 1);
  StencilArrays s{ax.data(), ay.data(), cx.data(), cy.data(), w.data(), n, cross};
  std::vector<double> a(n * n, 0.0), b(n * n, 0.0);
  leapfrog_rows(KernelIsa::scalar, s, u.data(), p.data(), a.data(), 0, n);
  leapfrog_rows(KernelIsa::avx2, s, u.data(), p.data(), b.data(), 0, n);
  for (int k = 0; k < n * n; ++k) ASSERT_EQ(a[k], b[k]) << "node " << k;
  // untouched edge stays zero
  for (int i = 0; i < n; ++i) EXPECT_EQ(a[i], 0.0);
}

}  // namespace

TEST(Kernels, Avx2MatchesScalarBitwise) {
  if (!avx2_available()) GTEST_SKIP() << "no AVX2 on this CPU";
  check_kernels(false);
  check_kernels(true);
}

TEST(Kernels, OverrideAndNames) {
  set_kernel_override(KernelIsa::scalar);
  EXPECT_EQ(active_kernel(), KernelIsa::scalar);
  set_kernel_override(std::nullopt);
  EXPECT_EQ(active_kernel(), avx2_available() ? KernelIsa::avx2 : KernelIsa::scalar);
  EXPECT_STREQ(kernel_name(KernelIsa::avx2), "avx2");
}

TEST(Kernels, FlatFieldIsStationary) {
  MetricModel m = bump_model();
  Grid g = Grid::make(1.0, 1.0 / 16, -1, m.max_speed());
  Operator op = build_full_operator(m, g);
  EXPECT_FALSE(op.cross);
  std::vector<double> u(g.size(), 3.0), next(g.size(), 0.0);
  leapfrog_rows(active_kernel(), op.arrays(g.n), u.data(), u.data(), next.data(), 1, g.n - 1);
  for (int j = 1; j < g.n - 1; ++j)
    for (int i = 1; i < g.n - 1; ++i) EXPECT_DOUBLE_EQ(next[g.index(i, j)], 3.0);
}

TEST(Wavesim, NodeClassesPartitionTheGrid) {
  Grid g = Grid::make(1.0, 1.0 / 32, -1);
  auto kind = classify_nodes(g, disk());
  for (int j = 0; j < g.n; ++j)
    for (int i = 0; i < g.n; ++i) {
      NodeKind k = kind[g.index(i, j)];
      double sd = disk().signed_distance(g.node(i, j));
      bool edge = i == 0 || j == 0 || i == g.n - 1 || j == g.n - 1;
      if (edge) EXPECT_EQ(k, NodeKind::outer);
      else if (sd > 0) EXPECT_EQ(k, NodeKind::exterior);
      else EXPECT_TRUE(k == NodeKind::band || k == NodeKind::interior);
    }
}

TEST(Wavesim, ArrivalAtUnitSpeed) {
  MetricModel m = MetricModel::euclidean(disk(), 2.0);
  const double h = 1.0 / 32;
  Case st = make_setup(m, Vec2(0.5, 0), h, 2 * h, -0.5);
  SolveOptions opt;
  opt.T0 = -0.5;
  opt.T = 1.6;
  opt.trace_points = 64;
  FullSolution sol = solve_full(m, st.forcing, st.grid, opt);
  const BoundaryTrace& tr = sol.trace;
  for (std::size_t k : {16ul, 24ul, 32ul}) {
    double d = (tr.points[k] - Vec2(0.5, 0)).norm();
    double peak = 0;
    for (long n = 0; n < tr.steps; ++n) peak = std::max(peak, std::abs(tr.at(n, k)));
    long first = -1;
    for (long n = 0; n < tr.steps && first < 0; ++n)
      if (std::abs(tr.at(n, k)) >= 0.5 * peak) first = n;
    double t = tr.T0 + first * tr.dt;
    EXPECT_NEAR(t, d, 2 * h + st.forcing.sigma_t) << "point " << k;
  }
}

TEST(Wavesim, PreArrivalSilence) {
  MetricModel m = bump_model();
  const double h = 1.0 / 32;
  Vec2 src(0.5, 0);
  Case st = make_setup(m, src, h, 2 * h, -0.5);
  SolveOptions opt;
  opt.T0 = -0.5;
  opt.T = 1.6;
  opt.trace_points = 64;
  FullSolution sol = solve_full(m, st.forcing, st.grid, opt);
  const BoundaryTrace& tr = sol.trace;
  double peak = 0;
  for (double v : tr.values) peak = std::max(peak, std::abs(v));
  ASSERT_GT(peak, 0);
  const double speed = std::sqrt(m.c2());
  for (std::size_t k = 0; k < tr.count(); ++k) {
    // distance from the truncated bump's support, not its centre
    double d = (tr.points[k] - src).norm() - 4 * st.forcing.sigma_x;
    double bound = d / speed - 4 * st.forcing.sigma_t;
    for (long n = 0; n < tr.steps; ++n) {
      double t = tr.T0 + n * tr.dt;
      if (t >= bound) break;
      ASSERT_LE(std::abs(tr.at(n, k)), 1e-8 * peak) << "point " << k << " t=" << t;
    }
  }
}

TEST(Wavesim, EnergyConservedAfterForcing) {
  MetricModel m = bump_model();
  const double h = 1.0 / 32;
  Case st = make_setup(m, Vec2(0.2, 0.1), h, 2 * h, -0.5);
  SolveOptions opt;
  opt.T0 = -0.5;
  opt.T = 18.0;
  opt.trace_points = 16;
  opt.record_energy = true;
  FullSolution sol = solve_full(m, st.forcing, st.grid, opt);
  const auto& E = sol.energy;
  long start = static_cast<long>(std::ceil((sol.forcing_end - opt.T0) / st.grid.dt)) + 1;
  ASSERT_GT(static_cast<long>(E.size()), start + 1000);
  ASSERT_GT(E[start], 0);
  for (long a = start; a + 1000 < static_cast<long>(E.size()); a += 250) {
    double lo = E[a], hi = E[a];
    for (long n = a; n <= a + 1000; ++n) {
      lo = std::min(lo, E[n]);
      hi = std::max(hi, E[n]);
    }
    EXPECT_LE((hi - lo) / E[a], 0.01);
  }
}

TEST(Wavesim, RejectsCflViolation) {
  MetricModel m = MetricModel::euclidean(disk(), 2.0);
  Grid g = Grid::make(2.0, 1.0 / 16, -1);
  EXPECT_THROW(Grid::make(2.0, 1.0 / 16, 0.6 / 16), std::invalid_argument);
  Forcing f = mollify_source(point_source(Vec2(0.5, 0)), 2 * g.h, 2 * g.dt, g, -0.5);
  Grid bad = g;
  bad.dt *= 1.5;
  f.dt = bad.dt;
  SolveOptions opt;
  opt.T0 = -0.5;
  EXPECT_THROW(solve_full(m, f, bad, opt), std::invalid_argument);
}

TEST(Wavesim, ZeroTraceGivesZeroField) {
  MetricModel m = bump_model().restricted_to_exterior();
  Grid g = Grid::make(1.5, 1.0 / 32, -1, m.max_speed());
  BoundaryTrace tr;
  tr.s = trace_arclengths(disk(), 32);
  for (double s : tr.s) tr.points.push_back(disk().point_at(s));
  tr.T0 = -0.5;
  tr.dt = g.dt;
  tr.steps = 100;
  tr.perimeter = disk().perimeter();
  tr.values.assign(100 * 32, 0.0);
  FieldHistory hist = solve_exterior(m, tr, g, -0.5, 1.0, {0.5});
  SigmaSnapshot snap = snapshot_sigma(hist, 0.5);
  for (double v : snap.v) EXPECT_EQ(v, 0.0);
  for (double v : snap.vt) EXPECT_EQ(v, 0.0);
}

TEST(Wavesim, ExteriorReproducesFullSolve) {
  MetricModel m = bump_model();
  MetricModel ext = m.restricted_to_exterior();
  const double h = 1.0 / 64;
  const double T0 = -0.5, t0 = 1.0;
  // at sigma = 2h the band error on v_t sits near 7%; 3h resolves the pulse
  Case st = make_setup(m, Vec2(0.1, 0.05), h, 3 * h, T0);
  SolveOptions opt;
  opt.T0 = T0;
  opt.T = 1.5;
  opt.snapshot_times = {t0};
  opt.trace_points = 1024;
  FullSolution full = solve_full(m, st.forcing, st.grid, opt);
  SigmaSnapshot a = snapshot_sigma(full.history, t0);

  long before = ext.interior_queries();
  ExteriorSolver solver(ext, st.grid, full.trace);
  FieldHistory hist = solver.solve({}, T0, opt.T, {t0});
  EXPECT_EQ(ext.interior_queries(), before);
  SigmaSnapshot b = snapshot_sigma(hist, t0);

  std::vector<std::size_t> omega;
  for (std::size_t k = 0; k < solver.kinds().size(); ++k)
    if (solver.kinds()[k] == NodeKind::exterior) omega.push_back(k);
  double e = rel_l2(b.v, a.v, omega), et = rel_l2(b.vt, a.vt, omega);
  EXPECT_LE(e, 0.05);
  EXPECT_LE(et, 0.05);

  const Grid& g = st.grid;
  for (int i = 0; i < g.n; ++i) {
    EXPECT_EQ(b.v[g.index(i, 0)], 0.0);
    EXPECT_EQ(b.v[g.index(i, g.n - 1)], 0.0);
    EXPECT_EQ(b.v[g.index(0, i)], 0.0);
    EXPECT_EQ(b.v[g.index(g.n - 1, i)], 0.0);
  }
}

TEST(Wavesim, SnapshotOfStandingOscillation) {
  for (double dt : {0.02, 0.01}) {
    FieldHistory hist;
    hist.grid = Grid::make(0.5, 0.25, dt);
    hist.T0 = -0.3;
    hist.last_step = 200;
    const double w = 3.0;
    for (long n = 0; n <= 200; ++n) {
      std::vector<double> v(hist.grid.size());
      for (std::size_t k = 0; k < v.size(); ++k)
        v[k] = std::sin(w * hist.time_of(n)) * std::cos(0.3 * k);
      hist.steps[n] = v;
    }
    double t0 = 0.7 + 0.3 * dt;
    SigmaSnapshot s = snapshot_sigma(hist, t0);
    EXPECT_LE(std::abs(s.t0 - t0), dt / 2 + 1e-15);
    double err = 0;
    for (std::size_t k = 0; k < s.v.size(); ++k)
      err = std::max(err, std::abs(s.vt[k] - w * std::cos(w * s.t0) * std::cos(0.3 * k)));
    // centered difference error w^3 dt^2 / 6
    EXPECT_LE(err, w * w * w * dt * dt / 6 * 1.01);
    EXPECT_GT(err, w * w * w * dt * dt / 6 * 0.2);
  }
  FieldHistory hist;
  hist.grid = Grid::make(0.5, 0.25, 0.01);
  hist.last_step = 10;
  EXPECT_THROW(snapshot_sigma(hist, 0.5), std::out_of_range);
  EXPECT_THROW(snapshot_sigma(hist, 0.05), std::out_of_range);
}

TEST(Wavesim, TraceConvergesUnderRefinement) {
  MetricModel m = bump_model();
  const double sigma = 1.0 / 16, T0 = -0.5;
  Vec2 src(0.5, 0);
  std::vector<BoundaryTrace> tr;
  for (double h : {1.0 / 32, 1.0 / 64}) {
    Case st = make_setup(m, src, h, sigma, T0);
    SolveOptions opt;
    opt.T0 = T0;
    opt.T = 1.5;
    opt.trace_points = 64;
    tr.push_back(solve_full(m, st.forcing, st.grid, opt).trace);
  }
  double num = 0, den = 0;
  for (long n = 0; n < tr[0].steps; ++n) {
    double t = tr[0].T0 + n * tr[0].dt;
    for (std::size_t k = 0; k < tr[0].count(); ++k) {
      if (t < (tr[0].points[k] - src).norm() - 4 * sigma) continue;
      double a = tr[0].at(n, k), b = tr[1].sample(t, tr[0].s[k]);
      num += (a - b) * (a - b);
      den += b * b;
    }
  }
  EXPECT_LE(std::sqrt(num / den), 0.05);
}

TEST(Wavesim, TraceSampleInterpolates) {
  BoundaryTrace tr;
  tr.s = {0, 1, 2, 3};
  tr.points.resize(4);
  tr.perimeter = 4;
  tr.T0 = 0;
  tr.dt = 0.5;
  tr.steps = 3;
  tr.values = {0, 1, 2, 3, 10, 11, 12, 13, 20, 21, 22, 23};
  EXPECT_DOUBLE_EQ(tr.sample(0.5, 1.0), 11);
  EXPECT_DOUBLE_EQ(tr.sample(0.25, 1.5), 6.5);
  EXPECT_DOUBLE_EQ(tr.sample(0.5, 3.5), 11.5);  // periodic wrap
  EXPECT_DOUBLE_EQ(tr.sample(-0.1, 1.0), 0.0);
}
