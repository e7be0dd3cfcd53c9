#include <gtest/gtest.h>

#include <cmath>

#include "scatlab/pairing.hpp"

using namespace scatlab;

namespace {

const cplx I1(0.0, 1.0);

Boundary disk() { return Boundary::disk(Vec2::Zero(), 0.5); }

SourceSet sources(double lambda, const std::vector<int>& j, const std::vector<Vec2>& x) {
  SourceSet s;
  s.lambda = lambda;
  s.first_index = j.front();
  for (std::size_t k = 0; k < j.size(); ++k) {
    s.index.push_back(j[k]);
    s.s.push_back(disk().arclength_of(x[k]));
    s.x.push_back(x[k]);
    s.log_weight.push_back(-std::pow(lambda, j[k]));
  }
  return s;
}

// Euclidean beam from (2,0) heading along -x: gamma(t) = (2 - t, 0),
// H = diag(i, i/(1+it)), u0 = (1+it)^{-1/2}.
struct Straight {
  MetricModel m = MetricModel::euclidean(disk(), 4.0);
  BeamTrack track{m, from_tangent(m, Vec2(2, 0), Vec2(-1, 0)), 3.0};
};

double rel(cplx a, cplx b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST(SValue, LogDomainArithmetic) {
  cplx z(0.3, -0.4);
  EXPECT_NEAR(std::abs(SValue::from(z).value() - z), 0, 1e-16);
  EXPECT_TRUE(SValue::from(0.0).is_zero());
  SValue s = log_sum_exp({cplx(-800, 0.1), cplx(-800, 0.1)});
  EXPECT_NEAR(s.log_abs, std::log(2.0) - 800, 1e-12);
  EXPECT_NEAR(s.arg, 0.1, 1e-15);
  EXPECT_EQ(s.value(), cplx(0.0));  // underflows only when materialized
  SValue c = log_sum_exp({cplx(0, 0), cplx(0, M_PI)});
  EXPECT_TRUE(c.is_zero() || c.log_abs < -30);
  EXPECT_NEAR(distance(SValue::from(1.0), SValue::from(I1)), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(distance(SValue::from_log(cplx(-900, 0)), SValue::from_log(cplx(-900, M_PI))),
              0.0, 1e-300);
}

TEST(Oracle, ExactHitIsWeightTimesAmplitude) {
  Straight b;
  SourceSet s = sources(2.0, {1}, {Vec2(0.5, 0)});
  for (double eps : {0.08, 0.02}) {
    cplx v = s_oracle(s, b.track, 1.5, eps).value();
    cplx expect = 0.25 / std::sqrt(cplx(1.0, 1.5));
    EXPECT_LT(rel(v, expect), 1e-8);
  }
}

TEST(Oracle, TransverseOffsetFollowsClosedForm) {
  Straight b;
  const double t = 1.5, eps = 0.04;
  for (double d : {0.1, 0.3, 6 * std::sqrt(eps)}) {
    SourceSet s = sources(2.0, {1}, {Vec2(0.5, d)});
    SValue v = s_oracle(s, b.track, t, eps);
    double expect = std::log(0.25) - 0.25 * std::log(1 + t * t) - d * d / (2 * eps * (1 + t * t));
    EXPECT_NEAR(v.log_abs, expect, 1e-8);
  }
}

TEST(Oracle, GaussianTailBound) {
  // every source at least 6 sqrt(eps) from gamma(t0): |S| <= sum a_j |u0| exp(-k d^2 / eps),
  // k = min eig Im H / 2
  Straight b;
  const double t0 = 1.0, eps = 0.02, r = 6 * std::sqrt(eps);
  BeamFrame f = b.track.at(t0);
  Eigen::SelfAdjointEigenSolver<Mat2> es(f.H.imag());
  double k = 0.5 * es.eigenvalues()(0);
  Vec2 c = f.x;
  SourceSet s = sources(1.5, {1, 2, 3},
                        {c + Vec2(r, 0), c + Vec2(0, -r * 1.1), c + Vec2(-r, r) / std::sqrt(2.0)});
  double bound = 0;
  for (std::size_t j = 0; j < s.size(); ++j)
    bound += s.weight(j) * std::abs(f.u0) * std::exp(-k * (s.x[j] - c).squaredNorm() / eps);
  EXPECT_LE(s_oracle(s, b.track, t0, eps).abs(), bound * (1 + 1e-12));
  // far from the ray the sum vanishes at the 1e-12 level
  SourceSet far = sources(1.5, {1}, {c + Vec2(0, 2.0)});
  EXPECT_LT(s_oracle(far, b.track, t0, eps).abs(), 1e-12 * far.weight(0));
}

TEST(Oracle, ShiftingT0AwayFromHit) {
  Straight b;
  SourceSet s = sources(2.0, {1}, {Vec2(0.5, 0)});
  for (double eps : {0.08, 0.04, 0.02}) {
    double at = s_oracle(s, b.track, 1.5, eps).abs();
    double off = s_oracle(s, b.track, 1.5 + 3 * std::sqrt(eps), eps).abs();
    EXPECT_LE(off, 0.1 * at);
  }
}

TEST(Oracle, LinearInTheSourceSet) {
  Straight b;
  SourceSet ab = sources(1.5, {1, 2}, {Vec2(0.5, 0.05), Vec2(0.45, -0.1)});
  SourceSet a = sources(1.5, {1}, {ab.x[0]});
  SourceSet c = sources(1.5, {2}, {ab.x[1]});
  cplx sum = s_oracle(a, b.track, 1.5, 0.04).value() + s_oracle(c, b.track, 1.5, 0.04).value();
  EXPECT_LT(rel(s_oracle(ab, b.track, 1.5, 0.04).value(), sum), 1e-12);
}

TEST(Oracle, TinyWeightsStayRepresentable) {
  Straight b;
  SourceSet s = sources(1.5, {40}, {Vec2(0.5, 0)});
  SValue v = s_oracle(s, b.track, 1.5, 0.04);
  EXPECT_FALSE(v.is_zero());
  double expect = -std::pow(1.5, 40) * std::log(1.5) - 0.25 * std::log(1 + 2.25);
  EXPECT_NEAR(v.log_abs / expect, 1.0, 1e-14);
}

TEST(Oracle, ExactHitOnBumpIncludesVolumeFactor) {
  BumpParams bp;
  bp.amplitude = 0.3;
  bp.radius = 0.4;
  MetricModel m = MetricModel::conformal_bump(disk(), bp, 4.0);
  BeamTrack track(m, from_tangent(m, Vec2(1.5, 0.2), Vec2(-1, -0.1)), 3.0);
  BeamFrame f = track.at(1.3);
  ASSERT_LT(disk().signed_distance(f.x), 0);
  SourceSet s = sources(2.0, {1}, {f.x});
  cplx v = s_oracle(s, track, 1.3, 0.02).value();
  EXPECT_LT(rel(v, 0.25 * f.u0 * m.sqrt_det_at(f.x)), 1e-12);
}

TEST(Limit, ScheduleRules) {
  auto constant = [](double) { return SValue::from(cplx(0.2, 0.1)); };
  SEstimate e = s_limit(constant, {0.08, 0.04, 0.02});
  EXPECT_EQ(e.error, 0.0);
  EXPECT_TRUE(e.stabilizing);
  EXPECT_EQ(e.eps, 0.02);
  EXPECT_THROW(s_limit(constant, {0.08, 0.04}), std::invalid_argument);
  EXPECT_THROW(s_limit(constant, {0.08, 0.04, 0.03}), std::invalid_argument);
}

TEST(Limit, OracleStabilizesOnHitAndDecaysOffHit) {
  Straight b;
  SourceSet s = sources(1.5, {1, 2, 3}, {Vec2(0.5, 0), Vec2(-0.5, 0), Vec2(-0.35, -0.35)});
  auto hit = [&](double eps) { return s_oracle(s, b.track, 1.5, eps); };
  SEstimate e = s_limit(hit, {0.04, 0.02, 0.01});
  EXPECT_LT(e.error / e.value.abs(), 0.02);
  auto off = [&](double eps) { return s_oracle(s, b.track, 1.3, eps); };
  SEstimate o = s_limit(off, {0.08, 0.04, 0.02, 0.01}, SPath::oracle);
  for (std::size_t k = 1; k < o.sequence.size(); ++k)
    EXPECT_LT(o.sequence[k].log_abs, o.sequence[k - 1].log_abs);
  EXPECT_TRUE(o.stabilizing);
}

TEST(Pairing, TimeCutoffShape) {
  TimeCutoff chi{2.0, 0.5};
  EXPECT_EQ(chi(1.5), 1.0);
  EXPECT_EQ(chi(-3), 1.0);
  EXPECT_EQ(chi(1.95), 0.0);
  double prev = 1.0;
  for (double t = 1.5; t <= 1.95; t += 0.01) {
    EXPECT_LE(chi(t), prev);
    prev = chi(t);
  }
}

namespace {

struct DataCase {
  MetricModel full, ext;
  Grid grid;
  SourceSet set;
  Forcing forcing;
  FullSolution sol;
  Vec2 y;
  double T0 = -0.75;
};

DataCase data_case(double A, double Rc) {
  BumpParams bp;
  bp.amplitude = A;
  bp.radius = 0.4;
  MetricModel m = MetricModel::conformal_bump(disk(), bp, 4.0);
  Vec2 y(0.75 + Rc, 0);
  Grid g = Grid::make(y.x() + Rc + 0.3, 1.0 / 64, -1, m.max_speed());
  SourceSet s = sources(2.0, {1}, {Vec2(0.5, 0)});
  Forcing f = mollify_source(s, 2 * g.h, 2 * g.dt, g, -0.75);
  SolveOptions o;
  o.T0 = -0.75;
  o.T = y.x() - 0.5 + 0.2;
  o.trace_points = 2048;
  FullSolution sol = solve_full(m, f, g, o);
  return {m, m.restricted_to_exterior(), g, s, f, std::move(sol), y};
}

}  // namespace

TEST(Pairing, ZeroTraceGivesZero) {
  MetricModel ext = MetricModel::euclidean(disk(), 3.0).restricted_to_exterior();
  Grid g = Grid::make(3.0, 1.0 / 32, -1);
  BoundaryTrace tr;
  tr.s = trace_arclengths(disk(), 64);
  for (double s : tr.s) tr.points.push_back(disk().point_at(s));
  tr.T0 = -0.75;
  tr.dt = g.dt;
  tr.steps = 300;
  tr.perimeter = disk().perimeter();
  tr.values.assign(300 * 64, 0.0);
  ExteriorSolver es(ext, g, tr);
  BeamData bd = beam_initial_data(ext, Vec2(1.8, 0), Vec2(-1, 0), 0.08, 1.0, g);
  SDataOptions o;
  o.T0 = -0.75;
  SDataResult r = s_data(es, bd, 1.3, o);
  EXPECT_TRUE(r.value.is_zero());
}

TEST(Pairing, DataMatchesOracleAtHit) {
  const double eps = 0.16, Rc = 1.6;
  DataCase c = data_case(0.0, Rc);
  ExteriorSolver es(c.ext, c.grid, c.sol.trace);
  BeamData bd = beam_initial_data(c.ext, c.y, Vec2(-1, 0), eps, Rc, c.grid);
  SDataOptions o;
  o.T0 = c.T0;
  o.source_end = c.forcing.t_end();
  o.forcing = &c.forcing;
  double t0 = c.y.x() - 0.5;
  SDataResult r = s_data(es, bd, t0, o);
  BeamTrack track(c.full, from_tangent(c.full, c.y, Vec2(-1, 0)), t0 + 1.0);
  cplx point = s_oracle(c.set, track, r.t0, eps).value();
  cplx moll = s_oracle_mollified(c.set, c.forcing, c.grid, track, r.t0, eps).value();
  EXPECT_LE(rel(r.value.value(), point), 0.10);
  EXPECT_LE(rel(r.value.value(), moll), 0.05);
  EXPECT_EQ(c.ext.interior_queries(), 0);

  // preconditions
  SDataOptions late = o;
  late.source_end = t0;
  EXPECT_THROW(s_data(es, bd, t0, late), std::invalid_argument);
  SDataOptions wide = o;
  wide.r = 5.0;
  EXPECT_THROW(s_data(es, bd, t0, wide), std::invalid_argument);
}

TEST(Pairing, DataPathIsBlindToTheInterior) {
  const double eps = 0.16, Rc = 1.6;
  DataCase c = data_case(0.3, Rc);
  BumpParams other;
  other.amplitude = 0.9;
  other.radius = 0.3;
  other.center = Vec2(0.05, -0.1);
  MetricModel m2 = MetricModel::conformal_bump(disk(), other, 4.0).restricted_to_exterior();
  SDataOptions o;
  o.T0 = c.T0;
  o.source_end = c.forcing.t_end();
  o.forcing = &c.forcing;
  double t0 = c.y.x() - 0.5;
  SValue v[2];
  const MetricModel* models[2] = {&c.ext, &m2};
  for (int k = 0; k < 2; ++k) {
    ExteriorSolver es(*models[k], c.grid, c.sol.trace);
    BeamData bd = beam_initial_data(*models[k], c.y, Vec2(-1, 0), eps, Rc, c.grid);
    v[k] = s_data(es, bd, t0, o).value;
    EXPECT_EQ(models[k]->interior_queries(), 0);
  }
  EXPECT_EQ(v[0].log_abs, v[1].log_abs);
  EXPECT_EQ(v[0].arg, v[1].arg);
}
