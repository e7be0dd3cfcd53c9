#include "scatlab/decode.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <sstream>

namespace scatlab {

namespace {

const double kPhi = 0.5 * (std::sqrt(5.0) - 1.0);

struct GoldenResult {
  double x = 0;
  SValue S;
};

// Maximise log|f| on [a, b].
GoldenResult golden_max(const SFunction& f, double a, double b, int iters) {
  double c = b - kPhi * (b - a), d = a + kPhi * (b - a);
  SValue fc = f(c), fd = f(d);
  for (int k = 0; k < iters; ++k) {
    if (fc.log_abs >= fd.log_abs) {
      b = d;
      d = c;
      fd = fc;
      c = b - kPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kPhi * (b - a);
      fd = f(d);
    }
  }
  return fc.log_abs >= fd.log_abs ? GoldenResult{c, fc} : GoldenResult{d, fd};
}

Vec2 rotate(const Vec2& v, double phi) {
  double c = std::cos(phi), s = std::sin(phi);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

// Least squares polynomial of degree deg in x; returns coefficients c0..cdeg.
Eigen::VectorXd polyfit(const std::vector<double>& x, const std::vector<double>& y, int deg,
                        double* rms) {
  Eigen::MatrixXd A(x.size(), deg + 1);
  Eigen::VectorXd b(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (int p = 0; p <= deg; ++p) A(i, p) = std::pow(x[i], p);
    b(i) = y[i];
  }
  Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
  if (rms) *rms = std::sqrt((A * c - b).squaredNorm() / static_cast<double>(x.size()));
  return c;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<Probe> make_probes(const MetricModel& exterior, const Vec2& x, const Vec2& xi,
                               const std::vector<double>& offsets, double R) {
  std::vector<Probe> out;
  const Boundary& b = exterior.region();
  PhasePoint back = from_tangent(exterior, x, -xi);
  for (double s : offsets) {
    if (!(s > 0)) continue;
    try {
      PhasePoint q = geodesic_flow(exterior, back, s);
      if (b.signed_distance(q.x) <= 0) continue;
      if (std::isfinite(R) && q.x.cwiseAbs().maxCoeff() >= R) continue;
      Vec2 eta = -tangent(exterior, q);
      HitOptions ho;
      ho.horizon = s + 1.0;
      HitResult hr = first_hit_tau(exterior, from_tangent(exterior, q.x, eta), ho);
      if (!(std::abs(hr.tau - s) <= 1e-6)) continue;
      out.push_back({q.x, eta, s, hr.tau, x, xi});
    } catch (const std::exception&) {
      continue;
    }
  }
  return out;
}

SFactory oracle_factory(const MetricModel& model, const SourceSet& set, double horizon) {
  auto shared = std::make_shared<const SourceSet>(set);
  return [model, shared, horizon](const Vec2& y, const Vec2& eta, double eps) -> SFunction {
    auto track = std::make_shared<BeamTrack>(model, from_tangent(model, y, eta), horizon);
    return [track, shared, eps](double t0) { return s_oracle(*shared, *track, t0, eps); };
  };
}

std::vector<HitEvent> scan_hits(const SFunction& S, const ScanOptions& opt) {
  if (!(opt.eps > 0)) throw std::invalid_argument("scan_hits: eps must be positive");
  const double step = opt.step_factor * std::sqrt(opt.eps);
  std::vector<double> t;
  for (double s = opt.t_start; s <= opt.t_end + 1e-12; s += step) t.push_back(s);
  std::vector<HitEvent> peaks;
  if (t.size() < 3) return peaks;
  std::vector<SValue> v;
  v.reserve(t.size());
  for (double s : t) v.push_back(S(s));
  const double floor = opt.threshold > 0 ? std::log(opt.threshold) : -kInf;
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    if (v[i].is_zero() || v[i].log_abs <= floor) continue;
    if (!(v[i].log_abs >= v[i - 1].log_abs && v[i].log_abs > v[i + 1].log_abs)) continue;
    GoldenResult g = golden_max(S, t[i - 1], t[i + 1], opt.golden_iters);
    HitEvent h;
    if (g.S.log_abs >= v[i].log_abs) {
      h.t = g.x;
      h.S = g.S;
    } else {
      h.t = t[i];
      h.S = v[i];
    }
    peaks.push_back(h);
  }
  std::vector<HitEvent> merged;
  const double gap = opt.merge_factor * std::sqrt(opt.eps);
  for (const HitEvent& h : peaks) {
    if (!merged.empty() && h.t - merged.back().t < gap) {
      HitEvent& m = merged.back();
      if (h.S.log_abs > m.S.log_abs) {
        m.t = h.t;
        m.S = h.S;
      }
      m.merged = true;
    } else {
      merged.push_back(h);
    }
  }
  return merged;
}

DecodedIndex decode_value(const SValue& S, const Lattice& lat, DecodeRoute route) {
  DecodedIndex d;
  if (S.is_zero()) return d;
  const double lnl = std::log(lat.lambda);
  const double L = S.log_abs / lnl;
  const int k_lo = lat.first_index, k_hi = lat.first_index + lat.count - 1;
  if (route == DecodeRoute::m_A) {
    ModResult mr = m_A(L, lat.lambda);
    double log_a = L - mr.r;
    d.k = static_cast<int>(std::lround(std::log(-log_a) / lnl));
    d.residual = mr.r;
    d.decodable = mr.in_range && std::abs(mr.r) <= lat.B && in_band(d.k, lat.lambda, lat.B) &&
                  d.k >= k_lo && d.k <= k_hi;
  } else {
    double best = kInf, second = kInf;
    for (int k = k_lo; k <= k_hi; ++k) {
      double r = L - lattice_point(k, lat.lambda);
      if (std::abs(r) < std::abs(best)) {
        second = best;
        best = r;
        d.k = k;
      } else if (std::abs(r) < std::abs(second)) {
        second = r;
      }
    }
    d.residual = best;
    d.decodable = std::abs(best) <= lat.B && !(std::abs(second) <= lat.B);
  }
  d.beta = std::pow(lat.lambda, d.residual);
  return d;
}

void decode_hit(HitEvent& hit, const Lattice& lat, DecodeRoute route) {
  DecodedIndex d = decode_value(hit.S, lat, route);
  hit.k = d.k;
  hit.beta = d.beta;
  hit.decodable = d.decodable;
  hit.confidence = d.decodable ? (hit.merged ? 0.5 : 1.0) : 0.0;
}

TauResult recover_tau(const std::vector<Probe>& probes,
                      const std::vector<std::vector<HitEvent>>& hits) {
  TauResult r;
  for (std::size_t p = 0; p < probes.size() && p < hits.size(); ++p)
    for (std::size_t h = 0; h < hits[p].size(); ++h) {
      if (!hits[p][h].decodable) continue;
      double tau = hits[p][h].t - probes[p].tau_ext;
      if (tau < r.tau) r = {tau, static_cast<int>(p), static_cast<int>(h)};
    }
  return r;
}

double fan_slope(const std::vector<FanSample>& samples, double s0, double perimeter,
                 double* residual) {
  std::vector<double> x, y;
  for (const FanSample& f : samples) {
    x.push_back(std::remainder(f.s - s0, perimeter));
    y.push_back(f.ell);
  }
  if (residual) *residual = 0;
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  if (x.size() == 2) return (y[1] - y[0]) / (x[1] - x[0]);
  Eigen::VectorXd c = polyfit(x, y, 2, residual);
  return c(1);
}

DirectionResult recover_exit_direction(const Boundary& boundary, const SourceSet& set,
                                       const Probe& base, const SFactory& factory,
                                       const ScanOptions& scan, const Lattice& lat,
                                       DecodeRoute route, const DirectionOptions& opt) {
  DirectionResult out;
  const int n = 2 * opt.m + 1;
  const double dphi = opt.m > 0 ? opt.half_width / opt.m : opt.half_width;
  struct Coarse {
    int i;
    int k;
    double t;
  };
  std::vector<Coarse> coarse;
  for (int i = 0; i < n; ++i) {
    double phi = -opt.half_width + i * dphi;
    SFunction S = factory(base.y, rotate(base.eta, phi), scan.eps);
    std::vector<HitEvent> hits = scan_hits(S, scan);
    for (HitEvent& h : hits) decode_hit(h, lat, route);
    for (const HitEvent& h : hits)
      if (h.decodable) {
        coarse.push_back({i, h.k, h.t});
        break;
      }
  }
  // runs of adjacent fan directions that decode to the same index
  std::vector<std::vector<Coarse>> runs;
  for (const Coarse& c : coarse) {
    if (!runs.empty() && runs.back().back().k == c.k && runs.back().back().i + 1 == c.i)
      runs.back().push_back(c);
    else
      runs.push_back({c});
  }

  const double tstep = scan.step_factor * std::sqrt(scan.eps);
  std::map<int, std::pair<FanSample, double>> best;  // k -> sample, log|S|
  for (const std::vector<Coarse>& run : runs) {
    const int k = run.front().k;
    int slot = set.position_of(k);
    if (slot < 0) continue;
    double lo = -opt.half_width + (run.front().i - 0.5) * dphi;
    double hi = -opt.half_width + (run.back().i + 0.5) * dphi;
    double tmin = run.front().t, tmax = run.front().t;
    for (const Coarse& c : run) {
      tmin = std::min(tmin, c.t);
      tmax = std::max(tmax, c.t);
    }
    tmin -= 2 * tstep;
    tmax += 2 * tstep;
    double t_best = run.front().t;
    auto peak = [&](double phi) {
      SFunction S = factory(base.y, rotate(base.eta, phi), scan.eps);
      double bt = tmin;
      SValue bv;
      for (double t = tmin; t <= tmax + 1e-12; t += tstep) {
        SValue v = S(t);
        if (bv.is_zero() || v.log_abs > bv.log_abs) {
          bv = v;
          bt = t;
        }
      }
      GoldenResult g = golden_max(S, bt - tstep, bt + tstep, opt.golden_iters);
      if (g.S.log_abs < bv.log_abs) g = {bt, bv};
      t_best = g.x;
      return g.S;
    };
    GoldenResult g = golden_max(peak, lo, hi, opt.golden_iters);
    // an optimum on the bracket edge is the tail of a neighbouring source
    if (std::min(g.x - lo, hi - g.x) < 0.02 * dphi) continue;
    peak(g.x);
    DecodedIndex d = decode_value(g.S, lat, route);
    if (!d.decodable || d.k != k) continue;
    auto it = best.find(k);
    if (it == best.end() || g.S.log_abs > it->second.second)
      best[k] = {FanSample{g.x, set.s[slot], t_best, k}, g.S.log_abs};
  }
  for (const auto& [k, v] : best) out.samples.push_back(v.first);
  std::sort(out.samples.begin(), out.samples.end(),
            [](const FanSample& a, const FanSample& b) { return a.phi < b.phi; });
  if (out.samples.size() < 2) return out;

  const double P = boundary.perimeter();
  const double sref = out.samples.front().s;
  std::vector<double> phi, srel, ell;
  for (const FanSample& f : out.samples) {
    phi.push_back(f.phi);
    srel.push_back(std::remainder(f.s - sref, P));
    ell.push_back(f.ell);
  }
  for (std::size_t i = 2; i < srel.size(); ++i)
    if ((srel[i] - srel[i - 1]) * (srel[1] - srel[0]) <= 0) out.c4_failure = true;
  if (srel[1] == srel[0]) out.c4_failure = true;

  int deg = out.samples.size() >= 3 ? 2 : 1;
  Eigen::VectorXd cs = polyfit(phi, srel, deg, nullptr);
  Eigen::VectorXd cl = polyfit(phi, ell, deg, nullptr);
  double s0 = sref + cs(0);
  out.ell0 = cl(0);
  double res = 0;
  double slope = fan_slope(out.samples, s0, P, &res);
  out.fit_residual = res;
  if (!std::isfinite(slope)) return out;
  if (std::abs(slope) >= 1) {
    out.grazing = true;
    slope = std::copysign(1.0, slope);
  }
  out.dl_ds = slope;
  out.z = boundary.point_at(s0);
  Vec2 T = boundary.tangent_at(s0);
  Vec2 nu = boundary.normal(out.z);
  out.zeta = slope * T + std::sqrt(std::max(0.0, 1 - slope * slope)) * nu;
  out.ok = !out.c4_failure;
  return out;
}

RecoveredEntry decode_entry(const MetricModel& exterior, const SourceSet& set, const Vec2& x,
                            const Vec2& xi, const SFactory& factory, const DecodeOptions& opt) {
  RecoveredEntry e;
  e.x = x;
  e.xi = xi;
  e.probes = make_probes(exterior, x, xi, opt.offsets, opt.R);
  if (e.probes.empty()) {
    e.notes.push_back("no valid probes");
    return e;
  }
  std::vector<std::vector<std::vector<HitEvent>>> by_eps;
  for (double eps : opt.eps_schedule) {
    std::vector<std::vector<HitEvent>> hits;
    for (const Probe& p : e.probes) {
      ScanOptions so;
      so.eps = eps;
      so.t_start = p.tau_ext + opt.start_margin * std::sqrt(eps);
      so.t_end = p.tau_ext + opt.max_travel;
      so.step_factor = opt.step_factor;
      so.threshold = opt.threshold;
      so.golden_iters = opt.golden_iters;
      std::vector<HitEvent> h = scan_hits(factory(p.y, p.eta, eps), so);
      for (HitEvent& ev : h) decode_hit(ev, opt.lattice, opt.route);
      hits.push_back(std::move(h));
    }
    TauResult tr = recover_tau(e.probes, hits);
    e.tau_by_eps.push_back(tr.tau);
    e.k_by_eps.push_back(tr.probe >= 0 ? hits[tr.probe][tr.hit].k : 0);
    by_eps.push_back(std::move(hits));
  }
  const double last_eps = opt.eps_schedule.back();
  e.hits = by_eps.back();
  if (opt.schedule_filter && by_eps.size() > 1) {
    int dropped = 0;
    for (std::size_t p = 0; p < e.hits.size(); ++p)
      for (HitEvent& h : e.hits[p]) {
        if (!h.decodable) continue;
        bool ok = true;
        for (std::size_t q = 0; q + 1 < by_eps.size() && ok; ++q) {
          double tol = opt.schedule_match * std::sqrt(opt.eps_schedule[q]);
          bool found = false;
          for (const HitEvent& g : by_eps[q][p])
            found |= g.decodable && g.k == h.k && std::abs(g.t - h.t) <= tol;
          ok = found;
        }
        if (!ok) {
          h.decodable = false;
          h.confidence = 0;
          ++dropped;
        }
      }
    if (dropped)
      e.notes.push_back(std::to_string(dropped) + " hit(s) dropped: index not stable across eps");
  }
  TauResult last = recover_tau(e.probes, e.hits);
  if (last.probe < 0) {
    e.notes.push_back("no decodable hit");
    return e;
  }
  const HitEvent& hit = e.hits[last.probe][last.hit];
  e.tau_hat = last.tau;
  e.k_hat = hit.k;
  e.confidence = hit.confidence;
  int slot = set.position_of(hit.k);
  if (slot >= 0) e.z_hat = set.x[slot];
  for (int k : e.k_by_eps)
    if (k != 0 && k != e.k_hat) e.index_stable = false;
  if (!e.index_stable) {
    e.notes.push_back("decoded index changes across the eps schedule");
    e.confidence *= 0.5;
  }
  if (opt.directions) {
    const Probe& base = e.probes[last.probe];
    ScanOptions so;
    so.eps = last_eps;
    so.t_start = base.tau_ext + opt.start_margin * std::sqrt(last_eps);
    so.t_end = base.tau_ext + opt.max_travel;
    so.step_factor = opt.step_factor;
    so.threshold = opt.threshold;
    so.golden_iters = opt.golden_iters;
    e.direction = recover_exit_direction(exterior.region(), set, base, factory, so, opt.lattice,
                                         opt.route, opt.fan);
    if (e.direction.ok) {
      e.zeta_hat = e.direction.zeta;
      e.tau_interp = e.direction.ell0 - base.tau_ext;
    } else if (e.direction.c4_failure) {
      e.notes.push_back("fan exits not monotone (C4 failure)");
    } else {
      e.notes.push_back("fan produced fewer than two pass-through samples");
    }
    if (e.direction.grazing) e.notes.push_back("tangential slope clamped (grazing)");
  }
  return e;
}

double angle_between(const Vec2& a, const Vec2& b) {
  if (!a.allFinite() || !b.allFinite()) return kInf;
  double c = a.dot(b) / (a.norm() * b.norm());
  return std::acos(std::clamp(c, -1.0, 1.0));
}

RecoveredScattering assemble_and_compare(std::vector<RecoveredEntry> entries,
                                         const MetricModel& model, const SourceSet& set) {
  RecoveredScattering out;
  Summary& s = out.summary;
  s.max_gap = set.max_gap(model.region().perimeter());
  std::vector<double> tau_errs, zeta_errs;
  for (RecoveredEntry& r : entries) {
    ComparedEntry c;
    c.truth = ground_truth_sigma(model, r.x, r.xi);
    c.rec = std::move(r);
    ++s.count;
    if (c.truth.transversal) ++s.transversal;
    if (c.rec.direction.c4_failure) ++s.c4_flags;
    if (std::isfinite(c.truth.tau)) c.chord = (c.truth.exit_z - c.rec.x).norm();
    if (std::isfinite(c.rec.tau_hat)) {
      ++s.decoded;
      c.tau_err = std::abs(c.rec.tau_hat - c.truth.tau);
      if (c.rec.z_hat.allFinite() && c.truth.exit_z.allFinite())
        c.z_err = (c.rec.z_hat - c.truth.exit_z).norm();
      c.zeta_err = angle_between(c.rec.zeta_hat, c.truth.zeta);
      if (c.rec.tau_hat < c.chord / std::sqrt(model.c2()) - 0.02) ++s.speed_bound_violations;
    }
    tau_errs.push_back(c.tau_err);
    zeta_errs.push_back(c.zeta_err);
    s.tau_err_max = std::max(s.tau_err_max, c.tau_err);
    s.z_err_max = std::max(s.z_err_max, c.z_err);
    s.zeta_err_max = std::max(s.zeta_err_max, c.zeta_err);
    out.entries.push_back(std::move(c));
  }
  s.tau_err_median = median(tau_errs);
  s.zeta_err_median = median(zeta_errs);
  return out;
}

}  // namespace scatlab
