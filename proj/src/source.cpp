#include "scatlab/source.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <sstream>

namespace scatlab {

double lattice_point(int j, double lambda) { return -std::pow(lambda, j); }

double SourceSet::ln_weight(std::size_t k) const { return log_weight.at(k) * std::log(lambda); }

double SourceSet::weight(std::size_t k) const {
  double l = ln_weight(k);
  if (l < std::log(DBL_MIN))
    throw std::range_error("source weight a_" + std::to_string(index.at(k)) +
                           " underflows double precision");
  return std::exp(l);
}

double SourceSet::max_gap(double perimeter) const {
  if (s.empty()) return perimeter;
  std::vector<double> v = s;
  std::sort(v.begin(), v.end());
  double gap = v.front() + perimeter - v.back();
  for (std::size_t i = 1; i < v.size(); ++i) gap = std::max(gap, v[i] - v[i - 1]);
  return gap;
}

int SourceSet::position_of(int j) const {
  for (std::size_t k = 0; k < index.size(); ++k)
    if (index[k] == j) return static_cast<int>(k);
  return -1;
}

SourceSet generate_sources(double lambda, int count, const Boundary& boundary, int first_index) {
  if (!(lambda > 1)) throw std::invalid_argument("lambda must exceed 1");
  if (count < 1) throw std::invalid_argument("source count must be >= 1");
  if (first_index < 1) throw std::invalid_argument("first source index must be >= 1");
  const double phi = (std::sqrt(5.0) - 1) / 2;
  SourceSet set;
  set.lambda = lambda;
  set.first_index = first_index;
  for (int k = 0; k < count; ++k) {
    int j = first_index + k;
    double frac = std::fmod(j * phi, 1.0);
    double s = frac * boundary.perimeter();
    set.index.push_back(j);
    set.s.push_back(s);
    set.x.push_back(boundary.point_at(s));
    set.log_weight.push_back(lattice_point(j, lambda));
  }
  return set;
}

ModResult m_A(double s, double lambda) {
  ModResult out;
  if (!std::isfinite(s)) {
    out.r = s;
    out.in_range = false;
    return out;
  }
  double upper = -lambda + lambda * (lambda - 1) / 2;
  if (s > upper) {
    out.k = 1;
    out.r = s + lambda;
    out.in_range = false;
    return out;
  }
  int k0 = std::max(1, static_cast<int>(std::floor(std::log(-s) / std::log(lambda))));
  double best = INFINITY;
  for (int k = std::max(1, k0 - 1); k <= k0 + 2; ++k) {
    double r = s - lattice_point(k, lambda);
    double a = std::abs(r);
    if (a < best || (a == best && r > 0)) {
      best = a;
      out.r = r;
      out.k = k;
    }
  }
  return out;
}

bool in_band(int k, double lambda, double B) {
  if (k < 1) return false;
  double gap = k == 1 ? lambda * (lambda - 1) : std::pow(lambda, k - 1) * (lambda - 1);
  return gap > 2 * B;
}

int first_in_band(double lambda, double B) {
  for (int k = 1; k < 4096; ++k)
    if (in_band(k, lambda, B)) return k;
  return -1;
}

Forcing mollify_source(const SourceSet& set, double sigma_x, double sigma_t, const Grid& grid,
                       double T0, const std::vector<std::size_t>& subset,
                       const Boundary* confine) {
  if (sigma_x < 2 * grid.h * (1 - 1e-12))
    throw std::invalid_argument("mollify_source: sigma_x must be >= 2 grid spacings");
  if (sigma_t < 2 * grid.dt * (1 - 1e-12))
    throw std::invalid_argument("mollify_source: sigma_t must be >= 2 time steps");
  Forcing f;
  f.sigma_x = sigma_x;
  f.sigma_t = sigma_t;
  f.T0 = T0;
  f.dt = grid.dt;

  std::vector<std::size_t> active = subset;
  if (active.empty())
    for (std::size_t k = 0; k < set.size(); ++k) active.push_back(k);

  const double cut = 4 * sigma_x;
  for (std::size_t k : active) {
    const Vec2& c = set.x.at(k);
    SourceStencil st;
    st.source = k;
    int i0 = std::max(1, static_cast<int>(std::floor((c.x() - cut + grid.R) / grid.h)));
    int i1 = std::min(grid.n - 2, static_cast<int>(std::ceil((c.x() + cut + grid.R) / grid.h)));
    int j0 = std::max(1, static_cast<int>(std::floor((c.y() - cut + grid.R) / grid.h)));
    int j1 = std::min(grid.n - 2, static_cast<int>(std::ceil((c.y() + cut + grid.R) / grid.h)));
    double sum = 0;
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) {
        double r2 = (grid.node(i, j) - c).squaredNorm();
        if (r2 > cut * cut) continue;
        if (confine && confine->signed_distance(grid.node(i, j)) > 0) continue;
        double v = std::exp(-r2 / (2 * sigma_x * sigma_x));
        st.node.push_back(grid.index(i, j));
        st.phi.push_back(v);
        sum += v;
      }
    if (st.node.empty()) throw std::invalid_argument("mollify_source: source outside grid");
    for (double& v : st.phi) v /= sum * grid.h * grid.h;
    f.stencils.push_back(std::move(st));
    f.amplitude.push_back(set.weight(k));
  }
  for (std::size_t a = 0; a < active.size(); ++a)
    for (std::size_t b = a + 1; b < active.size(); ++b) {
      double d = (set.x[active[a]] - set.x[active[b]]).norm();
      if (std::exp(-d * d / (2 * sigma_x * sigma_x)) > 0.01) {
        std::ostringstream os;
        os << "source bumps " << set.index[active[a]] << " and " << set.index[active[b]]
           << " overlap above 1% of peak";
        f.warnings.push_back(os.str());
      }
    }

  const double tcut = 4 * sigma_t;
  long n0 = static_cast<long>(std::ceil((-tcut - T0) / grid.dt));
  long n1 = static_cast<long>(std::floor((tcut - T0) / grid.dt));
  if (n0 < 1) throw std::invalid_argument("mollify_source: T0 too close to the firing time");
  f.n_first = n0;
  double sum = 0;
  for (long n = n0; n <= n1; ++n) {
    double t = T0 + n * grid.dt;
    double v = std::exp(-t * t / (2 * sigma_t * sigma_t));
    f.psi.push_back(v);
    sum += v;
  }
  for (double& v : f.psi) v /= sum * grid.dt;
  return f;
}

}  // namespace scatlab
