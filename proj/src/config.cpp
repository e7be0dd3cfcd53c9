#include "scatlab/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

namespace scatlab {

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::blind: return "blind";
    case Mode::oracle: return "oracle";
    default: return "both";
  }
}

Mode parse_mode(const std::string& s) {
  if (s == "blind") return Mode::blind;
  if (s == "oracle") return Mode::oracle;
  if (s == "both") return Mode::both;
  throw ConfigError("run.mode", "expected blind, oracle or both, got '" + s + "'");
}

namespace {

std::string trim(const std::string& s) {
  auto a = s.find_first_not_of(" \t"), b = s.find_last_not_of(" \t");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& field, const std::string& s) {
  std::string t = trim(s);
  double v = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty())
    throw ConfigError(field, "expected a number, got '" + s + "'");
  return v;
}

int to_int(const std::string& field, const std::string& s) {
  std::string t = trim(s);
  int v = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty())
    throw ConfigError(field, "expected an integer, got '" + s + "'");
  return v;
}

bool to_bool(const std::string& field, const std::string& s) {
  std::string t = trim(s);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw ConfigError(field, "expected true or false, got '" + s + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!trim(item).empty()) out.push_back(trim(item));
  return out;
}

std::vector<double> to_list(const std::string& field, const std::string& s) {
  std::vector<double> v;
  for (const std::string& p : split(s, ',')) v.push_back(to_double(field, p));
  return v;
}

std::string list_str(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s;
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define NUM(key, member)                                                                   \
  {key,                                                                                    \
   {[](ExperimentConfig& c, const std::string& v) { c.member = to_double(key, v); },        \
    [](const ExperimentConfig& c) { return fmt(c.member); }}}
#define INT(key, member)                                                                   \
  {key,                                                                                    \
   {[](ExperimentConfig& c, const std::string& v) { c.member = to_int(key, v); },           \
    [](const ExperimentConfig& c) { return std::to_string(c.member); }}}
#define LIST(key, member)                                                                  \
  {key,                                                                                    \
   {[](ExperimentConfig& c, const std::string& v) { c.member = to_list(key, v); },          \
    [](const ExperimentConfig& c) { return list_str(c.member); }}}

// Entries are stored explicitly; [entries] count/incidence expand into the list.
const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f = {
      {"metric.kind",
       {[](ExperimentConfig& c, const std::string& v) { c.metric = trim(v); },
        [](const ExperimentConfig& c) { return c.metric; }}},
      NUM("metric.boundary_radius", boundary_radius),
      NUM("metric.bump_amplitude", bump.amplitude),
      NUM("metric.bump_radius", bump.radius),
      NUM("metric.bump_center_x", bump.center.x()),
      NUM("metric.bump_center_y", bump.center.y()),
      NUM("sources.lambda", lambda),
      INT("sources.count", count),
      INT("sources.first_index", first_index),
      NUM("sources.B", B),
      NUM("grid.R", R),
      NUM("grid.h", h),
      NUM("grid.dt", dt),
      NUM("grid.T0", T0),
      NUM("grid.T", T),
      NUM("grid.sigma_x", sigma_x),
      NUM("grid.sigma_t", sigma_t),
      INT("grid.trace_points", trace_points),
      NUM("beam.cutoff", cutoff),
      NUM("beam.horizon", horizon),
      LIST("decode.eps", eps),
      LIST("decode.offsets", offsets),
      NUM("decode.fan_half_width", fan_half_width),
      INT("decode.fan_m", fan_m),
      {"decode.directions",
       {[](ExperimentConfig& c, const std::string& v) {
          c.directions = to_bool("decode.directions", v);
        },
        [](const ExperimentConfig& c) { return std::string(c.directions ? "true" : "false"); }}},
      {"decode.schedule_filter",
       {[](ExperimentConfig& c, const std::string& v) {
          c.schedule_filter = to_bool("decode.schedule_filter", v);
        },
        [](const ExperimentConfig& c) {
          return std::string(c.schedule_filter ? "true" : "false");
        }}},
      {"decode.route",
       {[](ExperimentConfig& c, const std::string& v) {
          std::string t = trim(v);
          if (t == "m_A")
            c.route = DecodeRoute::m_A;
          else if (t == "known_lattice")
            c.route = DecodeRoute::known_lattice;
          else
            throw ConfigError("decode.route", "expected m_A or known_lattice, got '" + v + "'");
        },
        [](const ExperimentConfig& c) {
          return std::string(c.route == DecodeRoute::m_A ? "m_A" : "known_lattice");
        }}},
      NUM("decode.start_margin", start_margin),
      NUM("decode.max_travel", max_travel),
      NUM("decode.step_factor", step_factor),
      NUM("decode.threshold", threshold),
      {"entries.list",
       {[](ExperimentConfig& c, const std::string& v) {
          c.entries.clear();
          for (const std::string& p : split(v, ',')) {
            auto parts = split(p, ':');
            if (parts.size() != 2)
              throw ConfigError("entries.list", "expected s:incidence pairs, got '" + p + "'");
            c.entries.push_back(
                {to_double("entries.list", parts[0]), to_double("entries.list", parts[1])});
          }
        },
        [](const ExperimentConfig& c) {
          std::string s;
          for (std::size_t i = 0; i < c.entries.size(); ++i)
            s += (i ? ", " : "") + fmt(c.entries[i].s) + ":" + fmt(c.entries[i].incidence);
          return s;
        }}},
      {"run.mode",
       {[](ExperimentConfig& c, const std::string& v) { c.mode = parse_mode(trim(v)); },
        [](const ExperimentConfig& c) { return std::string(mode_name(c.mode)); }}},
      {"run.out",
       {[](ExperimentConfig& c, const std::string& v) { c.out = trim(v); },
        [](const ExperimentConfig& c) { return c.out; }}},
  };
  return f;
}

#undef NUM
#undef INT
#undef LIST

}  // namespace

Boundary ExperimentConfig::boundary() const { return Boundary::disk(Vec2::Zero(), boundary_radius); }

MetricModel ExperimentConfig::model() const {
  if (metric == "conformal_bump") return MetricModel::conformal_bump(boundary(), bump, R);
  return MetricModel::euclidean(boundary(), R);
}

SourceSet ExperimentConfig::sources() const {
  return generate_sources(lambda, count, boundary(), first_index);
}

Grid ExperimentConfig::grid() const { return Grid::make(R, h, dt, model().max_speed()); }

DecodeOptions ExperimentConfig::decode_options() const {
  DecodeOptions o;
  o.lattice = {lambda, first_index, count, B};
  o.route = route;
  o.eps_schedule = eps;
  o.offsets = offsets;
  o.start_margin = start_margin;
  o.max_travel = max_travel;
  o.step_factor = step_factor;
  o.threshold = threshold;
  o.directions = directions;
  o.schedule_filter = schedule_filter;
  o.fan.half_width = fan_half_width;
  o.fan.m = fan_m;
  o.R = R;
  return o;
}

std::string ExperimentConfig::canonical() const {
  std::string s;
  for (const auto& [key, f] : fields()) s += key + " = " + f.get(*this) + "\n";
  return s;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string ExperimentConfig::hash() const {
  std::string s;
  for (const auto& [key, f] : fields())
    if (key != "run.out") s += key + " = " + f.get(*this) + "\n";
  return sha256_hex(s);
}

ExperimentConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()), e.message());
  }
  ExperimentConfig c;
  int entry_count = 0;
  std::vector<double> incidence{0.0};
  bool have_list = false;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError(section, "key outside of a section");
    for (const auto& [key, node] : body) {
      std::string path = section + "." + key;
      const std::string& v = node.data();
      if (path == "entries.count") {
        entry_count = to_int(path, v);
        continue;
      }
      if (path == "entries.incidence") {
        incidence = to_list(path, v);
        continue;
      }
      auto it = fields().find(path);
      if (it == fields().end()) throw ConfigError(path, "unknown field");
      it->second.set(c, v);
      if (path == "entries.list") have_list = true;
    }
  }
  if (!have_list && entry_count > 0) {
    if (incidence.empty()) throw ConfigError("entries.incidence", "empty list");
    double P = 2 * std::numbers::pi * c.boundary_radius;
    for (int i = 0; i < entry_count; ++i)
      c.entries.push_back({P * (i + 0.5) / entry_count, incidence[i % incidence.size()]});
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("--config", "cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

void validate(const ExperimentConfig& c) {
  auto require = [](bool ok, const char* field, const std::string& what) {
    if (!ok) throw ConfigError(field, what);
  };
  require(c.metric == "euclidean" || c.metric == "conformal_bump", "metric.kind",
          "expected euclidean or conformal_bump");
  require(c.boundary_radius > 0, "metric.boundary_radius", "must be positive");
  if (c.metric == "conformal_bump") {
    require(c.bump.amplitude >= 0, "metric.bump_amplitude", "must be non-negative");
    require(c.bump.radius > 0, "metric.bump_radius", "must be positive");
    require(c.bump.center.norm() + c.bump.radius < c.boundary_radius, "metric.bump_radius",
            "bump support must lie inside M");
  }
  require(c.lambda > 1, "sources.lambda", "must exceed 1");
  require(c.count >= 1, "sources.count", "must be >= 1");
  require(c.first_index >= 1, "sources.first_index", "must be >= 1");
  require(c.B > 0, "sources.B", "must be positive");
  bool band = false;
  for (int k = c.first_index; k < c.first_index + c.count; ++k) band |= in_band(k, c.lambda, c.B);
  require(band, "sources.B", "no active index lies in the decodable band");

  require(c.h > 0, "grid.h", "must be positive");
  require(c.R > c.boundary_radius, "grid.R", "must exceed the boundary radius");
  require(c.T > c.T0, "grid.T", "must exceed grid.T0");
  require(c.dt >= 0, "grid.dt", "must be non-negative");
  double cfl = 0.5 * c.h / c.model().max_speed();
  require(c.dt <= cfl * (1 + 1e-12), "grid.dt", "violates the CFL bound 0.5 h / v_max = " + fmt(cfl));
  require(c.sigma_x >= 0 && c.sigma_t >= 0, "grid.sigma_x", "must be non-negative");
  require(c.trace_points >= 8, "grid.trace_points", "must be >= 8");

  require(c.cutoff > 0, "beam.cutoff", "must be positive");
  require(c.horizon > 0, "beam.horizon", "must be positive");
  require(!c.eps.empty(), "decode.eps", "empty schedule");
  for (std::size_t i = 0; i < c.eps.size(); ++i) {
    require(c.eps[i] > 0, "decode.eps", "values must be positive");
    if (i) require(c.eps[i] < c.eps[i - 1], "decode.eps", "schedule must decrease");
  }
  require(!c.offsets.empty(), "decode.offsets", "empty list");
  for (double s : c.offsets) require(s > 0, "decode.offsets", "values must be positive");
  require(c.fan_half_width > 0, "decode.fan_half_width", "must be positive");
  require(c.fan_m >= 1, "decode.fan_m", "must be >= 1");
  require(c.step_factor > 0, "decode.step_factor", "must be positive");
  require(c.max_travel > 0, "decode.max_travel", "must be positive");
  require(!c.entries.empty(), "entries", "no entries (set entries.count or entries.list)");
  for (const EntrySpec& e : c.entries)
    require(std::abs(e.incidence) < std::numbers::pi / 2, "entries.incidence",
            "must lie in (-pi/2, pi/2)");

  double far = c.boundary_radius + *std::max_element(c.offsets.begin(), c.offsets.end());
  if (c.mode != Mode::oracle) {
    double near = *std::min_element(c.offsets.begin(), c.offsets.end());
    require(c.cutoff < near, "beam.cutoff", "beam support must stay clear of dM (cutoff < min offset)");
    require(c.R >= far + c.cutoff + 0.3, "grid.R",
            "margin rule R >= boundary_radius + max offset + cutoff + 0.3 = " +
                fmt(far + c.cutoff + 0.3));
  } else {
    require(c.R > far, "grid.R", "probes must lie inside the exterior box");
  }
  require(!c.out.empty(), "run.out", "empty path");
}

}  // namespace scatlab
