#include "scatlab/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace scatlab {

static_assert(std::endian::native == std::endian::little, "trace files are little endian");

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ArtifactError("cannot write '" + path + "'");
  f << text;
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ArtifactError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string file_sha256(const std::string& path) { return sha256_hex(read_text(path)); }

void write_trace(const std::string& base, const BoundaryTrace& trace, const ExperimentConfig& cfg) {
  {
    std::ofstream f(base + ".trace", std::ios::binary);
    if (!f) throw ArtifactError("cannot write '" + base + ".trace'");
    f.write(reinterpret_cast<const char*>(trace.values.data()),
            static_cast<std::streamsize>(trace.values.size() * sizeof(double)));
  }
  json h;
  h["kind"] = "trace";
  h["R"] = cfg.R;
  h["h"] = cfg.h;
  h["dt"] = trace.dt;
  h["T0"] = trace.T0;
  h["T"] = trace.T0 + (trace.steps - 1) * trace.dt;
  h["steps"] = trace.steps;
  h["K_b"] = trace.count();
  h["boundary_rule"] = "uniform arclength s_k = k P / K_b";
  h["perimeter"] = trace.perimeter;
  h["config_hash"] = cfg.hash();
  h["mode"] = mode_name(cfg.mode);
  write_text(base + ".trace.json", h.dump(2) + "\n");
}

namespace {

void check_header(const json& h, const std::string& what, const ExperimentConfig& cfg) {
  std::string mode = h.value("mode", "");
  if (mode != mode_name(cfg.mode))
    throw ArtifactError(what + ": mode mismatch (artifact '" + mode + "', requested '" +
                        mode_name(cfg.mode) + "')");
  if (h.value("config_hash", "") != cfg.hash())
    throw ArtifactError(what + ": stale config hash (artifact " + h.value("config_hash", "?") +
                        ", config " + cfg.hash() + ")");
}

}  // namespace

BoundaryTrace read_trace(const std::string& base, const ExperimentConfig& cfg) {
  json h = json::parse(read_text(base + ".trace.json"));
  check_header(h, base + ".trace", cfg);
  BoundaryTrace tr;
  int K = h.at("K_b").get<int>();
  tr.s = trace_arclengths(cfg.boundary(), K);
  for (double s : tr.s) tr.points.push_back(cfg.boundary().point_at(s));
  tr.T0 = h.at("T0").get<double>();
  tr.dt = h.at("dt").get<double>();
  tr.steps = h.at("steps").get<long>();
  tr.perimeter = h.at("perimeter").get<double>();
  tr.config_hash = h.at("config_hash").get<std::string>();
  std::string raw = read_text(base + ".trace");
  std::size_t n = static_cast<std::size_t>(tr.steps) * K;
  if (raw.size() != n * sizeof(double))
    throw ArtifactError(base + ".trace: size does not match header");
  tr.values.resize(n);
  std::memcpy(tr.values.data(), raw.data(), raw.size());
  return tr;
}

void write_meta(const std::string& path, const std::string& kind, const ExperimentConfig& cfg,
                json extra) {
  extra["kind"] = kind;
  extra["config_hash"] = cfg.hash();
  extra["mode"] = mode_name(cfg.mode);
  write_text(path + ".json", extra.dump(2) + "\n");
}

json check_meta(const std::string& path, const std::string& kind, const ExperimentConfig& cfg) {
  json h = json::parse(read_text(path + ".json"));
  if (h.value("kind", "") != kind) throw ArtifactError(path + ": expected a " + kind + " artifact");
  check_header(h, path, cfg);
  return h;
}

void Csv::row(std::vector<Cell> cells) {
  if (cells.size() != header_.size()) throw std::invalid_argument("csv: row width mismatch");
  rows_.push_back(std::move(cells));
}

std::string Csv::str() const {
  std::string out;
  for (std::size_t i = 0; i < header_.size(); ++i) out += (i ? "," : "") + header_[i];
  out += "\n";
  char buf[40];
  for (const auto& r : rows_) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out += ",";
      if (const double* d = std::get_if<double>(&r[i])) {
        std::snprintf(buf, sizeof buf, "%.17g", *d);
        out += buf;
      } else if (const long* l = std::get_if<long>(&r[i])) {
        out += std::to_string(*l);
      } else {
        out += std::get<std::string>(r[i]);
      }
    }
    out += "\n";
  }
  return out;
}

void Csv::save(const std::string& path) const { write_text(path, str()); }

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  throw ArtifactError("csv: missing column '" + name + "'");
}

CsvTable read_csv(const std::string& path) {
  std::stringstream in(read_text(path));
  CsvTable t;
  std::string line;
  auto cells = [](const std::string& l) {
    std::vector<std::string> c;
    std::stringstream ss(l);
    std::string x;
    while (std::getline(ss, x, ',')) c.push_back(x);
    if (!l.empty() && l.back() == ',') c.push_back("");
    return c;
  };
  if (!std::getline(in, line)) throw ArtifactError(path + ": empty csv");
  t.header = cells(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    t.rows.push_back(cells(line));
    if (t.rows.back().size() != t.header.size()) throw ArtifactError(path + ": ragged row");
  }
  return t;
}

}  // namespace scatlab
