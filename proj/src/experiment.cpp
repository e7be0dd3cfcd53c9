#include "scatlab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

namespace scatlab {

namespace fs = std::filesystem;

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

SFactory data_factory(const DataPath& dp) {
  return [dp](const Vec2& y, const Vec2& eta, double eps) -> SFunction {
    const Grid& g = dp.solver->grid();
    auto bd = std::make_shared<BeamData>(
        beam_initial_data(*dp.exterior, y, eta, eps, dp.cutoff, g));
    double clear = beam_clearance(*dp.solver, *bd);
    if (!(clear > 0)) throw std::invalid_argument("data path: beam support touches dOmega");
    return [dp, bd, clear](double t0) -> SValue {
      SDataOptions o;
      o.T0 = dp.T0;
      o.forcing = dp.forcing;
      o.source_end = dp.forcing ? dp.forcing->t_end() : dp.T0;
      o.clearance = clear;
      if (t0 - clear < o.source_end || t0 + 2 * dp.solver->grid().dt > dp.trace_end) return {};
      return s_data(*dp.solver, *bd, t0, o).value;
    };
  };
}

std::vector<Entry> make_entries(const MetricModel& model, const std::vector<EntrySpec>& specs) {
  std::vector<Entry> out;
  for (const EntrySpec& s : specs) out.push_back(make_entry(model, s));
  return out;
}

std::vector<RecoveredEntry> decode_entries(const MetricModel& exterior, const SourceSet& set,
                                           const std::vector<Entry>& entries,
                                           const SFactory& factory, const DecodeOptions& opt,
                                           int jobs) {
  std::vector<RecoveredEntry> out(entries.size());
  parallel_for(entries.size(), jobs, [&](std::size_t i) {
    out[i] = decode_entry(exterior, set, entries[i].x, entries[i].xi, factory, opt);
  });
  return out;
}

Forcing config_forcing(const ExperimentConfig& cfg, const Grid& grid, const SourceSet& set) {
  double sx = cfg.sigma_x > 0 ? cfg.sigma_x : 2 * grid.h;
  double st = cfg.sigma_t > 0 ? cfg.sigma_t : 2 * grid.dt;
  return mollify_source(set, sx, st, grid, cfg.T0);
}

namespace {

std::string polar_angle(const Vec2& v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", std::atan2(v.y(), v.x()));
  return buf;
}

double num(const std::string& s) { return s.empty() ? std::nan("") : std::strtod(s.c_str(), nullptr); }

std::string join_notes(const std::vector<std::string>& notes) {
  std::string s;
  for (const std::string& n : notes) {
    std::string t = n;
    std::replace(t.begin(), t.end(), ',', ' ');
    s += (s.empty() ? "" : "; ") + t;
  }
  return s;
}

void gen_data(const ExperimentConfig& cfg, const fs::path& out) {
  MetricModel m = cfg.model();
  Grid g = cfg.grid();
  SourceSet set = cfg.sources();
  Forcing f = config_forcing(cfg, g, set);
  SolveOptions so;
  so.T0 = cfg.T0;
  so.T = cfg.T;
  so.trace_points = cfg.trace_points;
  FullSolution sol = solve_full(m, f, g, so);
  write_trace((out / "trace").string(), sol.trace, cfg);

  Csv src({"j", "s", "x", "y", "log_lambda_weight"});
  for (std::size_t k = 0; k < set.size(); ++k)
    src.row({static_cast<long>(set.index[k]), set.s[k], set.x[k].x(), set.x[k].y(),
             set.log_weight[k]});
  src.save((out / "sources.csv").string());
  write_meta((out / "sources.csv").string(), "sources", cfg);
  std::cout << "gen-data: " << sol.trace.steps << " steps x " << sol.trace.count()
            << " boundary points -> " << (out / "trace.trace").string() << "\n";
}

void ground_truth(const ExperimentConfig& cfg, const fs::path& out, int jobs) {
  MetricModel m = cfg.model();
  std::vector<Entry> entries = make_entries(m, cfg.entries);
  std::vector<GroundTruthEntry> gt(entries.size());
  parallel_for(entries.size(), jobs,
               [&](std::size_t i) { gt[i] = ground_truth_sigma(m, entries[i].x, entries[i].xi); });
  Csv csv({"entry_angle", "entry_dir_angle", "exit_x", "exit_y", "zeta_x", "zeta_y", "tau",
           "transversal"});
  for (const GroundTruthEntry& e : gt)
    csv.row({polar_angle(e.entry_x), polar_angle(e.entry_xi), e.exit_z.x(), e.exit_z.y(),
             e.zeta.x(), e.zeta.y(), e.tau, static_cast<long>(e.transversal)});
  csv.save((out / "ground_truth.csv").string());
  write_meta((out / "ground_truth.csv").string(), "ground_truth", cfg);
  std::cout << "ground-truth: " << gt.size() << " entries\n";
}

void add_decoded(Csv& csv, Csv& hits, const char* path, const std::vector<Entry>& entries,
                 const std::vector<RecoveredEntry>& rec, double last_eps) {
  for (std::size_t i = 0; i < rec.size(); ++i) {
    const RecoveredEntry& r = rec[i];
    csv.row({std::string(path), static_cast<long>(i), polar_angle(entries[i].x),
             polar_angle(entries[i].xi), r.tau_hat, r.tau_interp, static_cast<long>(r.k_hat),
             r.z_hat.x(), r.z_hat.y(), r.zeta_hat.x(), r.zeta_hat.y(), r.confidence,
             static_cast<long>(r.index_stable), static_cast<long>(r.direction.c4_failure),
             static_cast<long>(r.direction.grazing), join_notes(r.notes)});
    for (std::size_t p = 0; p < r.hits.size(); ++p)
      for (const HitEvent& h : r.hits[p]) {
        cplx v = h.S.value();
        hits.row({h.t, v.real(), v.imag(), last_eps, std::string(path), static_cast<long>(i),
                  static_cast<long>(p), h.S.log_abs, h.S.arg, static_cast<long>(h.k),
                  static_cast<long>(h.decodable)});
      }
  }
}

void decode(const ExperimentConfig& cfg, const fs::path& out, int jobs) {
  MetricModel full = cfg.model();
  MetricModel ext = full.restricted_to_exterior();
  SourceSet set = cfg.sources();
  DecodeOptions opt = cfg.decode_options();
  std::vector<Entry> entries = make_entries(ext, cfg.entries);
  Csv csv({"path", "entry", "entry_angle", "entry_dir_angle", "tau_hat", "tau_interp", "k_hat",
           "z_hat_x", "z_hat_y", "zeta_hat_x", "zeta_hat_y", "confidence", "index_stable",
           "c4_failure", "grazing", "notes"});
  Csv hits({"t0", "re_S", "im_S", "eps", "path", "entry", "probe", "log_abs_S", "arg_S", "k",
            "decodable"});
  json extra;
  if (cfg.mode != Mode::blind) {
    SFactory f = oracle_factory(full, set, cfg.horizon);
    add_decoded(csv, hits, "oracle", entries, decode_entries(ext, set, entries, f, opt, jobs),
                opt.eps_schedule.back());
  }
  if (cfg.mode != Mode::oracle) {
    BoundaryTrace tr = read_trace((out / "trace").string(), cfg);
    Grid g = cfg.grid();
    Forcing forcing = config_forcing(cfg, g, set);
    ExteriorSolver solver(ext, g, tr);
    DataPath dp{&solver, &ext, &forcing, cfg.cutoff, cfg.T0, tr.T0 + (tr.steps - 1) * tr.dt};
    add_decoded(csv, hits, "data", entries,
                decode_entries(ext, set, entries, data_factory(dp), opt, jobs),
                opt.eps_schedule.back());
  }
  extra["interior_queries"] = ext.interior_queries();
  if (ext.interior_queries() != 0)
    throw BlindnessViolation("decode touched the metric inside M");
  csv.save((out / "decoded.csv").string());
  write_meta((out / "decoded.csv").string(), "decoded", cfg, extra);
  hits.save((out / "hits.csv").string());
  write_meta((out / "hits.csv").string(), "hits", cfg);
  std::cout << "decode: " << entries.size() << " entries, mode " << mode_name(cfg.mode) << "\n";
}

double percentile(std::vector<double> v, double q) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  double pos = q * (v.size() - 1);
  std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (pos - i) * (v[i + 1] - v[i]);
}

json stats(const std::vector<double>& v) {
  json j;
  j["p50"] = percentile(v, 0.5);
  j["p90"] = percentile(v, 0.9);
  j["max"] = percentile(v, 1.0);
  return j;
}

void compare(const ExperimentConfig& cfg, const fs::path& out) {
  check_meta((out / "decoded.csv").string(), "decoded", cfg);
  check_meta((out / "ground_truth.csv").string(), "ground_truth", cfg);
  CsvTable dec = read_csv((out / "decoded.csv").string());
  CsvTable gt = read_csv((out / "ground_truth.csv").string());
  MetricModel m = cfg.model();
  SourceSet set = cfg.sources();
  const double gap = set.max_gap(m.region().perimeter());

  Csv table({"path", "entry_angle", "entry_dir", "tau_hat", "tau_true", "z_hat_x", "z_hat_y",
             "z_true_x", "z_true_y", "zeta_err_rad", "confidence"});
  json summary;
  summary["config_hash"] = cfg.hash();
  summary["max_gap"] = gap;
  std::map<std::string, std::vector<double>> tau_e, z_e, zeta_e;
  std::map<std::string, json> counts;
  for (const auto& row : dec.rows) {
    std::string path = row[dec.column("path")];
    std::size_t i = static_cast<std::size_t>(std::stol(row[dec.column("entry")]));
    if (i >= gt.rows.size()) throw ArtifactError("compare: entry index beyond ground truth");
    const auto& t = gt.rows[i];
    if (t[gt.column("entry_angle")] != row[dec.column("entry_angle")])
      throw ArtifactError("compare: entry lists differ");
    double tau_hat = num(row[dec.column("tau_hat")]), tau = num(t[gt.column("tau")]);
    Vec2 zh(num(row[dec.column("z_hat_x")]), num(row[dec.column("z_hat_y")]));
    Vec2 z(num(t[gt.column("exit_x")]), num(t[gt.column("exit_y")]));
    Vec2 zeh(num(row[dec.column("zeta_hat_x")]), num(row[dec.column("zeta_hat_y")]));
    Vec2 ze(num(t[gt.column("zeta_x")]), num(t[gt.column("zeta_y")]));
    bool transversal = t[gt.column("transversal")] == "1";
    double zeta_err = angle_between(zeh, ze);
    json& c = counts[path];
    if (c.is_null()) c = json::object();
    c["entries"] = c.value("entries", 0) + 1;
    if (std::isfinite(tau_hat)) {
      c["decoded"] = c.value("decoded", 0) + 1;
      tau_e[path].push_back(std::abs(tau_hat - tau));
      z_e[path].push_back((zh - z).norm());
      double chord = (z - Vec2(std::cos(num(t[0])), std::sin(num(t[0]))) * cfg.boundary_radius).norm();
      if (tau_hat < chord / std::sqrt(m.c2()) - 0.02)
        c["speed_bound_violations"] = c.value("speed_bound_violations", 0) + 1;
    }
    if (transversal && std::isfinite(zeta_err)) zeta_e[path].push_back(zeta_err);
    if (row[dec.column("c4_failure")] == "1") c["c4_flags"] = c.value("c4_flags", 0) + 1;
    table.row({path, t[gt.column("entry_angle")], t[gt.column("entry_dir_angle")], tau_hat, tau,
               zh.x(), zh.y(), z.x(), z.y(), zeta_err, num(row[dec.column("confidence")])});
  }
  for (auto& [path, c] : counts) {
    json s = c;
    s["tau_err"] = stats(tau_e[path]);
    s["z_err"] = stats(z_e[path]);
    s["zeta_err_transversal"] = stats(zeta_e[path]);
    summary["paths"][path] = s;
  }
  table.save((out / "recovered_table.csv").string());
  write_meta((out / "recovered_table.csv").string(), "recovered_table", cfg);
  write_text((out / "summary.json").string(), summary.dump(2) + "\n");
  std::cout << "compare: " << dec.rows.size() << " rows -> recovered_table.csv, summary.json\n";
}

void report(const ExperimentConfig& cfg, const fs::path& out) {
  json s = json::parse(read_text((out / "summary.json").string()));
  if (s.value("config_hash", "") != cfg.hash())
    throw ArtifactError("report: stale summary.json (config hash differs)");
  std::string r = "config " + cfg.hash().substr(0, 16) + "  metric " + cfg.metric +
                  "  mode " + mode_name(cfg.mode) + "\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "source max gap %.4f\n", s["max_gap"].get<double>());
  r += buf;
  for (auto& [path, p] : s["paths"].items()) {
    auto g = [&](const char* k, const char* q) {
      const json& v = p[k][q];
      return v.is_number() ? v.get<double>() : std::nan("");
    };
    std::snprintf(buf, sizeof buf,
                  "[%s] decoded %d/%d  c4 %d  speed-bound %d\n"
                  "  tau err   p50 %.4g  p90 %.4g  max %.4g\n"
                  "  z err     p50 %.4g  p90 %.4g  max %.4g\n"
                  "  zeta err  p50 %.4g  p90 %.4g  max %.4g (transversal)\n",
                  path.c_str(), p.value("decoded", 0), p.value("entries", 0),
                  p.value("c4_flags", 0), p.value("speed_bound_violations", 0),
                  g("tau_err", "p50"), g("tau_err", "p90"), g("tau_err", "max"),
                  g("z_err", "p50"), g("z_err", "p90"), g("z_err", "max"),
                  g("zeta_err_transversal", "p50"), g("zeta_err_transversal", "p90"),
                  g("zeta_err_transversal", "max"));
    r += buf;
  }
  write_text((out / "report.txt").string(), r);
  std::cout << r;
}

}  // namespace

void run(const ExperimentConfig& cfg, const std::string& sub, const RunOptions& opt) {
  validate(cfg);
  fs::path out = cfg.out;
  fs::create_directories(out);
  if (sub == "gen-data")
    gen_data(cfg, out);
  else if (sub == "ground-truth")
    ground_truth(cfg, out, opt.jobs);
  else if (sub == "decode")
    decode(cfg, out, opt.jobs);
  else if (sub == "compare")
    compare(cfg, out);
  else if (sub == "report")
    report(cfg, out);
  else
    throw std::invalid_argument("unknown subcommand '" + sub + "'");
}

}  // namespace scatlab
