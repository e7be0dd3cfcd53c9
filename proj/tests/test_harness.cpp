#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <unistd.h>

#include "scatlab/experiment.hpp"

using namespace scatlab;
namespace fs = std::filesystem;

namespace {

const char* kTiny = R"(; comment
[metric]
kind = euclidean
boundary_radius = 1.0

[sources]
lambda = 1.5
count = 12
B = 3.0

[grid]
R = 3.0
h = 0.03125
T = 3.0

[decode]
eps = 0.08, 0.04
offsets = 0.1, 0.2
fan_m = 2

[entries]
count = 3
incidence = 0.0, 0.3

[run]
mode = oracle
)";

std::string field_of(const std::string& text) {
  try {
    validate(parse_config(text));
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

std::string with(const std::string& from, const std::string& to) {
  std::string s = kTiny;
  std::size_t at = s.find(from);
  EXPECT_NE(at, std::string::npos) << from;
  return s.replace(at, from.size(), to);
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("scatlab_" + std::to_string(getpid()) + "_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, ParsesAndExpandsEntries) {
  ExperimentConfig c = parse_config(kTiny);
  EXPECT_NO_THROW(validate(c));
  ASSERT_EQ(c.entries.size(), 3u);
  EXPECT_DOUBLE_EQ(c.entries[1].incidence, 0.3);
  EXPECT_DOUBLE_EQ(c.entries[2].incidence, 0.0);
  EXPECT_NEAR(c.entries[0].s, 2 * M_PI / 6, 1e-15);
  EXPECT_EQ(c.eps, (std::vector<double>{0.08, 0.04}));
  EXPECT_EQ(c.mode, Mode::oracle);
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_EQ(field_of(with("kind = euclidean", "kind = euclidean\ncolour = red")), "metric.colour");
  EXPECT_EQ(field_of(with("lambda = 1.5", "lambda = 1.0")), "sources.lambda");
  EXPECT_EQ(field_of(with("h = 0.03125", "h = 0.03125\ndt = 0.03")), "grid.dt");
  EXPECT_EQ(field_of(with("eps = 0.08, 0.04", "eps = 0.04, 0.08")), "decode.eps");
  EXPECT_EQ(field_of(with("mode = oracle", "mode = sideways")), "run.mode");
  EXPECT_EQ(field_of(with("incidence = 0.0, 0.3", "incidence = 1.6")), "entries.incidence");
  EXPECT_EQ(field_of(with("mode = oracle", "mode = blind")), "beam.cutoff");
  EXPECT_EQ(field_of(kTiny), "");
}

TEST(Config, HashFollowsValuesNotFormatting) {
  std::string h = parse_config(kTiny).hash();
  EXPECT_EQ(h.size(), 64u);
  EXPECT_EQ(parse_config(with("; comment", "; another comment\n")).hash(), h);
  EXPECT_EQ(parse_config(with("lambda = 1.5", "lambda   =   1.50")).hash(), h);
  EXPECT_NE(parse_config(with("lambda = 1.5", "lambda = 1.5000001")).hash(), h);
  EXPECT_NE(parse_config(with("fan_m = 2", "fan_m = 3")).hash(), h);
  EXPECT_NE(parse_config(with("mode = oracle", "mode = both")).hash(), h);
  EXPECT_EQ(parse_config(with("mode = oracle", "mode = oracle\nout = elsewhere")).hash(), h);
}

TEST(Io, CsvRoundTrip) {
  fs::path dir = scratch("csv");
  fs::create_directories(dir);
  Csv csv({"a", "b", "c"});
  csv.row({0.1, 7L, std::string("x")});
  csv.row({1.0 / 3, -2L, std::string("")});
  std::string path = (dir / "t.csv").string();
  csv.save(path);
  CsvTable t = read_csv(path);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.column("c"), 2);
  EXPECT_THROW(t.column("d"), ArtifactError);
  EXPECT_EQ(std::stod(t.rows[1][0]), 1.0 / 3);
  EXPECT_EQ(t.rows[0][1], "7");
  fs::remove_all(dir);
}

TEST(Io, TraceRoundTripAndStaleRejection) {
  fs::path dir = scratch("trace");
  fs::create_directories(dir);
  ExperimentConfig c = parse_config(kTiny);
  BoundaryTrace tr;
  tr.s = {0.0, 1.0, 2.0};
  for (double s : tr.s) tr.points.push_back(c.boundary().point_at(s));
  tr.T0 = -0.75;
  tr.dt = 0.01;
  tr.steps = 4;
  tr.perimeter = c.boundary().perimeter();
  for (int i = 0; i < 12; ++i) tr.values.push_back(std::sin(i + 0.1));
  std::string base = (dir / "trace").string();
  write_trace(base, tr, c);
  BoundaryTrace back = read_trace(base, c);
  EXPECT_EQ(back.values, tr.values);
  EXPECT_EQ(back.steps, tr.steps);
  EXPECT_EQ(back.dt, tr.dt);

  ExperimentConfig other = parse_config(with("lambda = 1.5", "lambda = 1.6"));
  try {
    read_trace(base, other);
    FAIL();
  } catch (const ArtifactError& e) {
    EXPECT_NE(std::string(e.what()).find("stale config hash"), std::string::npos);
  }
  ExperimentConfig blind = c;
  blind.mode = Mode::blind;
  try {
    read_trace(base, blind);
    FAIL();
  } catch (const ArtifactError& e) {
    EXPECT_NE(std::string(e.what()).find("mode mismatch"), std::string::npos);
  }
  fs::remove_all(dir);
}

TEST(Harness, ParallelForCoversEveryIndexAndRethrows) {
  std::vector<int> seen(1000, 0);
  parallel_for(seen.size(), 4, [&](std::size_t i) { seen[i] += 1; });
  for (int v : seen) ASSERT_EQ(v, 1);
  std::atomic<int> calls{0};
  EXPECT_THROW(parallel_for(50, 3,
                            [&](std::size_t i) {
                              ++calls;
                              if (i == 17) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

TEST(Harness, RerunIsByteIdenticalAcrossJobCounts) {
  ExperimentConfig c = parse_config(kTiny);
  fs::path a = scratch("run_a"), b = scratch("run_b");
  for (auto [dir, jobs] : {std::pair{a, 1}, std::pair{b, 3}}) {
    c.out = dir.string();
    for (const char* sub : {"ground-truth", "decode", "compare", "report"})
      run(c, sub, {jobs, true});
  }
  for (const char* f : {"ground_truth.csv", "decoded.csv", "hits.csv", "recovered_table.csv",
                        "summary.json", "report.txt"})
    EXPECT_EQ(file_sha256((a / f).string()), file_sha256((b / f).string())) << f;
  json meta = json::parse(read_text((a / "decoded.csv.json").string()));
  EXPECT_EQ(meta["config_hash"], c.hash());
  EXPECT_EQ(meta["interior_queries"], 0);

  ExperimentConfig other = parse_config(with("fan_m = 2", "fan_m = 3"));
  other.out = a.string();
  EXPECT_THROW(run(other, "compare", {}), ArtifactError);
  fs::remove_all(a);
  fs::remove_all(b);
}
