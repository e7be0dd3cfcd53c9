#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "scatlab/decode.hpp"

namespace scatlab {

enum class Mode { blind, oracle, both };
const char* mode_name(Mode m);
Mode parse_mode(const std::string& s);

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ExperimentConfig {
  // [metric]
  std::string metric = "euclidean";  // euclidean | conformal_bump
  double boundary_radius = 1.0;
  BumpParams bump;
  // [sources]
  double lambda = 1.5;
  int count = 12;
  int first_index = 1;
  double B = 3.0;
  // [grid]
  double R = 3.0;
  double h = 1.0 / 64;
  double dt = 0;        // 0 selects the CFL default
  double T0 = -0.75;
  double T = 4.0;
  double sigma_x = 0;   // 0 selects 2h
  double sigma_t = 0;   // 0 selects 2 dt
  int trace_points = 2048;
  // [beam]
  double cutoff = 1.6;
  double horizon = 5.0;
  // [decode]
  std::vector<double> eps{0.08, 0.04, 0.02};
  std::vector<double> offsets{0.1, 0.2, 0.3};
  double fan_half_width = 0.1;
  int fan_m = 3;
  bool directions = true;
  bool schedule_filter = true;
  DecodeRoute route = DecodeRoute::m_A;
  double start_margin = 2.0;
  double max_travel = 3.0;
  double step_factor = 0.25;
  double threshold = 0.0;
  // [entries]
  std::vector<EntrySpec> entries;
  // [run]
  Mode mode = Mode::oracle;
  std::string out = "results";

  Boundary boundary() const;
  MetricModel model() const;
  SourceSet sources() const;
  Grid grid() const;
  DecodeOptions decode_options() const;

  // key = value lines, sorted, doubles at 17 significant digits; every field appears.
  std::string canonical() const;
  std::string hash() const;  // SHA-256 of canonical() without run.out
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
// Throws ConfigError with the offending field path.
void validate(const ExperimentConfig& cfg);

std::string sha256_hex(const std::string& bytes);

}  // namespace scatlab
