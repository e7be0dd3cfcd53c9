#pragma once

#include <functional>
#include <string>
#include <vector>

#include "scatlab/config.hpp"
#include "scatlab/io.hpp"

namespace scatlab {

// Runs fn(i) for i in [0, n) on up to jobs threads; results must be written by index.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

// Data-path S provider: beam data on the exterior model, s_data per t0. Times whose cutoff
// window would overlap the designed source, or run past the recorded trace, give zero.
struct DataPath {
  const ExteriorSolver* solver = nullptr;
  const MetricModel* exterior = nullptr;
  const Forcing* forcing = nullptr;
  double cutoff = 1.6;
  double T0 = -0.75;
  double trace_end = 0;
};
SFactory data_factory(const DataPath& dp);

std::vector<Entry> make_entries(const MetricModel& model, const std::vector<EntrySpec>& specs);

std::vector<RecoveredEntry> decode_entries(const MetricModel& exterior, const SourceSet& set,
                                           const std::vector<Entry>& entries,
                                           const SFactory& factory, const DecodeOptions& opt,
                                           int jobs);

Forcing config_forcing(const ExperimentConfig& cfg, const Grid& grid, const SourceSet& set);

struct RunOptions {
  int jobs = 1;
  bool seedless = false;
};

// gen-data | ground-truth | decode | compare | report; artifacts go to cfg.out.
void run(const ExperimentConfig& cfg, const std::string& subcommand, const RunOptions& opt);

}  // namespace scatlab
