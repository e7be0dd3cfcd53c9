#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "scatlab/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"scattering-relation recovery experiments"};
  std::string config_path, mode, out, command;
  scatlab::RunOptions opt;
  app.add_option("command", command, "gen-data | ground-truth | decode | compare | report")
      ->required()
      ->check(CLI::IsMember({"gen-data", "ground-truth", "decode", "compare", "report"}));
  app.add_option("--config", config_path, "experiment config (INI)")->required();
  app.add_option("--mode", mode, "blind | oracle | both (overrides run.mode)")
      ->check(CLI::IsMember({"blind", "oracle", "both"}));
  app.add_option("--out", out, "output directory (overrides run.out and SCATLAB_OUT)");
  app.add_option("--jobs", opt.jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--seedless", opt.seedless, "assert that the run draws no random numbers (the pipeline has no RNG; checked by ctest)");
  CLI11_PARSE(app, argc, argv);

  try {
    scatlab::ExperimentConfig cfg = scatlab::load_config(config_path);
    if (const char* env = std::getenv("SCATLAB_OUT")) cfg.out = env;
    if (!out.empty()) cfg.out = out;
    if (!mode.empty()) cfg.mode = scatlab::parse_mode(mode);
    scatlab::run(cfg, command, opt);
  } catch (const scatlab::ConfigError& e) {
    std::cerr << "config error at " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << command << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
