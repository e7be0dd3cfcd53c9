#pragma once

#include <json.hpp>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "scatlab/config.hpp"
#include "scatlab/wavesim.hpp"

namespace scatlab {

using json = nlohmann::json;

class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// <base>.trace holds steps x K float64 values (little endian, row major);
// <base>.trace.json holds the header.
void write_trace(const std::string& base, const BoundaryTrace& trace, const ExperimentConfig& cfg);
// Throws ArtifactError on a header/config mismatch (mode first, then hash).
BoundaryTrace read_trace(const std::string& base, const ExperimentConfig& cfg);

// Sidecar <path>.json with {kind, config_hash, mode}.
void write_meta(const std::string& path, const std::string& kind, const ExperimentConfig& cfg,
                json extra = json::object());
json check_meta(const std::string& path, const std::string& kind, const ExperimentConfig& cfg);

// Deterministic CSV: doubles at 17 significant digits, '\n' line ends.
class Csv {
 public:
  using Cell = std::variant<double, long, std::string>;
  explicit Csv(std::vector<std::string> header) : header_(std::move(header)) {}
  void row(std::vector<Cell> cells);
  std::string str() const;
  void save(const std::string& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<Cell>> rows_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int column(const std::string& name) const;  // throws ArtifactError if absent
};
CsvTable read_csv(const std::string& path);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);
std::string file_sha256(const std::string& path);

}  // namespace scatlab
