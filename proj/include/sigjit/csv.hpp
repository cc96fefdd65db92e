#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sigjit/model.hpp"

namespace sigjit {

// Shortest round-trip decimal form (printf %.17g).
std::string format_double(double v);

// Minimal CSV emitter: header row then data rows, LF line endings, no
// locale dependence, doubles at full precision.  Output is byte-stable for
// identical inputs.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);

  void header(const std::vector<std::string>& names);
  CsvWriter& field(const std::string& s);
  CsvWriter& field(double v);
  CsvWriter& field(int v);
  CsvWriter& field(long long v);
  CsvWriter& field(std::uint64_t v);
  void end_row();

 private:
  std::ofstream out_;
  bool row_open_ = false;
  std::size_t columns_ = 0;
  std::size_t written_ = 0;
};

// Sample CSV with columns n,y,z,w.
void write_samples_csv(const std::filesystem::path& path, const SampleSet& samples);
SampleSet read_samples_csv(const std::filesystem::path& path);

// One value per line, optional single-column header skipped.
std::vector<double> read_vector(const std::filesystem::path& path);

}  // namespace sigjit
