#include "sigjit/csv.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace sigjit {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path) : out_(path, std::ios::binary) {
  if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
}

void CsvWriter::header(const std::vector<std::string>& names) {
  columns_ = names.size();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out_ << ',';
    out_ << names[i];
  }
  out_ << '\n';
}

CsvWriter& CsvWriter::field(const std::string& s) {
  if (row_open_) out_ << ',';
  out_ << s;
  row_open_ = true;
  ++written_;
  return *this;
}

CsvWriter& CsvWriter::field(double v) { return field(format_double(v)); }
CsvWriter& CsvWriter::field(int v) { return field(std::to_string(v)); }
CsvWriter& CsvWriter::field(long long v) { return field(std::to_string(v)); }
CsvWriter& CsvWriter::field(std::uint64_t v) { return field(std::to_string(v)); }

void CsvWriter::end_row() {
  if (columns_ && written_ != columns_)
    throw std::logic_error("csv row width does not match header");
  out_ << '\n';
  row_open_ = false;
  written_ = 0;
}

void write_samples_csv(const std::filesystem::path& path, const SampleSet& samples) {
  CsvWriter csv(path);
  csv.header({"n", "y", "z", "w"});
  const bool have_z = samples.z.size() == samples.y.size();
  const bool have_w = samples.w.size() == samples.y.size();
  for (std::size_t n = 0; n < samples.y.size(); ++n) {
    csv.field(static_cast<int>(n)).field(samples.y[n]);
    csv.field(have_z ? format_double(samples.z[n]) : std::string());
    csv.field(have_w ? format_double(samples.w[n]) : std::string());
    csv.end_row();
  }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

SampleSet read_samples_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty sample file");

  auto names = split_line(line);
  int iy = -1, iz = -1, iw = -1;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == "y") iy = static_cast<int>(i);
    if (names[i] == "z") iz = static_cast<int>(i);
    if (names[i] == "w") iw = static_cast<int>(i);
  }
  if (iy < 0) throw std::runtime_error("sample file lacks a y column");

  SampleSet s;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_line(line);
    if (static_cast<int>(f.size()) <= iy)
      throw std::runtime_error("short sample row");
    s.y.push_back(std::stod(f[iy]));
    if (iz >= 0 && iz < static_cast<int>(f.size()) && !f[iz].empty())
      s.z.push_back(std::stod(f[iz]));
    if (iw >= 0 && iw < static_cast<int>(f.size()) && !f[iw].empty())
      s.w.push_back(std::stod(f[iw]));
  }
  return s;
}

std::vector<double> read_vector(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<double> v;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      v.push_back(std::stod(line));
    } catch (const std::invalid_argument&) {
      if (!first) throw std::runtime_error("non-numeric line in " + path.string());
    }
    first = false;
  }
  return v;
}

}  // namespace sigjit
