#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "mgs/samplers.hpp"

namespace mgs {

inline constexpr int kCsvSchemaVersion = 1;

// Shortest round-trip text for a double; "nan"/"inf" for non-finite values.
std::string format_double(double v);

// Minimal tidy-CSV writer. The first line is "# mgs-csv v<version> <table>".
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::string& table, std::vector<std::string> columns);

  CsvWriter& cell(const std::string& v);
  CsvWriter& cell(double v);
  CsvWriter& cell(std::int64_t v);
  CsvWriter& cell(int v) { return cell(static_cast<std::int64_t>(v)); }
  CsvWriter& cell(std::uint64_t v) { return cell(static_cast<std::int64_t>(v)); }
  void end_row();

  std::size_t rows() const { return rows_; }

 private:
  std::ostream& out_;
  std::vector<std::string> columns_;
  std::size_t filled_ = 0;
  std::size_t rows_ = 0;
};

// Trajectory export: chain, step, t, sigma_t, loss, cos_prev, k and, when the
// trajectory holds vectors and d <= 8, x_t components x0..x{d-1}.
void write_trajectory_csv(std::ostream& out, const std::vector<Trajectory>& chains,
                          int max_components = 8);

// Writes text to a file inside `dir`, creating directories. Rejects names that
// would escape `dir`.
std::filesystem::path write_artifact(const std::filesystem::path& dir, const std::string& name,
                                     const std::string& content);

}  // namespace mgs
