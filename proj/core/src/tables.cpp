#include "mgs/tables.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "mgs/errors.hpp"

namespace mgs {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

CsvWriter::CsvWriter(std::ostream& out, const std::string& table, std::vector<std::string> columns)
    : out_(out), columns_(std::move(columns)) {
  if (columns_.empty()) throw EmptyInputError("csv table needs at least one column");
  out_ << "# mgs-csv v" << kCsvSchemaVersion << ' ' << table << '\n';
  for (std::size_t i = 0; i < columns_.size(); ++i) out_ << (i ? "," : "") << columns_[i];
  out_ << '\n';
}

CsvWriter& CsvWriter::cell(const std::string& v) {
  if (filled_ >= columns_.size()) throw DimensionError("csv row has more cells than columns");
  if (v.find_first_of(",\"\n") != std::string::npos) {
    throw ConfigError(columns_[filled_], "csv cells may not contain commas, quotes or newlines");
  }
  out_ << (filled_ ? "," : "") << v;
  ++filled_;
  return *this;
}

CsvWriter& CsvWriter::cell(double v) { return cell(format_double(v)); }
CsvWriter& CsvWriter::cell(std::int64_t v) { return cell(std::to_string(v)); }

void CsvWriter::end_row() {
  if (filled_ != columns_.size()) {
    throw DimensionError("csv row has " + std::to_string(filled_) + " cells, expected " +
                         std::to_string(columns_.size()));
  }
  out_ << '\n';
  filled_ = 0;
  ++rows_;
}

void write_trajectory_csv(std::ostream& out, const std::vector<Trajectory>& chains,
                          int max_components) {
  int d = 0;
  for (const auto& c : chains) {
    for (const auto& r : c.records) d = std::max(d, static_cast<int>(r.x_t.size()));
  }
  if (d > max_components) d = 0;
  std::vector<std::string> cols{"chain", "step", "t", "sigma_t", "loss", "cos_prev", "k"};
  for (int i = 0; i < d; ++i) cols.push_back("x" + std::to_string(i));
  CsvWriter w(out, "trajectory", cols);
  for (const auto& c : chains) {
    for (std::size_t s = 0; s < c.records.size(); ++s) {
      const auto& r = c.records[s];
      w.cell(c.chain).cell(static_cast<std::int64_t>(s)).cell(r.t).cell(r.sigma_t).cell(r.loss)
          .cell(r.cos_prev).cell(r.adam_k);
      for (int i = 0; i < d; ++i) {
        w.cell(r.x_t.size() > i ? r.x_t[i] : std::numeric_limits<double>::quiet_NaN());
      }
      w.end_row();
    }
  }
}

std::filesystem::path write_artifact(const std::filesystem::path& dir, const std::string& name,
                                     const std::string& content) {
  const std::filesystem::path rel(name);
  if (rel.empty() || rel.is_absolute() || rel.has_parent_path() || name == "." || name == "..") {
    throw ConfigError("out", "artifact name '" + name + "' must be a plain file name");
  }
  std::filesystem::create_directories(dir);
  const auto path = dir / rel;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << content;
  if (!f) throw Error("failed writing " + path.string());
  return path;
}

}  // namespace mgs
