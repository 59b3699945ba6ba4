#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "reconxf/common.hpp"

namespace reconxf {

/// One parsed line of a comma-separated file; errors carry file and line.
class CsvRow {
 public:
  CsvRow(std::string file, int line, std::vector<std::string> fields)
      : file_(std::move(file)), line_(line), fields_(std::move(fields)) {}

  std::size_t size() const { return fields_.size(); }
  const std::string& field(std::size_t i) const { return fields_.at(i); }
  int line() const { return line_; }

  int get_int(std::size_t i) const;
  double get_double(std::size_t i) const;
  void expect_fields(std::size_t count) const;
  [[noreturn]] void fail(const std::string& message) const;

 private:
  std::string file_;
  int line_;
  std::vector<std::string> fields_;
};

/// Calls fn for every non-empty line. Lines starting with '#' are skipped.
void for_each_csv_row(const std::filesystem::path& path,
                      const std::function<void(const CsvRow&)>& fn);

std::vector<std::string> split_csv_line(std::string_view line);

/// Shortest decimal form that round-trips a double (>= 9 significant digits
/// whenever the value is not an integer).
std::string format_double(double value);

void write_text_file(const std::filesystem::path& path, const std::string& text);
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_csv(const std::filesystem::path& path);

}  // namespace reconxf
