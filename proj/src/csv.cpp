#include "reconxf/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace reconxf {

namespace {
std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}
}  // namespace

void CsvRow::fail(const std::string& message) const {
  throw Error(file_ + ":" + std::to_string(line_) + ": " + message);
}

void CsvRow::expect_fields(std::size_t count) const {
  if (fields_.size() != count) {
    fail("expected " + std::to_string(count) + " fields, found " + std::to_string(fields_.size()));
  }
}

int CsvRow::get_int(std::size_t i) const {
  const std::string& text = field(i);
  int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) fail("not an integer: '" + text + "'");
  return value;
}

double CsvRow::get_double(std::size_t i) const {
  const std::string& text = field(i);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) fail("not a number: '" + text + "'");
  return value;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    const std::string_view piece =
        comma == std::string_view::npos ? line.substr(start) : line.substr(start, comma - start);
    out.emplace_back(trim(piece));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

void for_each_csv_row(const std::filesystem::path& path,
                      const std::function<void(const CsvRow&)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error("missing file " + path.string());
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    fn(CsvRow(path.string(), number, split_csv_line(view)));
  }
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("failed to format number");
  return std::string(buf, ptr);
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::string text;
  text.reserve(static_cast<std::size_t>(m.size()) * 4);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) text.push_back(',');
      text += format_double(m(i, j));
    }
    text.push_back('\n');
  }
  write_text_file(path, text);
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::vector<std::vector<double>> rows;
  for_each_csv_row(path, [&](const CsvRow& row) {
    if (!rows.empty()) row.expect_fields(rows.front().size());
    std::vector<double> values(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) values[j] = row.get_double(j);
    rows.push_back(std::move(values));
  });
  if (rows.empty()) return Matrix(0, 0);
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

}  // namespace reconxf
