#include "tmle/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "tmle/errors.hpp"

namespace tmle::csv {
namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_number(const std::string& field, std::size_t line_no, const std::string& column) {
  const std::string t = trim(field);
  if (t.empty())
    throw InputError("csv line " + std::to_string(line_no) + ", column '" + column + "': missing value");
  double value = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value))
    throw InputError("csv line " + std::to_string(line_no) + ", column '" + column + "': '" + t +
                     "' is not a finite number");
  return value;
}

}  // namespace

std::size_t Table::index_of(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return j;
  throw InputError("missing column '" + name + "'");
}

Table read(std::istream& in) {
  Table table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (trim(line).empty()) {
      if (line_no == 1) throw InputError("csv: empty header row");
      continue;
    }
    auto fields = split(line);
    if (table.header.empty()) {
      std::unordered_set<std::string> seen;
      for (auto& f : fields) {
        f = trim(f);
        if (f.empty()) throw InputError("csv: empty column name in header");
        if (!seen.insert(f).second) throw InputError("csv: duplicate column '" + f + "'");
      }
      table.header = std::move(fields);
      table.columns.assign(table.header.size(), {});
      continue;
    }
    if (fields.size() != table.header.size())
      throw InputError("csv line " + std::to_string(line_no) + ": expected " +
                       std::to_string(table.header.size()) + " fields, found " + std::to_string(fields.size()));
    for (std::size_t j = 0; j < fields.size(); ++j)
      table.columns[j].push_back(parse_number(fields[j], line_no, table.header[j]));
  }
  if (table.header.empty()) throw InputError("csv: missing header row");
  return table;
}

Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read(in);
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("format_double failed");
  return std::string(buf, ptr);
}

void write(std::ostream& out, const Table& table) {
  for (std::size_t j = 0; j < table.header.size(); ++j) out << (j ? "," : "") << table.header[j];
  out << '\n';
  for (std::size_t i = 0; i < table.rows(); ++i) {
    for (std::size_t j = 0; j < table.columns.size(); ++j) out << (j ? "," : "") << format_double(table.columns[j][i]);
    out << '\n';
  }
}

}  // namespace tmle::csv
