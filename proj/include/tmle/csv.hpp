#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tmle::csv {

// Numeric table with a header row. Comma-separated, '.' decimal separator,
// no quoting and no missing-value sentinels.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
  // Index of a named column; throws InputError if absent.
  std::size_t index_of(const std::string& name) const;
  const std::vector<double>& column(const std::string& name) const { return columns[index_of(name)]; }
};

Table read(std::istream& in);
Table read_file(const std::string& path);
void write(std::ostream& out, const Table& table);

// Shortest round-trip decimal representation.
std::string format_double(double value);

}  // namespace tmle::csv
