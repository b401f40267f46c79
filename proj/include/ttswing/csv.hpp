#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ttswing/types.hpp"

namespace ttswing::csv {

// All files start with "# ttswing-csv v1 <name>" then a header row.
// Numbers are written with 12 significant digits (%.12g), so round trips
// are good to ~1e-12 relative.

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

class Writer {
 public:
  Writer(const std::string& path, const std::string& name,
         const std::vector<std::string>& columns)
      : out_(path), ncols_(columns.size()) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
    out_ << "# ttswing-csv v1 " << name << "\n";
    for (size_t i = 0; i < columns.size(); ++i)
      out_ << columns[i] << (i + 1 < columns.size() ? "," : "\n");
  }

  Writer& field(double v) { return raw(fmt(v)); }
  Writer& field(int v) { return raw(std::to_string(v)); }
  Writer& field(long v) { return raw(std::to_string(v)); }
  Writer& field(unsigned long long v) { return raw(std::to_string(v)); }
  Writer& field(bool v) { return raw(v ? "1" : "0"); }
  Writer& field(const std::string& s) { return raw(s); }

  template <typename Derived>
  Writer& fields(const Eigen::MatrixBase<Derived>& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) field(double(v(i)));
    return *this;
  }

  void endrow() {
    if (col_ != ncols_)
      throw std::logic_error("csv row has " + std::to_string(col_) +
                             " fields, expected " + std::to_string(ncols_));
    out_ << "\n";
    col_ = 0;
  }

 private:
  Writer& raw(const std::string& s) {
    if (col_) out_ << ",";
    out_ << s;
    ++col_;
    return *this;
  }
  std::ofstream out_;
  size_t ncols_;
  size_t col_ = 0;
};

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& c) const {
    for (size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == c) return int(i);
    throw std::runtime_error("csv: no column '" + c + "' in " + name);
  }
  double num(size_t row, const std::string& c) const {
    return std::stod(rows.at(row).at(col(c)));
  }
  const std::string& str(size_t row, const std::string& c) const {
    return rows.at(row).at(col(c));
  }
};

inline Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ttswing-csv v1 ", 0) != 0)
    throw std::runtime_error("not a ttswing csv file: " + path);
  Table t;
  t.name = line.substr(std::string("# ttswing-csv v1 ").size());
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    if (!s.empty() && s.back() == ',') out.push_back("");
    return out;
  };
  if (!std::getline(in, line)) throw std::runtime_error("csv missing header: " + path);
  t.columns = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split(line);
    if (row.size() != t.columns.size())
      throw std::runtime_error("csv ragged row in " + path);
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace ttswing::csv
