// Copyright 2026 The Proxtrace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Minimal CSV writer: comma separated, '.' decimal point, LF line endings and
// no quoting. Headers name a symbol and its unit as "symbol[unit]".

#ifndef PROXTRACE_CSV_HPP_
#define PROXTRACE_CSV_HPP_

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "proxtrace/errors.hpp"

namespace proxtrace {

// Fewest significant digits (at least 12) that read back to the same double.
inline std::string FormatNumber(double v) {
  char buf[32];
  for (int precision = 12; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
    for (const auto& h : header_) CheckField(h);
  }

  template <typename... Fields>
  void AddRow(const Fields&... fields) {
    std::vector<std::string> row;
    row.reserve(sizeof...(fields));
    (row.push_back(ToField(fields)), ...);
    AddRow(std::move(row));
  }

  void AddRow(std::vector<std::string> row) {
    detail::Require(row.size() == header_.size(), "CsvTable: row width differs from header");
    for (const auto& f : row) CheckField(f);
    rows_.push_back(std::move(row));
  }

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  std::string ToString() const {
    std::ostringstream out;
    WriteLine(out, header_);
    for (const auto& r : rows_) WriteLine(out, r);
    return out.str();
  }

  void Write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << ToString();
    out.flush();
    if (!out) throw IoError("failed writing " + path.string());
  }

 private:
  template <typename T>
  static std::string ToField(const T& v) {
    if constexpr (std::is_same_v<T, bool>) {
      return v ? "1" : "0";
    } else if constexpr (std::is_floating_point_v<T>) {
      return FormatNumber(static_cast<double>(v));
    } else if constexpr (std::is_integral_v<T>) {
      return std::to_string(v);
    } else {
      return std::string(v);
    }
  }

  static void CheckField(const std::string& f) {
    detail::Require(f.find_first_of(",\n\r\"") == std::string::npos,
                    "CsvTable: field contains a separator or quote: " + f);
  }

  static void WriteLine(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out << ',';
      out << fields[i];
    }
    out << '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace proxtrace

#endif  // PROXTRACE_CSV_HPP_
