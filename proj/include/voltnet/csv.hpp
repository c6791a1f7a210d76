/*
 * Copyright 2026 The voltnet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Minimal CSV reading for the fixture and trace formats. Fields are
// comma-separated, surrounding whitespace is trimmed, blank lines are skipped.

#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "voltnet/error.hpp"

namespace voltnet::csv {

struct Row {
  std::size_t line = 0;  // 1-based line number in the source
  std::vector<std::string> fields;
};

inline std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(ws);
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Reads all rows. The first non-blank row is the header and must equal
/// `expected_header` column for column.
inline std::vector<Row> read(std::istream& in,
                             const std::vector<std::string>& expected_header) {
  std::vector<Row> rows;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (!have_header) {
      if (fields != expected_header) {
        std::string want;
        for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
        throw IngestError(line_no, "expected header '" + want + "'");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != expected_header.size()) {
      throw IngestError(line_no, "expected " + std::to_string(expected_header.size()) +
                                     " fields, found " + std::to_string(fields.size()));
    }
    rows.push_back({line_no, std::move(fields)});
  }
  if (!have_header) throw IngestError(0, "empty input, missing header");
  return rows;
}

inline double to_double(const Row& row, std::size_t col) {
  const auto& s = row.fields.at(col);
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw IngestError(row.line, "field " + std::to_string(col + 1) + " ('" + s +
                                    "') is not a number");
  }
  return value;
}

inline long long to_integer(const Row& row, std::size_t col) {
  const auto& s = row.fields.at(col);
  std::size_t used = 0;
  long long value = 0;
  try {
    value = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw IngestError(row.line, "field " + std::to_string(col + 1) + " ('" + s +
                                    "') is not an integer");
  }
  return value;
}

}  // namespace voltnet::csv
