// Copyright 2026 The ulln Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ulln/engine.hpp"
#include "ulln/error.hpp"

namespace ulln::csv {

using Row = std::vector<std::string>;

// RFC 4180 records. Quoted fields may hold commas, quotes and newlines.
inline std::vector<Row> parse(std::istream& in) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool quoted = false, any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) throw InvalidParameter("csv: unterminated quoted field");
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<Row> parse(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

inline std::string join_header(const Row& r) {
  std::string out;
  for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + r[i];
  return out;
}

inline double to_real(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw InvalidParameter("csv: bad number '" + s + "'");
  return v;
}

template <class Int>
Int to_int(const std::string& s) {
  Int v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw InvalidParameter("csv: bad integer '" + s + "'");
  return v;
}

// Reads a deviations CSV back into a curve. A trailing "#FAILED" row sets
// the failure message.
inline DeviationCurve read_deviations(std::istream& in) {
  const auto rows = parse(in);
  if (rows.empty() || join_header(rows[0]) != DeviationCurve::csv_header())
    throw InvalidParameter("csv: not a deviations file (header mismatch)");
  DeviationCurve curve;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (!r.empty() && r[0] == "#FAILED") {
      curve.failure = r.size() > 1 ? r[1] : "";
      continue;
    }
    if (r.size() != 10)
      throw InvalidParameter("csv: row " + std::to_string(i + 1) + " has " +
                             std::to_string(r.size()) + " fields, expected 10");
    curve.experiment_id = r[0];
    curve.scheme_id = r[1];
    DeviationRecord rec;
    rec.n = to_int<std::int64_t>(r[2]);
    rec.m_n = to_int<std::int64_t>(r[3]);
    curve.p = to_real(r[4]);
    rec.replicate = to_int<std::int64_t>(r[5]);
    rec.seed = to_int<std::uint64_t>(r[6]);
    rec.sup_dev = to_real(r[7]);
    rec.net_size = to_int<std::size_t>(r[8]);
    rec.wall_ms = to_real(r[9]);
    curve.records.push_back(rec);
  }
  return curve;
}

inline DeviationCurve read_deviations(const std::string& text) {
  std::istringstream in(text);
  return read_deviations(in);
}

}  // namespace ulln::csv
