/*
 * Copyright 2026 The fishfit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "fishfit/csv.hpp"
#include "fishfit/common.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace fishfit {

std::string format_double(double v) {
  if (std::isnan(v)) {
    return "nan";
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  if (s == "nan") {
    return std::nan("");
  }
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  FISHFIT_THROW_IF(res.ec != std::errc() || res.ptr != s.data() + s.size(), ErrorCode::MalformedFile,
                   "not a number: '" + s + "'");
  return v;
}

int parse_int(const std::string& s) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  FISHFIT_THROW_IF(res.ec != std::errc() || res.ptr != s.data() + s.size(), ErrorCode::MalformedFile,
                   "not an integer: '" + s + "'");
  return v;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path), columns_(header.size()), path_(path) {
  FISHFIT_THROW_IF(!out_, ErrorCode::Io, "cannot write " + path.string());
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  FISHFIT_THROW_IF(fields.size() != columns_, ErrorCode::InvalidArgument,
                   "row width does not match the header of " + path_.string());
  for (std::size_t i = 0; i < fields.size(); ++i) {
    out_ << (i ? "," : "") << fields[i];
  }
  out_ << '\n';
  FISHFIT_THROW_IF(!out_, ErrorCode::Io, "write failed: " + path_.string());
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    out.push_back(field);
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

} // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  FISHFIT_THROW_IF(!in, ErrorCode::Io, "cannot open " + path.string());
  CsvTable t;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    auto fields = split(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    FISHFIT_THROW_IF(fields.size() != t.header.size(), ErrorCode::MalformedFile,
                     path.string() + ":" + std::to_string(line_no) + ": expected " +
                         std::to_string(t.header.size()) + " fields");
    t.rows.push_back(std::move(fields));
  }
  FISHFIT_THROW_IF(t.header.empty(), ErrorCode::MalformedFile, path.string() + " is empty");
  return t;
}

} // namespace fishfit
