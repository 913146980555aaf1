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
#pragma once

// Minimal comma-separated tables. Fields never contain commas or quotes.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fishfit {

/// Shortest text that parses back to the same double ("nan" for NaN).
std::string format_double(double v);

double parse_double(const std::string& s);
int parse_int(const std::string& s);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  void row(const std::vector<std::string>& fields);

 private:
  std::ofstream out_;
  std::size_t columns_ = 0;
  std::filesystem::path path_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index, or -1.
  [[nodiscard]] int column(const std::string& name) const;
};

/// Every row must have as many fields as the header.
CsvTable read_csv(const std::filesystem::path& path);

} // namespace fishfit
