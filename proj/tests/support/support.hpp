/*
 * Copyright (c) 2026, The vizlink Authors.
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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vizlink/datapackage.hpp"

namespace vizlink::testing {

std::filesystem::path data_dir();
std::filesystem::path fixture_dir();

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

/// One resource to write: descriptor fields plus raw cell text ("" is null).
struct TableDraft {
  std::string name;
  nlohmann::json fields;  // array of {name, type, ...}
  std::vector<std::string> primary_key;
  nlohmann::json foreign_keys = nlohmann::json::array();
  std::vector<std::vector<std::string>> rows;
};

/// Writes datapackage.json plus one CSV per table and returns the descriptor path.
std::filesystem::path write_package(const std::filesystem::path& dir, const std::string& name,
                                    const std::vector<TableDraft>& tables);

/// donors <- samples <- datasets with random sizes (each at most `max_rows`), nulls in every
/// non-key column, childless parents, and children with null foreign keys.
std::vector<TableDraft> portal_tables(std::mt19937_64& rng, std::size_t max_rows = 500);

/// A single `files` table with heavy-tailed (Pareto) integer sizes and a mime type column.
std::vector<TableDraft> file_tables(std::mt19937_64& rng, std::size_t rows = 10000);

// --- independent oracles over raw CSV text (no quoting, as written above) --------------------

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::size_t column(const std::string& name) const;
};

/// Naive comma split, used to cross-check the loader on files without quoted cells.
RawTable read_raw_csv(const std::filesystem::path& path);

/// Tally of a column's raw text values.
std::map<std::string, std::size_t> tally(const RawTable& table, const std::string& column);

bool raw_is_null(const std::string& cell);

}  // namespace vizlink::testing
