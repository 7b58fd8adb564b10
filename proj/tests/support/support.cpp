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

#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vizlink::testing {

using nlohmann::json;

std::filesystem::path data_dir() { return VIZLINK_TEST_DATA_DIR; }
std::filesystem::path fixture_dir() { return VIZLINK_TEST_FIXTURE_DIR; }

TempDir::TempDir() {
  static std::mt19937_64 rng{std::random_device{}()};
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto candidate = std::filesystem::temp_directory_path() / ("vizlink-test-" + std::to_string(rng()));
    if (std::filesystem::create_directory(candidate)) {
      path_ = candidate;
      return;
    }
  }
  throw std::runtime_error("could not create a temporary directory");
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::filesystem::path write_package(const std::filesystem::path& dir, const std::string& name,
                                    const std::vector<TableDraft>& tables) {
  std::filesystem::create_directories(dir);
  json resources = json::array();
  for (const auto& t : tables) {
    json schema{{"fields", t.fields}, {"primaryKey", t.primary_key}, {"missingValues", {""}}};
    if (!t.foreign_keys.empty()) schema["foreignKeys"] = t.foreign_keys;
    resources.push_back({{"name", t.name}, {"path", t.name + ".csv"}, {"schema", schema}});
    std::ofstream out(dir / (t.name + ".csv"), std::ios::binary);
    for (std::size_t i = 0; i < t.fields.size(); ++i) out << (i ? "," : "") << t.fields[i]["name"].get<std::string>();
    out << "\n";
    for (const auto& row : t.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
      out << "\n";
    }
  }
  const auto descriptor = dir / "datapackage.json";
  std::ofstream(descriptor) << json{{"name", name}, {"resources", resources}}.dump(2);
  return descriptor;
}

namespace {

std::string pick(std::mt19937_64& rng, const std::vector<std::string>& options) {
  return options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
}

bool chance(std::mt19937_64& rng, double p) { return std::bernoulli_distribution(p)(rng); }

std::string number_text(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

}  // namespace

std::vector<TableDraft> portal_tables(std::mt19937_64& rng, std::size_t max_rows) {
  auto size = [&](std::size_t lo) { return std::uniform_int_distribution<std::size_t>(lo, max_rows)(rng); };
  const std::size_t donors = std::min<std::size_t>(size(5), 120);
  const std::size_t samples = size(5);
  const std::size_t datasets = size(5);

  TableDraft d{"donors",
               json::array({{{"name", "donor_id"}, {"type", "integer"}},
                            {{"name", "sex"}, {"type", "string"}},
                            {{"name", "age"}, {"type", "integer"}},
                            {{"name", "weight"}, {"type", "number"}},
                            {{"name", "death_event"}, {"type", "string"}}}),
               {"donor_id"}};
  for (std::size_t i = 0; i < donors; ++i) {
    d.rows.push_back({std::to_string(i + 1), chance(rng, 0.1) ? "" : pick(rng, {"female", "male"}),
                      chance(rng, 0.1) ? "" : std::to_string(std::uniform_int_distribution<int>(0, 90)(rng)),
                      chance(rng, 0.1) ? "" : number_text(std::uniform_real_distribution<double>(3, 140)(rng)),
                      chance(rng, 0.1) ? "" : pick(rng, {"Accident", "Homicide", "Natural causes", "Suicide"})});
  }
  TableDraft s{"samples",
               json::array({{{"name", "sample_id"}, {"type", "integer"}},
                            {{"name", "donor"}, {"type", "integer"}},
                            {{"name", "organ"}, {"type", "string"}},
                            {{"name", "mass"}, {"type", "number"}}}),
               {"sample_id"},
               json::array({{{"fields", {"donor"}}, {"reference", {{"resource", "donors"}, {"fields", {"donor_id"}}}}}})};
  // donors past the upper third never receive samples, so some parents are childless
  const int donor_span = static_cast<int>(std::max<std::size_t>(1, donors * 2 / 3));
  for (std::size_t i = 0; i < samples; ++i) {
    s.rows.push_back({std::to_string(i + 1),
                      chance(rng, 0.05) ? "" : std::to_string(std::uniform_int_distribution<int>(1, donor_span)(rng)),
                      chance(rng, 0.1) ? "" : pick(rng, {"heart", "kidney", "liver", "lung", "skin", "spleen"}),
                      chance(rng, 0.1) ? "" : number_text(std::uniform_real_distribution<double>(0.1, 50)(rng))});
  }
  TableDraft ds{"datasets",
                json::array({{{"name", "dataset_id"}, {"type", "integer"}},
                             {{"name", "sample"}, {"type", "integer"}},
                             {{"name", "assay"}, {"type", "string"}},
                             {{"name", "size"}, {"type", "number"}}}),
                {"dataset_id"},
                json::array({{{"fields", {"sample"}}, {"reference", {{"resource", "samples"}, {"fields", {"sample_id"}}}}}})};
  const int sample_span = static_cast<int>(std::max<std::size_t>(1, samples * 3 / 4));
  for (std::size_t i = 0; i < datasets; ++i) {
    ds.rows.push_back({std::to_string(i + 1),
                       chance(rng, 0.05) ? "" : std::to_string(std::uniform_int_distribution<int>(1, sample_span)(rng)),
                       chance(rng, 0.1) ? "" : pick(rng, {"ATAC-seq", "CODEX", "RNA-seq", "snRNA-seq"}),
                       chance(rng, 0.1) ? "" : number_text(std::uniform_real_distribution<double>(1, 1000)(rng))});
  }
  return {d, s, ds};
}

std::vector<TableDraft> file_tables(std::mt19937_64& rng, std::size_t rows) {
  TableDraft f{"files",
               json::array({{{"name", "accession"}, {"type", "integer"}},
                            {{"name", "mime_type"}, {"type", "string"}},
                            {{"name", "size"}, {"type", "integer"}}}),
               {"accession"}};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < rows; ++i) {
    // Pareto(alpha = 1.1, x_m = 1 KiB): a few files dominate total storage
    const double size = 1024.0 / std::pow(1.0 - unit(rng), 1.0 / 1.1);
    f.rows.push_back({std::to_string(i + 1),
                      pick(rng, {"application/gzip", "application/octet-stream", "text/plain", "image/tiff"}),
                      std::to_string(static_cast<long long>(std::min(size, 9.0e15)))});
  }
  return {f};
}

std::size_t RawTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw std::out_of_range("no column " + name);
}

RawTable read_raw_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  RawTable t;
  std::string line;
  auto split = [](const std::string& text) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream s(text);
    while (std::getline(s, cell, ',')) cells.push_back(cell);
    if (!text.empty() && text.back() == ',') cells.emplace_back();
    return cells;
  };
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first) {
      t.header = split(line);
      first = false;
    } else if (!line.empty()) {
      t.rows.push_back(split(line));
    }
  }
  return t;
}

std::map<std::string, std::size_t> tally(const RawTable& table, const std::string& column) {
  const auto c = table.column(column);
  std::map<std::string, std::size_t> out;
  for (const auto& row : table.rows) ++out[row.at(c)];
  return out;
}

bool raw_is_null(const std::string& cell) { return cell.empty() || cell == "NA"; }

}  // namespace vizlink::testing
