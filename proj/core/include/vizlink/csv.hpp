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

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vizlink::csv {

/// Raw RFC 4180 table: one header row, text cells, and the record terminator seen in the input.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string line_terminator = "\n";
};

/// Parses RFC 4180 text. Throws Error(SchemaViolation) on unterminated quotes or ragged rows.
Table parse(std::string_view text, std::string_view origin = {});

/// Writes one record, quoting cells that contain separators, quotes, or line breaks.
void write_row(std::ostream& out, std::span<const std::string> cells, std::string_view terminator);

}  // namespace vizlink::csv
