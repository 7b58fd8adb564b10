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

#include "vizlink/value.hpp"

#include <charconv>
#include <cmath>
#include <functional>

#include "vizlink/error.hpp"

namespace vizlink {

std::string_view to_string(FieldKind kind) noexcept {
  switch (kind) {
    case FieldKind::quantitative: return "quantitative";
    case FieldKind::nominal: return "nominal";
    case FieldKind::ordinal: return "ordinal";
    case FieldKind::identifier: return "identifier";
  }
  return "nominal";
}

std::optional<FieldKind> field_kind_from_string(std::string_view text) noexcept {
  if (text == "quantitative") return FieldKind::quantitative;
  if (text == "nominal") return FieldKind::nominal;
  if (text == "ordinal") return FieldKind::ordinal;
  if (text == "identifier") return FieldKind::identifier;
  return std::nullopt;
}

int compare_cells(const Cell& a, const Cell& b) noexcept {
  if (a.index() != b.index()) {
    // index order: monostate(0), double(1), string(2); null sorts last
    auto rank = [](const Cell& c) { return c.index() == 0 ? 3 : static_cast<int>(c.index()); };
    return rank(a) < rank(b) ? -1 : 1;
  }
  if (const auto* x = std::get_if<double>(&a)) {
    double y = std::get<double>(b);
    return *x < y ? -1 : (*x > y ? 1 : 0);
  }
  if (const auto* s = std::get_if<std::string>(&a)) {
    int c = s->compare(std::get<std::string>(b));
    return c < 0 ? -1 : (c > 0 ? 1 : 0);
  }
  return 0;
}

int compare_keys(const Key& a, const Key& b) noexcept {
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (int c = compare_cells(a[i], b[i]); c != 0) return c;
  }
  if (a.size() == b.size()) return 0;
  return a.size() < b.size() ? -1 : 1;
}

std::size_t KeyHash::operator()(const Key& key) const noexcept {
  std::size_t seed = key.size();
  for (const auto& cell : key) {
    std::size_t h = 0;
    if (const auto* d = std::get_if<double>(&cell)) {
      h = std::hash<double>{}(*d == 0.0 ? 0.0 : *d);
    } else if (const auto* s = std::get_if<std::string>(&cell)) {
      h = std::hash<std::string>{}(*s);
    } else {
      h = 0x9e3779b97f4a7c15ULL;
    }
    seed ^= h + 0x9e3779b9 + (seed << 6) + (seed >> 2);
  }
  return seed;
}

std::string format_number(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) return std::to_string(value);
  return std::string(buf, end);
}

std::string display_text(const Cell& cell) {
  if (const auto* d = std::get_if<double>(&cell)) return format_number(*d);
  if (const auto* s = std::get_if<std::string>(&cell)) return *s;
  return "(null)";
}

nlohmann::json cell_to_json(const Cell& cell) {
  if (const auto* d = std::get_if<double>(&cell)) return *d;
  if (const auto* s = std::get_if<std::string>(&cell)) return *s;
  return nullptr;
}

Cell cell_from_json(const nlohmann::json& value) {
  if (value.is_null()) return std::monostate{};
  if (value.is_number()) {
    double d = value.get<double>();
    if (!std::isfinite(d)) throw Error(ErrorCode::MalformedDocument, "non-finite number");
    return d;
  }
  if (value.is_string()) return value.get<std::string>();
  if (value.is_boolean()) return std::string(value.get<bool>() ? "true" : "false");
  throw Error(ErrorCode::MalformedDocument, "cell value must be null, number, or string");
}

}  // namespace vizlink
