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

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace vizlink {

/// One failed keyword: JSON pointer into the instance plus a readable reason.
struct SchemaIssue {
  std::string locus;
  std::string reason;
};

/// Validates against the JSON Schema keywords the bundled schemas use:
/// type, enum, const, properties, required, additionalProperties (bool or schema),
/// items, minItems, maxItems, minLength, minimum, maximum, oneOf, anyOf and local
/// "#/$defs/..." references. Other keywords are ignored.
class JsonSchema {
 public:
  explicit JsonSchema(nlohmann::json document);

  [[nodiscard]] std::vector<SchemaIssue> validate(const nlohmann::json& instance) const;
  [[nodiscard]] bool accepts(const nlohmann::json& instance) const { return validate(instance).empty(); }
  [[nodiscard]] const nlohmann::json& document() const noexcept { return root_; }

 private:
  void check(const nlohmann::json& schema, const nlohmann::json& instance, const std::string& locus,
             std::vector<SchemaIssue>& out, int depth) const;
  const nlohmann::json& resolve(const std::string& ref) const;

  nlohmann::json root_;
};

}  // namespace vizlink
