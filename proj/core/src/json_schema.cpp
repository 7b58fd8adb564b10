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

#include "vizlink/json_schema.hpp"

#include <cmath>

#include "vizlink/error.hpp"

namespace vizlink {

using nlohmann::json;

namespace {

bool matches_type(const json& instance, const std::string& type) {
  if (type == "object") return instance.is_object();
  if (type == "array") return instance.is_array();
  if (type == "string") return instance.is_string();
  if (type == "boolean") return instance.is_boolean();
  if (type == "null") return instance.is_null();
  if (type == "number") return instance.is_number();
  if (type == "integer") {
    if (instance.is_number_integer()) return true;
    return instance.is_number_float() && std::trunc(instance.get<double>()) == instance.get<double>();
  }
  return false;
}

std::string escape_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

std::size_t utf8_length(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

}  // namespace

JsonSchema::JsonSchema(json document) : root_(std::move(document)) {
  if (!root_.is_object() && !root_.is_boolean()) {
    throw Error(ErrorCode::MalformedDocument, "schema must be an object or boolean");
  }
}

const json& JsonSchema::resolve(const std::string& ref) const {
  if (ref.rfind("#/", 0) != 0) throw Error(ErrorCode::MalformedDocument, "only local references are supported: " + ref);
  try {
    return root_.at(json::json_pointer(ref.substr(1)));
  } catch (const json::exception&) {
    throw Error(ErrorCode::MalformedDocument, "unresolvable reference " + ref);
  }
}

std::vector<SchemaIssue> JsonSchema::validate(const json& instance) const {
  std::vector<SchemaIssue> out;
  check(root_, instance, "", out, 0);
  return out;
}

void JsonSchema::check(const json& schema, const json& instance, const std::string& locus,
                       std::vector<SchemaIssue>& out, int depth) const {
  if (depth > 64) {
    out.push_back({locus, "schema nesting too deep"});
    return;
  }
  if (schema.is_boolean()) {
    if (!schema.get<bool>()) out.push_back({locus, "no value is allowed here"});
    return;
  }
  if (auto it = schema.find("$ref"); it != schema.end()) {
    check(resolve(it->get<std::string>()), instance, locus, out, depth + 1);
  }
  if (auto it = schema.find("type"); it != schema.end()) {
    bool ok = false;
    if (it->is_string()) {
      ok = matches_type(instance, it->get<std::string>());
    } else {
      for (const auto& t : *it) ok = ok || matches_type(instance, t.get<std::string>());
    }
    if (!ok) {
      out.push_back({locus, "expected type " + it->dump() + ", got " + std::string(instance.type_name())});
      return;
    }
  }
  if (auto it = schema.find("enum"); it != schema.end()) {
    bool found = false;
    for (const auto& v : *it) found = found || v == instance;
    if (!found) out.push_back({locus, instance.dump() + " is not one of " + it->dump()});
  }
  if (auto it = schema.find("const"); it != schema.end() && *it != instance) {
    out.push_back({locus, "expected " + it->dump()});
  }
  if (instance.is_string()) {
    if (auto it = schema.find("minLength"); it != schema.end() && utf8_length(instance.get<std::string>()) < it->get<std::size_t>()) {
      out.push_back({locus, "string shorter than " + it->dump()});
    }
  }
  if (instance.is_number()) {
    const double v = instance.get<double>();
    if (auto it = schema.find("minimum"); it != schema.end() && v < it->get<double>()) {
      out.push_back({locus, "value below minimum " + it->dump()});
    }
    if (auto it = schema.find("maximum"); it != schema.end() && v > it->get<double>()) {
      out.push_back({locus, "value above maximum " + it->dump()});
    }
  }
  if (instance.is_array()) {
    if (auto it = schema.find("minItems"); it != schema.end() && instance.size() < it->get<std::size_t>()) {
      out.push_back({locus, "fewer than " + it->dump() + " items"});
    }
    if (auto it = schema.find("maxItems"); it != schema.end() && instance.size() > it->get<std::size_t>()) {
      out.push_back({locus, "more than " + it->dump() + " items"});
    }
    if (auto it = schema.find("items"); it != schema.end()) {
      for (std::size_t i = 0; i < instance.size(); ++i) {
        check(*it, instance[i], locus + "/" + std::to_string(i), out, depth + 1);
      }
    }
  }
  if (instance.is_object()) {
    if (auto it = schema.find("required"); it != schema.end()) {
      for (const auto& key : *it) {
        if (!instance.contains(key.get<std::string>())) {
          out.push_back({locus, "missing required property '" + key.get<std::string>() + "'"});
        }
      }
    }
    const auto props = schema.find("properties");
    const auto extra = schema.find("additionalProperties");
    for (const auto& [key, value] : instance.items()) {
      const std::string child = locus + "/" + escape_token(key);
      if (props != schema.end() && props->contains(key)) {
        check((*props)[key], value, child, out, depth + 1);
      } else if (extra != schema.end()) {
        if (extra->is_boolean() && !extra->get<bool>()) {
          out.push_back({child, "unexpected property '" + key + "'"});
        } else if (extra->is_object()) {
          check(*extra, value, child, out, depth + 1);
        }
      }
    }
  }
  if (auto it = schema.find("oneOf"); it != schema.end()) {
    int passing = 0;
    std::vector<SchemaIssue> closest;
    for (const auto& branch : *it) {
      std::vector<SchemaIssue> issues;
      check(branch, instance, locus, issues, depth + 1);
      if (issues.empty()) ++passing;
      else if (closest.empty() || issues.size() < closest.size()) closest = std::move(issues);
    }
    if (passing == 0) {
      out.push_back({locus, "matches no alternative"});
      out.insert(out.end(), closest.begin(), closest.end());
    } else if (passing > 1) {
      out.push_back({locus, "matches more than one alternative"});
    }
  }
  if (auto it = schema.find("anyOf"); it != schema.end()) {
    bool any = false;
    for (const auto& branch : *it) {
      std::vector<SchemaIssue> issues;
      check(branch, instance, locus, issues, depth + 1);
      any = any || issues.empty();
    }
    if (!any) out.push_back({locus, "matches no alternative"});
  }
}

}  // namespace vizlink
