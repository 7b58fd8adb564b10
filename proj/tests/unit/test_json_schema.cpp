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

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "support.hpp"
#include "vizlink/agents.hpp"
#include "vizlink/grammar.hpp"
#include "vizlink/json_schema.hpp"

using namespace vizlink;
using nlohmann::json;

TEST_SUITE("json_schema") {
  TEST_CASE("core keywords") {
    const JsonSchema schema(json::parse(R"({
      "type": "object",
      "required": ["name", "tags"],
      "additionalProperties": false,
      "properties": {
        "name": {"type": "string", "minLength": 2},
        "age": {"type": "integer", "minimum": 0, "maximum": 150},
        "tags": {"type": "array", "minItems": 1, "maxItems": 2, "items": {"enum": ["a", "b"]}},
        "kind": {"const": "x"},
        "score": {"type": ["number", "null"]}
      }
    })"));
    CHECK(schema.accepts(json{{"name", "ok"}, {"tags", {"a"}}}));
    CHECK(schema.accepts(json{{"name", "ok"}, {"tags", {"a", "b"}}, {"age", 3}, {"kind", "x"}, {"score", nullptr}}));
    CHECK_FALSE(schema.accepts(json::array()));
    CHECK_FALSE(schema.accepts(json{{"name", "ok"}}));
    CHECK_FALSE(schema.accepts(json{{"name", "o"}, {"tags", {"a"}}}));
    CHECK_FALSE(schema.accepts(json{{"name", "ok"}, {"tags", json::array()}}));
    CHECK_FALSE(schema.accepts(json{{"name", "ok"}, {"tags", {"a", "b", "a"}}}));
    CHECK_FALSE(schema.accepts(json{{"name", "ok"}, {"tags", {"c"}}}));
    CHECK_FALSE(schema.accepts(json{{"name", "ok"}, {"tags", {"a"}}, {"age", 2.5}}));
    CHECK_FALSE(schema.accepts(json{{"name", "ok"}, {"tags", {"a"}}, {"age", -1}}));
    CHECK_FALSE(schema.accepts(json{{"name", "ok"}, {"tags", {"a"}}, {"kind", "y"}}));
    CHECK_FALSE(schema.accepts(json{{"name", "ok"}, {"tags", {"a"}}, {"score", "high"}}));
    CHECK_FALSE(schema.accepts(json{{"name", "ok"}, {"tags", {"a"}}, {"extra", 1}}));

    const auto issues = schema.validate(json{{"name", "ok"}, {"tags", {"a", "c"}}});
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].locus == "/tags/1");
  }

  TEST_CASE("composition and references") {
    const JsonSchema schema(json::parse(R"({
      "$defs": {"pos": {"type": "number", "minimum": 0}},
      "oneOf": [{"$ref": "#/$defs/pos"}, {"type": "string"}],
      "anyOf": [{"type": "number"}, {"type": "string", "minLength": 1}]
    })"));
    CHECK(schema.accepts(3));
    CHECK(schema.accepts("s"));
    CHECK_FALSE(schema.accepts(-3));
    CHECK_FALSE(schema.accepts(""));
    CHECK_FALSE(schema.accepts(true));
  }

  TEST_CASE("bundled agent schemas accept the fixture charts and the transcript outputs") {
    const JsonSchema grammar(grammar_schema());
    std::size_t seen = 0;
    for (const auto& entry : std::filesystem::directory_iterator(testing::fixture_dir() / "specs/valid")) {
      std::ifstream in(entry.path());
      const auto doc = json::parse(in);
      CAPTURE(entry.path().filename().string());
      CHECK(grammar.validate(doc).empty());
      ++seen;
    }
    CHECK(seen >= 7);

    std::ifstream in(testing::data_dir() / "transcripts/penguins.json");
    const auto transcript = json::parse(in);
    for (const auto& step : transcript["steps"]) {
      if (!step.contains("outputs")) continue;
      for (const auto& [agent, output] : step["outputs"].items()) {
        CAPTURE(agent);
        CHECK(JsonSchema(agent_schema(agent)).accepts(output));
      }
    }
    CHECK_FALSE(JsonSchema(agent_schema("filter")).accepts(json{{"filters", json::array()}}));
  }
}
