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

#include <atomic>
#include <thread>

#include "support.hpp"
#include "vizlink/csv.hpp"
#include "vizlink/service.hpp"

using namespace vizlink;
using nlohmann::json;

namespace {

std::shared_ptr<const Package> penguins() {
  static const auto pkg = std::make_shared<const Package>(load_package(testing::data_dir() / "packages/penguins"));
  return pkg;
}

const std::string kBarMessage = "count by sex";
const std::string kBadMessage = "broken";

std::shared_ptr<ScriptedBackend> script() {
  auto b = std::make_shared<ScriptedBackend>();
  b->add("orchestrator", kBarMessage, {R"({"wants_filter": false, "wants_viz": true, "reply": "Counts by sex."})"});
  b->add("visualization", kBarMessage,
         {R"({"source": [{"alias": "p", "entity": "penguins"}],
              "transformation": [{"groupby": {"fields": ["sex"]}}, {"rollup": {"out": "n", "op": "count"}}],
              "representation": {"mark": "bar", "mapping": [{"channel": "x", "field": "sex", "type": "nominal"},
                                                           {"channel": "y", "field": "n", "type": "quantitative"}]}})"});
  b->add("orchestrator", kBadMessage, {R"({"wants_filter": "yes"})"});
  return b;
}

class TimeoutBackend final : public CompletionBackend {
 public:
  std::string complete(const Prompt&) override { throw Error(ErrorCode::BackendTimeout, "slow"); }
};

struct Client {
  Service& service;
  Response call(std::string method, std::string path, const json& body = nullptr,
                std::map<std::string, std::string> query = {}) {
    return service.dispatch(Request{std::move(method), std::move(path), std::move(query), body.is_null() ? "" : body.dump()});
  }
  json ok(std::string method, std::string path, const json& body = nullptr, int status = 200) {
    const auto r = call(std::move(method), std::move(path), body);
    CAPTURE(r.body);
    REQUIRE(r.status == status);
    return json::parse(r.body);
  }
};

std::string code_of(const Response& r) { return json::parse(r.body).at("code").get<std::string>(); }

json male_brush(std::uint64_t version) {
  return {{"version", version}, {"payload", {{"values", {{"male"}}}}}};
}

}  // namespace

TEST_SUITE("service") {
  TEST_CASE("session lifecycle through every endpoint") {
    Service service(penguins(), script());
    Client c{service};
    const auto created = c.ok("POST", "/sessions", json::object(), 201);
    const std::string base = "/sessions/" + created["id"].get<std::string>();
    CHECK(created["version"] == 0);
    CHECK(created["counts"]["penguins"] == 344);

    const auto chat = c.ok("POST", base + "/chat", {{"text", kBarMessage}});
    CHECK(chat["version"] == 1);
    CHECK(chat["reply"] == "Counts by sex.");
    CHECK(chat["trace"]["route"]["wants_viz"] == true);
    CHECK(chat["state"]["dashboard"].size() == 1);

    CHECK(code_of(c.call("POST", base + "/viz/viz-1/brush", male_brush(0))) == "StaleVersion");
    CHECK(c.call("POST", base + "/viz/viz-1/brush", male_brush(0)).status == 409);
    auto brushed = c.ok("POST", base + "/viz/viz-1/brush", male_brush(1));
    CHECK(brushed["version"] == 2);
    CHECK(brushed["events"][0] == json{{"type", "filter_created"}, {"target", "viz-1-brush"}});
    CHECK(c.ok("GET", base + "/counts")["counts"]["penguins"] == 168);

    const auto patched = c.ok("PATCH", base + "/filters/viz-1-brush",
                              {{"version", 2}, {"payload", {{"values", {{"female"}, {"male"}}}}}});
    CHECK(patched["version"] == 3);
    CHECK(c.ok("GET", base + "/counts")["counts"]["penguins"] == 333);

    const auto swapped = c.ok("PATCH", base + "/viz/viz-1/fields", {{"version", 3}, {"channel", "x"}, {"field", "island"}});
    CHECK(swapped["state"]["dashboard"][0]["brush"]["fields"] == json{"island"});
    CHECK(c.call("PATCH", base + "/viz/viz-1/fields", {{"version", 4}, {"channel", "x"}, {"field", "body_mass_g"}}).status == 422);

    const auto file = c.call("GET", base + "/download", nullptr, {{"entity", "penguins"}});
    CHECK(file.status == 200);
    CHECK(file.content_type.rfind("text/csv", 0) == 0);
    const auto counts = c.ok("GET", base + "/counts");
    CHECK(counts["version"] == 5);
    CHECK(csv::parse(file.body).rows.size() == counts["counts"]["penguins"].get<std::size_t>());
    CHECK(c.call("GET", base + "/download", nullptr, {{"entity", "owls"}}).status == 404);

    const auto state = c.ok("GET", base + "/state");
    CHECK(state["version"] == 5);
    CHECK(state["entries"].size() == 4);

    CHECK(c.call("DELETE", base + "/viz/viz-1", nullptr, {{"version", "5"}}).status == 200);
    CHECK(c.ok("GET", base + "/state")["dashboard"].empty());
  }

  TEST_CASE("errors carry a code, message, and status") {
    Service service(penguins(), script());
    Client c{service};
    const std::string base = "/sessions/" + c.ok("POST", "/sessions", nullptr, 201)["id"].get<std::string>();

    auto r = c.call("GET", "/sessions/nope/state");
    CHECK(r.status == 404);
    CHECK(code_of(r) == "UnknownSession");
    CHECK(json::parse(r.body)["message"].get<std::string>().find("nope") != std::string::npos);

    CHECK(c.call("POST", base + "/chat", {{"text", "unscripted"}}).status == 502);
    r = c.call("POST", base + "/chat", {{"text", kBadMessage}});
    CHECK(r.status == 422);
    CHECK(code_of(r) == "SchemaViolation");
    CHECK(json::parse(r.body)["attempts"].size() == 2);
    CHECK(c.ok("GET", base + "/state")["version"] == 0);

    CHECK(c.call("POST", base + "/viz/viz-9/brush", male_brush(0)).status == 422);
    CHECK(c.call("PATCH", base + "/filters/none", {{"payload", {{"values", {{"x"}}}}}}).status == 422);
    r = c.service.dispatch(Request{"POST", base + "/chat", {}, "{not json"});
    CHECK(r.status == 400);
    CHECK(code_of(r) == "MalformedDocument");
    CHECK(c.call("GET", "/elsewhere").status == 404);
    CHECK(c.call("DELETE", base + "/state").status == 405);
    CHECK(c.call("GET", "/schema/grammar").status == 200);

    Service slow(penguins(), std::make_shared<TimeoutBackend>());
    Client s{slow};
    const std::string other = "/sessions/" + s.ok("POST", "/sessions", nullptr, 201)["id"].get<std::string>();
    r = s.call("POST", other + "/chat", {{"text", "anything"}});
    CHECK(r.status == 504);
    CHECK(code_of(r) == "BackendTimeout");
  }

  TEST_CASE("exactly one writer wins each version") {
    Service service(penguins(), script());
    Client c{service};
    const std::string base = "/sessions/" + c.ok("POST", "/sessions", nullptr, 201)["id"].get<std::string>();
    c.ok("POST", base + "/chat", {{"text", kBarMessage}});
    std::atomic<int> won{0}, stale{0};
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) {
      threads.emplace_back([&] {
        const auto r = service.dispatch(Request{"POST", base + "/viz/viz-1/brush", {}, male_brush(1).dump()});
        (r.status == 200 ? won : stale)++;
      });
    }
    for (auto& t : threads) t.join();
    CHECK(won == 1);
    CHECK(stale == 7);
  }

  TEST_CASE("sessions survive a restart from their snapshots") {
    testing::TempDir dir;
    ServiceOptions options;
    options.snapshot_dir = dir.path();
    std::string base;
    json before;
    {
      Service service(penguins(), script(), options);
      Client c{service};
      base = "/sessions/" + c.ok("POST", "/sessions", nullptr, 201)["id"].get<std::string>();
      c.ok("POST", base + "/chat", {{"text", kBarMessage}});
      c.ok("POST", base + "/viz/viz-1/brush", male_brush(1));
      before = c.ok("GET", base + "/state");
    }
    Service restarted(penguins(), script(), options);
    Client c{restarted};
    CHECK(restarted.session_ids().size() == 1);
    CHECK(c.ok("GET", base + "/state") == before);
    CHECK(c.ok("POST", base + "/viz/viz-1/brush", {{"version", 2}, {"clear", true}})["version"] == 3);
  }
}
