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

#include "brush_cases.hpp"
#include "support.hpp"
#include "vizlink/csv.hpp"
#include "vizlink/linking.hpp"
#include "vizlink/session.hpp"

using namespace vizlink;
using nlohmann::json;

namespace {

std::shared_ptr<const Package> penguins() {
  static const auto pkg = std::make_shared<const Package>(load_package(testing::data_dir() / "packages/penguins"));
  return pkg;
}

VizSpec scatter() { return parse_spec(testing::brush_cases()[2].spec); }
VizSpec sex_bar() { return parse_spec(testing::brush_cases()[6].spec); }
VizSpec mass_cdf() { return parse_spec(testing::brush_cases()[0].spec); }
VizSpec table() { return parse_spec(json{{"source", {{{"alias", "p"}, {"entity", "penguins"}}}}}); }

Payload box(double lx, double hx, double ly, double hy) {
  return std::map<std::string, Interval>{{"bill_length_mm", {lx, hx}}, {"bill_depth_mm", {ly, hy}}};
}

Selection species(std::vector<std::string> keep, std::string name = {}) {
  Selection s{std::move(name), SelectionKind::point, "penguins", {"species"}, {}, {}};
  for (auto& k : keep) s.points.push_back({Cell{std::move(k)}});
  return s;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::UnknownSession;  // sentinel: nothing thrown
}

std::size_t count(const SessionState& s) { return entity_counts(*s.package, s.registry).at("penguins"); }

}  // namespace

TEST_SUITE("session") {
  TEST_CASE("creating a chart appends a widget and bumps the version") {
    const auto s0 = new_session("t", penguins());
    CHECK(s0.version == 0);
    const auto r = apply_action(s0, CreateViz{sex_bar()}, 0);
    CHECK(r.state.version == 1);
    CHECK(r.events == std::vector<Event>{{"viz_created", "viz-1"}, {"widget_created", "viz-1"}});
    REQUIRE(r.state.dashboard.size() == 1);
    REQUIRE(r.state.dashboard[0].brush);
    CHECK(r.state.dashboard[0].brush->selection == "viz-1-brush");
    CHECK(r.state.dashboard[0].brush->brush.geometry == BrushGeometry::point);
    CHECK(r.state.entries.back().kind == Entry::Kind::viz_widget);
    CHECK(r.state.action_log.size() == 1);
    CHECK(s0.dashboard.empty());
  }

  TEST_CASE("stale versions and invalid charts are rejected") {
    const auto s = apply_action(new_session("t", penguins()), CreateViz{table()}).state;
    CHECK(code_of([&] { apply_action(s, CreateViz{table()}, 0); }) == ErrorCode::StaleVersion);
    auto bad = table();
    bad.sources[0].entity = "owls";
    CHECK(code_of([&] { apply_action(s, CreateViz{bad}); }) == ErrorCode::InvalidAction);
    CHECK(code_of([&] { apply_action(s, Brush{"viz-1", box(1, 2, 3, 4)}); }) == ErrorCode::InvalidAction);
    CHECK(code_of([&] { apply_action(s, Brush{"viz-9", box(1, 2, 3, 4)}); }) == ErrorCode::InvalidAction);
    CHECK(code_of([&] { apply_action(s, RemoveFilter{"nope"}); }) == ErrorCode::InvalidAction);
    CHECK(code_of([&] { apply_action(s, Download{"owls"}); }) == ErrorCode::UnknownEntity);
  }

  TEST_CASE("first brush creates a mirrored filter widget, later brushes update it") {
    auto s = apply_action(new_session("t", penguins()), CreateViz{scatter()}).state;
    s = apply_action(s, CreateViz{sex_bar()}).state;
    auto r = apply_action(s, Brush{"viz-1", box(36, 46, 16, 20)});
    CHECK(r.events == std::vector<Event>{{"filter_created", "viz-1-brush"}, {"widget_created", "viz-1-brush"}});
    CHECK(r.state.origins.at("viz-1-brush") == SelectionOrigin::brush);
    const auto widget = derive_filter_widget(r.state.registry.at("viz-1-brush"), SelectionOrigin::brush, *penguins());
    CHECK(widget.kind == SelectionKind::interval);
    CHECK(widget.domain.size() == 2);
    CHECK(widget.domain[0].min == 32.1);
    const auto bar = r.state.dashboard[1].spec;
    REQUIRE_FALSE(bar.transforms.empty());
    CHECK(std::get<SelectionFilter>(bar.transforms[0]).selection == "viz-1-brush");
    CHECK(count(r.state) < 344);

    r = apply_action(r.state, Brush{"viz-1", box(30, 60, 10, 25)});
    CHECK(r.events == std::vector<Event>{{"filter_updated", "viz-1-brush"}});
    CHECK(count(r.state) == 342);

    r = apply_action(r.state, Brush{"viz-1", std::nullopt});
    CHECK(r.events == std::vector<Event>{{"filter_updated", "viz-1-brush"}});
    CHECK(count(r.state) == 344);
    CHECK(describe_payload(r.state.registry.at("viz-1-brush"), *penguins()) ==
          "bill_length_mm: min to max; bill_depth_mm: min to max");
  }

  TEST_CASE("payload labels use min and max sentinels") {
    Selection s{"f", SelectionKind::interval, "penguins", {"body_mass_g"}, {}, {{std::nullopt, 4000.0}}};
    CHECK(describe_payload(s, *penguins()) == "body_mass_g: min to 4000");
    s.intervals[0] = {3000.0, 6300.0};
    CHECK(describe_payload(s, *penguins()) == "body_mass_g: 3000 to max");
    auto kept = species({"Gentoo", "Adelie"}, "x");
    canonicalize(kept);
    CHECK(describe_payload(kept, *penguins()) == "Adelie, Gentoo");
  }

  TEST_CASE("agent filters can be retargeted, brush filters cannot") {
    auto s = apply_action(new_session("t", penguins()), CreateFilter{species({"Adelie"})}).state;
    CHECK(s.registry.contains("filter-1"));
    CHECK(count(s) == 152);
    auto r = apply_action(s, AdjustFilter{"filter-1", std::nullopt, std::nullopt, std::vector<std::string>{"island"}});
    CHECK(r.state.registry.at("filter-1").fields == std::vector<std::string>{"island"});
    CHECK(count(r.state) == 344);
    r = apply_action(r.state, AdjustFilter{"filter-1", std::nullopt, std::nullopt, std::vector<std::string>{"body_mass_g"}});
    CHECK(r.state.registry.at("filter-1").kind == SelectionKind::interval);
    CHECK(count(r.state) == 344);
    CHECK(code_of([&] {
            apply_action(r.state, AdjustFilter{"filter-1", std::nullopt, std::nullopt, std::vector<std::string>{"id"}});
          }) == ErrorCode::KindMismatch);

    auto b = apply_action(new_session("t", penguins()), CreateViz{scatter()}).state;
    b = apply_action(b, Brush{"viz-1", box(36, 46, 16, 20)}).state;
    CHECK(code_of([&] {
            apply_action(b, AdjustFilter{"viz-1-brush", std::nullopt, std::nullopt, std::vector<std::string>{"body_mass_g"}});
          }) == ErrorCode::InvalidAction);
  }

  TEST_CASE("swapping a chart field rewrites grouping and re-derives the brush") {
    auto s = apply_action(new_session("t", penguins()), CreateViz{sex_bar()}).state;
    s = apply_action(s, Brush{"viz-1", std::vector<Key>{{Cell{std::string("male")}}}}).state;
    CHECK(count(s) == 168);
    CHECK(code_of([&] { apply_action(s, AdjustVizField{"viz-1", Channel::x, "body_mass_g"}); }) == ErrorCode::KindMismatch);
    CHECK(code_of([&] { apply_action(s, AdjustVizField{"viz-1", Channel::y, "island"}); }) == ErrorCode::InvalidAction);
    const auto r = apply_action(s, AdjustVizField{"viz-1", Channel::x, "island"});
    const auto& viz = r.state.dashboard[0];
    const auto grouping = std::find_if(viz.spec.transforms.begin(), viz.spec.transforms.end(),
                                       [](const Transform& t) { return std::holds_alternative<Groupby>(t); });
    REQUIRE(grouping != viz.spec.transforms.end());
    CHECK(std::get<Groupby>(*grouping).fields == std::vector<std::string>{"island"});
    REQUIRE(viz.brush);
    CHECK(viz.brush->brush.fields == std::vector<std::string>{"island"});
    CHECK(viz.brush->selection == "viz-1-brush-2");
    CHECK_FALSE(r.state.registry.contains("viz-1-brush"));
    CHECK(count(r.state) == 344);
    const auto result = execute(viz.spec, *penguins(), r.state.registry);
    CHECK(result.rows.size() == 3);
    const auto rendered = render_state(r.state);
    CHECK(rendered["entries"].back()["widget"]["live"] == false);

    const auto widget = derive_viz_widget(viz.spec, *penguins());
    REQUIRE(widget.slots.size() == 1);
    CHECK(widget.slots[0].field == "island");
    CHECK(std::find(widget.slots[0].candidates.begin(), widget.slots[0].candidates.end(), "species") !=
          widget.slots[0].candidates.end());
  }

  TEST_CASE("dismissing a chart drops its brush filter") {
    auto s = apply_action(new_session("t", penguins()), CreateViz{scatter()}).state;
    s = apply_action(s, Brush{"viz-1", box(36, 46, 16, 20)}).state;
    const auto r = apply_action(s, DismissViz{"viz-1"});
    CHECK(r.events == std::vector<Event>{{"filter_removed", "viz-1-brush"}, {"viz_dismissed", "viz-1"}});
    CHECK(r.state.dashboard.empty());
    CHECK(r.state.registry.empty());
    CHECK(r.state.entries.size() == 2);
  }

  TEST_CASE("downloads hold exactly the surviving rows in the input dialect") {
    auto s = apply_action(new_session("t", penguins()), CreateFilter{species({"Adelie", "Chinstrap"})}).state;
    const auto r = apply_action(s, Download{"penguins"});
    CHECK(r.state.version == s.version + 1);
    const auto text = download(r.state, "penguins");
    const auto parsed = csv::parse(text);
    CHECK(parsed.header == penguins()->entity("penguins").field_names());
    CHECK(parsed.rows.size() == count(r.state));
    CHECK(parsed.rows.size() == 220);
    CHECK(text.substr(0, 3) == "id,");
    CHECK(parsed.rows[0] == penguins()->entity("penguins").raw_rows[0]);
  }

  TEST_CASE("chat turns register filters before the chart and are all-or-nothing") {
    const auto s = new_session("t", penguins());
    ChatTurn turn{"only small ones", "Filtered and charted.", {species({"Adelie"})}, sex_bar(), json::object()};
    const auto r = apply_chat_turn(s, turn);
    CHECK(r.state.version == 2);
    CHECK(r.state.entries[0].kind == Entry::Kind::user);
    CHECK(r.state.entries[1].kind == Entry::Kind::agent);
    const auto& spec = r.state.dashboard[0].spec;
    REQUIRE_FALSE(spec.transforms.empty());
    CHECK(std::get<SelectionFilter>(spec.transforms[0]).selection == "filter-1");
    CHECK(r.state.action_log.size() == 1);
    CHECK(r.state.action_log[0]["type"] == "chat");

    auto broken = turn;
    broken.viz->sources[0].entity = "owls";
    CHECK(code_of([&] { apply_chat_turn(s, broken); }) == ErrorCode::InvalidAction);

    const auto talk = apply_chat_turn(s, ChatTurn{"hello", "Hi.", {}, std::nullopt, json::object()});
    CHECK(talk.state.version == 1);
    CHECK(talk.state.entries.size() == 2);
    CHECK(talk.state.dashboard.empty());
  }

  TEST_CASE("snapshots restore the same state and digest") {
    auto s = new_session("snap", penguins());
    s = apply_action(s, CreateViz{scatter()}).state;
    s = apply_action(s, CreateViz{mass_cdf()}).state;
    s = apply_action(s, Brush{"viz-2", std::map<std::string, Interval>{{"body_mass_g", {std::nullopt, 4000.0}}}}).state;
    s = apply_action(s, CreateFilter{species({"Adelie", "Chinstrap"})}).state;
    const auto snap = snapshot(s);
    const auto back = restore(snap, penguins());
    CHECK(snapshot(back) == snap);
    CHECK(render_state(back) == render_state(s));
    CHECK(snapshot_digest(snapshot(back)) == snapshot_digest(snap));
    CHECK(snapshot_digest(snap).size() == 64);

    auto renamed = back;
    renamed.id = "other";
    CHECK(snapshot_digest(snapshot(renamed)) == snapshot_digest(snap));

    auto future = snap;
    future["schema_version"] = kSnapshotSchemaVersion + 1;
    CHECK(code_of([&] { restore(future, penguins()); }) == ErrorCode::VersionSkew);
    auto corrupt = snap;
    corrupt["dashboard"][0]["spec"]["source"][0]["entity"] = "owls";
    CHECK(code_of([&] { restore(corrupt, penguins()); }) == ErrorCode::MalformedDocument);
    auto foreign = snap;
    foreign["package"] = "portal";
    CHECK(code_of([&] { restore(foreign, penguins()); }) == ErrorCode::InvalidAction);
  }

  TEST_CASE("actions round-trip through json") {
    const std::vector<Action> actions{
        CreateViz{sex_bar()},
        CreateFilter{species({"Adelie"}, "f")},
        AdjustFilter{"f", Payload{std::vector<Key>{{Cell{std::string("Gentoo")}}}}, std::nullopt, std::nullopt},
        AdjustFilter{"f", std::nullopt, std::string("penguins"), std::vector<std::string>{"island"}},
        AdjustVizField{"viz-1", Channel::color, "island"},
        Brush{"viz-1", box(1, 2, 3, 4)},
        Brush{"viz-1", std::nullopt},
        RemoveFilter{"f"},
        DismissViz{"viz-1"},
        Download{"penguins"},
        Converse{"hi", "hello"}};
    for (const auto& a : actions) {
      const auto doc = to_json(a);
      CAPTURE(doc.dump());
      CHECK(to_json(action_from_json(doc)) == doc);
    }
    CHECK(code_of([] { action_from_json(json{{"type", "undo"}}); }) == ErrorCode::MalformedDocument);
    CHECK(code_of([] { action_from_json(json{{"type", "brush"}, {"viz_id", "viz-1"}}); }) == ErrorCode::MalformedDocument);
  }
}
