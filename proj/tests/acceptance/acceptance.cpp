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

// One PASS/FAIL line per acceptance criterion; exits non-zero if any fails.

#include <algorithm>
#include <cmath>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "brush_cases.hpp"
#include "oracle.hpp"
#include "properties.hpp"
#include "support.hpp"
#include "vizlink/csv.hpp"
#include "vizlink/agents.hpp"
#include "vizlink/linking.hpp"
#include "vizlink/service.hpp"

namespace {

using namespace vizlink;
using nlohmann::json;
namespace fs = std::filesystem;

// Pinned thresholds.
constexpr double kReplayBudgetSeconds = 5.0;
constexpr std::size_t kPenguinPrompts = 9;
constexpr std::size_t kPenguinRows = 344;
constexpr std::size_t kPenguinFields = 9;
constexpr std::size_t kLinkTrials = 200;
constexpr std::size_t kLinkMaxRows = 500;
constexpr std::size_t kBrushCases = 12;
constexpr std::size_t kPropertyCases = 1000;
constexpr std::size_t kMinMalformed = 20;
constexpr std::size_t kFileRows = 10000;
constexpr std::size_t kDeterminismTranscripts = 25;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::shared_ptr<const Package> penguins() {
  static const auto pkg = std::make_shared<const Package>(load_package(testing::data_dir() / "packages/penguins"));
  return pkg;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  return json::parse(in);
}

std::size_t count_true(const std::vector<bool>& mask) { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true)); }

// --- penguins walkthrough ---------------------------------------------------------------------

Outcome penguins_transcript() {
  const auto path = testing::data_dir() / "transcripts/penguins.json";
  const auto transcript = load_transcript(path);
  const auto prompts = static_cast<std::size_t>(std::count_if(transcript.steps.begin(), transcript.steps.end(),
                                                              [](const TranscriptStep& s) { return s.message.has_value(); }));

  const auto started = std::chrono::steady_clock::now();
  const auto first = replay(transcript);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  const auto second = replay(transcript);

  // Independent tally straight from the CSV text.
  const auto raw = testing::read_raw_csv(testing::data_dir() / "packages/penguins/penguins.csv");
  const auto species = testing::tally(raw, "species");
  const std::size_t expected_after_removal = raw.rows.size() - species.at("Gentoo");

  std::optional<std::size_t> after_removal;
  for (const auto& step : first.steps) {
    if (step.label.find("remove Gentoo") != std::string::npos) after_removal = step.counts.at("penguins");
  }
  const std::size_t status_count = first.steps.back().counts.at("penguins");
  const std::size_t download_rows = first.last_download ? csv::parse(*first.last_download).rows.size() : 0;
  const bool identical = first.snapshot.dump() == second.snapshot.dump() && first.last_download == second.last_download &&
                         first.digest == second.digest;

  std::ostringstream d;
  d << "prompts=" << prompts << " after_remove_gentoo=" << (after_removal ? std::to_string(*after_removal) : "none")
    << " oracle=" << raw.rows.size() << "-" << species.at("Gentoo") << "=" << expected_after_removal
    << " download_rows=" << download_rows << " status=" << status_count << " replay=" << seconds << "s"
    << " identical=" << (identical ? "yes" : "no") << " digest_pinned=" << (first.digest_matches ? "yes" : "no");
  const bool pass = prompts == kPenguinPrompts && after_removal == expected_after_removal && first.last_download &&
                    download_rows == status_count && seconds < kReplayBudgetSeconds && identical &&
                    first.digest_matches && first.expectations_met;
  return {pass, d.str()};
}

Outcome penguins_load() {
  const auto& pkg = *penguins();
  const std::size_t fields = pkg.entities.empty() ? 0 : pkg.entities[0].fields.size();
  const std::size_t rows = pkg.entities.empty() ? 0 : pkg.entities[0].row_count();
  std::ostringstream d;
  d << "entities=" << pkg.entities.size() << " fields=" << fields << " rows=" << rows;
  return {pkg.entities.size() == 1 && fields == kPenguinFields && rows == kPenguinRows, d.str()};
}

// --- cross-entity linking vs nested-loop oracle ---------------------------------------------

Outcome linking_oracle() {
  std::mt19937_64 rng(20261017);
  std::size_t checks = 0, matches = 0, trials = 0;
  std::string first_miss;
  while (trials < kLinkTrials) {
    testing::TempDir dir;
    const auto pkg = load_package(testing::write_package(dir.path(), "portal", testing::portal_tables(rng, kLinkMaxRows)));
    for (int local = 0; local < 10 && trials < kLinkTrials; ++local, ++trials) {
      SelectionRegistry reg;
      const int n = std::uniform_int_distribution<int>(1, 3)(rng);
      for (int i = 0; i < n; ++i) {
        auto s = testing::random_selection(rng, pkg, "s" + std::to_string(i));
        reg[s.name] = s;
      }
      for (auto mode : {LinkMode::any, LinkMode::all}) {
        const auto counts = entity_counts(pkg, reg, mode);
        for (const auto& e : pkg.entities) {
          const auto oracle = testing::oracle_survivors(pkg, reg, e.name, mode);
          std::vector<Key> expected_keys;
          const auto pk = e.columns_of(e.primary_key);
          for (std::size_t r = 0; r < e.row_count(); ++r) {
            if (oracle[r]) expected_keys.push_back(e.key_of(r, pk));
          }
          const auto spec = inject_filters(parse_spec(json{{"source", {{{"alias", "e"}, {"entity", e.name}}}}}), reg, pkg, mode);
          const auto result = execute(spec, pkg, reg);
          auto got_keys = result.provenance.value_or(std::vector<Key>{});
          auto by_key = [](const Key& a, const Key& b) { return compare_keys(a, b) < 0; };
          std::sort(got_keys.begin(), got_keys.end(), by_key);
          std::sort(expected_keys.begin(), expected_keys.end(), by_key);
          const bool count_ok = counts.at(e.name) == expected_keys.size();
          const bool rows_ok = got_keys == expected_keys;
          checks += 2;
          matches += count_ok + rows_ok;
          if ((!count_ok || !rows_ok) && first_miss.empty()) {
            first_miss = " first_miss=trial" + std::to_string(trials) + "/" + e.name + "/" + std::string(to_string(mode));
          }
        }
      }
    }
  }
  std::ostringstream d;
  d << "trials=" << trials << " checks=" << checks << " matched=" << matches << " (" << std::fixed;
  d.precision(1);
  d << 100.0 * static_cast<double>(matches) / static_cast<double>(checks) << "%)" << first_miss;
  return {trials == kLinkTrials && matches == checks, d.str()};
}

// --- brush rule -----------------------------------------------------------------------------

Outcome brush_rule() {
  const auto cases = testing::brush_cases();
  std::size_t correct = 0;
  std::string misses;
  for (const auto& c : cases) {
    const auto spec = parse_spec(c.spec);
    const bool valid = validate_spec(spec, *penguins()).empty();
    const auto brush = derive_brush(spec);
    const bool ok = valid && (c.geometry ? brush && brush->geometry == *c.geometry && brush->fields == c.fields : !brush);
    if (ok) ++correct;
    else misses += " miss=\"" + c.label + "\"";
  }
  return {cases.size() == kBrushCases && correct == kBrushCases,
          std::to_string(correct) + "/" + std::to_string(cases.size()) + misses};
}

// --- filter algebra -------------------------------------------------------------------------

Outcome filter_properties() {
  const auto tallies = testing::run_filter_properties(424242, kPropertyCases);
  bool pass = tallies.size() == 5;
  std::ostringstream d;
  for (const auto& t : tallies) {
    pass = pass && t.cases >= kPropertyCases && t.failures == 0;
    d << t.name << "=" << (t.cases - t.failures) << "/" << t.cases << " ";
    if (t.failures) d << "(" << t.first_failure << ") ";
  }
  return {pass, d.str()};
}

// --- malformed agent output -----------------------------------------------------------------

Outcome malformed_outputs() {
  const auto cases = read_json(testing::fixture_dir() / "agent_outputs/malformed.json");
  const std::string bar_message = "count by sex";
  auto backend = std::make_shared<ScriptedBackend>();
  backend->add("orchestrator", bar_message, {R"({"wants_filter": false, "wants_viz": true, "reply": "Counts by sex."})"});
  backend->add("visualization", bar_message, {read_json(testing::fixture_dir() / "specs/valid/sex_counts.json").dump()});
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    const std::string message = "case " + std::to_string(i);
    const auto agent = c["agent"].get<std::string>();
    const auto raw = c["raw"].get<std::string>();
    if (agent == "orchestrator") {
      backend->add("orchestrator", message, {raw, raw});
    } else {
      const json route{{"wants_filter", agent == "filter"}, {"wants_viz", agent == "visualization"}, {"reply", "ok"}};
      backend->add("orchestrator", message, {route.dump()});
      backend->add(agent, message, {raw, raw});
    }
  }

  testing::TempDir dir;
  ServiceOptions options;
  options.snapshot_dir = dir.path();
  Service service(penguins(), backend, options);
  auto call = [&](std::string method, std::string path, const json& body = nullptr) {
    return service.dispatch(Request{std::move(method), std::move(path), {}, body.is_null() ? "" : body.dump()});
  };
  const auto created = json::parse(call("POST", "/sessions").body);
  const auto id = created["id"].get<std::string>();
  const std::string base = "/sessions/" + id;
  call("POST", base + "/chat", {{"text", bar_message}});
  call("POST", base + "/viz/viz-1/brush", {{"version", 1}, {"payload", {{"values", {{"female"}}}}}});
  const auto snapshot_file = dir.path() / (id + ".json");
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };

  std::size_t rejected = 0;
  std::string misses;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto before_state = call("GET", base + "/state").body;
    const auto before_file = slurp(snapshot_file);
    const auto r = call("POST", base + "/chat", {{"text", "case " + std::to_string(i)}});
    const auto body = json::parse(r.body);
    const bool refused = r.status == 422 && body.value("code", "") == "SchemaViolation" && body["attempts"].size() == 2;
    const bool untouched = call("GET", base + "/state").body == before_state && slurp(snapshot_file) == before_file;
    if (refused && untouched) ++rejected;
    else misses += " miss=\"" + cases[i]["label"].get<std::string>() + "\"(" + std::to_string(r.status) + ")";
  }
  const bool state_ok = json::parse(call("GET", base + "/state").body)["version"] == 2;
  return {cases.size() >= kMinMalformed && rejected == cases.size() && state_ok,
          std::to_string(rejected) + "/" + std::to_string(cases.size()) + " rejected without mutation" + misses};
}

// --- largest file, then widen --------------------------------------------------------------

Outcome largest_files() {
  std::mt19937_64 rng(4);
  testing::TempDir dir;
  const auto descriptor = testing::write_package(dir.path(), "files", testing::file_tables(rng, kFileRows));
  const auto pkg = std::make_shared<const Package>(load_package(descriptor));

  const auto raw = testing::read_raw_csv(dir.path() / "files.csv");
  const auto size_col = raw.column("size");
  std::vector<long long> sizes;
  for (const auto& row : raw.rows) sizes.push_back(std::stoll(row[size_col]));
  std::sort(sizes.begin(), sizes.end(), std::greater<>());

  // A filter agent reads the upper bound from the data description.
  const auto context = build_context(*pkg);
  const auto* field = context.find_field("files", "size");
  const std::string message = "Filter to the largest file";
  ScriptedBackend backend;
  backend.add("orchestrator", message, {R"({"wants_filter": true, "wants_viz": true, "reply": "The largest file."})"});
  backend.add("filter", message,
              {json{{"filters", {{{"entity", "files"}, {"field", "size"}, {"kind", "interval"}, {"min", *field->max}}}}}.dump()});
  backend.add("visualization", message,
              {R"({"source": [{"alias": "f", "entity": "files"}],
                   "transformation": [{"orderby": {"field": "size", "direction": "desc"}}]})"});

  auto state = new_session("files", pkg);
  state = apply_chat_turn(state, run_pipeline(backend, context, *pkg, message)).state;
  const auto total_spec = inject_filters(
      parse_spec(json{{"source", {{{"alias", "f"}, {"entity", "files"}}}},
                      {"transformation", {{{"rollup", {{"out", "total"}, {"op", "sum"}, {"field", "size"}}}}}}}),
      state.registry, *pkg);

  std::ostringstream d;
  bool pass = true;
  auto check_top = [&](std::size_t k) {
    const double threshold = static_cast<double>(sizes[k - 1]);
    std::size_t expected_rows = 0;
    long long expected_sum = 0;
    for (auto s : sizes) {
      if (static_cast<double>(s) >= threshold) {
        ++expected_rows;
        expected_sum += s;
      }
    }
    const auto table = execute(state.dashboard[0].spec, *pkg, state.registry);
    const auto total = execute(inject_filters(total_spec, state.registry, *pkg), *pkg, state.registry);
    const double got_sum = std::get<double>(total.rows.at(0).at(0));
    const auto size_index = *table.column_index("size");
    bool ordered = table.rows.size() == expected_rows;
    for (std::size_t i = 0; ordered && i < table.rows.size(); ++i) {
      ordered = std::get<double>(table.rows[i][size_index]) == static_cast<double>(sizes[i]);
    }
    const bool ok = ordered && got_sum == static_cast<double>(expected_sum) &&
                    entity_counts(*pkg, state.registry).at("files") == expected_rows;
    pass = pass && ok;
    d << "top" << k << ": sum=" << static_cast<long long>(got_sum) << " oracle=" << expected_sum
      << (ok ? " ok; " : " MISMATCH; ");
  };

  check_top(1);
  for (std::size_t k : {10u, 100u, 1000u}) {
    const auto name = state.registry.begin()->first;
    Payload widened = std::map<std::string, Interval>{{"size", {static_cast<double>(sizes[k - 1]), std::nullopt}}};
    state = apply_action(state, AdjustFilter{name, widened, std::nullopt, std::nullopt}).state;
    check_top(k);
  }
  d << "max=" << sizes[0] << " rows=" << sizes.size();
  return {pass && sizes.size() == kFileRows, d.str()};
}

// --- determinism over generated transcripts --------------------------------------------------

json random_transcript(std::mt19937_64& rng, std::size_t index) {
  std::vector<json> specs;
  for (const auto& entry : fs::directory_iterator(testing::fixture_dir() / "specs/valid")) specs.push_back(read_json(entry.path()));
  std::sort(specs.begin(), specs.end(), [](const json& a, const json& b) { return a.dump() < b.dump(); });

  auto state = new_session("gen", penguins());
  const auto context = build_context(*penguins());
  json steps = json::array();
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  const std::size_t length = 6 + pick(10);
  for (std::size_t attempt = 0; steps.size() < length && attempt < 200; ++attempt) {
    json step;
    try {
      switch (pick(6)) {
        case 0: {  // chat creating a chart
          const std::string message = "chart " + std::to_string(index) + "-" + std::to_string(attempt);
          step = {{"chat", message},
                  {"outputs",
                   {{"orchestrator", {{"wants_filter", false}, {"wants_viz", true}, {"reply", "Here it is."}}},
                    {"visualization", specs[pick(specs.size())]}}}};
          ScriptedBackend b;
          for (const auto& [agent, out] : step["outputs"].items()) b.add(agent, message, {out.dump()});
          state = apply_chat_turn(state, run_pipeline(b, context, *penguins(), message)).state;
          break;
        }
        case 1:
        case 2: {  // brush a chart with a random payload on its own brush fields
          if (state.dashboard.empty()) continue;
          const auto& viz = state.dashboard[pick(state.dashboard.size())];
          if (!viz.brush) continue;
          Payload payload;
          if (viz.brush->brush.kind() == SelectionKind::interval) {
            std::map<std::string, Interval> ranges;
            for (const auto& f : viz.brush->brush.fields) {
              const auto dom = field_domain(penguins()->entity("penguins"), f);
              const double lo = *dom.min + (*dom.max - *dom.min) * std::uniform_real_distribution<double>(0, 0.5)(rng);
              ranges[f] = {std::round(lo), std::round(lo + (*dom.max - *dom.min) * 0.5)};
            }
            payload = ranges;
          } else {
            std::vector<Key> keys;
            const auto& table = penguins()->entity("penguins");
            const auto cols = table.columns_of(viz.brush->brush.fields);
            for (int i = 0; i < 2; ++i) keys.push_back(table.key_of(pick(table.row_count()), cols));
            payload = keys;
          }
          const Action a = Brush{viz.viz_id, payload};
          state = apply_action(state, a).state;
          step = {{"action", to_json(a)}};
          break;
        }
        case 3: {  // agent-style filter
          auto sel = testing::random_selection(rng, *penguins(), "");
          const Action a = CreateFilter{sel};
          state = apply_action(state, a).state;
          step = {{"action", to_json(a)}};
          break;
        }
        case 4: {  // drop a filter or clear a brush
          if (state.registry.empty()) continue;
          auto it = state.registry.begin();
          std::advance(it, static_cast<long>(pick(state.registry.size())));
          const Action a = RemoveFilter{it->first};
          state = apply_action(state, a).state;
          step = {{"action", to_json(a)}};
          break;
        }
        default: {
          const Action a = Download{"penguins"};
          state = apply_action(state, a).state;
          step = {{"action", to_json(a)}};
        }
      }
    } catch (const Error&) {
      continue;  // generated action not applicable here; draw another
    }
    step["expect_counts"] = entity_counts(*penguins(), state.registry);
    steps.push_back(step);
  }
  return {{"format", "vizlink-transcript"},
          {"version", 1},
          {"package", "packages/penguins"},
          {"session_id", "gen-" + std::to_string(index)},
          {"expected_digest", snapshot_digest(snapshot(state))},
          {"steps", steps}};
}

Outcome determinism() {
  std::mt19937_64 rng(99);
  std::size_t stable = 0, total = 0, steps = 0;
  std::string misses;
  auto run = [&](const Transcript& t, const std::string& label) {
    ++total;
    const auto a = replay(t);
    const auto b = replay(t);
    steps += a.steps.size();
    if (a.digest == b.digest && a.digest_matches && a.expectations_met) ++stable;
    else misses += " miss=" + label;
  };
  run(load_transcript(testing::data_dir() / "transcripts/penguins.json"), "penguins");
  for (std::size_t i = 0; i < kDeterminismTranscripts; ++i) {
    run(parse_transcript(random_transcript(rng, i), testing::data_dir()), "gen-" + std::to_string(i));
  }
  return {stable == total, std::to_string(stable) + "/" + std::to_string(total) + " transcripts (" +
                               std::to_string(steps) + " steps) gave identical digests" + misses};
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"A1", "penguins golden transcript", penguins_transcript},
      {"A2", "penguins package load", penguins_load},
      {"A3", "cross-entity linking vs nested-loop oracle", linking_oracle},
      {"A4", "brush rule table", brush_rule},
      {"A5", "filter algebra properties", filter_properties},
      {"A6", "malformed agent outputs rejected", malformed_outputs},
      {"A7", "largest file then widen", largest_files},
      {"A8", "replay determinism", determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto started = std::chrono::steady_clock::now();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    failures += !o.pass;
    std::printf("%s %s %s | %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), seconds);
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failures), criteria.size());
  return failures == 0 ? 0 : 1;
}
