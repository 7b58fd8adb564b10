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

#include <random>

#include <benchmark/benchmark.h>

#include "oracle.hpp"
#include "support.hpp"
#include "vizlink/linking.hpp"
#include "vizlink/service.hpp"

namespace vizlink {
namespace {

using nlohmann::json;

/// Synthetic donors/samples/datasets package with a fixed registry of three selections.
class PortalBenchmark : public benchmark::Fixture {
 protected:
  void SetUp(const benchmark::State& state) override {
    std::mt19937_64 rng(static_cast<std::uint64_t>(state.range(0)));
    dir_ = std::make_unique<testing::TempDir>();
    package_ = load_package(
        testing::write_package(dir_->path(), "portal", testing::portal_tables(rng, static_cast<std::size_t>(state.range(0)))));
    registry_.clear();
    for (int i = 0; i < 3; ++i) {
      auto s = testing::random_selection(rng, package_, "s" + std::to_string(i));
      registry_[s.name] = s;
    }
  }
  void TearDown(const benchmark::State&) override { dir_.reset(); }

  std::unique_ptr<testing::TempDir> dir_;
  Package package_;
  SelectionRegistry registry_;
};

BENCHMARK_DEFINE_F(PortalBenchmark, EntityCounts)(benchmark::State& state) {
  const auto mode = state.range(1) ? LinkMode::all : LinkMode::any;
  for (auto _ : state) benchmark::DoNotOptimize(entity_counts(package_, registry_, mode));
}
BENCHMARK_REGISTER_F(PortalBenchmark, EntityCounts)->ArgsProduct({{100, 500, 2000}, {0, 1}});

BENCHMARK_DEFINE_F(PortalBenchmark, InjectAndExecute)(benchmark::State& state) {
  const auto spec = parse_spec(json{{"source", {{{"alias", "s"}, {"entity", "samples"}}}},
                                    {"transformation",
                                     {{{"groupby", {{"fields", {"organ"}}}}},
                                      {{"rollup", {{"out", "total"}, {"op", "sum"}, {"field", "mass"}}}}}}});
  for (auto _ : state) benchmark::DoNotOptimize(execute(inject_filters(spec, registry_, package_), package_, registry_));
}
BENCHMARK_REGISTER_F(PortalBenchmark, InjectAndExecute)->Args({100, 0})->Args({500, 0})->Args({2000, 0});

void BM_LargestFiles(benchmark::State& state) {
  std::mt19937_64 rng(4);
  testing::TempDir dir;
  const auto pkg = load_package(
      testing::write_package(dir.path(), "files", testing::file_tables(rng, static_cast<std::size_t>(state.range(0)))));
  SelectionRegistry reg{{"big", {"big", SelectionKind::interval, "files", {"size"}, {}, {{100000.0, std::nullopt}}}}};
  const auto spec = inject_filters(
      parse_spec(json{{"source", {{{"alias", "f"}, {"entity", "files"}}}},
                      {"transformation", {{{"orderby", {{"field", "size"}, {"direction", "desc"}}}}}}}),
      reg, pkg);
  for (auto _ : state) benchmark::DoNotOptimize(execute(spec, pkg, reg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LargestFiles)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_LoadPenguins(benchmark::State& state) {
  const auto path = testing::data_dir() / "packages/penguins";
  for (auto _ : state) benchmark::DoNotOptimize(load_package(path));
}
BENCHMARK(BM_LoadPenguins);

void BM_ReplayPenguins(benchmark::State& state) {
  const auto transcript = load_transcript(testing::data_dir() / "transcripts/penguins.json");
  const auto pkg = std::make_shared<const Package>(load_package(transcript.package_path));
  for (auto _ : state) benchmark::DoNotOptimize(replay(transcript, pkg).digest);
}
BENCHMARK(BM_ReplayPenguins)->Unit(benchmark::kMillisecond);

void BM_SnapshotDigest(benchmark::State& state) {
  const auto transcript = load_transcript(testing::data_dir() / "transcripts/penguins.json");
  const auto snap = replay(transcript).snapshot;
  for (auto _ : state) benchmark::DoNotOptimize(snapshot_digest(snap));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(snap.dump().size()));
}
BENCHMARK(BM_SnapshotDigest);

}  // namespace
}  // namespace vizlink

BENCHMARK_MAIN();
