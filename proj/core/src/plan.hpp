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

#include <cstddef>
#include <variant>
#include <vector>

#include "vizlink/grammar.hpp"

namespace vizlink::detail {

// Transforms regrouped into execution steps. A groupby is consumed by the run of rollups
// (or the single cdf) that follows it; otherwise it yields the distinct key rows.

struct GroupAggregate {
  std::vector<std::string> keys;
  std::vector<Rollup> rollups;
};
struct WholeAggregate {
  std::vector<Rollup> rollups;
};
struct GroupDistinct {
  std::vector<std::string> keys;
};
struct PartitionedCdf {
  std::vector<std::string> keys;  // empty for a plain cdf
  Cdf cdf;
};

using StepBody = std::variant<SelectionFilter, PredicateFilter, GroupAggregate, WholeAggregate, GroupDistinct,
                              PartitionedCdf, Join, Orderby>;

struct Step {
  std::size_t first;  // index of the first transform in the step
  std::size_t count;
  StepBody body;
};

inline std::vector<Step> plan_transforms(const std::vector<Transform>& transforms) {
  std::vector<Step> steps;
  std::size_t i = 0;
  auto collect_rollups = [&](std::size_t from) {
    std::vector<Rollup> out;
    while (from < transforms.size() && std::holds_alternative<Rollup>(transforms[from])) {
      out.push_back(std::get<Rollup>(transforms[from]));
      ++from;
    }
    return out;
  };
  while (i < transforms.size()) {
    const auto& t = transforms[i];
    if (const auto* g = std::get_if<Groupby>(&t)) {
      if (i + 1 < transforms.size() && std::holds_alternative<Rollup>(transforms[i + 1])) {
        auto rollups = collect_rollups(i + 1);
        std::size_t n = 1 + rollups.size();
        steps.push_back({i, n, GroupAggregate{g->fields, std::move(rollups)}});
        i += n;
      } else if (i + 1 < transforms.size() && std::holds_alternative<Cdf>(transforms[i + 1])) {
        steps.push_back({i, 2, PartitionedCdf{g->fields, std::get<Cdf>(transforms[i + 1])}});
        i += 2;
      } else {
        steps.push_back({i, 1, GroupDistinct{g->fields}});
        ++i;
      }
    } else if (std::holds_alternative<Rollup>(t)) {
      auto rollups = collect_rollups(i);
      std::size_t n = rollups.size();
      steps.push_back({i, n, WholeAggregate{std::move(rollups)}});
      i += n;
    } else if (const auto* c = std::get_if<Cdf>(&t)) {
      steps.push_back({i, 1, PartitionedCdf{{}, *c}});
      ++i;
    } else if (const auto* f = std::get_if<SelectionFilter>(&t)) {
      steps.push_back({i, 1, *f});
      ++i;
    } else if (const auto* p = std::get_if<PredicateFilter>(&t)) {
      steps.push_back({i, 1, *p});
      ++i;
    } else if (const auto* j = std::get_if<Join>(&t)) {
      steps.push_back({i, 1, *j});
      ++i;
    } else {
      steps.push_back({i, 1, std::get<Orderby>(t)});
      ++i;
    }
  }
  return steps;
}

}  // namespace vizlink::detail
