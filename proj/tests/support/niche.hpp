#pragma once

// The three-niche synthetic benchmark from fixtures/niche.

#include <string>

#include "stratinv/invention.hpp"

namespace stratinv::testing {

inline std::string niche_dir() { return std::string(STRATINV_FIXTURES) + "/niche"; }

inline Landscape niche_landscape() { return Landscape::from_file(niche_dir() + "/landscape.json"); }

inline CampaignConfig niche_config(std::uint64_t seed = 7) {
  CampaignConfig c;
  c.space = load_space_file(niche_dir() + "/space.json");
  c.initial_strategies = load_strategies_file(c.space, niche_dir() + "/strategies.json");
  for (const auto& id : niche_landscape().problems()) c.problems.push_back(Problem{id, ""});
  c.T_limit_s = 60;
  c.tuner.t_limit_s = 30;
  c.tuner.eval_budget = 60;
  c.tuner.rng_seed = seed;
  c.wall_budget_s = 1e6;
  c.variant = "fof";
  c.workers = 4;
  return c;
}

// Problems some strategy of the space solves within `limit`: every rule of
// the fixture is satisfiable, so this is every problem with a solvable rule.
inline std::size_t niche_solvable(double limit) {
  std::size_t n = 0;
  const auto doc = parse_json_file(niche_dir() + "/landscape.json");
  for (const auto& [id, rules] : doc["problems"].items()) {
    for (const auto& r : rules) {
      if (r.value("solvable", true) && r.value("runtime_s", 0.0) <= limit) {
        ++n;
        break;
      }
    }
  }
  return n;
}

}  // namespace stratinv::testing
