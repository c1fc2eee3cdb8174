#pragma once

// Specialization of a seed strategy on a problem set: budgeted iterated local
// search over the strategy space with a lexicographic (solved, time) objective.

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "stratinv/solver_runner.hpp"
#include "stratinv/strategy_space.hpp"

namespace stratinv {

struct Objective {
  std::size_t solved = 0;
  double total_time_s = 0.0;  // over solved problems only

  // Greater is better: more solved, then less time.
  std::partial_ordering operator<=>(const Objective& o) const {
    if (solved != o.solved) return solved <=> o.solved;
    return o.total_time_s <=> total_time_s;
  }
  bool operator==(const Objective&) const = default;
};

struct TunerConfig {
  double t_limit_s = 0.0;
  std::size_t eval_budget = 500;
  std::optional<double> wall_budget_s;
  std::size_t perturb_strength = 3;
  double restart_prob = 0.01;
  std::uint64_t rng_seed = 0;
  std::size_t workers = 1;
  std::string variant;

  void validate() const;
  // Missing fields keep the values of `base`.
  static TunerConfig from_json(const json& document, TunerConfig base);
  static TunerConfig from_json(const json& document);
  json to_json() const;
};

struct TraceEntry {
  std::size_t iteration = 0;
  std::string canonical_key;
  Objective objective;
  bool accepted = false;  // became the new best-so-far
};

json trace_entry_to_json(const TraceEntry& e);

// One tuning session: scores are memoized by canonical key and the budget
// counts distinct keys.
class TuningSession {
 public:
  TuningSession(const TunerConfig& config, std::span<const Problem> problems, Solver& solver);

  // nullopt once the budget is spent and the key has not been scored before.
  std::optional<Objective> score(const Strategy& s);
  bool exhausted() const;
  std::size_t evaluations() const { return scores_.size(); }

  const TunerConfig& config() const { return config_; }
  std::mt19937_64& rng() { return rng_; }

  void set_iteration(std::size_t i) { iteration_ = i; }
  const std::vector<TraceEntry>& trace() const { return trace_; }
  // First strategy reaching the best objective seen so far.
  const std::optional<Strategy>& best() const { return best_strategy_; }
  const std::optional<Objective>& best_objective() const { return best_; }

 private:
  TunerConfig config_;
  std::span<const Problem> problems_;
  Solver& solver_;
  double start_elapsed_s_ = 0.0;
  std::mt19937_64 rng_;
  std::map<std::string, Objective> scores_;
  std::size_t iteration_ = 0;
  std::vector<TraceEntry> trace_;
  std::optional<Objective> best_;
  std::optional<Strategy> best_strategy_;
};

// Standalone scoring at config.t_limit_s. Throws ValidationError on empty problems.
Objective score(const Strategy& s, std::span<const Problem> problems, const TunerConfig& config,
                Solver& solver);

// First-improvement hill climbing.
Strategy local_search(const Strategy& start, std::span<const Problem> problems,
                      const TunerConfig& config, Solver& solver);
Strategy local_search(const Strategy& start, TuningSession& session);

struct TuneResult {
  Strategy best;
  std::optional<Objective> objective;  // nullopt when nothing could be scored
  std::size_t evaluations = 0;
  std::vector<TraceEntry> trace;
};

TuneResult tune(const Strategy& seed, std::span<const Problem> problems,
                const TunerConfig& config, Solver& solver);

// Seam for plugging in a different tuner.
using TuneFunction = std::function<TuneResult(const Strategy&, std::span<const Problem>,
                                              const TunerConfig&, Solver&)>;

void write_trace(const std::filesystem::path& path, std::span<const TraceEntry> trace);

}  // namespace stratinv
