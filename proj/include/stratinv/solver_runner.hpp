#pragma once

// Runs solver invocations: real external processes under a wall-clock limit,
// or lookups in a synthetic landscape that stands in for a solver.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stratinv/strategy_space.hpp"
#include "stratinv/util.hpp"

namespace stratinv {

enum class Verdict { solved, unsolved, timeout, error };

std::string_view to_string(Verdict v);
Verdict verdict_from_string(std::string_view s);

struct Problem {
  std::string id;
  std::filesystem::path path;

  bool operator==(const Problem&) const = default;
};

struct SolverConfig {
  // Placeholders: {problem}, {strategy_options}, {timeout_s}. A token that is
  // exactly {strategy_options} expands to one token per option.
  std::vector<std::string> command_template;
  std::vector<std::string> success_patterns;  // ECMAScript regex, searched in output
  std::vector<std::string> failure_patterns;
  std::filesystem::path working_dir;
  double grace_period_s = 1.0;
  bool cpu_limit = false;  // also set RLIMIT_CPU to the task limit
  std::optional<std::size_t> memory_limit_mb;
  std::optional<std::filesystem::path> raw_log_dir;

  // Throws ValidationError.
  void validate() const;
  static SolverConfig from_json(const json& document);
};

struct Task {
  std::string problem_id;
  std::filesystem::path problem_path;
  std::string strategy_key;
  std::vector<std::string> strategy_tokens;
  double limit_s = 0.0;
  std::string variant;
};

struct EvalOutcome {
  std::string problem_id;
  std::string strategy_key;
  std::string variant;
  double limit_s = 0.0;
  Verdict verdict = Verdict::error;
  double runtime_s = 0.0;
  std::string raw_status;

  bool operator==(const EvalOutcome&) const = default;
};

// One outcome-log line: {problem, strategy, variant, limit_s, verdict, runtime_s, status}.
json outcome_to_json(const EvalOutcome& o);
EvalOutcome outcome_from_json(const json& j);

EvalOutcome run_task(const SolverConfig& config, const Task& task);

// Outcomes come back in task order. At most `workers` processes run at once.
std::vector<EvalOutcome> run_batch(const SolverConfig& config, std::span<const Task> tasks,
                                   std::size_t workers);

// ---------------------------------------------------------------------------
// Synthetic landscape

struct LandscapeRule {
  // Conjunction over parameter names; each entry lists accepted values.
  // A condition on an inactive parameter never matches.
  std::map<std::string, std::vector<std::string>> when;
  std::optional<std::string> variant;
  bool solvable = true;
  double runtime_s = 0.0;

  bool operator==(const LandscapeRule&) const = default;
};

class Landscape {
 public:
  Landscape() = default;

  // {"default": {"solvable": false, "runtime_s": 1},
  //  "problems": {"p1": [{"when": {"a": ["on"]}, "runtime_s": 5}, ...]}}
  static Landscape from_json(const json& document);
  static Landscape from_file(const std::filesystem::path& path);
  json to_json() const;

  void add_rule(const std::string& problem, LandscapeRule rule);
  void set_default(bool solvable, double runtime_s);

  // First matching rule of the problem, else the default.
  std::pair<bool, double> lookup(const std::string& problem, const std::string& variant,
                                 const Strategy& strategy) const;

  std::vector<std::string> problems() const;

 private:
  std::map<std::string, std::vector<LandscapeRule>> rules_;
  bool default_solvable_ = false;
  double default_runtime_s_ = 0.0;
};

EvalOutcome run_synthetic(const Landscape& landscape, const Task& task, const Strategy& strategy);

// ---------------------------------------------------------------------------
// Solver: what the evaluation, tuning and invention layers talk to.

struct Request {
  const Strategy* strategy = nullptr;
  const Problem* problem = nullptr;
  std::string variant;
  double limit_s = 0.0;
};

class Solver {
 public:
  virtual ~Solver() = default;

  virtual std::vector<EvalOutcome> run(std::span<const Request> requests) = 0;
  // Seconds consumed so far; the campaign and tuner budgets are measured on this clock.
  virtual double elapsed_s() const = 0;

  std::size_t invocations() const { return invocations_; }

 protected:
  std::size_t invocations_ = 0;
};

class ExternalSolver : public Solver {
 public:
  ExternalSolver(SolverConfig config, std::size_t workers);
  std::vector<EvalOutcome> run(std::span<const Request> requests) override;
  double elapsed_s() const override;

 private:
  SolverConfig config_;
  std::size_t workers_;
  std::chrono::steady_clock::time_point start_;
};

// Deterministic. Time advances virtually by the charged runtimes spread over
// `workers`, so budgets behave the same on every machine.
class SyntheticSolver : public Solver {
 public:
  explicit SyntheticSolver(Landscape landscape, std::size_t workers = 1);
  std::vector<EvalOutcome> run(std::span<const Request> requests) override;
  double elapsed_s() const override { return virtual_time_s_; }
  const Landscape& landscape() const { return landscape_; }

 private:
  Landscape landscape_;
  std::size_t workers_;
  double virtual_time_s_ = 0.0;
};

}  // namespace stratinv
